// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use conjleak::config::{DataSource, ExperimentConfig};
use conjleak::formats;
use conjleak::instance::{build_instance, InstanceSpec};
use conjleak::runner::{self, Axis};
use conjleak_core::corpus::{extract_universe, synthesize_corpus, RawDocument};
use conjleak_core::metrics::score;
use conjleak_core::querygen::QuerySetting;
use conjleak_core::rng::derive_seed;

/// Leakage-abuse attacks on conjunctive searchable encryption: corpus and
/// workload synthesis, attack simulation and scoring.
#[derive(Parser)]
#[command(name = "conjleak", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file of `dotted.key = value` lines.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable, applied after the file.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(p) = &self.config {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            cfg.apply_text(&text).with_context(|| format!("in {}", p.display()))?;
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').with_context(|| format!("--set {kv}: expected KEY=VALUE"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Write corpus, keyword universe and frequency table.
    Gen {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run every repeat and print one record line per repeat.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Write the records here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Save trace, ledger and mappings of each repeat for `score`.
        #[arg(long)]
        artifacts: Option<PathBuf>,
    },
    /// Run a Cartesian grid of configurations and write the aggregated CSV.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Grid axis `key=v1,v2,...`; repeatable.
        #[arg(short, long = "axis", value_name = "KEY=V1,V2")]
        axis: Vec<String>,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also write every run record, one line each.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Re-score a saved trace and attack output.
    Score {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        ledger: PathBuf,
        #[arg(long)]
        sterm: PathBuf,
        #[arg(long)]
        mapping: PathBuf,
        /// `d` for a separate setting, or comma-separated P_d for hybrid.
        #[arg(long, default_value = "2")]
        setting: String,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    let p = dir.join(name);
    fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
}

fn cmd_gen(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let (raw, universe, model) = match &cfg.data {
        DataSource::Constructed => {
            let inst = build_instance(&InstanceSpec { n: cfg.n, ..InstanceSpec::default() }, cfg.seed)?;
            let mut tokens = vec![Vec::new(); inst.index.n_docs()];
            for (k, posting) in inst.index.postings().iter().enumerate() {
                for &d in posting {
                    tokens[d as usize].push(inst.universe.keyword(k as u32).to_owned());
                }
            }
            let raw: Vec<RawDocument> = inst.index.doc_ids().iter().zip(tokens).map(|(&doc_id, tokens)| RawDocument { doc_id, tokens }).collect();
            (raw, inst.universe, Some(inst.model))
        }
        source => {
            let raw = match source {
                DataSource::File(p) => formats::read_corpus(p)?,
                DataSource::Synthetic(spec) => synthesize_corpus(spec, derive_seed(cfg.seed, "corpus", 0))?,
                DataSource::Constructed => unreachable!(),
            };
            let (_, universe) = extract_universe(&raw, cfg.n)?;
            (raw, universe, None)
        }
    };
    let model = match model {
        Some(m) => m,
        None => conjleak_core::freqmodel::gen_synthetic_frequencies(cfg.n, 2, cfg.freq_zipf, derive_seed(cfg.seed, "frequencies", 0))?,
    };
    let model = runner::extend_model(&model, cfg)?;
    write_file(out, "corpus.txt", &formats::write_corpus_lines(&raw))?;
    write_file(out, "universe.txt", &formats::write_universe(&universe))?;
    write_file(out, "frequencies.txt", &formats::write_frequencies(&model, &universe))?;
    write_file(out, "config.txt", &cfg.to_text())?;
    eprintln!("wrote {} documents, {} keywords, {} frequency entries to {}", raw.len(), universe.n(), model.len(), out.display());
    Ok(())
}

fn cmd_run(cfg: &ExperimentConfig, out: Option<&Path>, artifacts: Option<&Path>) -> Result<()> {
    use rayon::prelude::*;
    if let Some(dir) = artifacts {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let runs: Vec<_> = (0..cfg.repeat).into_par_iter().map(|r| runner::run_repeat(cfg, r)).collect();
    let mut text = String::new();
    for (record, arts) in &runs {
        text += &formats::write_record_line(&record.key_values(cfg));
        if let (Some(dir), Some(a)) = (artifacts, arts) {
            let r = record.repeat;
            write_file(dir, &format!("workload_{r}.txt"), &formats::write_workload(&a.workload))?;
            write_file(dir, &format!("trace_{r}.txt"), &formats::write_trace(&a.trace))?;
            write_file(dir, &format!("ledger_{r}.txt"), &formats::write_ledger(&a.ledger))?;
            write_file(dir, &format!("sterm_{r}.txt"), &formats::write_sterm_mapping(&a.attack.sterm))?;
            write_file(dir, &format!("mapping_{r}.txt"), &formats::write_attack_report(&a.attack.full, Some(&a.ledger)))?;
            write_file(dir, &format!("metrics_{r}.txt"), &formats::write_key_values(&formats::metrics_key_values(&a.metrics)))?;
        }
        if let Err(e) = &record.outcome {
            eprintln!("repeat {} failed: {e}", record.repeat);
        }
    }
    emit(out, &text)
}

fn cmd_sweep(cfg: &ExperimentConfig, axes: &[String], out: Option<&Path>, records: Option<&Path>) -> Result<()> {
    let axes = axes.iter().map(|a| Axis::parse(a)).collect::<Result<Vec<_>>>()?;
    let cells = runner::run_sweep(cfg, &axes)?;
    if let Some(p) = records {
        let mut text = String::new();
        for cell in &cells {
            for r in &cell.records {
                text += &formats::write_record_line(&r.key_values(&cell.config));
            }
        }
        fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    let failed: usize = cells.iter().map(|c| c.records.iter().filter(|r| r.outcome.is_err()).count()).sum();
    if failed > 0 {
        eprintln!("{failed} runs failed");
    }
    emit(out, &runner::sweep_csv(&cells))
}

fn parse_setting(s: &str) -> Result<QuerySetting> {
    let mut cfg = ExperimentConfig::default();
    if s.contains(',') {
        cfg.set("query.p_d", s)?;
    } else {
        cfg.set("query.d", s)?;
    }
    Ok(cfg.setting)
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Gen { config, out } => cmd_gen(&config.load()?, &out),
        Cmd::Run { config, out, artifacts } => cmd_run(&config.load()?, out.as_deref(), artifacts.as_deref()),
        Cmd::Sweep { config, axis, out, records } => cmd_sweep(&config.load()?, &axis, out.as_deref(), records.as_deref()),
        Cmd::Score { trace, ledger, sterm, mapping, setting } => {
            let trace = formats::parse_trace(&read(&trace)?)?;
            let ledger = formats::parse_ledger(&read(&ledger)?)?;
            let sterm = formats::parse_sterm_mapping(&read(&sterm)?)?;
            let full = formats::parse_attack_report(&read(&mapping)?)?;
            let m = score(&trace, &full, &sterm, &ledger, &parse_setting(&setting)?)?;
            emit(None, &formats::write_key_values(&formats::metrics_key_values(&m)))
        }
    }
}
