// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

//! Simulate → attack → score pipeline with per-stage timing, repeats and
//! parameter sweeps.

use std::collections::BTreeMap;
use std::fs;
use std::time::Instant;

use anyhow::{Context, Result};
use conjleak_core::attack::{run_pipeline_staged, AttackOutput, Stage};
use conjleak_core::corpus::{build_index, extract_universe, split_dataset, synthesize_corpus, InvertedIndex, KeywordUniverse};
use conjleak_core::freqmodel::{apply_temporal_offset, approximate_high_dim, gen_synthetic_frequencies, Conjunction, FrequencyModel};
use conjleak_core::metrics::{score, MetricsReport};
use conjleak_core::querygen::{sample_workload, WorkloadConfig};
use conjleak_core::rng::derive_seed;
use conjleak_core::sse_sim::{setup_edb, simulate, GroundTruthLedger, LeakageTrace};
use rayon::prelude::*;

use crate::config::{DataSource, ExperimentConfig};
use crate::formats;
use crate::instance::{build_instance, InstanceSpec};

/// The client's and the attacker's view of one dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub universe: KeywordUniverse,
    pub client: InvertedIndex,
    pub aux: InvertedIndex,
    /// The client's true query distribution, before dimension extension.
    pub model: FrequencyModel,
}

/// Build the dataset of a configuration. Corpus and frequency table depend
/// only on `cfg.seed`; the client/attacker split depends on `run_seed`.
pub fn prepare_dataset(cfg: &ExperimentConfig, run_seed: u64) -> Result<Dataset> {
    let (universe, client, aux, model) = match &cfg.data {
        DataSource::Constructed => {
            let inst = build_instance(&InstanceSpec { n: cfg.n, ..InstanceSpec::default() }, cfg.seed)?;
            (inst.universe, inst.index.clone(), inst.index, Some(inst.model))
        }
        source => {
            let raw = match source {
                DataSource::File(p) => formats::read_corpus(p)?,
                DataSource::Synthetic(spec) => synthesize_corpus(spec, derive_seed(cfg.seed, "corpus", 0))?,
                DataSource::Constructed => unreachable!(),
            };
            let (docs, universe) = extract_universe(&raw, cfg.n)?;
            let (client_docs, aux_docs) = split_dataset(&docs, derive_seed(run_seed, "split", 0))?;
            let client = build_index(&client_docs, &universe)?;
            let aux = build_index(&aux_docs, &universe)?;
            (universe, client, aux, None)
        }
    };
    let model = match (&cfg.freq_path, model) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            formats::parse_frequencies(&text, &universe)?
        }
        (None, Some(m)) => m,
        (None, None) => gen_synthetic_frequencies(cfg.n, 2, cfg.freq_zipf, derive_seed(cfg.seed, "frequencies", 0))?,
    };
    Ok(Dataset { universe, client, aux, model })
}

/// Extend a pair-level table to the dimensions a setting issues.
pub fn extend_model(model: &FrequencyModel, cfg: &ExperimentConfig) -> Result<FrequencyModel> {
    let d = cfg.setting.d_max();
    if d > model.d_max() && d >= 3 {
        Ok(approximate_high_dim(model, d, cfg.high_dim)?)
    } else {
        Ok(model.clone())
    }
}

/// Everything one run produced.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub workload: Vec<Conjunction>,
    pub trace: LeakageTrace,
    pub ledger: GroundTruthLedger,
    pub attack: AttackOutput,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub repeat: usize,
    pub seed: u64,
    /// Stage name → wall-clock milliseconds.
    pub timings: Vec<(&'static str, f64)>,
    pub outcome: Result<RunSummary, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub metrics: MetricsReport,
    pub retained_fraction: f64,
    pub n_c_eff: usize,
    pub n_sterm_tokens: usize,
    pub distinct_tokens: usize,
}

impl RunRecord {
    pub fn runtime_ms(&self) -> f64 {
        self.timings.iter().map(|t| t.1).sum()
    }

    pub fn timing(&self, stage: &str) -> Option<f64> {
        self.timings.iter().find(|t| t.0 == stage).map(|t| t.1)
    }

    /// Config, seed, timings and metrics as `key=value` pairs.
    pub fn key_values(&self, cfg: &ExperimentConfig) -> Vec<(String, String)> {
        let mut kv = cfg.key_values();
        kv.retain(|(k, _)| k != "seed" && k != "repeat");
        kv.push(("repeat_index".into(), self.repeat.to_string()));
        kv.push(("run_seed".into(), self.seed.to_string()));
        match &self.outcome {
            Ok(s) => {
                kv.push(("status".into(), "ok".into()));
                kv.extend(formats::metrics_key_values(&s.metrics));
                kv.push(("retained_fraction".into(), format!("{:.6}", s.retained_fraction)));
                kv.push(("n_c_eff".into(), s.n_c_eff.to_string()));
                kv.push(("sterm_tokens".into(), s.n_sterm_tokens.to_string()));
                kv.push(("distinct_tokens".into(), s.distinct_tokens.to_string()));
            }
            Err(e) => {
                kv.push(("status".into(), "failed".into()));
                kv.push(("error".into(), e.replace(['\t', '\n'], " ")));
            }
        }
        for (stage, ms) in &self.timings {
            kv.push((format!("t_{stage}_ms"), format!("{ms:.3}")));
        }
        kv.push(("runtime_ms".into(), format!("{:.3}", self.runtime_ms())));
        kv
    }
}

fn stage_name(s: Stage) -> &'static str {
    match s {
        Stage::Knowledge => "knowledge",
        Stage::Prune => "prune",
        Stage::Observe => "observe",
        Stage::Sterm => "sterm",
        Stage::Full => "full",
        Stage::Done => "done",
    }
}

struct Stopwatch {
    current: (&'static str, Instant),
    laps: Vec<(&'static str, f64)>,
}

impl Stopwatch {
    fn start(name: &'static str) -> Self {
        Self { current: (name, Instant::now()), laps: Vec::new() }
    }

    fn lap(&mut self, next: &'static str) {
        let (name, t0) = self.current;
        self.laps.push((name, t0.elapsed().as_secs_f64() * 1e3));
        self.current = (next, Instant::now());
    }

    fn finish(mut self) -> Vec<(&'static str, f64)> {
        self.lap("");
        self.laps
    }
}

/// Per-repeat root seed.
pub fn run_seed(cfg: &ExperimentConfig, repeat: usize) -> u64 {
    derive_seed(cfg.seed, "repeat", repeat as u64)
}

/// One full run on a prepared dataset.
pub fn run_on(cfg: &ExperimentConfig, data: &Dataset, seed: u64) -> Result<(RunArtifacts, Vec<(&'static str, f64)>)> {
    cfg.validate()?;
    let mut watch = Stopwatch::start("workload");
    let truth = extend_model(&data.model, cfg)?;
    let believed = apply_temporal_offset(&truth, cfg.t, cfg.drift, derive_seed(seed, "drift", 0))?;
    let workload = sample_workload(&truth, &WorkloadConfig { rho: cfg.rho, setting: cfg.setting.clone(), seed: derive_seed(seed, "workload", 0) })?;

    watch.lap("simulate");
    let edb = setup_edb(&data.client, &cfg.defense, derive_seed(seed, "defense", 0))?;
    let (trace, ledger) = simulate(&edb, &workload)?;

    let params = cfg.attack_params(data.client.n_docs());
    let attack = run_pipeline_staged(&trace, &data.aux, &believed, &cfg.setting, &params, derive_seed(seed, "attack", 0), |s| {
        if s != Stage::Done {
            watch.lap(stage_name(s));
        } else {
            watch.lap("score");
        }
    })?;
    let metrics = score(&trace, &attack.full, &attack.sterm, &ledger, &cfg.setting)?;
    let timings = watch.finish();
    Ok((RunArtifacts { workload, trace, ledger, attack, metrics }, timings))
}

fn summarize(a: &RunArtifacts) -> RunSummary {
    RunSummary {
        metrics: a.metrics.clone(),
        retained_fraction: a.attack.prune.retained_fraction(),
        n_c_eff: a.attack.prune.n_c_eff(),
        n_sterm_tokens: a.attack.observations.n_s(),
        distinct_tokens: a.attack.observations.distinct_tokens(),
    }
}

/// Run repeat `r` of a configuration, preparing its dataset.
pub fn run_repeat(cfg: &ExperimentConfig, r: usize) -> (RunRecord, Option<RunArtifacts>) {
    let seed = run_seed(cfg, r);
    let t0 = Instant::now();
    let result = prepare_dataset(cfg, seed).and_then(|data| {
        let prep = t0.elapsed().as_secs_f64() * 1e3;
        run_on(cfg, &data, seed).map(|(a, mut t)| {
            t.insert(0, ("data", prep));
            (a, t)
        })
    });
    match result {
        Ok((artifacts, timings)) => (RunRecord { repeat: r, seed, timings, outcome: Ok(summarize(&artifacts)) }, Some(artifacts)),
        Err(e) => (
            RunRecord { repeat: r, seed, timings: vec![("data", t0.elapsed().as_secs_f64() * 1e3)], outcome: Err(format!("{e:#}")) },
            None,
        ),
    }
}

/// All repeats of a configuration, in parallel. Failed repeats are recorded,
/// not propagated.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    Ok((0..cfg.repeat).into_par_iter().map(|r| run_repeat(cfg, r).0).collect())
}

/// One axis of a sweep: a configuration key and its values.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

impl Axis {
    /// Parse `key=v1,v2,...`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (key, values) = spec.split_once('=').context("sweep axis must look like key=v1,v2")?;
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_owned()).filter(|v| !v.is_empty()).collect();
        anyhow::ensure!(!values.is_empty(), "sweep axis {key} has no values");
        Ok(Self { key: key.trim().to_owned(), values })
    }
}

/// One cell of a sweep with its records.
#[derive(Debug, Clone)]
pub struct Cell {
    pub params: Vec<(String, String)>,
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
}

/// Cartesian product of the axes, in row-major order.
/// Sweep parameters of a cell with the configuration they produce.
pub type GridPoint = (Vec<(String, String)>, ExperimentConfig);

pub fn grid(base: &ExperimentConfig, axes: &[Axis]) -> Result<Vec<GridPoint>> {
    let mut cells = vec![(Vec::new(), base.clone())];
    for axis in axes {
        let mut next = Vec::with_capacity(cells.len() * axis.values.len());
        for (params, cfg) in &cells {
            for v in &axis.values {
                let mut c = cfg.clone();
                c.set(&axis.key, v).with_context(|| format!("sweep value {}={v}", axis.key))?;
                let mut p = params.clone();
                p.push((axis.key.clone(), v.clone()));
                next.push((p, c));
            }
        }
        cells = next;
    }
    Ok(cells)
}

/// Run every cell and repeat; cells run concurrently.
pub fn run_sweep(base: &ExperimentConfig, axes: &[Axis]) -> Result<Vec<Cell>> {
    let cells = grid(base, axes)?;
    Ok(cells
        .into_par_iter()
        .map(|(params, config)| {
            let records = match config.validate() {
                Ok(()) => (0..config.repeat).into_par_iter().map(|r| run_repeat(&config, r).0).collect(),
                Err(e) => vec![RunRecord { repeat: 0, seed: config.seed, timings: Vec::new(), outcome: Err(format!("{e:#}")) }],
            };
            Cell { params, config, records }
        })
        .collect())
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var.sqrt())
}

/// Mean and standard deviation of each metric over the successful runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub runs: usize,
    pub failed: usize,
    pub s_acc: (f64, f64),
    pub f_acc: (f64, f64),
    pub l_acc: (f64, f64),
    pub cad: Vec<(f64, f64)>,
    pub runtime_ms: (f64, f64),
    pub full_ms: (f64, f64),
    pub retained_fraction: (f64, f64),
}

pub fn aggregate(records: &[RunRecord]) -> Aggregate {
    let ok: Vec<(&RunRecord, &RunSummary)> = records.iter().filter_map(|r| r.outcome.as_ref().ok().map(|s| (r, s))).collect();
    let col = |f: &dyn Fn(&RunRecord, &RunSummary) -> f64| mean_sd(&ok.iter().map(|(r, s)| f(r, s)).collect::<Vec<_>>());
    let d = ok.iter().filter_map(|(_, s)| s.metrics.cad.as_ref().map(Vec::len)).max().unwrap_or(0);
    Aggregate {
        runs: ok.len(),
        failed: records.len() - ok.len(),
        s_acc: col(&|_, s| s.metrics.s_acc),
        f_acc: col(&|_, s| s.metrics.f_acc),
        l_acc: col(&|_, s| s.metrics.l_acc),
        cad: (0..d).map(|x| col(&|_, s| s.metrics.cad.as_ref().and_then(|c| c.get(x)).copied().unwrap_or(f64::NAN))).collect(),
        runtime_ms: col(&|r, _| r.runtime_ms()),
        full_ms: col(&|r, _| r.timing("full").unwrap_or(0.0)),
        retained_fraction: col(&|_, s| s.retained_fraction),
    }
}

/// Aggregated CSV: sweep parameters, metric means, `cad_1..cad_d`, runtime,
/// then standard deviations and run counts.
pub fn sweep_csv(cells: &[Cell]) -> String {
    let params: Vec<String> = cells.first().map(|c| c.params.iter().map(|p| p.0.clone()).collect()).unwrap_or_default();
    let aggs: Vec<Aggregate> = cells.iter().map(|c| aggregate(&c.records)).collect();
    let d = cells.iter().map(|c| c.config.setting.d_max()).max().unwrap_or(0);
    let mut header: Vec<String> = params.clone();
    header.extend(["s_acc", "f_acc", "l_acc"].map(String::from));
    header.extend((1..=d).map(|x| format!("cad_{x}")));
    header.push("runtime_ms".into());
    header.extend(["s_acc_sd", "f_acc_sd", "l_acc_sd", "runtime_ms_sd", "retained_fraction", "runs", "failed"].map(String::from));
    let mut out = header.join(",") + "\n";
    let num = |x: f64| if x.is_nan() { String::new() } else { format!("{x:.6}") };
    for (cell, a) in cells.iter().zip(&aggs) {
        let mut row: Vec<String> = cell.params.iter().map(|p| p.1.clone()).collect();
        row.extend([a.s_acc.0, a.f_acc.0, a.l_acc.0].map(num));
        row.extend((0..d).map(|x| a.cad.get(x).map_or(String::new(), |c| num(c.0))));
        row.push(format!("{:.3}", a.runtime_ms.0));
        row.extend([a.s_acc.1, a.f_acc.1, a.l_acc.1].map(num));
        row.push(format!("{:.3}", a.runtime_ms.1));
        row.push(num(a.retained_fraction.0));
        row.push(a.runs.to_string());
        row.push(a.failed.to_string());
        out += &(row.join(",") + "\n");
    }
    out
}

/// Group records by a key for quick inspection.
pub fn by_status(records: &[RunRecord]) -> BTreeMap<bool, usize> {
    let mut m = BTreeMap::new();
    for r in records {
        *m.entry(r.outcome.is_ok()).or_default() += 1;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig::from_text(
            "corpus.docs = 300\ncorpus.vocab = 120\nkeywords = 15\nquery.rho = 2000\nattack.n_iter = 5\nrepeat = 2\nseed = 3",
        )
        .unwrap()
    }

    #[test]
    fn repeats_are_deterministic_and_distinct() {
        let cfg = small();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.len(), 2);
        assert_ne!(a[0].seed, a[1].seed);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.outcome, y.outcome);
        }
        assert!(a.iter().all(|r| r.outcome.is_ok()));
        assert!(a[0].timing("full").is_some());
    }

    #[test]
    fn grid_is_a_cartesian_product() {
        let axes = vec![Axis::parse("query.rho=10000,100000").unwrap(), Axis::parse("attack.frac=0.3,0.6").unwrap()];
        let cells = grid(&ExperimentConfig::default(), &axes).unwrap();
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[3].1.rho, 100_000);
        assert_eq!(cells[3].1.attack.frac, 0.6);
        assert!(Axis::parse("query.rho=").is_err());
    }

    #[test]
    fn sweep_table_shape() {
        let mut cfg = small();
        cfg.repeat = 1;
        let cells = run_sweep(&cfg, &[Axis::parse("attack.frac=0.3,0.6").unwrap()]).unwrap();
        let csv = sweep_csv(&cells);
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("attack.frac,s_acc,f_acc,l_acc,cad_1,cad_2,runtime_ms,"));
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn failures_are_recorded() {
        let mut cfg = small();
        cfg.n = 100_000;
        cfg.repeat = 1;
        let records = run_experiment(&cfg).unwrap();
        assert!(records[0].outcome.is_err());
        assert_eq!(by_status(&records).get(&false), Some(&1));
    }
}
