// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

//! Line-oriented text formats for corpora, frequency tables, leakage traces
//! and attack results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use conjleak_core::attack::{FullMapping, GroupMapping, StermMapping};
use conjleak_core::corpus::{DocId, KeywordUniverse, RawDocument};
use conjleak_core::freqmodel::{Conjunction, FrequencyModel};
use conjleak_core::metrics::MetricsReport;
use conjleak_core::sse_sim::{GroundTruthLedger, LeakageRecord, LeakageTrace, QueryToken, TokenId};

/// Tolerance on the total of an imported frequency table.
pub const FREQ_SUM_TOL: f64 = 1e-6;

/// Read a corpus from a line file (`doc_id TAB tokens`) or a directory of
/// text files named by document id.
pub fn read_corpus(path: &Path) -> Result<Vec<RawDocument>> {
    if path.is_dir() {
        let mut docs = Vec::new();
        for entry in fs::read_dir(path).with_context(|| format!("reading {}", path.display()))? {
            let entry = entry?;
            if !entry.file_type()?.is_file() {
                continue;
            }
            let name = entry.file_name();
            let name = name.to_string_lossy();
            let stem = name.split('.').next().unwrap_or_default();
            let doc_id: DocId = stem.parse().with_context(|| format!("file name {name:?} is not a document id"))?;
            let text = fs::read_to_string(entry.path())?;
            docs.push(RawDocument { doc_id, tokens: text.split_whitespace().map(str::to_owned).collect() });
        }
        docs.sort_by_key(|d| d.doc_id);
        Ok(docs)
    } else {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        parse_corpus_lines(&text)
    }
}

pub fn parse_corpus_lines(text: &str) -> Result<Vec<RawDocument>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let (id, body) = line.split_once('\t').unwrap_or((line, ""));
            let doc_id = id.trim().parse().with_context(|| format!("line {}: bad document id {id:?}", i + 1))?;
            Ok(RawDocument { doc_id, tokens: body.split_whitespace().map(str::to_owned).collect() })
        })
        .collect()
}

pub fn write_corpus_lines(docs: &[RawDocument]) -> String {
    let mut out = String::new();
    for d in docs {
        let _ = writeln!(out, "{}\t{}", d.doc_id, d.tokens.join(" "));
    }
    out
}

pub fn write_universe(universe: &KeywordUniverse) -> String {
    universe.keywords().iter().map(|k| format!("{k}\n")).collect()
}

pub fn parse_universe(text: &str) -> Result<KeywordUniverse> {
    let words = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_owned).collect();
    Ok(KeywordUniverse::new(words)?)
}

fn keyword_list(conj: &Conjunction, universe: &KeywordUniverse) -> String {
    conj.keywords().iter().map(|&k| universe.keyword(k)).collect::<Vec<_>>().join(",")
}

/// Frequency table as `k1,k2 TAB probability` lines, keywords by name.
pub fn write_frequencies(model: &FrequencyModel, universe: &KeywordUniverse) -> String {
    let mut out = format!("# conjunction query frequencies, {} keywords, epoch {}\n", model.n(), model.epoch());
    for (c, p) in model.iter() {
        let _ = writeln!(out, "{}\t{p:e}", keyword_list(c, universe));
    }
    out
}

pub fn parse_frequencies(text: &str, universe: &KeywordUniverse) -> Result<FrequencyModel> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (keys, p) = line.split_once('\t').ok_or_else(|| anyhow!("line {}: expected `keywords TAB probability`", i + 1))?;
        let p: f64 = p.trim().parse().with_context(|| format!("line {}: bad probability", i + 1))?;
        let ids = keys
            .split(',')
            .map(|k| universe.index_of(k.trim()).ok_or_else(|| anyhow!("line {}: keyword {k:?} not in the universe", i + 1)))
            .collect::<Result<Vec<u32>>>()?;
        entries.push((Conjunction::new(&ids)?, p));
    }
    Ok(FrequencyModel::from_probabilities(universe.n(), entries, FREQ_SUM_TOL)?)
}

pub fn write_workload(workload: &[Conjunction]) -> String {
    workload.iter().map(|q| format!("{q}\n")).collect()
}

fn id_list<T: std::fmt::Display>(ids: &[T]) -> String {
    ids.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn parse_ids<T: std::str::FromStr>(field: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    if field.is_empty() || field == "-" {
        return Ok(Vec::new());
    }
    field.split(',').map(|s| Ok(s.trim().parse::<T>()?)).collect()
}

/// First line `# n_docs N`, then `full TAB sterm TAB volume TAB ids`.
pub fn write_trace(trace: &LeakageTrace) -> String {
    let mut out = format!("# n_docs {}\n", trace.n_docs);
    for r in &trace.records {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", r.token.full, r.token.sterm, r.sterm_volume, id_list(&r.result_ids));
    }
    out
}

pub fn parse_trace(text: &str) -> Result<LeakageTrace> {
    let mut n_docs = None;
    let mut records = Vec::new();
    let mut cache: BTreeMap<TokenId, Arc<[DocId]>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix("# n_docs ") {
            n_docs = Some(rest.trim().parse()?);
            continue;
        }
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            bail!("trace line {}: expected 4 fields", i + 1);
        }
        let full: TokenId = f[0].parse()?;
        let ids: Vec<DocId> = parse_ids(f[3])?;
        let result_ids = cache.entry(full).or_insert_with(|| ids.into()).clone();
        records.push(LeakageRecord {
            token: QueryToken { full, sterm: f[1].parse()? },
            sterm_volume: f[2].parse()?,
            result_ids,
        });
    }
    Ok(LeakageTrace { n_docs: n_docs.ok_or_else(|| anyhow!("trace lacks the `# n_docs` header"))?, records })
}

/// `F TAB token TAB keywords` and `S TAB token TAB keyword` lines.
pub fn write_ledger(ledger: &GroundTruthLedger) -> String {
    let mut out = String::new();
    for (t, c) in &ledger.token_to_conjunction {
        let _ = writeln!(out, "F\t{t}\t{c}");
    }
    for (t, k) in &ledger.sterm_token_to_keyword {
        let _ = writeln!(out, "S\t{t}\t{k}");
    }
    out
}

pub fn parse_ledger(text: &str) -> Result<GroundTruthLedger> {
    let mut ledger = GroundTruthLedger::default();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split('\t').collect();
        match f.as_slice() {
            ["F", t, ks] => {
                ledger.token_to_conjunction.insert(t.parse()?, Conjunction::new(&parse_ids::<u32>(ks)?)?);
            }
            ["S", t, k] => {
                ledger.sterm_token_to_keyword.insert(t.parse()?, k.parse()?);
            }
            _ => bail!("ledger line {}: unrecognized record", i + 1),
        }
    }
    Ok(ledger)
}

/// `sterm_token TAB keyword` lines, `-` for unrecovered.
pub fn write_sterm_mapping(sp: &StermMapping) -> String {
    let mut out = String::new();
    for (t, k) in sp.sterm_tokens.iter().zip(&sp.keywords) {
        let _ = writeln!(out, "{t}\t{}", k.map_or_else(|| "-".to_owned(), |k| k.to_string()));
    }
    out
}

pub fn parse_sterm_mapping(text: &str) -> Result<StermMapping> {
    let mut sp = StermMapping { sterm_tokens: Vec::new(), keywords: Vec::new() };
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (t, k) = line.split_once('\t').ok_or_else(|| anyhow!("bad s-term mapping line {line:?}"))?;
        sp.sterm_tokens.push(t.parse()?);
        sp.keywords.push(if k == "-" { None } else { Some(k.parse()?) });
    }
    Ok(sp)
}

/// `full_token TAB predicted TAB true TAB hits` lines in token order; the
/// true side and hit count are filled from `ledger` when given.
pub fn write_attack_report(full: &FullMapping, ledger: Option<&GroundTruthLedger>) -> String {
    let mut out = String::new();
    for (t, pred) in full.merged() {
        let truth = ledger.and_then(|l| l.token_to_conjunction.get(&t));
        let hits = match (pred, truth) {
            (Some(p), Some(tr)) => p.overlap(tr).to_string(),
            (None, Some(_)) => "0".to_owned(),
            _ => "-".to_owned(),
        };
        let show = |c: Option<&Conjunction>| c.map_or_else(|| "-".to_owned(), ToString::to_string);
        let _ = writeln!(out, "{t}\t{}\t{}\t{hits}", show(pred.as_ref()), show(truth));
    }
    out
}

/// Predictions of an attack report as a single-group mapping.
pub fn parse_attack_report(text: &str) -> Result<FullMapping> {
    let mut group = GroupMapping { sterm_token: 0, keyword: None, tokens: Vec::new(), predicted: Vec::new() };
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 2 {
            bail!("report line {}: expected at least 2 fields", i + 1);
        }
        group.tokens.push(f[0].parse()?);
        group.predicted.push(if f[1] == "-" { None } else { Some(Conjunction::new(&parse_ids::<u32>(f[1])?)?) });
    }
    Ok(FullMapping { groups: vec![group] })
}

/// Flat `key = value` rendering of a report.
pub fn metrics_key_values(m: &MetricsReport) -> Vec<(String, String)> {
    let mut kv = vec![
        ("queries".to_owned(), m.queries.to_string()),
        ("s_acc".to_owned(), format!("{:.6}", m.s_acc)),
        ("f_acc".to_owned(), format!("{:.6}", m.f_acc)),
        ("l_acc".to_owned(), format!("{:.6}", m.l_acc)),
        ("keyword_slots".to_owned(), m.keyword_slots.to_string()),
        ("keyword_hits".to_owned(), m.keyword_hits.to_string()),
    ];
    if let Some(cad) = &m.cad {
        for (x, v) in cad.iter().enumerate() {
            kv.push((format!("cad_{}", x + 1), format!("{v:.6}")));
        }
    }
    for d in &m.per_dimension {
        kv.push((format!("dim{}.queries", d.dim), d.queries.to_string()));
        kv.push((format!("dim{}.f_acc", d.dim), format!("{:.6}", d.f_acc)));
        kv.push((format!("dim{}.l_acc", d.dim), format!("{:.6}", d.l_acc)));
    }
    kv
}

pub fn write_key_values(kv: &[(String, String)]) -> String {
    kv.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// One experiment per line: tab-separated `key=value` pairs.
pub fn write_record_line(kv: &[(String, String)]) -> String {
    let fields: Vec<String> = kv.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{}\n", fields.join("\t"))
}

pub fn parse_record_line(line: &str) -> Vec<(String, String)> {
    line.trim_end_matches('\n')
        .split('\t')
        .filter_map(|f| f.split_once('=').map(|(k, v)| (k.to_owned(), v.to_owned())))
        .collect()
}
