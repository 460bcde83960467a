// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

//! Experiment configuration as flat `dotted.key = value` text.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use conjleak_core::attack::{AttackParams, CombinationNorm, DefenseKnowledge, FullTerms, StermTerms};
use conjleak_core::corpus::SyntheticCorpusSpec;
use conjleak_core::freqmodel::{HighDimRule, MAX_DIM};
use conjleak_core::querygen::QuerySetting;
use conjleak_core::sse_sim::{DefenseConfig, DefenseKind};

/// Where the document collection comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SyntheticCorpusSpec),
    File(PathBuf),
    /// Random documents with a sparse pair workload in which every keyword
    /// volume and every co-occurrence inside an s-term group is distinct;
    /// the attacker's index is the client's own.
    Constructed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub freq_path: Option<PathBuf>,
    pub freq_zipf: f64,
    pub n: usize,
    pub setting: QuerySetting,
    pub rho: usize,
    pub defense: DefenseConfig,
    pub attack: AttackParams,
    /// Apply the known defense to the auxiliary statistics.
    pub adapt: bool,
    pub high_dim: HighDimRule,
    pub t: u32,
    pub drift: f64,
    pub seed: u64,
    pub repeat: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synthetic(SyntheticCorpusSpec::default()),
            freq_path: None,
            freq_zipf: 1.0,
            n: 100,
            setting: QuerySetting::Separate(2),
            rho: 100_000,
            defense: DefenseConfig::none(),
            attack: AttackParams::default(),
            adapt: false,
            high_dim: HighDimRule::default(),
            t: 0,
            drift: 1.0,
            seed: 1,
            repeat: 1,
        }
    }
}

fn parse_bool(v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => bail!("expected a boolean, found {v:?}"),
    }
}

fn parse_flags<const N: usize>(v: &str, names: [&str; N]) -> Result<[bool; N]> {
    let mut out = [false; N];
    for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let i = names.iter().position(|n| *n == item).ok_or_else(|| anyhow!("unknown term {item:?}; expected one of {names:?}"))?;
        out[i] = true;
    }
    Ok(out)
}

fn flag_list<const N: usize>(flags: [bool; N], names: [&str; N]) -> String {
    names.iter().zip(flags).filter(|(_, on)| *on).map(|(n, _)| *n).collect::<Vec<_>>().join(",")
}

const STERM_TERMS: [&str; 3] = ["volume", "frequency", "combination"];
const FULL_TERMS: [&str; 3] = ["frequency", "volume", "quadratic"];

/// Every key accepted by [`ExperimentConfig::set`].
pub const KEYS: &[&str] = &[
    "data.source",
    "data.path",
    "corpus.docs",
    "corpus.vocab",
    "corpus.doc_len",
    "corpus.zipf",
    "corpus.topics",
    "corpus.topic_strength",
    "freq.path",
    "freq.zipf",
    "keywords",
    "query.setting",
    "query.d",
    "query.p_d",
    "query.rho",
    "defense.kind",
    "defense.tpr",
    "defense.fpr",
    "defense.x",
    "attack.frac",
    "attack.n_iter",
    "attack.p_free",
    "attack.sterm_terms",
    "attack.full_terms",
    "attack.m_star",
    "attack.adapt",
    "attack.high_dim",
    "drift.t",
    "drift.rate",
    "seed",
    "repeat",
];

impl ExperimentConfig {
    fn corpus_spec(&mut self) -> Result<&mut SyntheticCorpusSpec> {
        match &mut self.data {
            DataSource::Synthetic(s) => Ok(s),
            _ => bail!("corpus.* keys need data.source = synthetic"),
        }
    }

    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let num = |v: &str| -> Result<f64> { v.parse::<f64>().with_context(|| format!("{key}: expected a number")) };
        let int = |v: &str| -> Result<usize> {
            let x = v.parse::<f64>().with_context(|| format!("{key}: expected an integer"))?;
            if x < 0.0 || x.fract() != 0.0 {
                bail!("{key}: expected a non-negative integer, found {v}");
            }
            Ok(x as usize)
        };
        match key {
            "data.source" => {
                self.data = match v {
                    "synthetic" => DataSource::Synthetic(SyntheticCorpusSpec::default()),
                    "constructed" => DataSource::Constructed,
                    "file" => DataSource::File(PathBuf::new()),
                    _ => bail!("data.source: expected synthetic, file or constructed"),
                }
            }
            "data.path" => self.data = DataSource::File(PathBuf::from(v)),
            "corpus.docs" => self.corpus_spec()?.n_docs = int(v)?,
            "corpus.vocab" => self.corpus_spec()?.vocab_size = int(v)?,
            "corpus.doc_len" => self.corpus_spec()?.mean_doc_len = int(v)?,
            "corpus.zipf" => self.corpus_spec()?.zipf_s = num(v)?,
            "corpus.topics" => self.corpus_spec()?.topics = int(v)?,
            "corpus.topic_strength" => self.corpus_spec()?.topic_strength = num(v)?,
            "freq.path" => self.freq_path = (!v.is_empty()).then(|| PathBuf::from(v)),
            "freq.zipf" => self.freq_zipf = num(v)?,
            "keywords" => self.n = int(v)?,
            "query.setting" => {
                let d = self.setting.d_max();
                self.setting = match v {
                    "separate" => QuerySetting::Separate(d),
                    "hybrid" => QuerySetting::hybrid_uniform(d),
                    _ => bail!("query.setting: expected separate or hybrid"),
                }
            }
            "query.d" => {
                let d = int(v)?;
                self.setting = match self.setting {
                    QuerySetting::Separate(_) => QuerySetting::Separate(d),
                    QuerySetting::Hybrid { .. } => QuerySetting::hybrid_uniform(d.max(1)),
                }
            }
            "query.p_d" => {
                let p_d = v.split(',').map(|x| num(x.trim())).collect::<Result<Vec<f64>>>()?;
                self.setting = QuerySetting::Hybrid { p_d };
            }
            "query.rho" => self.rho = int(v)?,
            "defense.kind" => {
                self.defense.kind = match v {
                    "none" => DefenseKind::None,
                    "clrz" => DefenseKind::Clrz,
                    "seal" => DefenseKind::Seal,
                    _ => bail!("defense.kind: expected none, clrz or seal"),
                }
            }
            "defense.tpr" => self.defense.tpr = num(v)?,
            "defense.fpr" => self.defense.fpr = num(v)?,
            "defense.x" => self.defense.x = int(v)? as u32,
            "attack.frac" => self.attack.frac = num(v)?,
            "attack.n_iter" => self.attack.n_iter = int(v)?,
            "attack.p_free" => self.attack.p_free = num(v)?,
            "attack.sterm_terms" => {
                let [volume, frequency, combination] = parse_flags(v, STERM_TERMS)?;
                self.attack.sterm_terms = StermTerms { volume, frequency, combination };
            }
            "attack.full_terms" => {
                let [frequency, volume, quadratic] = parse_flags(v, FULL_TERMS)?;
                self.attack.full_terms = FullTerms { frequency, volume, quadratic };
            }
            "attack.m_star" => {
                self.attack.combination_norm = match v {
                    "candidates" => CombinationNorm::CandidateTotal,
                    "l1" => CombinationNorm::L1,
                    _ => bail!("attack.m_star: expected candidates or l1"),
                }
            }
            "attack.adapt" => self.adapt = parse_bool(v)?,
            "attack.high_dim" => {
                self.high_dim = match v {
                    "conditional" => HighDimRule::ConditionalIndependence,
                    "unscaled" => HighDimRule::Unscaled,
                    _ => bail!("attack.high_dim: expected conditional or unscaled"),
                }
            }
            "drift.t" => self.t = int(v)? as u32,
            "drift.rate" => self.drift = num(v)?,
            "seed" => self.seed = v.parse().with_context(|| format!("{key}: expected an unsigned integer"))?,
            "repeat" => self.repeat = int(v)?,
            _ => bail!("unknown configuration key {key:?}"),
        }
        Ok(())
    }

    /// Apply a `key = value` file; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("config line {}: expected key = value", i + 1))?;
            self.set(k.trim(), v).with_context(|| format!("config line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho == 0 {
            bail!("query.rho must be at least 1");
        }
        if self.repeat == 0 {
            bail!("repeat must be at least 1");
        }
        if self.n == 0 {
            bail!("keywords must be at least 1");
        }
        if let DataSource::File(p) = &self.data {
            if p.as_os_str().is_empty() {
                bail!("data.source = file needs data.path");
            }
        }
        self.setting.validate()?;
        if self.setting.d_max() > MAX_DIM {
            bail!("query dimension above {MAX_DIM}");
        }
        self.defense.validate()?;
        if !(self.attack.frac > 0.0 && self.attack.frac <= 1.0) {
            bail!("attack.frac must lie in (0, 1]");
        }
        if !(self.attack.p_free > 0.0 && self.attack.p_free <= 1.0) {
            bail!("attack.p_free must lie in (0, 1]");
        }
        if self.attack.n_iter == 0 {
            bail!("attack.n_iter must be at least 1");
        }
        let t = self.attack.sterm_terms;
        if !(t.volume || t.frequency || t.combination) {
            bail!("attack.sterm_terms must enable at least one term");
        }
        if self.drift.is_nan() || self.drift < 0.0 {
            bail!("drift.rate must be non-negative");
        }
        Ok(())
    }

    /// Attack parameters with the defense knowledge filled in.
    pub fn attack_params(&self, client_docs: usize) -> AttackParams {
        let mut p = self.attack.clone();
        p.adapt = (self.adapt && self.defense.kind != DefenseKind::None).then_some(DefenseKnowledge {
            kind: self.defense.kind,
            tpr: self.defense.tpr,
            fpr: self.defense.fpr,
            x: self.defense.x,
            client_docs,
        });
        p
    }

    /// Canonical `key = value` pairs, enough to reproduce the run.
    pub fn key_values(&self) -> Vec<(String, String)> {
        let mut kv: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| kv.push((k.to_owned(), v));
        match &self.data {
            DataSource::Synthetic(s) => {
                put("data.source", "synthetic".into());
                put("corpus.docs", s.n_docs.to_string());
                put("corpus.vocab", s.vocab_size.to_string());
                put("corpus.doc_len", s.mean_doc_len.to_string());
                put("corpus.zipf", s.zipf_s.to_string());
                put("corpus.topics", s.topics.to_string());
                put("corpus.topic_strength", s.topic_strength.to_string());
            }
            DataSource::File(p) => put("data.path", p.display().to_string()),
            DataSource::Constructed => put("data.source", "constructed".into()),
        }
        if let Some(p) = &self.freq_path {
            put("freq.path", p.display().to_string());
        }
        put("freq.zipf", self.freq_zipf.to_string());
        put("keywords", self.n.to_string());
        match &self.setting {
            QuerySetting::Separate(d) => {
                put("query.setting", "separate".into());
                put("query.d", d.to_string());
            }
            QuerySetting::Hybrid { p_d } => {
                put("query.setting", "hybrid".into());
                put("query.p_d", p_d.iter().map(ToString::to_string).collect::<Vec<_>>().join(","));
            }
        }
        put("query.rho", self.rho.to_string());
        put(
            "defense.kind",
            match self.defense.kind {
                DefenseKind::None => "none",
                DefenseKind::Clrz => "clrz",
                DefenseKind::Seal => "seal",
            }
            .into(),
        );
        put("defense.tpr", self.defense.tpr.to_string());
        put("defense.fpr", self.defense.fpr.to_string());
        put("defense.x", self.defense.x.to_string());
        put("attack.frac", self.attack.frac.to_string());
        put("attack.n_iter", self.attack.n_iter.to_string());
        put("attack.p_free", self.attack.p_free.to_string());
        let s = self.attack.sterm_terms;
        put("attack.sterm_terms", flag_list([s.volume, s.frequency, s.combination], STERM_TERMS));
        let f = self.attack.full_terms;
        put("attack.full_terms", flag_list([f.frequency, f.volume, f.quadratic], FULL_TERMS));
        put(
            "attack.m_star",
            match self.attack.combination_norm {
                CombinationNorm::CandidateTotal => "candidates",
                CombinationNorm::L1 => "l1",
            }
            .into(),
        );
        put("attack.adapt", self.adapt.to_string());
        put(
            "attack.high_dim",
            match self.high_dim {
                HighDimRule::ConditionalIndependence => "conditional",
                HighDimRule::Unscaled => "unscaled",
            }
            .into(),
        );
        put("drift.t", self.t.to_string());
        put("drift.rate", self.drift.to_string());
        put("seed", self.seed.to_string());
        put("repeat", self.repeat.to_string());
        kv
    }

    pub fn to_text(&self) -> String {
        crate::formats::write_key_values(&self.key_values())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_text() {
        let mut c = ExperimentConfig::default();
        c.set("query.p_d", "0.2,0.3,0.5").unwrap();
        c.set("defense.kind", "clrz").unwrap();
        c.set("defense.fpr", "0.05").unwrap();
        c.set("attack.full_terms", "frequency,quadratic").unwrap();
        c.set("drift.t", "100").unwrap();
        assert_eq!(ExperimentConfig::from_text(&c.to_text()).unwrap(), c);
        let mut constructed = ExperimentConfig::default();
        constructed.set("data.source", "constructed").unwrap();
        assert_eq!(ExperimentConfig::from_text(&constructed.to_text()).unwrap(), constructed);
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::default();
        c.set("query.rho", "0").unwrap();
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::default().set("query.rho", "-3").is_err());
        assert!(ExperimentConfig::default().set("nope", "1").is_err());
        assert!(ExperimentConfig::from_text("attack.frac = 1.5").unwrap().validate().is_err());
        assert!(ExperimentConfig::from_text("attack.sterm_terms = ").unwrap().validate().is_err());
        assert!(ExperimentConfig::from_text("query.d = 2\n# comment\n\nseed = 9").unwrap().validate().is_ok());
    }

    #[test]
    fn adaptation_only_with_a_defense() {
        let mut c = ExperimentConfig { adapt: true, ..ExperimentConfig::default() };
        assert_eq!(c.attack_params(10).adapt, None);
        c.set("defense.kind", "seal").unwrap();
        assert_eq!(c.attack_params(10).adapt.unwrap().client_docs, 10);
    }
}
