// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

//! Client query workloads drawn i.i.d. from a frequency model.

use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::error::{Error, Result};
use crate::freqmodel::{Conjunction, FrequencyModel, MAX_DIM};
use crate::numeric::{stable_sum, SUM_TOL};
use crate::rng;

/// Which conjunction dimensions the client issues.
#[derive(Debug, Clone, PartialEq)]
pub enum QuerySetting {
    /// Every query has exactly `d` keywords.
    Separate(usize),
    /// Query dimension `k` is drawn with probability `p_d[k - 1]`.
    Hybrid { p_d: Vec<f64> },
}

impl QuerySetting {
    /// Hybrid setting with dimensions uniform over `1..=d_max`.
    pub fn hybrid_uniform(d_max: usize) -> Self {
        QuerySetting::Hybrid { p_d: vec![1.0 / d_max as f64; d_max] }
    }

    pub fn d_max(&self) -> usize {
        match self {
            QuerySetting::Separate(d) => *d,
            QuerySetting::Hybrid { p_d } => p_d.len(),
        }
    }

    pub fn is_separate(&self) -> bool {
        matches!(self, QuerySetting::Separate(_))
    }

    /// Dimensions issued with positive probability.
    pub fn dims(&self) -> Vec<usize> {
        match self {
            QuerySetting::Separate(d) => vec![*d],
            QuerySetting::Hybrid { p_d } => (1..=p_d.len()).filter(|k| p_d[k - 1] > 0.0).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            QuerySetting::Separate(d) if (1..=MAX_DIM).contains(d) => Ok(()),
            QuerySetting::Separate(_) => Err(Error::param("d", alloc::format!("must lie in 1..={MAX_DIM}"))),
            QuerySetting::Hybrid { p_d } => {
                if p_d.is_empty() || p_d.len() > MAX_DIM {
                    return Err(Error::param("p_d", alloc::format!("needs 1..={MAX_DIM} entries")));
                }
                if p_d.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::param("p_d", "entries must be non-negative"));
                }
                let total = stable_sum(p_d.iter().copied());
                if (total - 1.0).abs() > SUM_TOL {
                    return Err(Error::param("p_d", alloc::format!("sums to {total}, not 1")));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadConfig {
    pub rho: usize,
    pub setting: QuerySetting,
    pub seed: u64,
}

/// The exact query distribution a workload under `setting` follows: the
/// dimension-`d` slice renormalized for `Separate(d)`, and each slice
/// renormalized then weighted by `P_d(k)` for `Hybrid`.
pub fn workload_distribution(model: &FrequencyModel, setting: &QuerySetting) -> Result<FrequencyModel> {
    setting.validate()?;
    let weights: Vec<(usize, f64)> = match setting {
        QuerySetting::Separate(d) => vec![(*d, 1.0)],
        QuerySetting::Hybrid { p_d } => p_d.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(k, p)| (k + 1, *p)).collect(),
    };
    let mut entries = Vec::new();
    for (dim, weight) in weights {
        let mass = model.dimension_mass(dim);
        if mass <= 0.0 {
            return Err(Error::ZeroMass(dim));
        }
        let scale = weight / mass;
        entries.extend(model.iter().filter(|(c, _)| c.dim() == dim).map(|(c, p)| (*c, p * scale)));
    }
    Ok(FrequencyModel::from_weights(model.n(), entries)?.with_epoch(model.epoch()))
}

pub fn sample_workload(model: &FrequencyModel, cfg: &WorkloadConfig) -> Result<Vec<Conjunction>> {
    if cfg.rho == 0 {
        return Err(Error::param("rho", "must be at least 1"));
    }
    cfg.setting.validate()?;
    let dims: Vec<usize> = match &cfg.setting {
        QuerySetting::Separate(d) => vec![*d],
        QuerySetting::Hybrid { p_d } => (1..=p_d.len()).collect(),
    };
    // One sampler per dimension slice.
    let mut slices: Vec<Option<(Vec<Conjunction>, WeightedIndex<f64>)>> = Vec::new();
    for &dim in &dims {
        let wanted = match &cfg.setting {
            QuerySetting::Separate(_) => true,
            QuerySetting::Hybrid { p_d } => p_d[dim - 1] > 0.0,
        };
        if !wanted {
            slices.push(None);
            continue;
        }
        let (conjs, weights): (Vec<Conjunction>, Vec<f64>) =
            model.iter().filter(|(c, p)| c.dim() == dim && *p > 0.0).map(|(c, p)| (*c, p)).unzip();
        if conjs.is_empty() {
            return Err(Error::ZeroMass(dim));
        }
        let index = WeightedIndex::new(&weights).map_err(|_| Error::ZeroMass(dim))?;
        slices.push(Some((conjs, index)));
    }
    let mut r = rng::stage_rng(cfg.seed, "workload", 0);
    let dim_index = match &cfg.setting {
        QuerySetting::Separate(_) => None,
        QuerySetting::Hybrid { p_d } => Some(WeightedIndex::new(p_d).map_err(|_| Error::param("p_d", "no positive entry"))?),
    };
    Ok((0..cfg.rho)
        .map(|_| {
            let slot = dim_index.as_ref().map_or(0, |d| d.sample(&mut r));
            let (conjs, index) = slices[slot].as_ref().expect("sampled dimensions have positive weight");
            conjs[index.sample(&mut r)]
        })
        .collect())
}
