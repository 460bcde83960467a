// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

//! A small self-attack instance on which every statistic the attack relies
//! on is a unique fingerprint.

use std::collections::BTreeSet;

use anyhow::{bail, Result};
use conjleak_core::corpus::{InvertedIndex, KeywordUniverse};
use conjleak_core::freqmodel::{sterm_of, Conjunction, FrequencyModel};
use conjleak_core::rng;
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub n: usize,
    pub n_docs: usize,
    /// Number of keyword pairs with positive query probability.
    pub support: usize,
    /// Range of per-keyword inclusion probabilities.
    pub min_rate: f64,
    pub max_rate: f64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self { n: 30, n_docs: 3000, support: 120, min_rate: 0.04, max_rate: 0.45 }
    }
}

#[derive(Debug, Clone)]
pub struct ConstructedInstance {
    pub universe: KeywordUniverse,
    pub index: InvertedIndex,
    /// Pair query distribution.
    pub model: FrequencyModel,
}

const MAX_ATTEMPTS: usize = 200;

/// Draw documents and a pair workload, redrawing until keyword volumes are
/// pairwise distinct and, inside every s-term group, the candidate pairs
/// have pairwise distinct result volumes.
pub fn build_instance(spec: &InstanceSpec, seed: u64) -> Result<ConstructedInstance> {
    let max_pairs = spec.n * spec.n.saturating_sub(1) / 2;
    if spec.support == 0 || spec.support > max_pairs {
        bail!("support must lie in 1..={max_pairs}");
    }
    for attempt in 0..MAX_ATTEMPTS as u64 {
        let mut r = rng::stage_rng(seed, "constructed-instance", attempt);
        let rates: Vec<f64> = (0..spec.n).map(|_| r.random_range(spec.min_rate..spec.max_rate)).collect();
        let mut postings = vec![Vec::new(); spec.n];
        for doc in 0..spec.n_docs as u32 {
            for (k, &rate) in rates.iter().enumerate() {
                if r.random::<f64>() < rate {
                    postings[k].push(doc);
                }
            }
        }
        let index = InvertedIndex::from_parts((0..spec.n_docs as u32).collect(), postings)?;
        let df = index.doc_frequencies();
        if df.iter().collect::<BTreeSet<_>>().len() != spec.n || df.contains(&0) {
            continue;
        }
        let mut pairs: Vec<Conjunction> = Vec::with_capacity(max_pairs);
        for a in 0..spec.n as u32 {
            for b in a + 1..spec.n as u32 {
                pairs.push(Conjunction::pair(a, b));
            }
        }
        pairs.shuffle(&mut r);
        pairs.truncate(spec.support);
        let volumes: Vec<usize> = pairs.iter().map(|c| index.intersect(c.keywords()).len()).collect();
        if volumes.contains(&0) {
            continue;
        }
        let mut seen = BTreeSet::new();
        if !pairs.iter().zip(&volumes).all(|(c, v)| seen.insert((sterm_of(c, &df), *v))) {
            continue;
        }
        // Weights spread over a factor of four keep every pair frequent.
        let entries = pairs.iter().map(|c| (*c, 1.0 + 3.0 * r.random::<f64>()));
        let model = FrequencyModel::from_weights(spec.n, entries)?;
        return Ok(ConstructedInstance { universe: KeywordUniverse::anonymous(spec.n), index, model });
    }
    bail!("no instance with distinct statistics after {MAX_ATTEMPTS} attempts")
}
