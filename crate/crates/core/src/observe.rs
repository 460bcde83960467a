// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

//! Attacker-side aggregates computed from a leakage trace.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::bitset::DocSet;
use crate::corpus::DocId;
use crate::error::{Error, Result};
use crate::sse_sim::{LeakageRecord, TokenId};

/// All distinct full-query tokens that share one s-term token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenGroup {
    pub sterm_token: TokenId,
    /// Distinct full tokens in first-appearance order.
    pub tokens: Vec<TokenId>,
    /// Occurrences of each token.
    pub counts: Vec<usize>,
    /// Queries issued under this s-term token.
    pub rho: usize,
    /// `counts / rho`.
    pub f: Vec<f64>,
    /// Result volume of each token.
    pub volumes: Vec<u32>,
    /// Per token, `(other token position, shared result count)` for every
    /// other token sharing at least one result, sorted by position.
    pub shared: Vec<Vec<(u32, u32)>>,
    pub n_docs: usize,
}

impl TokenGroup {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Number of documents matched by both tokens `j` and `k`.
    pub fn intersection(&self, j: usize, k: usize) -> u32 {
        if j == k {
            return self.volumes[j];
        }
        let row = &self.shared[j];
        row.binary_search_by_key(&(k as u32), |e| e.0).map_or(0, |i| row[i].1)
    }

    /// Normalized co-occurrence `V_u[j][k]`.
    pub fn co_volume(&self, j: usize, k: usize) -> f64 {
        self.intersection(j, k) as f64 / self.n_docs as f64
    }

    /// Dense copy of the normalized co-occurrence matrix.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|j| (0..self.len()).map(|k| self.co_volume(j, k)).collect()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub n_docs: usize,
    pub rho: usize,
    /// Distinct s-term tokens in first-appearance order.
    pub sterm_tokens: Vec<TokenId>,
    pub sterm_volumes: Vec<usize>,
    /// `sterm_volumes / n_docs`.
    pub v: Vec<f64>,
    /// Share of queries issued under each s-term token.
    pub sf: Vec<f64>,
    /// Distinct full tokens per s-term token.
    pub m: Vec<usize>,
    /// `m / n_c_eff`.
    pub m_star: Vec<f64>,
    /// Aligned with `sterm_tokens`.
    pub groups: Vec<TokenGroup>,
}

impl ObservationSet {
    pub fn n_s(&self) -> usize {
        self.sterm_tokens.len()
    }

    /// `m` normalized to sum to one instead of by the candidate total.
    pub fn l1_m_star(&self) -> Vec<f64> {
        let total: usize = self.m.iter().sum();
        self.m.iter().map(|&m| m as f64 / total as f64).collect()
    }

    pub fn distinct_tokens(&self) -> usize {
        self.m.iter().sum()
    }
}

struct GroupBuilder {
    sterm_volume: usize,
    occurrences: usize,
    order: Vec<TokenId>,
    counts: BTreeMap<TokenId, usize>,
    results: BTreeMap<TokenId, alloc::sync::Arc<[DocId]>>,
}

pub fn build_observations(trace: &[LeakageRecord], n_docs: usize, n_c_eff: usize) -> Result<ObservationSet> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if n_docs == 0 {
        return Err(Error::param("n_docs", "must be positive"));
    }
    if n_c_eff == 0 {
        return Err(Error::param("n_c_eff", "must be positive"));
    }
    let mut order: Vec<TokenId> = Vec::new();
    let mut builders: BTreeMap<TokenId, GroupBuilder> = BTreeMap::new();
    for rec in trace {
        let b = builders.entry(rec.token.sterm).or_insert_with(|| {
            order.push(rec.token.sterm);
            GroupBuilder {
                sterm_volume: rec.sterm_volume,
                occurrences: 0,
                order: Vec::new(),
                counts: BTreeMap::new(),
                results: BTreeMap::new(),
            }
        });
        if b.sterm_volume != rec.sterm_volume {
            return Err(Error::InconsistentVolume { token: rec.token.sterm, first: b.sterm_volume, second: rec.sterm_volume });
        }
        b.occurrences += 1;
        let count = b.counts.entry(rec.token.full).or_insert(0);
        if *count == 0 {
            b.order.push(rec.token.full);
            b.results.insert(rec.token.full, rec.result_ids.clone());
        }
        *count += 1;
    }

    let rho = trace.len();
    let mut obs = ObservationSet {
        n_docs,
        rho,
        sterm_tokens: order.clone(),
        sterm_volumes: Vec::with_capacity(order.len()),
        v: Vec::with_capacity(order.len()),
        sf: Vec::with_capacity(order.len()),
        m: Vec::with_capacity(order.len()),
        m_star: Vec::with_capacity(order.len()),
        groups: Vec::with_capacity(order.len()),
    };
    for sterm in order {
        let b = builders.remove(&sterm).expect("every ordered token has a builder");
        obs.sterm_volumes.push(b.sterm_volume);
        obs.v.push(b.sterm_volume as f64 / n_docs as f64);
        obs.sf.push(b.occurrences as f64 / rho as f64);
        obs.m.push(b.order.len());
        obs.m_star.push(b.order.len() as f64 / n_c_eff as f64);
        obs.groups.push(build_group(sterm, b, n_docs));
    }
    Ok(obs)
}

fn build_group(sterm_token: TokenId, b: GroupBuilder, n_docs: usize) -> TokenGroup {
    let counts: Vec<usize> = b.order.iter().map(|t| b.counts[t]).collect();
    let f = counts.iter().map(|&c| c as f64 / b.occurrences as f64).collect();
    let results: Vec<&[DocId]> = b.order.iter().map(|t| &*b.results[t]).collect();
    let volumes = results.iter().map(|r| r.len() as u32).collect();

    // Bitsets over the documents this group ever returns.
    let mut universe: Vec<DocId> = results.iter().flat_map(|r| r.iter().copied()).collect();
    universe.sort_unstable();
    universe.dedup();
    let width = universe.len();
    let sets: Vec<DocSet> = results
        .iter()
        .map(|r| DocSet::from_positions(width, r.iter().map(|d| universe.binary_search(d).expect("in union"))))
        .collect();
    // Tokens per document, to enumerate only pairs that share something.
    let mut holders: Vec<Vec<u32>> = vec![Vec::new(); width];
    for (j, s) in sets.iter().enumerate() {
        for pos in s.iter() {
            holders[pos].push(j as u32);
        }
    }
    let n = results.len();
    let mut shared: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
    let mut seen = vec![u32::MAX; n];
    for j in 0..n {
        for pos in sets[j].iter() {
            for &k in &holders[pos] {
                if k as usize != j && seen[k as usize] != j as u32 {
                    seen[k as usize] = j as u32;
                    shared[j].push((k, sets[j].intersection_len(&sets[k as usize]) as u32));
                }
            }
        }
        shared[j].sort_unstable();
    }
    TokenGroup { sterm_token, tokens: b.order, counts, rho: b.occurrences, f, volumes, shared, n_docs }
}
