// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

//! Leakage of an OXT-family conjunctive SSE deployment.
//!
//! No cryptography is performed. The simulator answers conjunctions against
//! the (possibly defended) client index and emits exactly what the server
//! observes per query: an opaque full-query token, an opaque s-term token,
//! the s-term's result volume and the identifiers matching the whole
//! conjunction. The mapping from tokens back to keywords is kept in a
//! separate [`GroundTruthLedger`] that only scoring code reads.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;

use crate::corpus::{DocId, InvertedIndex};
use crate::error::{Error, Result};
use crate::freqmodel::Conjunction;
use crate::rng;

pub type TokenId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QueryToken {
    pub full: TokenId,
    pub sterm: TokenId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeakageRecord {
    pub token: QueryToken,
    pub sterm_volume: usize,
    /// Sorted identifiers matching every keyword of the query.
    pub result_ids: Arc<[DocId]>,
}

/// What the server sees for a whole workload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeakageTrace {
    /// Number of documents stored in the encrypted database.
    pub n_docs: usize,
    pub records: Vec<LeakageRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruthLedger {
    pub token_to_conjunction: BTreeMap<TokenId, Conjunction>,
    pub sterm_token_to_keyword: BTreeMap<TokenId, u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefenseKind {
    None,
    /// Keyword-document incidence obfuscation: true incidences survive with
    /// probability `tpr`, false ones appear with probability `fpr`.
    Clrz,
    /// Volume padding of every posting list to a power of `x`.
    Seal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefenseConfig {
    pub kind: DefenseKind,
    pub tpr: f64,
    pub fpr: f64,
    pub x: u32,
}

impl DefenseConfig {
    pub const fn none() -> Self {
        Self { kind: DefenseKind::None, tpr: 1.0, fpr: 0.0, x: 2 }
    }

    pub const fn clrz(tpr: f64, fpr: f64) -> Self {
        Self { kind: DefenseKind::Clrz, tpr, fpr, x: 2 }
    }

    pub const fn seal(x: u32) -> Self {
        Self { kind: DefenseKind::Seal, tpr: 1.0, fpr: 0.0, x }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fpr) || !(0.0..=1.0).contains(&self.tpr) || self.fpr > self.tpr {
            return Err(Error::param("defense", "need 0 <= fpr <= tpr <= 1"));
        }
        if self.kind == DefenseKind::Seal && self.x < 2 {
            return Err(Error::param("x", "padding base must be at least 2"));
        }
        Ok(())
    }
}

/// Smallest power of `x` that is at least `volume`; empty lists stay empty.
pub fn padded_volume(volume: usize, x: u32) -> usize {
    if volume == 0 {
        return 0;
    }
    let x = x as usize;
    let mut p = 1usize;
    while p < volume {
        p *= x;
    }
    p
}

/// Pad every posting list of `index` to a power of `x` with fresh dummy
/// documents. Each dummy belongs to exactly one posting list and is added to
/// the document list, so it never matches a conjunction of two or more
/// keywords.
pub fn pad_index(index: &InvertedIndex, x: u32) -> Result<InvertedIndex> {
    if x < 2 {
        return Err(Error::param("x", "padding base must be at least 2"));
    }
    let mut next: DocId = index.max_doc_id().map_or(0, |m| m.max(index.n_docs() as DocId)) + 1;
    let mut doc_ids = index.doc_ids().to_vec();
    let mut postings = index.postings().to_vec();
    for p in &mut postings {
        let target = padded_volume(p.len(), x);
        while p.len() < target {
            p.push(next);
            doc_ids.push(next);
            next += 1;
        }
    }
    InvertedIndex::from_parts(doc_ids, postings)
}

/// Build the index the server stores under `defense`.
pub fn setup_edb(index: &InvertedIndex, defense: &DefenseConfig, seed: u64) -> Result<InvertedIndex> {
    defense.validate()?;
    match defense.kind {
        DefenseKind::None => Ok(index.clone()),
        DefenseKind::Seal => pad_index(index, defense.x),
        DefenseKind::Clrz => {
            let docs = index.doc_ids();
            let postings = index
                .postings()
                .iter()
                .enumerate()
                .map(|(k, posting)| {
                    let mut r = rng::stage_rng(seed, "clrz", k as u64);
                    docs.iter()
                        .copied()
                        .filter(|d| {
                            let draw = r.random::<f64>();
                            if posting.binary_search(d).is_ok() {
                                draw < defense.tpr
                            } else {
                                draw < defense.fpr
                            }
                        })
                        .collect()
                })
                .collect();
            InvertedIndex::from_parts(docs.to_vec(), postings)
        }
    }
}

/// Keyword of `conj` with the smallest posting list in `index`, ties going to
/// the smaller keyword index.
pub fn select_sterm(conj: &Conjunction, index: &InvertedIndex) -> u32 {
    *conj
        .keywords()
        .iter()
        .min_by_key(|&&k| (index.volume(k), k))
        .expect("conjunctions are non-empty")
}

/// Answers queries against one stored index, issuing tokens at first use.
#[derive(Debug, Clone)]
pub struct Simulator {
    index: InvertedIndex,
    full_tokens: BTreeMap<Conjunction, TokenId>,
    sterm_tokens: BTreeMap<u32, TokenId>,
    results: BTreeMap<TokenId, Arc<[DocId]>>,
    ledger: GroundTruthLedger,
}

impl Simulator {
    pub fn new(index: InvertedIndex) -> Self {
        Self {
            index,
            full_tokens: BTreeMap::new(),
            sterm_tokens: BTreeMap::new(),
            results: BTreeMap::new(),
            ledger: GroundTruthLedger::default(),
        }
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn answer_query(&mut self, conj: &Conjunction) -> Result<LeakageRecord> {
        let n = self.index.n_keywords();
        if let Some(&bad) = conj.keywords().iter().find(|&&k| k as usize >= n) {
            return Err(Error::KeywordOutOfRange { keyword: bad, n });
        }
        let sterm = select_sterm(conj, &self.index);
        let next_sterm = self.sterm_tokens.len() as TokenId;
        let sterm_token = *self.sterm_tokens.entry(sterm).or_insert(next_sterm);
        self.ledger.sterm_token_to_keyword.insert(sterm_token, sterm);

        let next_full = self.full_tokens.len() as TokenId;
        let full = *self.full_tokens.entry(*conj).or_insert(next_full);
        self.ledger.token_to_conjunction.insert(full, *conj);

        let index = &self.index;
        let result_ids = self
            .results
            .entry(full)
            .or_insert_with(|| {
                // Retrieve by s-term, then filter by the remaining keywords.
                let mut ids = index.posting(sterm).to_vec();
                for &k in conj.keywords().iter().filter(|&&k| k != sterm) {
                    let other = index.posting(k);
                    ids.retain(|d| other.binary_search(d).is_ok());
                }
                ids.into()
            })
            .clone();
        Ok(LeakageRecord {
            token: QueryToken { full, sterm: sterm_token },
            sterm_volume: self.index.volume(sterm),
            result_ids,
        })
    }

    pub fn ledger(&self) -> &GroundTruthLedger {
        &self.ledger
    }

    pub fn into_ledger(self) -> GroundTruthLedger {
        self.ledger
    }
}

/// Run a whole workload through a fresh simulator.
pub fn simulate(index: &InvertedIndex, workload: &[Conjunction]) -> Result<(LeakageTrace, GroundTruthLedger)> {
    let mut sim = Simulator::new(index.clone());
    let records = workload.iter().map(|q| sim.answer_query(q)).collect::<Result<Vec<_>>>()?;
    Ok((LeakageTrace { n_docs: index.n_docs(), records }, sim.into_ledger()))
}
