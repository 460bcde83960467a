// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

//! The attacker's model of the client, built from a similar dataset and a
//! query frequency table, plus the adjustments for known defenses.

use alloc::vec;
use alloc::vec::Vec;

use crate::bitset::DocSet;
use crate::corpus::{DocId, InvertedIndex};
use crate::error::{Error, Result};
use crate::freqmodel::{derive_sterm_frequencies, sterm_combination_counts, Conjunction, FrequencyModel, StermFrequencyKnowledge};
use crate::numeric::{clamp_prob, powi};
use crate::sse_sim::pad_index;

/// Slack allowed when checking that an adapted probability lies in `[0, 1]`.
const RANGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct AuxKnowledge {
    pub n_docs: usize,
    pub doc_freq: Vec<usize>,
    /// Unclamped `|D_a(w_i)| / |D_a|`.
    pub volume_fraction: Vec<f64>,
    /// Query frequencies partitioned by s-term under `doc_freq`.
    pub sterm: StermFrequencyKnowledge,
    /// Conjunctions of the issued dimensions whose s-term is each keyword.
    pub m_tilde: Vec<u64>,
}

/// Assemble auxiliary knowledge from the attacker's index and the query
/// distribution it believes the client follows.
pub fn build_aux_knowledge(aux_index: &InvertedIndex, overall: &FrequencyModel, dims: &[usize]) -> Result<AuxKnowledge> {
    if aux_index.n_docs() == 0 {
        return Err(Error::EmptyAuxDataset);
    }
    if aux_index.n_keywords() != overall.n() {
        return Err(Error::param(
            "aux_index",
            alloc::format!("{} keywords but the frequency table covers {}", aux_index.n_keywords(), overall.n()),
        ));
    }
    let doc_freq = aux_index.doc_frequencies();
    let n_docs = aux_index.n_docs();
    Ok(AuxKnowledge {
        n_docs,
        volume_fraction: doc_freq.iter().map(|&c| c as f64 / n_docs as f64).collect(),
        sterm: derive_sterm_frequencies(overall, &doc_freq)?,
        m_tilde: sterm_combination_counts(&doc_freq, dims),
        doc_freq,
    })
}

/// Keyword volume fractions clamped away from 0 and 1.
pub fn build_aux_volumes(aux_index: &InvertedIndex) -> Vec<f64> {
    let n_docs = aux_index.n_docs().max(1) as f64;
    aux_index.postings().iter().map(|p| clamp_prob(p.len() as f64 / n_docs)).collect()
}

/// Probability that an obfuscated document lists a keyword.
pub fn adapt_clrz_volumes(volumes: &[f64], tpr: f64, fpr: f64) -> Vec<f64> {
    volumes.iter().map(|&v| v * tpr + (1.0 - v) * fpr).collect()
}

/// Obfuscated co-occurrence of two conjunctions of dimensions `d_g` and
/// `d_h`, given the probability `both` that a document matches both, the
/// probabilities `only_g`/`only_h` that it matches exactly one, and the
/// probability `neither` that it matches neither.
///
/// With equal dimensions `d` the mixed terms collapse to
/// `TPR^d FPR^d (1 - both - neither)`.
#[allow(clippy::too_many_arguments)]
pub fn clrz_pair_probability(
    both: f64,
    only_g: f64,
    only_h: f64,
    neither: f64,
    d_g: u32,
    d_h: u32,
    tpr: f64,
    fpr: f64,
) -> f64 {
    let d = d_g + d_h;
    powi(tpr, d) * both
        + powi(fpr, d) * neither
        + powi(tpr, d_g) * powi(fpr, d_h) * only_g
        + powi(tpr, d_h) * powi(fpr, d_g) * only_h
}

/// Obfuscated probability that a document matches one conjunction of
/// dimension `d`, given its unobfuscated probability `v`.
pub fn clrz_single_probability(v: f64, d: u32, tpr: f64, fpr: f64) -> f64 {
    powi(tpr, d) * v + powi(fpr, d) * (1.0 - v)
}

/// Entrywise adjustment of a co-occurrence matrix for an obfuscated index,
/// for conjunctions of a single dimension `d`.
pub fn adapt_clrz_cooccurrence(v_prime: &[Vec<f64>], v_not: &[Vec<f64>], tpr: f64, fpr: f64, d: u32) -> Result<Vec<Vec<f64>>> {
    let n = v_prime.len();
    if v_not.len() != n || v_prime.iter().chain(v_not).any(|r| r.len() != n) {
        return Err(Error::param("v_not", "matrix shapes differ"));
    }
    let td = powi(tpr, d);
    let fd = powi(fpr, d);
    let mut out = vec![vec![0.0; n]; n];
    for g in 0..n {
        for h in 0..n {
            let (v, not) = (v_prime[g][h], v_not[g][h]);
            let p = if g == h {
                td * v + fd * not
            } else {
                td * td * v + fd * fd * not + td * fd * (1.0 - v - not)
            };
            if !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&p) || !p.is_finite() {
                return Err(Error::ProbabilityOutOfRange(p));
            }
            out[g][h] = p;
        }
    }
    Ok(out)
}

/// Duplicate documents round-robin until the index holds `target_size`
/// documents, then pad posting lists to powers of `x`.
pub fn adapt_seal(aux_index: &InvertedIndex, x: u32, target_size: usize) -> Result<InvertedIndex> {
    if aux_index.n_docs() == 0 {
        return Err(Error::EmptyAuxDataset);
    }
    if x < 2 {
        return Err(Error::param("x", "padding base must be at least 2"));
    }
    let originals = aux_index.doc_ids();
    let mut doc_ids = originals.to_vec();
    let mut postings = aux_index.postings().to_vec();
    let mut next: DocId = aux_index.max_doc_id().unwrap_or(0) + 1;
    let mut i = 0;
    while doc_ids.len() < target_size {
        let source = originals[i % originals.len()];
        for p in postings.iter_mut() {
            if p.binary_search(&source).is_ok() {
                p.push(next);
            }
        }
        doc_ids.push(next);
        next += 1;
        i += 1;
    }
    pad_index(&InvertedIndex::from_parts(doc_ids, postings)?, x)
}

/// Dense clamped co-occurrence matrix of `universe` over the aux index.
pub fn build_cooccurrence(aux_index: &InvertedIndex, universe: &[Conjunction]) -> Vec<Vec<f64>> {
    let set = CandidateSet::new(&aux_index.incidence(), aux_index.n_docs(), 0, universe.to_vec(), vec![0.0; universe.len()]);
    (0..universe.len()).map(|g| set.column(g).into_iter().map(clamp_prob).collect()).collect()
}

/// Pruned candidates of one s-term together with the document sets needed
/// to evaluate their co-occurrence on demand.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub sterm: u32,
    pub conjs: Vec<Conjunction>,
    /// Frequencies conditioned on the s-term.
    pub freqs: Vec<f64>,
    pub n_docs: usize,
    sets: Vec<DocSet>,
    sizes: Vec<usize>,
    clrz: Option<(f64, f64)>,
}

impl CandidateSet {
    pub fn new(incidence: &[DocSet], n_docs: usize, sterm: u32, conjs: Vec<Conjunction>, freqs: Vec<f64>) -> Self {
        let sets: Vec<DocSet> = conjs
            .iter()
            .map(|c| {
                let (&first, rest) = c.keywords().split_first().expect("non-empty");
                let mut s = incidence[first as usize].clone();
                for &k in rest {
                    s.intersect_with(&incidence[k as usize]);
                }
                s
            })
            .collect();
        let sizes = sets.iter().map(DocSet::len).collect();
        Self { sterm, conjs, freqs, n_docs, sets, sizes, clrz: None }
    }

    /// Evaluate co-occurrences as seen through an obfuscated index.
    pub fn with_clrz(mut self, tpr: f64, fpr: f64) -> Self {
        self.clrz = Some((tpr, fpr));
        self
    }

    pub fn len(&self) -> usize {
        self.conjs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conjs.is_empty()
    }

    pub fn intersection(&self, g: usize, h: usize) -> usize {
        if g == h {
            self.sizes[g]
        } else {
            self.sets[g].intersection_len(&self.sets[h])
        }
    }

    /// Unclamped probability that a document matches both candidates.
    pub fn probability(&self, g: usize, h: usize) -> f64 {
        let nd = self.n_docs as f64;
        let both = self.intersection(g, h) as f64 / nd;
        match self.clrz {
            None => both,
            Some((tpr, fpr)) => {
                let dg = self.conjs[g].dim() as u32;
                if g == h {
                    return clrz_single_probability(both, dg, tpr, fpr);
                }
                let dh = self.conjs[h].dim() as u32;
                let only_g = self.sizes[g] as f64 / nd - both;
                let only_h = self.sizes[h] as f64 / nd - both;
                let neither = 1.0 - both - only_g - only_h;
                clrz_pair_probability(both, only_g, only_h, neither, dg, dh, tpr, fpr)
            }
        }
    }

    /// Unclamped probabilities against candidate `h` for every candidate.
    pub fn column(&self, h: usize) -> Vec<f64> {
        (0..self.len()).map(|g| self.probability(g, h)).collect()
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|g| self.column(g)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(ks: &[u32]) -> Conjunction {
        Conjunction::new(ks).unwrap()
    }

    fn appendix_index() -> InvertedIndex {
        InvertedIndex::from_parts(
            (0..10).collect(),
            vec![vec![0, 1, 2], vec![3], vec![0, 1, 2, 3, 4], vec![0, 1, 2, 3, 4, 5]],
        )
        .unwrap()
    }

    #[test]
    fn volumes_and_clamps() {
        assert_eq!(build_aux_volumes(&appendix_index()), vec![0.3, 0.1, 0.5, 0.6]);
        let edge = InvertedIndex::from_parts(vec![1, 2], vec![vec![1, 2], vec![]]).unwrap();
        assert_eq!(build_aux_volumes(&edge), vec![1.0 - 1e-6, 1e-6]);
    }

    #[test]
    fn clrz_volume_adaptation() {
        assert_eq!(adapt_clrz_volumes(&[0.3, 0.0], 1.0, 0.0), vec![0.3, 0.0]);
        let v = adapt_clrz_volumes(&[0.1, 0.0], 0.999, 0.01);
        assert!((v[0] - 0.1089).abs() < 1e-12);
        assert_eq!(v[1], 0.01);
    }

    #[test]
    fn clrz_cooccurrence_adaptation() {
        let vp = vec![vec![0.2, 0.0], vec![0.0, 0.3]];
        let vn = vec![vec![0.8, 0.5], vec![0.5, 0.7]];
        assert_eq!(adapt_clrz_cooccurrence(&vp, &vn, 1.0, 0.0, 2).unwrap(), vp);
        let a = adapt_clrz_cooccurrence(&vp, &vn, 0.9, 0.1, 2).unwrap();
        assert!((a[0][0] - 0.170).abs() < 1e-12);
        let disjoint = adapt_clrz_cooccurrence(&[vec![0.5, 0.0], vec![0.0, 0.5]], &[vec![0.5, 1.0], vec![1.0, 0.5]], 0.8, 0.3, 1).unwrap();
        assert!((disjoint[0][1] - 0.09).abs() < 1e-12);
        assert!(adapt_clrz_cooccurrence(&[vec![1.5]], &[vec![0.0]], 1.0, 0.0, 1).is_err());
    }

    #[test]
    fn mixed_dimension_rule_matches_equal_dimension_form() {
        let (both, only_g, only_h, neither) = (0.1, 0.15, 0.25, 0.5);
        let (tpr, fpr) = (0.9, 0.2);
        let mixed = clrz_pair_probability(both, only_g, only_h, neither, 2, 2, tpr, fpr);
        let d = 2;
        let paper = powi(tpr, 2 * d) * both + powi(fpr, 2 * d) * neither + powi(tpr, d) * powi(fpr, d) * (1.0 - both - neither);
        assert!((mixed - paper).abs() < 1e-15);
    }

    #[test]
    fn lazy_candidates_match_brute_force() {
        let idx = InvertedIndex::from_parts(
            vec![1, 2, 3, 4, 5],
            vec![vec![1, 2, 3], vec![2, 3, 4], vec![1, 3, 5], vec![3, 4, 5]],
        )
        .unwrap();
        let universe = vec![c(&[0, 1]), c(&[0, 2]), c(&[0]), c(&[0, 3])];
        let m = build_cooccurrence(&idx, &universe);
        for (g, a) in universe.iter().enumerate() {
            for (h, b) in universe.iter().enumerate() {
                let count = idx
                    .doc_ids()
                    .iter()
                    .filter(|d| a.keywords().iter().chain(b.keywords()).all(|&k| idx.posting(k).contains(d)))
                    .count();
                assert_eq!(m[g][h], clamp_prob(count as f64 / 5.0));
                assert_eq!(m[g][h], m[h][g]);
            }
        }
        // [0,1] matches {2,3}, [0,2] matches {1,3}.
        assert_eq!(m[0][1], 0.2);
        let disjoint = build_cooccurrence(&idx, &[c(&[1, 2]), c(&[0, 1, 2, 3])]);
        assert_eq!(disjoint[1][1], 0.2);
        let none = build_cooccurrence(&InvertedIndex::from_parts(vec![1, 2], vec![vec![1], vec![2]]).unwrap(), &[c(&[0]), c(&[1])]);
        assert_eq!(none[0][1], 1e-6);
    }

    #[test]
    fn identity_clrz_candidates() {
        let idx = appendix_index();
        let conjs = vec![c(&[0, 2]), c(&[0, 3]), c(&[1, 3])];
        let plain = CandidateSet::new(&idx.incidence(), idx.n_docs(), 0, conjs.clone(), vec![0.0; 3]);
        let adapted = plain.clone().with_clrz(1.0, 0.0);
        assert_eq!(plain.dense(), adapted.dense());
    }

    #[test]
    fn seal_adaptation() {
        let idx = InvertedIndex::from_parts(vec![1, 2, 3, 4, 5], vec![vec![1, 2], vec![3]]).unwrap();
        let doubled = adapt_seal(&idx, 2, 10).unwrap();
        assert_eq!(doubled.n_docs(), 10);
        assert_eq!(doubled.volume(0), 4);
        assert_eq!(doubled.volume(1), 2);
        assert_eq!(adapt_seal(&idx, 2, 5).unwrap(), idx);
        let ten = InvertedIndex::from_parts((1..=10).collect(), vec![(1..=10).collect()]).unwrap();
        assert_eq!(adapt_seal(&ten, 3, 10).unwrap().volume(0), 27);
        let empty = InvertedIndex::from_parts(vec![], vec![vec![]]).unwrap();
        assert_eq!(adapt_seal(&empty, 2, 4), Err(Error::EmptyAuxDataset));
    }

    #[test]
    fn knowledge_from_appendix_fixture() {
        let idx = appendix_index();
        let model = FrequencyModel::from_weights(4, [(c(&[0, 2]), 1.0), (c(&[1, 3]), 1.0)]).unwrap();
        let aux = build_aux_knowledge(&idx, &model, &[2]).unwrap();
        assert_eq!(aux.volume_fraction, vec![0.3, 0.1, 0.5, 0.6]);
        assert_eq!(aux.m_tilde, vec![2, 3, 1, 0]);
        assert_eq!(aux.sterm.sterm_freq, vec![0.5, 0.5, 0.0, 0.0]);
    }
}
