// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

//! Query-frequency knowledge: conjunction tables, higher-dimension
//! approximation from single and pairwise frequencies, s-term partitioning
//! and simulated staleness.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma, LogNormal};

use crate::error::{Error, Result};
use crate::numeric::{stable_sum, StableSum, SUM_TOL};
use crate::rng;

/// Largest supported conjunction dimension.
pub const MAX_DIM: usize = 5;

/// A sorted set of 1..=MAX_DIM distinct keyword indices.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Conjunction {
    len: u8,
    ids: [u32; MAX_DIM],
}

impl Conjunction {
    pub fn new(keywords: &[u32]) -> Result<Self> {
        if keywords.is_empty() || keywords.len() > MAX_DIM {
            return Err(Error::InvalidConjunction(alloc::format!(
                "dimension {} outside 1..={MAX_DIM}",
                keywords.len()
            )));
        }
        let mut ids = [0u32; MAX_DIM];
        ids[..keywords.len()].copy_from_slice(keywords);
        ids[..keywords.len()].sort_unstable();
        if ids[..keywords.len()].windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConjunction(alloc::format!("repeated keyword in {keywords:?}")));
        }
        Ok(Self { len: keywords.len() as u8, ids })
    }

    pub fn single(k: u32) -> Self {
        let mut ids = [0u32; MAX_DIM];
        ids[0] = k;
        Self { len: 1, ids }
    }

    pub fn pair(a: u32, b: u32) -> Self {
        Self::new(&[a, b]).expect("distinct pair")
    }

    #[inline]
    pub fn keywords(&self) -> &[u32] {
        &self.ids[..self.len as usize]
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.len as usize
    }

    pub fn contains(&self, k: u32) -> bool {
        self.keywords().binary_search(&k).is_ok()
    }

    /// Number of keywords shared with `other`.
    pub fn overlap(&self, other: &Conjunction) -> usize {
        self.keywords().iter().filter(|k| other.contains(**k)).count()
    }

}

impl fmt::Debug for Conjunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.keywords())
    }
}

impl fmt::Display for Conjunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, k) in self.keywords().iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}")?;
        }
        Ok(())
    }
}

/// The s-term of a conjunction: the keyword with the fewest documents, ties
/// going to the smaller keyword index.
pub fn sterm_of(conj: &Conjunction, doc_freq: &[usize]) -> u32 {
    *conj
        .keywords()
        .iter()
        .min_by_key(|&&k| (doc_freq[k as usize], k))
        .expect("conjunctions are non-empty")
}

/// Calls `f` with every `k`-subset of `0..n` in lexicographic order.
pub fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[u32])) {
    if k == 0 || k > n {
        return;
    }
    let mut idx: Vec<u32> = (0..k as u32).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if (idx[i] as usize) < n - k + i {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// A normalized probability table over conjunctions of one keyword universe.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyModel {
    n: usize,
    d_max: usize,
    table: BTreeMap<Conjunction, f64>,
    epoch: u32,
}

impl FrequencyModel {
    /// Build from non-negative weights, rescaling them to sum to one.
    pub fn from_weights(n: usize, entries: impl IntoIterator<Item = (Conjunction, f64)>) -> Result<Self> {
        let mut table = BTreeMap::new();
        let mut d_max = 0;
        for (c, w) in entries {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::ProbabilityOutOfRange(w));
            }
            if let Some(&bad) = c.keywords().iter().find(|&&k| k as usize >= n) {
                return Err(Error::KeywordOutOfRange { keyword: bad, n });
            }
            d_max = d_max.max(c.dim());
            *table.entry(c).or_insert(0.0) += w;
        }
        let total = stable_sum(table.values().copied());
        if total <= 0.0 {
            return Err(Error::ZeroMass(0));
        }
        if (total - 1.0).abs() > 0.0 {
            for v in table.values_mut() {
                *v /= total;
            }
        }
        Ok(Self { n, d_max, table, epoch: 0 })
    }

    /// Build from probabilities that must already sum to one within `tol`;
    /// the result is renormalized exactly.
    pub fn from_probabilities(
        n: usize,
        entries: impl IntoIterator<Item = (Conjunction, f64)>,
        tol: f64,
    ) -> Result<Self> {
        let entries: Vec<(Conjunction, f64)> = entries.into_iter().collect();
        let total = stable_sum(entries.iter().map(|e| e.1));
        if (total - 1.0).abs() > tol {
            return Err(Error::param("frequencies", alloc::format!("sum {total} is not 1 within {tol}")));
        }
        Self::from_weights(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn with_epoch(mut self, epoch: u32) -> Self {
        self.epoch = epoch;
        self
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn get(&self, c: &Conjunction) -> f64 {
        self.table.get(c).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Conjunction, f64)> + '_ {
        self.table.iter().map(|(c, p)| (c, *p))
    }

    pub fn total(&self) -> f64 {
        stable_sum(self.table.values().copied())
    }

    pub fn dimension_mass(&self, dim: usize) -> f64 {
        stable_sum(self.table.iter().filter(|(c, _)| c.dim() == dim).map(|(_, p)| *p))
    }

    /// Total-variation distance to another table over the union of supports.
    pub fn tv_distance(&self, other: &FrequencyModel) -> f64 {
        let mut s = StableSum::new();
        for (c, p) in &self.table {
            s.add((p - other.get(c)).abs());
        }
        for (c, q) in &other.table {
            if !self.table.contains_key(c) {
                s.add(q.abs());
            }
        }
        s.value() / 2.0
    }
}

/// Synthetic single and pairwise query frequencies.
///
/// Keyword popularity follows Zipf(`zipf_s`) over a seeded random ranking.
/// A pair's weight is the product of its members' popularities times a
/// log-normal affinity, which yields a sharp head and a long near-zero tail.
/// Half of the mass goes to single-keyword queries and half to pairs
/// (`d_max >= 2` and `n >= 2`), otherwise everything goes to singles.
pub fn gen_synthetic_frequencies(n: usize, d_max: usize, zipf_s: f64, seed: u64) -> Result<FrequencyModel> {
    if zipf_s.is_nan() || zipf_s <= 0.0 {
        return Err(Error::param("zipf_s", "must be positive"));
    }
    if n == 0 {
        return Err(Error::param("n", "universe must be non-empty"));
    }
    if d_max == 0 {
        return Err(Error::param("d_max", "must be at least 1"));
    }
    let mut r = rng::stage_rng(seed, "frequencies", 0);
    let mut rank: Vec<usize> = (0..n).collect();
    rank.shuffle(&mut r);
    let pop: Vec<f64> = rank.iter().map(|&k| libm::pow(k as f64 + 1.0, -zipf_s)).collect();

    let singles_total = stable_sum(pop.iter().copied());
    let with_pairs = d_max >= 2 && n >= 2;
    let single_share = if with_pairs { 0.5 } else { 1.0 };
    let mut entries: Vec<(Conjunction, f64)> = pop
        .iter()
        .enumerate()
        .map(|(k, w)| (Conjunction::single(k as u32), single_share * w / singles_total))
        .collect();

    if with_pairs {
        let affinity = LogNormal::new(0.0, 1.5).expect("valid log-normal");
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        for a in 0..n {
            for b in a + 1..n {
                let w = pop[a] * pop[b] * affinity.sample(&mut r);
                pairs.push((Conjunction::pair(a as u32, b as u32), w));
            }
        }
        let pair_total = stable_sum(pairs.iter().map(|p| p.1));
        entries.extend(pairs.into_iter().map(|(c, w)| (c, 0.5 * w / pair_total)));
    }
    FrequencyModel::from_weights(n, entries)
}

/// How a higher-dimension conjunction's probability is composed from
/// lower-dimension ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HighDimRule {
    /// `P(X|Y)·P(X|Z)·P(Y∩Z) / P(X)`: treats `Y` and `Z` as conditionally
    /// independent given `X`. Exact when all keywords are independent.
    #[default]
    ConditionalIndependence,
    /// `P(X|Y)·P(X|Z)·P(Y∩Z)` without the `1/P(X)` factor.
    Unscaled,
}

fn cond(joint: f64, given: f64) -> f64 {
    if given > 0.0 {
        joint / given
    } else {
        0.0
    }
}

/// Unnormalized estimates for every conjunction of dimension `3..=d_target`
/// over the model's universe, keyed by conjunction.
///
/// For a triple `{A, B, C}` the estimate averages the three decompositions
/// with `X` ranging over `A`, `B`, `C` and `{Y, Z}` the other two. For four
/// keywords `A<B<C<D` the single decomposition `X = {C, D}`, `Y = A`,
/// `Z = B` is used, and for five `X = {C, D, E}`. Lower-dimension terms
/// are the model's own singles and pairs and the unnormalized estimates of
/// the previous dimension.
pub fn approximate_high_dim_raw(
    model: &FrequencyModel,
    d_target: usize,
    rule: HighDimRule,
) -> Result<BTreeMap<Conjunction, f64>> {
    let marginals: BTreeMap<Conjunction, f64> =
        model.iter().filter(|(c, _)| c.dim() <= 2).map(|(c, p)| (*c, p)).collect();
    approximate_from_marginals(model.n(), &marginals, d_target, rule)
}

/// Same as [`approximate_high_dim_raw`] over an arbitrary table of single and
/// pairwise event probabilities (`P(A)`, `P(A∩B)`), which need not sum to one.
pub fn approximate_from_marginals(
    n: usize,
    marginals: &BTreeMap<Conjunction, f64>,
    d_target: usize,
    rule: HighDimRule,
) -> Result<BTreeMap<Conjunction, f64>> {
    if !(3..=MAX_DIM).contains(&d_target) {
        return Err(Error::param("d_target", alloc::format!("must lie in 3..={MAX_DIM}")));
    }
    let mut known: BTreeMap<Conjunction, f64> =
        marginals.iter().filter(|(c, _)| c.dim() <= 2).map(|(c, p)| (*c, *p)).collect();
    let p = |known: &BTreeMap<Conjunction, f64>, ks: &[u32]| -> f64 {
        known.get(&Conjunction::new(ks).expect("valid")).copied().unwrap_or(0.0)
    };
    let combine = |x: f64, x_given_y: f64, x_given_z: f64, yz: f64| -> f64 {
        let base = x_given_y * x_given_z * yz;
        match rule {
            HighDimRule::ConditionalIndependence => cond(base, x),
            HighDimRule::Unscaled => base,
        }
    };
    let mut out = BTreeMap::new();
    for dim in 3..=d_target {
        let mut level = Vec::new();
        for_each_combination(n, dim, |ks| {
            let est = match dim {
                3 => {
                    let mut acc = 0.0;
                    for xi in 0..3 {
                        let x = ks[xi];
                        let others: Vec<u32> = ks.iter().copied().filter(|&k| k != x).collect();
                        let (y, z) = (others[0], others[1]);
                        let px = p(&known, &[x]);
                        let x_given_y = cond(p(&known, &[x, y]), p(&known, &[y]));
                        let x_given_z = cond(p(&known, &[x, z]), p(&known, &[z]));
                        acc += combine(px, x_given_y, x_given_z, p(&known, &[y, z]));
                    }
                    acc / 3.0
                }
                _ => {
                    let (a, b, tail) = (ks[0], ks[1], &ks[2..]);
                    let px = p(&known, tail);
                    let with = |k: u32| {
                        let mut v = vec![k];
                        v.extend_from_slice(tail);
                        p(&known, &v)
                    };
                    let x_given_a = cond(with(a), p(&known, &[a]));
                    let x_given_b = cond(with(b), p(&known, &[b]));
                    combine(px, x_given_a, x_given_b, p(&known, &[a, b]))
                }
            };
            level.push((Conjunction::new(ks).expect("valid"), est));
        });
        for (c, v) in level {
            known.insert(c, v);
            out.insert(c, v);
        }
    }
    Ok(out)
}

/// The model extended with estimated conjunctions up to `d_target` and
/// renormalized over the full table.
pub fn approximate_high_dim(model: &FrequencyModel, d_target: usize, rule: HighDimRule) -> Result<FrequencyModel> {
    let higher = approximate_high_dim_raw(model, d_target, rule)?;
    let entries = model
        .iter()
        .filter(|(c, _)| c.dim() <= 2)
        .map(|(c, p)| (*c, p))
        .chain(higher);
    Ok(FrequencyModel::from_weights(model.n(), entries)?.with_epoch(model.epoch()))
}

/// Strength of the simulated drift: the Dirichlet concentration at `T·drift = 1`.
pub const DRIFT_CONCENTRATION: f64 = 1e5;

/// Simulated staleness of the attacker's snapshot.
///
/// Each non-zero entry `p` is redrawn as `Gamma(κ·p)` with
/// `κ = DRIFT_CONCENTRATION / (T·drift)` and the table is renormalized, i.e.
/// the table is resampled from a Dirichlet centred on itself whose spread
/// grows with `T·drift`.
pub fn apply_temporal_offset(model: &FrequencyModel, t: u32, drift: f64, seed: u64) -> Result<FrequencyModel> {
    if drift.is_nan() || drift < 0.0 {
        return Err(Error::param("drift", "must be non-negative"));
    }
    if t == 0 || drift == 0.0 {
        return Ok(model.clone());
    }
    let kappa = DRIFT_CONCENTRATION / (f64::from(t) * drift);
    let mut r = rng::stage_rng(seed, "temporal-offset", u64::from(t));
    let entries: Vec<(Conjunction, f64)> = model
        .iter()
        .map(|(c, p)| {
            let v = if p > 0.0 {
                Gamma::new(kappa * p, 1.0).map(|g| g.sample(&mut r)).unwrap_or(0.0)
            } else {
                0.0
            };
            (*c, v)
        })
        .collect();
    Ok(FrequencyModel::from_weights(model.n(), entries)?.with_epoch(t))
}

/// One entry of an s-term partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StermEntry {
    pub conj: Conjunction,
    /// Probability in the overall table.
    pub raw: f64,
    /// Probability conditioned on the s-term.
    pub normalized: f64,
}

/// The overall table partitioned by s-term keyword.
#[derive(Debug, Clone, PartialEq)]
pub struct StermFrequencyKnowledge {
    /// Probability that a query's s-term is keyword `i`.
    pub sterm_freq: Vec<f64>,
    /// Per keyword, its conjunctions sorted by descending probability (ties
    /// by conjunction order).
    pub per_sterm: Vec<Vec<StermEntry>>,
}

impl StermFrequencyKnowledge {
    /// Keywords that are never an s-term under this table.
    pub fn empty_sterms(&self) -> Vec<u32> {
        (0..self.sterm_freq.len() as u32).filter(|&i| self.sterm_freq[i as usize] == 0.0).collect()
    }
}

/// Partition `overall` by s-term (minimal `doc_freq`, smaller index on ties),
/// sum each part into the s-term frequency vector and normalize each part.
pub fn derive_sterm_frequencies(overall: &FrequencyModel, doc_freq: &[usize]) -> Result<StermFrequencyKnowledge> {
    let n = overall.n();
    if doc_freq.len() != n {
        return Err(Error::param("doc_freq", alloc::format!("length {} for a universe of {n}", doc_freq.len())));
    }
    let mut parts: Vec<Vec<(Conjunction, f64)>> = vec![Vec::new(); n];
    for (c, p) in overall.iter() {
        parts[sterm_of(c, doc_freq) as usize].push((*c, p));
    }
    let mut sterm_freq = Vec::with_capacity(n);
    let mut per_sterm = Vec::with_capacity(n);
    for mut part in parts {
        let total = stable_sum(part.iter().map(|e| e.1));
        sterm_freq.push(total);
        part.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        per_sterm.push(
            part.into_iter()
                .map(|(conj, raw)| StermEntry {
                    conj,
                    raw,
                    normalized: if total > 0.0 { raw / total } else { 0.0 },
                })
                .collect(),
        );
    }
    debug_assert!((stable_sum(sterm_freq.iter().copied()) - overall.total()).abs() < SUM_TOL);
    Ok(StermFrequencyKnowledge { sterm_freq, per_sterm })
}

/// Number of conjunctions with dimension in `dims` whose s-term is each
/// keyword, counted combinatorially over the whole universe.
pub fn sterm_combination_counts(doc_freq: &[usize], dims: &[usize]) -> Vec<u64> {
    let n = doc_freq.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&k| (doc_freq[k], k));
    let mut counts = vec![0u64; n];
    for (rank, &k) in order.iter().enumerate() {
        let after = (n - 1 - rank) as u64;
        counts[k] = dims.iter().map(|&d| crate::numeric::choose(after, d as u64 - 1)).sum();
    }
    counts
}

/// Human-readable conjunction using keyword names.
pub fn describe(conj: &Conjunction, names: &[String]) -> String {
    let mut s = String::new();
    for (i, k) in conj.keywords().iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&names[*k as usize]);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(ks: &[u32]) -> Conjunction {
        Conjunction::new(ks).unwrap()
    }

    #[test]
    fn conjunction_normalizes_and_validates() {
        assert_eq!(c(&[3, 1]).keywords(), &[1, 3]);
        assert!(Conjunction::new(&[]).is_err());
        assert!(Conjunction::new(&[1, 1]).is_err());
        assert!(Conjunction::new(&[0, 1, 2, 3, 4, 5]).is_err());
        assert_eq!(alloc::format!("{}", c(&[2, 0])), "0,2");
    }

    #[test]
    fn combinations_enumerate_in_order() {
        let mut seen = Vec::new();
        for_each_combination(4, 2, |ks| seen.push(ks.to_vec()));
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        let mut count = 0;
        for_each_combination(100, 3, |_| count += 1);
        assert_eq!(count, 161_700);
        let mut none = 0;
        for_each_combination(2, 3, |_| none += 1);
        assert_eq!(none, 0);
    }

    #[test]
    fn synthetic_n2_has_three_entries() {
        let m = gen_synthetic_frequencies(2, 2, 1.0, 3).unwrap();
        assert_eq!(m.len(), 3);
        assert!((m.total() - 1.0).abs() < SUM_TOL);
        let singles = gen_synthetic_frequencies(1, 2, 1.0, 3).unwrap();
        assert_eq!(singles.len(), 1);
        assert!(gen_synthetic_frequencies(5, 2, 0.0, 1).is_err());
        assert!(gen_synthetic_frequencies(5, 2, -1.0, 1).is_err());
    }

    #[test]
    fn synthetic_singles_follow_zipf_ranking() {
        let m = gen_synthetic_frequencies(10, 2, 1.0, 9).unwrap();
        let mut singles: Vec<f64> = (0..10).map(|k| m.get(&Conjunction::single(k))).collect();
        singles.sort_by(|a, b| b.total_cmp(a));
        // rank r carries weight proportional to 1/(r+1)
        for r in 1..10 {
            let ratio = singles[0] / singles[r];
            assert!((ratio - (r as f64 + 1.0)).abs() < 1e-9, "rank {r}: {ratio}");
        }
    }

    #[test]
    fn synthetic_pairs_have_sharp_head_and_long_tail() {
        let m = gen_synthetic_frequencies(300, 2, 1.0, 1).unwrap();
        let mut pairs: Vec<f64> = m.iter().filter(|(c, _)| c.dim() == 2).map(|(_, p)| p).collect();
        pairs.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(pairs.len(), 44_850);
        // Same order of magnitude as the head of real conjunctive query logs.
        assert!(pairs[0] > 1e-3 && pairs[0] < 5e-2, "head {}", pairs[0]);
        assert!(pairs[pairs.len() / 2] < pairs[0] * 1e-2);
    }

    #[test]
    fn approximation_is_exact_for_independent_keywords() {
        let marginals: BTreeMap<Conjunction, f64> = [
            (c(&[0]), 0.5),
            (c(&[1]), 0.5),
            (c(&[2]), 0.5),
            (c(&[0, 1]), 0.25),
            (c(&[0, 2]), 0.25),
            (c(&[1, 2]), 0.25),
        ]
        .into_iter()
        .collect();
        let raw = approximate_from_marginals(3, &marginals, 3, HighDimRule::ConditionalIndependence).unwrap();
        assert!((raw[&c(&[0, 1, 2])] - 0.125).abs() < 1e-12);
        // Without the 1/P(X) factor each decomposition carries an extra P(X).
        let unscaled = approximate_from_marginals(3, &marginals, 3, HighDimRule::Unscaled).unwrap();
        assert!((unscaled[&c(&[0, 1, 2])] - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn zero_pair_zeroes_every_triple_containing_it() {
        let m = FrequencyModel::from_weights(
            4,
            (0..4)
                .map(|k| (Conjunction::single(k), 0.1))
                .chain([(c(&[0, 1]), 0.0), (c(&[0, 2]), 0.1), (c(&[1, 2]), 0.1), (c(&[0, 3]), 0.1), (c(&[1, 3]), 0.1), (c(&[2, 3]), 0.1)]),
        )
        .unwrap();
        for rule in [HighDimRule::ConditionalIndependence, HighDimRule::Unscaled] {
            let raw = approximate_high_dim_raw(&m, 3, rule).unwrap();
            assert_eq!(raw[&c(&[0, 1, 2])], 0.0);
            assert_eq!(raw[&c(&[0, 1, 3])], 0.0);
            assert!(raw[&c(&[0, 2, 3])] > 0.0);
        }
    }

    #[test]
    fn zero_marginal_conditions_to_zero() {
        let m = FrequencyModel::from_weights(
            3,
            [(c(&[0]), 0.0), (c(&[1]), 0.5), (c(&[2]), 0.5), (c(&[1, 2]), 0.2)],
        )
        .unwrap();
        let raw = approximate_high_dim_raw(&m, 3, HighDimRule::ConditionalIndependence).unwrap();
        assert_eq!(raw[&c(&[0, 1, 2])], 0.0);
    }

    #[test]
    fn approximate_high_dim_renormalizes_full_table() {
        let base = gen_synthetic_frequencies(8, 4, 1.0, 2).unwrap();
        let full = approximate_high_dim(&base, 4, HighDimRule::default()).unwrap();
        assert_eq!(full.len(), 8 + 28 + 56 + 70);
        assert!((full.total() - 1.0).abs() < SUM_TOL);
        assert!(full.iter().all(|(_, p)| p >= 0.0));
        assert!(approximate_high_dim(&base, 2, HighDimRule::default()).is_err());
    }

    fn appendix_fixture() -> (FrequencyModel, Vec<usize>) {
        // Ten queries over w1..w4 (indices 0..3), document frequencies [3,1,5,6].
        let queries: [&[u32]; 10] =
            [&[3], &[0, 2], &[1, 3], &[1, 2], &[2, 3], &[1, 2, 3], &[0, 3], &[2, 3], &[1, 3], &[2, 3]];
        let mut counts: BTreeMap<Conjunction, u32> = BTreeMap::new();
        for q in queries {
            *counts.entry(c(q)).or_default() += 1;
        }
        let table = counts.into_iter().map(|(q, k)| (q, f64::from(k) / 10.0));
        (FrequencyModel::from_probabilities(4, table, 1e-9).unwrap(), vec![3, 1, 5, 6])
    }

    #[test]
    fn sterm_frequencies_of_the_worked_example() {
        let (m, df) = appendix_fixture();
        let k = derive_sterm_frequencies(&m, &df).unwrap();
        assert_eq!(k.sterm_freq, vec![0.2, 0.4, 0.3, 0.1]);
        for part in &k.per_sterm {
            assert!((stable_sum(part.iter().map(|e| e.normalized)) - 1.0).abs() < SUM_TOL);
        }
        for (i, part) in k.per_sterm.iter().enumerate() {
            assert!(part.iter().all(|e| sterm_of(&e.conj, &df) == i as u32));
        }
    }

    #[test]
    fn sterm_frequencies_of_singles_model_equal_singles() {
        let m = FrequencyModel::from_weights(3, [(c(&[0]), 0.2), (c(&[1]), 0.3), (c(&[2]), 0.5)]).unwrap();
        let k = derive_sterm_frequencies(&m, &[5, 1, 3]).unwrap();
        assert_eq!(k.sterm_freq, vec![0.2, 0.3, 0.5]);
    }

    #[test]
    fn forced_partition_of_a_single_pair() {
        let m = FrequencyModel::from_weights(2, [(c(&[0, 1]), 1.0)]).unwrap();
        let k = derive_sterm_frequencies(&m, &[2, 7]).unwrap();
        assert_eq!(k.sterm_freq, vec![1.0, 0.0]);
        assert_eq!(k.per_sterm[0], vec![StermEntry { conj: c(&[0, 1]), raw: 1.0, normalized: 1.0 }]);
        assert!(k.per_sterm[1].is_empty());
        assert_eq!(k.empty_sterms(), vec![1]);
    }

    #[test]
    fn sterm_tie_goes_to_smaller_index() {
        assert_eq!(sterm_of(&c(&[4, 2]), &[0, 0, 5, 0, 5]), 2);
        assert_eq!(sterm_of(&c(&[0, 2]), &[3, 1, 5, 6]), 0);
        assert_eq!(sterm_of(&c(&[3]), &[3, 1, 5, 6]), 3);
    }

    #[test]
    fn combination_counts_match_enumeration() {
        let df = [4usize, 9, 1, 4, 7, 2];
        let dims = [1usize, 2, 3];
        let counts = sterm_combination_counts(&df, &dims);
        let mut brute = [0u64; 6];
        for &d in &dims {
            for_each_combination(6, d, |ks| brute[sterm_of(&c(ks), &df) as usize] += 1);
        }
        assert_eq!(counts, brute.to_vec());
    }

    #[test]
    fn temporal_offset_identities_and_drift() {
        let m = gen_synthetic_frequencies(20, 2, 1.0, 5).unwrap();
        assert_eq!(apply_temporal_offset(&m, 0, 0.5, 1).unwrap(), m);
        assert_eq!(apply_temporal_offset(&m, 200, 0.0, 1).unwrap(), m);
        let a = apply_temporal_offset(&m, 100, 0.01, 7).unwrap();
        let b = apply_temporal_offset(&m, 100, 0.01, 7).unwrap();
        assert_eq!(a, b);
        assert!((a.total() - 1.0).abs() < SUM_TOL);
        let tv100 = m.tv_distance(&a);
        assert!(tv100 > 0.0);
        let tv200 = m.tv_distance(&apply_temporal_offset(&m, 200, 0.01, 7).unwrap());
        assert!(tv200 > tv100);
    }
}
