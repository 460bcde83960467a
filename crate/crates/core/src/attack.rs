// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

//! The three-stage query-recovery attack: candidate pruning, s-term
//! recovery and per-group full recovery.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::assign::{solve_iterative_qap, solve_lap_padded, CostMatrix, QapParams, QuadraticCost};
use crate::auxknow::{adapt_clrz_volumes, adapt_seal, build_aux_knowledge, AuxKnowledge, CandidateSet};
use crate::bitset::DocSet;
use crate::corpus::InvertedIndex;
use crate::error::{Error, Result};
use crate::freqmodel::{Conjunction, FrequencyModel, StermFrequencyKnowledge};
use crate::numeric::{binomial_nll, clamp_prob, ln, stable_sum};
use crate::observe::{build_observations, ObservationSet, TokenGroup};
use crate::querygen::{workload_distribution, QuerySetting};
use crate::rng::derive_seed;
use crate::sse_sim::{DefenseKind, LeakageTrace, TokenId};

/// Output of candidate pruning, indexed by s-term keyword.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneResult {
    /// Retained conjunctions, most frequent first.
    pub universes: Vec<Vec<Conjunction>>,
    /// Frequencies renormalized over each retained universe.
    pub cand_freqs: Vec<Vec<f64>>,
    pub k: Vec<usize>,
    pub m_tilde: Vec<u64>,
    /// `k / m_tilde`, zero where `m_tilde` is zero.
    pub beta: Vec<f64>,
    /// `k / Σ k`.
    pub scaled_m_star: Vec<f64>,
    /// Keywords that can be an s-term but lost every candidate.
    pub emptied: Vec<u32>,
}

impl PruneResult {
    pub fn n_c_eff(&self) -> usize {
        self.k.iter().sum()
    }

    /// Share of the whole conjunction universe that survived.
    pub fn retained_fraction(&self) -> f64 {
        let total: u64 = self.m_tilde.iter().sum();
        if total == 0 {
            0.0
        } else {
            self.n_c_eff() as f64 / total as f64
        }
    }
}

/// Keep, per s-term, the conjunctions whose frequency exceeds `frac / rho`.
pub fn candiprun(knowledge: &StermFrequencyKnowledge, m_tilde: &[u64], rho: usize, frac: f64) -> Result<PruneResult> {
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::param("frac", "must lie in (0, 1]"));
    }
    if rho == 0 {
        return Err(Error::param("rho", "must be at least 1"));
    }
    if m_tilde.len() != knowledge.per_sterm.len() {
        return Err(Error::param("m_tilde", "length differs from the keyword universe"));
    }
    let threshold = frac / rho as f64;
    let n = m_tilde.len();
    let mut out = PruneResult {
        universes: Vec::with_capacity(n),
        cand_freqs: Vec::with_capacity(n),
        k: Vec::with_capacity(n),
        m_tilde: m_tilde.to_vec(),
        beta: Vec::with_capacity(n),
        scaled_m_star: Vec::new(),
        emptied: Vec::new(),
    };
    for (i, entries) in knowledge.per_sterm.iter().enumerate() {
        // Entries are sorted by descending frequency.
        let kept = entries.iter().take_while(|e| e.raw > threshold).count();
        let total = stable_sum(entries[..kept].iter().map(|e| e.raw));
        out.universes.push(entries[..kept].iter().map(|e| e.conj).collect());
        out.cand_freqs.push(entries[..kept].iter().map(|e| e.raw / total).collect());
        out.k.push(kept);
        out.beta.push(if m_tilde[i] == 0 { 0.0 } else { kept as f64 / m_tilde[i] as f64 });
        if kept == 0 && m_tilde[i] > 0 {
            out.emptied.push(i as u32);
        }
    }
    let n_c = out.n_c_eff().max(1) as f64;
    out.scaled_m_star = out.k.iter().map(|&k| k as f64 / n_c).collect();
    Ok(out)
}

/// Which likelihood terms the s-term assignment uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StermTerms {
    pub volume: bool,
    pub frequency: bool,
    pub combination: bool,
}

impl StermTerms {
    pub const ALL: Self = Self { volume: true, frequency: true, combination: true };
}

/// Which terms the full-query assignment uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FullTerms {
    pub frequency: bool,
    pub volume: bool,
    pub quadratic: bool,
}

impl FullTerms {
    pub const ALL: Self = Self { frequency: true, volume: true, quadratic: true };
}

/// Normalization of the observed combination counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinationNorm {
    /// Divide by the number of retained candidates.
    CandidateTotal,
    /// Divide by the number of distinct observed tokens.
    L1,
}

/// Observed s-term tokens matched to keywords, aligned with
/// [`ObservationSet::sterm_tokens`]; `None` means unrecovered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StermMapping {
    pub sterm_tokens: Vec<TokenId>,
    pub keywords: Vec<Option<u32>>,
}

impl StermMapping {
    pub fn get(&self, token: TokenId) -> Option<u32> {
        self.sterm_tokens.iter().position(|&t| t == token).and_then(|u| self.keywords[u])
    }

    pub fn as_map(&self) -> BTreeMap<TokenId, Option<u32>> {
        self.sterm_tokens.iter().copied().zip(self.keywords.iter().copied()).collect()
    }
}

/// The attacker's per-keyword statistics entering s-term recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct StermPrior<'a> {
    /// Keyword volume probabilities.
    pub v_tilde: &'a [f64],
    pub sterm_freq: &'a [f64],
    pub m_star: &'a [f64],
}

/// Cost of mapping each observed s-term token (column) to each keyword (row).
pub fn sterm_costs(obs: &ObservationSet, prior: &StermPrior<'_>, terms: StermTerms, norm: CombinationNorm, n_c_eff: usize) -> Result<CostMatrix> {
    if !(terms.volume || terms.frequency || terms.combination) {
        return Err(Error::NoCostTerms);
    }
    let n = prior.v_tilde.len();
    if prior.sterm_freq.len() != n || prior.m_star.len() != n {
        return Err(Error::param("prior", "vectors of different lengths"));
    }
    let (m_obs, trials) = match norm {
        CombinationNorm::CandidateTotal => (obs.m_star.clone(), n_c_eff as f64),
        CombinationNorm::L1 => (obs.l1_m_star(), obs.distinct_tokens() as f64),
    };
    let rho = obs.rho as f64;
    let nd = obs.n_docs as f64;
    let log_sf: Vec<f64> = prior.sterm_freq.iter().map(|&p| ln(clamp_prob(p))).collect();
    CostMatrix::from_fn(n, obs.n_s(), |i, u| {
        let mut c = 0.0;
        if terms.frequency {
            c -= rho * obs.sf[u] * log_sf[i];
        }
        if terms.volume {
            c += binomial_nll(nd, obs.v[u], prior.v_tilde[i]);
        }
        if terms.combination {
            c += binomial_nll(trials, m_obs[u], prior.m_star[i]);
        }
        c
    })
}

/// Maximum-likelihood matching of s-term tokens to keywords.
pub fn srecover(obs: &ObservationSet, prior: &StermPrior<'_>, terms: StermTerms, norm: CombinationNorm, n_c_eff: usize) -> Result<StermMapping> {
    let costs = sterm_costs(obs, prior, terms, norm, n_c_eff)?;
    let a = solve_lap_padded(&costs)?;
    Ok(StermMapping {
        sterm_tokens: obs.sterm_tokens.clone(),
        keywords: (0..obs.n_s()).map(|u| a.candidate(u).map(|i| i as u32)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullParams {
    pub terms: FullTerms,
    pub n_iter: usize,
    pub p_free: f64,
}

/// Linear costs of one group: rows are candidates, columns are tokens.
pub fn full_linear_costs(group: &TokenGroup, cands: &CandidateSet, n_docs: usize, terms: FullTerms) -> Result<CostMatrix> {
    let log_f: Vec<f64> = cands.freqs.iter().map(|&p| ln(clamp_prob(p))).collect();
    let diag: Vec<f64> = (0..cands.len()).map(|g| cands.probability(g, g)).collect();
    let nd = n_docs as f64;
    CostMatrix::from_fn(cands.len(), group.len(), |g, j| {
        let mut c = 0.0;
        if terms.frequency {
            c -= group.counts[j] as f64 * log_f[g];
        }
        if terms.volume {
            c += binomial_nll(nd, group.volumes[j] as f64 / nd, diag[g]);
        }
        c
    })
}

/// Pairwise binomial co-occurrence cost of a group, with log-probability
/// columns computed on first use.
pub struct CoOccurrenceCost<'a> {
    group: &'a TokenGroup,
    cands: &'a CandidateSet,
    n_docs: f64,
    /// Per candidate `h`: `ln p(g, h)` and `ln (1 - p(g, h))` for every `g`.
    columns: Vec<Option<(Vec<f64>, Vec<f64>)>>,
}

impl<'a> CoOccurrenceCost<'a> {
    pub fn new(group: &'a TokenGroup, cands: &'a CandidateSet, n_docs: usize) -> Self {
        Self { group, cands, n_docs: n_docs as f64, columns: vec![None; cands.len()] }
    }

    fn column(&mut self, h: usize) -> &(Vec<f64>, Vec<f64>) {
        let cands = self.cands;
        self.columns[h].get_or_insert_with(|| {
            let p: Vec<f64> = cands.column(h).into_iter().map(clamp_prob).collect();
            (p.iter().map(|&x| ln(x)).collect(), p.iter().map(|&x| ln(1.0 - x)).collect())
        })
    }
}

impl QuadraticCost for CoOccurrenceCost<'_> {
    fn pair(&mut self, g: usize, h: usize, j: usize, k: usize) -> f64 {
        let c = self.group.intersection(j, k) as f64;
        let nd = self.n_docs;
        let (l1, l0) = self.column(h);
        -(c * l1[g] + (nd - c) * l0[g])
    }

    fn round_costs(&mut self, free: &[usize], fixed: &[(usize, usize)], rows: usize) -> Vec<Vec<f64>> {
        let nd = self.n_docs;
        // Every fixed token contributes -N ln(1 - p) whatever it shares.
        let mut base = vec![0.0; rows];
        let mut fixed_on = vec![usize::MAX; self.group.len()];
        for &(k, h) in fixed {
            fixed_on[k] = h;
            let (_, l0) = self.column(h);
            for (b, l) in base.iter_mut().zip(l0) {
                *b -= nd * l;
            }
        }
        let group = self.group;
        free.iter()
            .map(|&j| {
                let mut out = base.clone();
                for &(k, c) in &group.shared[j] {
                    let h = fixed_on[k as usize];
                    if h == usize::MAX {
                        continue;
                    }
                    let c = c as f64;
                    let (l1, l0) = self.column(h);
                    for ((o, a), b) in out.iter_mut().zip(l1).zip(l0) {
                        *o -= c * (a - b);
                    }
                }
                out
            })
            .collect()
    }
}

/// Recover every token of one group; `None` marks unrecovered tokens.
pub fn fullrecover(group: &TokenGroup, cands: &CandidateSet, n_docs: usize, params: &FullParams, seed: u64) -> Result<Vec<Option<Conjunction>>> {
    if cands.is_empty() || group.is_empty() {
        return Ok(vec![None; group.len()]);
    }
    let linear = full_linear_costs(group, cands, n_docs, params.terms)?;
    let assignment = if params.terms.quadratic {
        let mut quad = CoOccurrenceCost::new(group, cands, n_docs);
        let qap = QapParams { p_free: params.p_free, n_iter: params.n_iter, seed };
        solve_iterative_qap(&linear, &mut quad, &qap)?
    } else {
        solve_lap_padded(&linear)?
    };
    Ok((0..group.len()).map(|j| assignment.candidate(j).map(|g| cands.conjs[g])).collect())
}

/// What the attacker knows about the deployed defense.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefenseKnowledge {
    pub kind: DefenseKind,
    pub tpr: f64,
    pub fpr: f64,
    pub x: u32,
    /// Document count of the client collection, the duplication target for
    /// padding adaptation.
    pub client_docs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackParams {
    pub frac: f64,
    pub n_iter: usize,
    pub p_free: f64,
    pub sterm_terms: StermTerms,
    pub full_terms: FullTerms,
    pub combination_norm: CombinationNorm,
    /// Adjust auxiliary statistics for this defense; `None` attacks as if
    /// the scheme were undefended.
    pub adapt: Option<DefenseKnowledge>,
}

impl Default for AttackParams {
    fn default() -> Self {
        Self {
            frac: 0.6,
            n_iter: 1000,
            p_free: 0.25,
            sterm_terms: StermTerms::ALL,
            full_terms: FullTerms::ALL,
            combination_norm: CombinationNorm::CandidateTotal,
            adapt: None,
        }
    }
}

/// Recovered conjunctions of one s-term group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMapping {
    pub sterm_token: TokenId,
    pub keyword: Option<u32>,
    pub tokens: Vec<TokenId>,
    pub predicted: Vec<Option<Conjunction>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FullMapping {
    pub groups: Vec<GroupMapping>,
}

impl FullMapping {
    /// Flattened token → prediction view.
    pub fn merged(&self) -> BTreeMap<TokenId, Option<Conjunction>> {
        self.groups
            .iter()
            .flat_map(|g| g.tokens.iter().copied().zip(g.predicted.iter().copied()))
            .collect()
    }
}

/// Pipeline stages, reported as they start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Knowledge,
    Prune,
    Observe,
    Sterm,
    Full,
    Done,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutput {
    pub aux: AuxKnowledge,
    pub prune: PruneResult,
    pub observations: ObservationSet,
    pub sterm: StermMapping,
    pub full: FullMapping,
}

pub fn run_pipeline(
    trace: &LeakageTrace,
    aux_index: &InvertedIndex,
    model: &FrequencyModel,
    setting: &QuerySetting,
    params: &AttackParams,
    seed: u64,
) -> Result<AttackOutput> {
    run_pipeline_staged(trace, aux_index, model, setting, params, seed, |_| {})
}

/// [`run_pipeline`] announcing each stage to `on_stage` before it runs.
pub fn run_pipeline_staged(
    trace: &LeakageTrace,
    aux_index: &InvertedIndex,
    model: &FrequencyModel,
    setting: &QuerySetting,
    params: &AttackParams,
    seed: u64,
    mut on_stage: impl FnMut(Stage),
) -> Result<AttackOutput> {
    if trace.records.is_empty() {
        return Err(Error::EmptyTrace);
    }
    QapParams { p_free: params.p_free, n_iter: params.n_iter, seed }.validate()?;

    on_stage(Stage::Knowledge);
    let padded;
    let aux_index = match params.adapt {
        Some(d) if d.kind == DefenseKind::Seal => {
            padded = adapt_seal(aux_index, d.x, d.client_docs)?;
            &padded
        }
        _ => aux_index,
    };
    let overall = workload_distribution(model, setting)?;
    let aux = build_aux_knowledge(aux_index, &overall, &setting.dims())?;

    on_stage(Stage::Prune);
    let prune = candiprun(&aux.sterm, &aux.m_tilde, trace.records.len(), params.frac)?;
    let n_c_eff = prune.n_c_eff().max(1);

    on_stage(Stage::Observe);
    let observations = build_observations(&trace.records, trace.n_docs, n_c_eff)?;

    on_stage(Stage::Sterm);
    let clrz = params.adapt.filter(|d| d.kind == DefenseKind::Clrz).map(|d| (d.tpr, d.fpr));
    let volumes = match clrz {
        Some((tpr, fpr)) => adapt_clrz_volumes(&aux.volume_fraction, tpr, fpr),
        None => aux.volume_fraction.clone(),
    };
    let v_tilde: Vec<f64> = volumes.into_iter().map(clamp_prob).collect();
    let prior = StermPrior { v_tilde: &v_tilde, sterm_freq: &aux.sterm.sterm_freq, m_star: &prune.scaled_m_star };
    let sterm = srecover(&observations, &prior, params.sterm_terms, params.combination_norm, n_c_eff)?;

    on_stage(Stage::Full);
    let incidence = aux_index.incidence();
    let full_params = FullParams { terms: params.full_terms, n_iter: params.n_iter, p_free: params.p_free };
    let job = |u: usize| -> Result<GroupMapping> {
        let group = &observations.groups[u];
        let keyword = sterm.keywords[u];
        let predicted = match keyword {
            Some(i) => {
                let cands = candidate_set(&incidence, aux_index.n_docs(), &prune, i, clrz);
                fullrecover(group, &cands, trace.n_docs, &full_params, derive_seed(seed, "fullrecover", u as u64))?
            }
            None => vec![None; group.len()],
        };
        Ok(GroupMapping { sterm_token: group.sterm_token, keyword, tokens: group.tokens.clone(), predicted })
    };
    let groups = run_groups(observations.n_s(), job)?;

    on_stage(Stage::Done);
    Ok(AttackOutput { aux, prune, observations, sterm, full: FullMapping { groups } })
}

fn candidate_set(incidence: &[DocSet], n_docs: usize, prune: &PruneResult, i: u32, clrz: Option<(f64, f64)>) -> CandidateSet {
    let set = CandidateSet::new(incidence, n_docs, i, prune.universes[i as usize].clone(), prune.cand_freqs[i as usize].clone());
    match clrz {
        Some((tpr, fpr)) => set.with_clrz(tpr, fpr),
        None => set,
    }
}

#[cfg(feature = "parallel")]
fn run_groups<F>(n: usize, job: F) -> Result<Vec<GroupMapping>>
where
    F: Fn(usize) -> Result<GroupMapping> + Sync,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().with_max_len(1).map(&job).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_groups<F>(n: usize, job: F) -> Result<Vec<GroupMapping>>
where
    F: Fn(usize) -> Result<GroupMapping>,
{
    (0..n).map(job).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assign::NoQuadratic;
    use crate::freqmodel::StermEntry;
    use crate::sse_sim::{LeakageRecord, QueryToken};
    use alloc::sync::Arc;

    fn c(ks: &[u32]) -> Conjunction {
        Conjunction::new(ks).unwrap()
    }

    fn knowledge(per_sterm: Vec<Vec<(Conjunction, f64)>>) -> StermFrequencyKnowledge {
        StermFrequencyKnowledge {
            sterm_freq: per_sterm.iter().map(|p| p.iter().map(|e| e.1).sum()).collect(),
            per_sterm: per_sterm
                .into_iter()
                .map(|p| p.into_iter().map(|(conj, raw)| StermEntry { conj, raw, normalized: 0.0 }).collect())
                .collect(),
        }
    }

    #[test]
    fn pruning_threshold_and_renormalization() {
        let k = knowledge(vec![vec![(c(&[0, 1]), 0.4), (c(&[0, 2]), 0.2), (c(&[0, 3]), 0.05)], vec![(c(&[1, 2]), 0.35)], vec![]]);
        let p = candiprun(&k, &[3, 2, 1], 10, 0.5).unwrap();
        assert_eq!(p.k, vec![2, 1, 0]);
        assert_eq!(p.universes[0], vec![c(&[0, 1]), c(&[0, 2])]);
        assert!((p.cand_freqs[0][0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.beta, vec![2.0 / 3.0, 0.5, 0.0]);
        assert_eq!(p.scaled_m_star, vec![2.0 / 3.0, 1.0 / 3.0, 0.0]);
        assert_eq!(p.emptied, vec![2]);
        assert_eq!(p.retained_fraction(), 0.5);
    }

    #[test]
    fn pruning_limits() {
        let k = knowledge(vec![vec![(c(&[0, 1]), 0.6)], vec![(c(&[1, 2]), 0.4)], vec![]]);
        let all = candiprun(&k, &[1, 1, 0], 10, 1e-9).unwrap();
        assert_eq!(all.beta, vec![1.0, 1.0, 0.0]);
        let none = candiprun(&k, &[1, 1, 0], 1, 1.0).unwrap();
        assert_eq!(none.n_c_eff(), 0);
        assert_eq!(none.emptied, vec![0, 1]);
        assert!(candiprun(&k, &[1, 1, 0], 1, 0.0).is_err());
        assert!(candiprun(&k, &[1, 1, 0], 0, 0.5).is_err());
    }

    fn obs_from(records: Vec<LeakageRecord>, n_docs: usize, n_c: usize) -> ObservationSet {
        build_observations(&records, n_docs, n_c).unwrap()
    }

    fn rec(full: u32, sterm: u32, vol: usize, ids: &[u32]) -> LeakageRecord {
        LeakageRecord { token: QueryToken { full, sterm }, sterm_volume: vol, result_ids: Arc::from(ids) }
    }

    #[test]
    fn single_token_forced() {
        let obs = obs_from(vec![rec(0, 0, 2, &[1])], 10, 1);
        let prior = StermPrior { v_tilde: &[0.5], sterm_freq: &[1.0], m_star: &[1.0] };
        let sp = srecover(&obs, &prior, StermTerms::ALL, CombinationNorm::CandidateTotal, 1).unwrap();
        assert_eq!(sp.keywords, vec![Some(0)]);
        let none = StermTerms { volume: false, frequency: false, combination: false };
        assert_eq!(srecover(&obs, &prior, none, CombinationNorm::CandidateTotal, 1), Err(Error::NoCostTerms));
    }

    #[test]
    fn frequency_breaks_volume_tie() {
        // Two tokens with equal volume; token 0 is queried three times as often.
        let mut records = vec![rec(0, 0, 3, &[1]); 3];
        records.push(rec(1, 1, 3, &[2]));
        let obs = obs_from(records, 10, 2);
        let prior = StermPrior { v_tilde: &[0.3, 0.3], sterm_freq: &[0.25, 0.75], m_star: &[0.5, 0.5] };
        let vol_only = StermTerms { volume: true, frequency: false, combination: false };
        let costs = sterm_costs(&obs, &prior, vol_only, CombinationNorm::CandidateTotal, 2).unwrap();
        let straight = costs.get(0, 0) + costs.get(1, 1);
        let crossed = costs.get(1, 0) + costs.get(0, 1);
        assert_eq!(straight, crossed);
        let with_f = StermTerms { volume: true, frequency: true, combination: false };
        let sp = srecover(&obs, &prior, with_f, CombinationNorm::CandidateTotal, 2).unwrap();
        assert_eq!(sp.keywords, vec![Some(1), Some(0)]);
    }

    #[test]
    fn more_tokens_than_keywords() {
        let obs = obs_from(vec![rec(0, 0, 2, &[1]), rec(1, 1, 5, &[2])], 10, 2);
        let prior = StermPrior { v_tilde: &[0.2], sterm_freq: &[1.0], m_star: &[1.0] };
        let sp = srecover(&obs, &prior, StermTerms::ALL, CombinationNorm::CandidateTotal, 2).unwrap();
        assert_eq!(sp.keywords, vec![Some(0), None]);
    }

    fn group_index() -> InvertedIndex {
        // Keyword 0 is the s-term; 1..=3 co-occur with it to different extents.
        InvertedIndex::from_parts(
            (1..=12).collect(),
            vec![vec![1, 2, 3, 4, 5, 6], vec![1, 2, 3, 7, 8, 9, 10], vec![1, 2, 7, 8, 9, 10, 11], vec![1, 7, 8, 9, 10, 11, 12]],
        )
        .unwrap()
    }

    #[test]
    fn optimized_round_costs_match_definition() {
        let idx = group_index();
        let conjs = vec![c(&[0, 1]), c(&[0, 2]), c(&[0, 3]), c(&[0])];
        let cands = CandidateSet::new(&idx.incidence(), idx.n_docs(), 0, conjs.clone(), vec![0.25; 4]);
        let records: Vec<_> = conjs
            .iter()
            .enumerate()
            .map(|(t, q)| rec(t as u32, 0, 6, &idx.intersect(q.keywords())))
            .collect();
        let obs = obs_from(records, idx.n_docs(), 4);
        let group = &obs.groups[0];
        let mut fast = CoOccurrenceCost::new(group, &cands, idx.n_docs());
        let mut slow = CoOccurrenceCost::new(group, &cands, idx.n_docs());
        let free = [0, 2];
        let fixed = [(1, 3), (3, 0)];
        let a = fast.round_costs(&free, &fixed, 4);
        let b = QuadraticCost::round_costs(&mut Reference(&mut slow), &free, &fixed, 4);
        for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
            assert!((x - y).abs() < 1e-9 * y.abs().max(1.0), "{x} vs {y}");
        }
    }

    /// Uses only the trait's default round cost.
    struct Reference<'r, 'a>(&'r mut CoOccurrenceCost<'a>);

    impl QuadraticCost for Reference<'_, '_> {
        fn pair(&mut self, g: usize, h: usize, j: usize, k: usize) -> f64 {
            self.0.pair(g, h, j, k)
        }
    }

    #[test]
    fn group_recovery_on_exact_statistics() {
        let idx = group_index();
        let conjs = vec![c(&[0, 1]), c(&[0, 2]), c(&[0, 3])];
        let freqs = vec![0.5, 0.3, 0.2];
        let cands = CandidateSet::new(&idx.incidence(), idx.n_docs(), 0, conjs.clone(), freqs);
        let mut records = Vec::new();
        for (t, (q, n)) in [(c(&[0, 3]), 2), (c(&[0, 1]), 5), (c(&[0, 2]), 3)].iter().enumerate() {
            for _ in 0..*n {
                records.push(rec(t as u32, 0, 6, &idx.intersect(q.keywords())));
            }
        }
        let obs = obs_from(records, idx.n_docs(), 3);
        let params = FullParams { terms: FullTerms::ALL, n_iter: 10, p_free: 0.5 };
        let got = fullrecover(&obs.groups[0], &cands, idx.n_docs(), &params, 7).unwrap();
        assert_eq!(got, vec![Some(c(&[0, 3])), Some(c(&[0, 1])), Some(c(&[0, 2]))]);
        let empty = CandidateSet::new(&idx.incidence(), idx.n_docs(), 0, vec![], vec![]);
        assert_eq!(fullrecover(&obs.groups[0], &empty, idx.n_docs(), &params, 7).unwrap(), vec![None; 3]);
    }

    #[test]
    fn linear_only_equals_plain_assignment() {
        let idx = group_index();
        let conjs = vec![c(&[0, 1]), c(&[0, 2]), c(&[0, 3]), c(&[0])];
        let cands = CandidateSet::new(&idx.incidence(), idx.n_docs(), 0, conjs.clone(), vec![0.4, 0.3, 0.2, 0.1]);
        let records: Vec<_> = [1usize, 3, 0]
            .iter()
            .enumerate()
            .map(|(t, &g)| rec(t as u32, 0, 6, &idx.intersect(conjs[g].keywords())))
            .collect();
        let obs = obs_from(records, idx.n_docs(), 4);
        let group = &obs.groups[0];
        let terms = FullTerms { frequency: true, volume: true, quadratic: false };
        let params = FullParams { terms, n_iter: 1, p_free: 1.0 };
        let got = fullrecover(group, &cands, idx.n_docs(), &params, 3).unwrap();
        let linear = full_linear_costs(group, &cands, idx.n_docs(), terms).unwrap();
        let lap = solve_lap_padded(&linear).unwrap();
        let qap = solve_iterative_qap(&linear, &mut NoQuadratic, &QapParams { p_free: 1.0, n_iter: 1, seed: 3 }).unwrap();
        assert_eq!(lap.token_to_candidate, qap.token_to_candidate);
        let expected: Vec<_> = (0..3).map(|j| Some(conjs[lap.token_to_candidate[j]])).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn minimal_pipeline() {
        let idx = group_index();
        let model = FrequencyModel::from_weights(4, [(c(&[0, 1]), 0.5), (c(&[0, 2]), 0.3), (c(&[1, 3]), 0.2)]).unwrap();
        let trace = LeakageTrace { n_docs: idx.n_docs(), records: vec![rec(0, 0, 6, &idx.intersect(&[0, 1]))] };
        let params = AttackParams { n_iter: 5, ..AttackParams::default() };
        let out = run_pipeline(&trace, &idx, &model, &QuerySetting::Separate(2), &params, 1).unwrap();
        let merged = out.full.merged();
        assert_eq!(merged.len(), 1);
        for g in &out.full.groups {
            for p in g.predicted.iter().flatten() {
                assert!(p.contains(g.keyword.unwrap()));
            }
        }
        assert_eq!(out, run_pipeline(&trace, &idx, &model, &QuerySetting::Separate(2), &params, 1).unwrap());
    }
}
