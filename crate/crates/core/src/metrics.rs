// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

//! Query-weighted recovery accuracy.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::attack::{FullMapping, StermMapping};
use crate::error::{Error, Result};
use crate::freqmodel::{Conjunction, MAX_DIM};
use crate::querygen::QuerySetting;
use crate::sse_sim::{GroundTruthLedger, LeakageTrace};

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionScore {
    pub dim: usize,
    pub queries: usize,
    pub f_acc: f64,
    pub l_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub queries: usize,
    /// Queries whose s-term was recovered.
    pub s_acc: f64,
    /// Queries recovered exactly.
    pub f_acc: f64,
    /// Recovered keywords over all queried keywords.
    pub l_acc: f64,
    /// Share of queries with at least `x` keywords recovered, for
    /// `x = 1..=d`; only for a single query dimension.
    pub cad: Option<Vec<f64>>,
    pub keyword_slots: usize,
    pub keyword_hits: usize,
    pub per_dimension: Vec<DimensionScore>,
}

/// Keywords common to both conjunctions.
pub fn hits(predicted: &Conjunction, truth: &Conjunction) -> usize {
    predicted.overlap(truth)
}

pub fn score(
    trace: &LeakageTrace,
    full: &FullMapping,
    sterm: &StermMapping,
    ledger: &GroundTruthLedger,
    setting: &QuerySetting,
) -> Result<MetricsReport> {
    let predictions = full.merged();
    let sp = sterm.as_map();
    let d = setting.d_max();
    let mut s_ok = 0usize;
    let mut f_ok = 0usize;
    let mut slots = 0usize;
    let mut hit_total = 0usize;
    let mut at_least = vec![0usize; d + 1];
    // Per dimension: (queries, exact, slots, hits).
    let mut dims: BTreeMap<usize, (usize, usize, usize, usize)> = BTreeMap::new();
    for rec in &trace.records {
        let truth = ledger.token_to_conjunction.get(&rec.token.full).ok_or(Error::UnknownToken(rec.token.full))?;
        let true_sterm = ledger.sterm_token_to_keyword.get(&rec.token.sterm).ok_or(Error::UnknownToken(rec.token.sterm))?;
        if sp.get(&rec.token.sterm).copied().flatten() == Some(*true_sterm) {
            s_ok += 1;
        }
        let predicted = predictions.get(&rec.token.full).copied().flatten();
        let h = predicted.map_or(0, |p| hits(&p, truth));
        let exact = predicted == Some(*truth);
        f_ok += exact as usize;
        slots += truth.dim();
        hit_total += h;
        for slot in &mut at_least[1..=h.min(d)] {
            *slot += 1;
        }
        let e = dims.entry(truth.dim()).or_default();
        e.0 += 1;
        e.1 += exact as usize;
        e.2 += truth.dim();
        e.3 += h;
    }
    let q = trace.records.len();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    debug_assert!(d <= MAX_DIM);
    Ok(MetricsReport {
        queries: q,
        s_acc: ratio(s_ok, q),
        f_acc: ratio(f_ok, q),
        l_acc: ratio(hit_total, slots),
        cad: setting.is_separate().then(|| (1..=d).map(|x| ratio(at_least[x], q)).collect()),
        keyword_slots: slots,
        keyword_hits: hit_total,
        per_dimension: dims
            .into_iter()
            .map(|(dim, (queries, exact, slots, h))| DimensionScore { dim, queries, f_acc: ratio(exact, queries), l_acc: ratio(h, slots) })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::GroupMapping;
    use crate::sse_sim::{LeakageRecord, QueryToken};
    use alloc::sync::Arc;

    fn c(ks: &[u32]) -> Conjunction {
        Conjunction::new(ks).unwrap()
    }

    struct Fixture {
        trace: LeakageTrace,
        ledger: GroundTruthLedger,
        sterm: StermMapping,
    }

    /// Two queries: token 0 is (0,1) with s-term 0, token 1 is (2,3) with
    /// s-term 2.
    fn fixture() -> Fixture {
        let rec = |full, sterm| LeakageRecord { token: QueryToken { full, sterm }, sterm_volume: 1, result_ids: Arc::from(&[][..]) };
        let mut ledger = GroundTruthLedger::default();
        ledger.token_to_conjunction.insert(0, c(&[0, 1]));
        ledger.token_to_conjunction.insert(1, c(&[2, 3]));
        ledger.sterm_token_to_keyword.insert(0, 0);
        ledger.sterm_token_to_keyword.insert(1, 2);
        Fixture {
            trace: LeakageTrace { n_docs: 4, records: vec![rec(0, 0), rec(1, 1)] },
            ledger,
            sterm: StermMapping { sterm_tokens: vec![0, 1], keywords: vec![Some(0), Some(2)] },
        }
    }

    fn mapping(p0: Option<Conjunction>, p1: Option<Conjunction>) -> FullMapping {
        FullMapping {
            groups: vec![
                GroupMapping { sterm_token: 0, keyword: Some(0), tokens: vec![0], predicted: vec![p0] },
                GroupMapping { sterm_token: 1, keyword: Some(2), tokens: vec![1], predicted: vec![p1] },
            ],
        }
    }

    #[test]
    fn perfect_mapping() {
        let f = fixture();
        let r = score(&f.trace, &mapping(Some(c(&[0, 1])), Some(c(&[2, 3]))), &f.sterm, &f.ledger, &QuerySetting::Separate(2)).unwrap();
        assert_eq!((r.s_acc, r.f_acc, r.l_acc), (1.0, 1.0, 1.0));
        assert_eq!(r.cad, Some(vec![1.0, 1.0]));
    }

    #[test]
    fn partial_credit() {
        let f = fixture();
        let r = score(&f.trace, &mapping(Some(c(&[0, 1])), Some(c(&[2, 4]))), &f.sterm, &f.ledger, &QuerySetting::Separate(2)).unwrap();
        assert_eq!(r.f_acc, 0.5);
        assert_eq!(r.l_acc, 0.75);
        assert_eq!(r.cad, Some(vec![1.0, 0.5]));
        assert_eq!(r.keyword_hits, 3);
        let hybrid = score(&f.trace, &mapping(Some(c(&[0, 1])), Some(c(&[2, 4]))), &f.sterm, &f.ledger, &QuerySetting::hybrid_uniform(2)).unwrap();
        assert_eq!(hybrid.cad, None);
    }

    #[test]
    fn nothing_recovered() {
        let mut f = fixture();
        f.sterm.keywords = vec![None, None];
        let r = score(&f.trace, &mapping(None, None), &f.sterm, &f.ledger, &QuerySetting::Separate(2)).unwrap();
        assert_eq!((r.s_acc, r.f_acc, r.l_acc), (0.0, 0.0, 0.0));
        assert_eq!(r.cad, Some(vec![0.0, 0.0]));
    }

    #[test]
    fn unknown_token() {
        let mut f = fixture();
        f.ledger.token_to_conjunction.remove(&1);
        assert_eq!(score(&f.trace, &mapping(None, None), &f.sterm, &f.ledger, &QuerySetting::Separate(2)), Err(Error::UnknownToken(1)));
    }
}
