// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use conjleak_core::assign::{linear_objective, solve_lap_padded, CostMatrix};
use conjleak_core::attack::{candiprun, run_pipeline, AttackParams, FullMapping, GroupMapping, StermMapping};
use conjleak_core::auxknow::{build_aux_knowledge, CandidateSet};
use conjleak_core::corpus::InvertedIndex;
use conjleak_core::freqmodel::{derive_sterm_frequencies, Conjunction, FrequencyModel};
use conjleak_core::metrics::score;
use conjleak_core::observe::build_observations;
use conjleak_core::querygen::QuerySetting;
use conjleak_core::sse_sim::{simulate, LeakageTrace};
use proptest::prelude::*;

/// Random incidence over `n` keywords and `docs` documents.
fn index_strategy() -> impl Strategy<Value = InvertedIndex> {
    (3usize..8, 4usize..40).prop_flat_map(|(n, docs)| {
        proptest::collection::vec(proptest::collection::vec(any::<bool>(), docs), n).prop_map(move |rows| {
            let postings = rows.iter().map(|r| (0..docs as u32).filter(|&d| r[d as usize]).collect()).collect();
            InvertedIndex::from_parts((0..docs as u32).collect(), postings).unwrap()
        })
    })
}

/// An index with a workload of `d`-keyword conjunctions over it.
fn scenario(d: usize) -> impl Strategy<Value = (InvertedIndex, Vec<Conjunction>)> {
    index_strategy().prop_flat_map(move |idx| {
        let n = idx.n_keywords() as u32;
        let conj = proptest::sample::subsequence((0..n).collect::<Vec<_>>(), d).prop_map(|ks| Conjunction::new(&ks).unwrap());
        (Just(idx), proptest::collection::vec(conj, 1..80))
    })
}

fn brute_intersection(idx: &InvertedIndex, a: &Conjunction, b: &Conjunction) -> usize {
    let x: BTreeSet<u32> = idx.intersect(a.keywords()).into_iter().collect();
    idx.intersect(b.keywords()).iter().filter(|d| x.contains(d)).count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn observations_agree_with_the_trace((idx, workload) in scenario(2)) {
        let (trace, ledger) = simulate(&idx, &workload).unwrap();
        let obs = build_observations(&trace.records, trace.n_docs, 10).unwrap();
        let distinct: BTreeSet<u32> = trace.records.iter().map(|r| r.token.full).collect();
        prop_assert_eq!(obs.distinct_tokens(), distinct.len());
        prop_assert!((obs.sf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(obs.groups.iter().map(|g| g.rho).sum::<usize>(), workload.len());
        for (u, g) in obs.groups.iter().enumerate() {
            let kw = ledger.sterm_token_to_keyword[&g.sterm_token];
            prop_assert_eq!(obs.sterm_volumes[u], idx.volume(kw));
            prop_assert_eq!(g.counts.iter().sum::<usize>(), g.rho);
            for j in 0..g.len() {
                let cj = ledger.token_to_conjunction[&g.tokens[j]];
                prop_assert!(cj.contains(kw));
                for k in 0..g.len() {
                    let ck = ledger.token_to_conjunction[&g.tokens[k]];
                    prop_assert_eq!(g.intersection(j, k) as usize, brute_intersection(&idx, &cj, &ck));
                }
            }
        }
    }

    #[test]
    fn candidate_cooccurrence_matches_brute_force((idx, workload) in scenario(2)) {
        let conjs: Vec<Conjunction> = workload.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let freqs = vec![1.0 / conjs.len() as f64; conjs.len()];
        let cands = CandidateSet::new(&idx.incidence(), idx.n_docs(), conjs[0].keywords()[0], conjs.clone(), freqs);
        for g in 0..conjs.len() {
            for h in 0..conjs.len() {
                let want = brute_intersection(&idx, &conjs[g], &conjs[h]) as f64 / idx.n_docs() as f64;
                prop_assert_eq!(cands.probability(g, h), want);
            }
        }
    }

    #[test]
    fn pruning_invariants((idx, workload) in scenario(2), frac in 0.01f64..=1.0, rho in 1usize..200) {
        let model = FrequencyModel::from_weights(idx.n_keywords(), workload.iter().map(|c| (*c, 1.0))).unwrap();
        let aux = build_aux_knowledge(&idx, &model, &[2]).unwrap();
        let sterm = derive_sterm_frequencies(&model, &idx.doc_frequencies()).unwrap();
        prop_assert!((sterm.sterm_freq.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let p = candiprun(&aux.sterm, &aux.m_tilde, rho, frac).unwrap();
        for i in 0..idx.n_keywords() {
            prop_assert!(p.k[i] as u64 <= p.m_tilde[i]);
            prop_assert!((0.0..=1.0).contains(&p.beta[i]));
            if p.k[i] > 0 {
                prop_assert!((p.cand_freqs[i].iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            for c in &p.universes[i] {
                prop_assert!(model.get(c) > frac / rho as f64);
            }
        }
        prop_assert!((0.0..=1.0).contains(&p.retained_fraction()));
    }

    #[test]
    fn metric_identities_and_order_invariance(
        (idx, workload) in scenario(2),
        picks in proptest::collection::vec(any::<proptest::sample::Index>(), 80),
        rotate in any::<proptest::sample::Index>(),
    ) {
        let (trace, ledger) = simulate(&idx, &workload).unwrap();
        let obs = build_observations(&trace.records, trace.n_docs, 10).unwrap();
        // Predict a random queried conjunction (or nothing) for each token.
        let pool: Vec<Conjunction> = ledger.token_to_conjunction.values().copied().collect();
        let mut i = 0;
        let groups: Vec<GroupMapping> = obs
            .groups
            .iter()
            .map(|g| GroupMapping {
                sterm_token: g.sterm_token,
                keyword: None,
                tokens: g.tokens.clone(),
                predicted: g
                    .tokens
                    .iter()
                    .map(|_| {
                        i += 1;
                        let x = picks[i % picks.len()].index(pool.len() + 1);
                        pool.get(x).copied()
                    })
                    .collect(),
            })
            .collect();
        let full = FullMapping { groups };
        let sp = StermMapping {
            sterm_tokens: obs.sterm_tokens.clone(),
            keywords: obs.sterm_tokens.iter().map(|t| Some(ledger.sterm_token_to_keyword[t])).collect(),
        };
        let setting = QuerySetting::Separate(2);
        let r = score(&trace, &full, &sp, &ledger, &setting).unwrap();
        let cad = r.cad.clone().unwrap();
        prop_assert_eq!(r.s_acc, 1.0);
        prop_assert!(cad[1] <= cad[0]);
        prop_assert!((r.f_acc - cad[1]).abs() < 1e-12);
        prop_assert!((r.l_acc - (cad[0] + cad[1]) / 2.0).abs() < 1e-12);

        let mut records = trace.records.clone();
        let shift = rotate.index(records.len());
        records.rotate_left(shift);
        records.reverse();
        let shuffled = LeakageTrace { n_docs: trace.n_docs, records };
        prop_assert_eq!(score(&shuffled, &full, &sp, &ledger, &setting).unwrap(), r);
    }

    #[test]
    fn padded_lap_beats_every_sampled_assignment(
        rows in 0usize..6,
        cols in 1usize..6,
        seed_costs in proptest::collection::vec(-10.0f64..10.0, 36),
        perm in proptest::collection::vec(any::<proptest::sample::Index>(), 6),
    ) {
        let m = CostMatrix::from_fn(rows, cols, |r, c| seed_costs[r * 6 + c]).unwrap();
        let a = solve_lap_padded(&m).unwrap();
        let size = rows.max(cols);
        prop_assert_eq!(a.token_to_candidate.len(), cols);
        prop_assert_eq!(a.token_to_candidate.iter().collect::<BTreeSet<_>>().len(), cols);
        prop_assert!(a.token_to_candidate.iter().all(|&g| g < size));
        // A random injective assignment on the same padded problem is never better.
        let mut free: Vec<usize> = (0..size).collect();
        let other: Vec<usize> = perm.iter().take(cols).map(|p| free.remove(p.index(free.len()))).collect();
        let padded = conjleak_core::assign::pad_rows(&m);
        prop_assert!(a.objective <= linear_objective(&padded, &other) + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pipeline_is_deterministic((idx, workload) in scenario(2), seed in any::<u64>()) {
        let (trace, _) = simulate(&idx, &workload).unwrap();
        let counts: BTreeMap<Conjunction, f64> = workload.iter().fold(BTreeMap::new(), |mut m, c| {
            *m.entry(*c).or_insert(0.0) += 1.0;
            m
        });
        let model = FrequencyModel::from_weights(idx.n_keywords(), counts).unwrap();
        let params = AttackParams { n_iter: 20, ..AttackParams::default() };
        let a = run_pipeline(&trace, &idx, &model, &QuerySetting::Separate(2), &params, seed).unwrap();
        let b = run_pipeline(&trace, &idx, &model, &QuerySetting::Separate(2), &params, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
