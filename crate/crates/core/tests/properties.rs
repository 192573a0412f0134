//! Property tests for the algebraic invariants of local models and memory policies.

use std::borrow::Cow;

use proptest::prelude::*;

use bellmem::engine::{run_session, Session, SettingsDistribution, SourceModel, Strategy as SimStrategy};
use bellmem::model::{
    behavior_from_lhv, behavior_from_policy, check_no_signaling, validate_behavior, BehaviorTable,
    Choice, HiddenValue, LhvModel, MemoryPolicy, ModelError, OutcomePair, SettingPair, Stationary,
    TrialRecord, Wing, EXACT_TOL,
};
use bellmem::statistics::{
    b_value, check_identity, chsh_value, martingale_pvalue, t_statistic,
};
use bellmem::strategies::{
    make_deterministic, make_memory_policy, DeterministicAssignment, Granularity, HistoryClassing,
    TablePolicySpec,
};
use bellmem::filter_detected;

fn arb_hidden() -> impl proptest::strategy::Strategy<Value = (f64, [f64; 2], [f64; 2])> {
    (
        0.01f64..1.0,
        prop::array::uniform2(0.0f64..=1.0),
        prop::array::uniform2(0.0f64..=1.0),
    )
}

fn arb_model() -> impl proptest::strategy::Strategy<Value = LhvModel> {
    prop::collection::vec(arb_hidden(), 1..6).prop_map(|parts| {
        let sum: f64 = parts.iter().map(|p| p.0).sum();
        let hidden = parts
            .into_iter()
            .enumerate()
            .map(|(i, (w, a, b))| HiddenValue::new(i.to_string(), w / sum, a, b))
            .collect();
        LhvModel::new(hidden).unwrap()
    })
}

fn arb_deterministic_model() -> impl proptest::strategy::Strategy<Value = LhvModel> {
    (0usize..16).prop_map(|i| make_deterministic(DeterministicAssignment::from_index(i)))
}

fn arb_record() -> impl proptest::strategy::Strategy<Value = TrialRecord> {
    (any::<bool>(), 0usize..4, 0usize..4).prop_map(|(emitted, s, o)| TrialRecord {
        index: 0,
        emitted,
        settings: SettingPair::from_index(s),
        outcomes: if emitted {
            OutcomePair::from_index(o)
        } else {
            OutcomePair::ZZ
        },
    })
}

/// Independent route to an LHV table: expand each hidden value into the 16
/// deterministic assignments (responses per setting drawn independently),
/// then mix the vertex tables.
fn vertex_decomposition(model: &LhvModel) -> BehaviorTable {
    let mut weights = [0.0; 16];
    for h in model.hidden() {
        for a in DeterministicAssignment::all() {
            let mut w = h.weight;
            for (choice_idx, o) in a.alice.iter().enumerate() {
                let p = h.response(Wing::Alice, Choice::from_index(choice_idx));
                w *= if o.is_plus() { p } else { 1.0 - p };
            }
            for (choice_idx, o) in a.bob.iter().enumerate() {
                let p = h.response(Wing::Bob, Choice::from_index(choice_idx));
                w *= if o.is_plus() { p } else { 1.0 - p };
            }
            weights[a.index()] += w;
        }
    }
    let mut prob = [[0.0; 4]; 4];
    for a in DeterministicAssignment::all() {
        // vertex tables are 0/1: read off the single outcome per setting pair
        for pair in SettingPair::ALL {
            let out = OutcomePair::new(a.alice[pair.alice.index()], a.bob[pair.bob.index()]);
            prob[pair.index()][out.index()] += weights[a.index()];
        }
    }
    BehaviorTable::new(prob)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn lhv_tables_are_valid_and_no_signaling(m in arb_model()) {
        let t = behavior_from_lhv(&m);
        prop_assert!(validate_behavior(&t, EXACT_TOL).ok);
        prop_assert!(check_no_signaling(&t) <= EXACT_TOL);
    }

    #[test]
    fn lhv_tables_satisfy_both_inequalities(m in arb_model()) {
        let t = m.behavior();
        let b = b_value(&t).unwrap();
        let s = chsh_value(&t).unwrap();
        prop_assert!(b >= -EXACT_TOL, "B = {}", b);
        prop_assert!(s <= 2.0 + EXACT_TOL, "S = {}", s);
        prop_assert!(check_identity(&t, EXACT_TOL).unwrap() <= EXACT_TOL);
    }

    #[test]
    fn table_is_affine_in_weights(m1 in arb_model(), m2 in arb_model(), w in 0.0f64..=1.0) {
        let mut hidden: Vec<HiddenValue> = m1.hidden().iter().cloned().map(|mut h| { h.weight *= w; h }).collect();
        hidden.extend(m2.hidden().iter().cloned().map(|mut h| { h.weight *= 1.0 - w; h }));
        let mixed = LhvModel::new(hidden).unwrap();
        let want = m1.behavior().mix(&m2.behavior(), w);
        prop_assert!(mixed.behavior().max_abs_diff(&want) <= 1e-12);
    }

    #[test]
    fn table_is_convex_combination_of_vertices(m in arb_model()) {
        prop_assert!(m.behavior().max_abs_diff(&vertex_decomposition(&m)) <= 1e-12);
    }

    #[test]
    fn identity_holds_on_no_signaling_mixtures(m in arb_model(), w in 0.0f64..=1.0) {
        // mixtures with the PR box stay no-signaling but leave the local polytope
        let t = BehaviorTable::pr_box().mix(&m.behavior(), w);
        let b = b_value(&t).unwrap();
        let s = chsh_value(&t).unwrap();
        prop_assert!((s - (2.0 - 4.0 * b)).abs() <= 1e-12);
        prop_assert_eq!(b >= -EXACT_TOL, s <= 2.0 + EXACT_TOL);
    }

    #[test]
    fn depth_zero_policy_is_history_independent(
        m in arb_model(),
        h1 in prop::collection::vec(arb_record(), 0..5),
        h2 in prop::collection::vec(arb_record(), 0..5),
    ) {
        let p = Stationary(m);
        prop_assert_eq!(behavior_from_policy(&p, &h1).unwrap(), behavior_from_policy(&p, &h2).unwrap());
    }

    #[test]
    fn every_memory_policy_class_has_nonnegative_b(
        models in prop::collection::vec(prop_oneof![arb_model(), arb_deterministic_model()], 16),
        history in prop::collection::vec(arb_record(), 0..4),
    ) {
        let classing = HistoryClassing::new(2, Granularity::Outcome);
        let mut spec = TablePolicySpec::new(classing).unwrap();
        for (c, m) in models.into_iter().enumerate() {
            spec.set(c, m);
        }
        let policy = make_memory_policy(spec).unwrap();
        for t in policy.class_tables() {
            prop_assert!(b_value(&t).unwrap() >= -EXACT_TOL);
        }
        let t = behavior_from_policy(&policy, &history).unwrap();
        prop_assert!(b_value(&t).unwrap() >= -EXACT_TOL);
    }

    #[test]
    fn t_statistic_invariant_under_filter(records in prop::collection::vec(arb_record(), 0..200)) {
        prop_assert_eq!(t_statistic(&records).t, t_statistic(&filter_detected(&records)).t);
        for r in filter_detected(&records) {
            prop_assert!(r.outcomes != OutcomePair::ZZ);
        }
    }

    #[test]
    fn pvalue_monotone(n in 1u64..100_000, a in 0u64..100_000, b in 0u64..100_000) {
        let (lo, hi) = (a.min(b).min(n) as i64, a.max(b).min(n) as i64);
        let p_lo = martingale_pvalue(-lo, n).unwrap();
        let p_hi = martingale_pvalue(-hi, n).unwrap();
        prop_assert!(p_hi <= p_lo);
        prop_assert!(p_lo > 0.0 || lo > 0);
        prop_assert!(p_lo <= 1.0);
        // fixed T, more trials: larger (less significant) p
        let p_more = martingale_pvalue(-lo, n + 1).unwrap();
        prop_assert!(p_more >= p_lo);
    }
}

/// Depth-1 policy whose model depends on every field of the last record.
struct Reactive;

impl MemoryPolicy for Reactive {
    fn depth(&self) -> usize {
        1
    }

    fn model_at(&self, window: &[TrialRecord]) -> Result<Cow<'_, LhvModel>, ModelError> {
        let key = window
            .last()
            .map_or(0, |r| 4 * r.settings.index() + r.outcomes.index());
        let p = (key as f64 + 1.0) / 18.0;
        Ok(Cow::Owned(LhvModel::new(vec![
            HiddenValue::new("x", 0.5, [p, 1.0 - p], [0.3, p]),
            HiddenValue::new("y", 0.5, [1.0 - p, 0.2], [p, 0.9]),
        ])?))
    }
}

fn swap_bob(p: SettingPair) -> SettingPair {
    let bob = if p.bob == Choice::Unprimed { Choice::Primed } else { Choice::Unprimed };
    SettingPair::new(p.alice, bob)
}

fn swap_alice(p: SettingPair) -> SettingPair {
    let alice = if p.alice == Choice::Unprimed { Choice::Primed } else { Choice::Unprimed };
    SettingPair::new(alice, p.bob)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn outcome_of_one_wing_ignores_the_other_setting(seed in any::<u64>(), warmup in 0usize..50, model in arb_model()) {
        for strategy in [SimStrategy::policy(Reactive), SimStrategy::policy(Stationary(model.clone()))] {
            let mut session = Session::new(&strategy, SourceModel::always(), SettingsDistribution::unbiased(), seed);
            for _ in 0..warmup {
                session.step().unwrap();
            }
            let mut probe = session.clone();
            let base = probe.step().unwrap();
            let mut other = session.clone();
            let bob_swapped = other.step_with_settings(Some(swap_bob(base.settings))).unwrap();
            prop_assert_eq!(bob_swapped.outcomes.alice, base.outcomes.alice);
            let mut other = session.clone();
            let alice_swapped = other.step_with_settings(Some(swap_alice(base.settings))).unwrap();
            prop_assert_eq!(alice_swapped.outcomes.bob, base.outcomes.bob);
        }
    }

    #[test]
    fn changing_settings_never_rewrites_the_past(seed in any::<u64>(), n in 1usize..60, forced in 0usize..4) {
        let strategy = SimStrategy::policy(Reactive);
        let dist = SettingsDistribution::new(0.2, -0.1).unwrap();
        let source = SourceModel::new(0.7).unwrap();
        let original = run_session(&strategy, source, dist, 80, seed).unwrap();
        let mut session = Session::new(&strategy, source, dist, seed);
        for _ in 0..n {
            session.step().unwrap();
        }
        session.step_with_settings(Some(SettingPair::from_index(forced))).unwrap();
        prop_assert_eq!(&session.history()[..n], &original[..n]);
    }
}
