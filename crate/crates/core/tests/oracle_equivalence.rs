use porepath::eval::oracle::{oracle_decode, random_instance, run_trials};
use porepath::trellis::{construct_with, Normalization, TrellisOptions};
use porepath::{build_table, trace, ExactCost};
use proptest::prelude::*;

#[test]
fn trellis_matches_enumeration_on_small_instances() {
    let summary = run_trials(2, 300, 5, 17).unwrap();
    assert!(summary.all_passed(), "{:?}", summary.failures);
    assert_eq!(summary.exact, 300);
}

#[test]
fn single_event_matches_argmin() {
    let table = build_table(2).unwrap();
    for seed in 0..20 {
        let (model, events) = random_instance(2, 1, seed);
        let o = oracle_decode::<ExactCost>(&model, &table, &events).unwrap();
        let t = construct_with::<ExactCost>(&model, &table, &events, TrellisOptions::default()).unwrap();
        assert_eq!(o.cost, t.end_cost);
        assert_eq!(o.path.states, vec![t.end_state]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// In 64-bit floats with normalization off, both sides add the same terms
    /// in the same order along the optimal path, so the minima agree exactly.
    #[test]
    fn unnormalized_f64_costs_agree(seed in any::<u64>(), m in 1usize..=4) {
        let table = build_table(2).unwrap();
        let (model, events) = random_instance(2, m, seed);
        let o = oracle_decode::<f64>(&model, &table, &events).unwrap();
        let opts = TrellisOptions::default().with_normalization(Normalization::Disabled);
        let t = construct_with::<f64>(&model, &table, &events, opts).unwrap();
        prop_assert_eq!(o.cost, t.end_cost);
    }

    #[test]
    fn unique_optima_trace_to_the_oracle_path(seed in any::<u64>(), m in 2usize..=4) {
        let table = build_table(2).unwrap();
        let (model, events) = random_instance(2, m, seed);
        let o = oracle_decode::<ExactCost>(&model, &table, &events).unwrap();
        let t = construct_with::<ExactCost>(&model, &table, &events, TrellisOptions::default()).unwrap();
        prop_assert_eq!(o.cost, t.total_cost);
        if o.unique {
            prop_assert_eq!(trace(&t, &table).unwrap().states, o.path.states);
        }
    }
}
