//! Distributed cycle detection against the sequential oracle, the
//! per-iteration safety and coloring invariants, and reproducibility.

use housekit_core::cycles::{
    oracle_cycles, run_deterministic_cycles, run_las_vegas_cycles, FunctionalGraph, RunOptions,
};
use housekit_core::gen::{generate_cycle_graph, generate_functional_graph};
use housekit_core::sim::NodeId;
use housekit_oracles::{check_coloring_contract, check_cycle_report, check_deactivation_safety};

use proptest::prelude::*;

#[test]
fn las_vegas_matches_oracle_with_invariants() {
    for seed in 0..120u64 {
        let n = 1 + (seed as usize * 11) % 160;
        let g = generate_functional_graph(n, seed);
        let expected = oracle_cycles(&g);
        let run = run_las_vegas_cycles(&g, seed ^ 0xBEEF, &RunOptions::default()).unwrap();
        check_cycle_report(&g, &run.report, &expected).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        check_deactivation_safety(&run.report, 1)
            .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert!(run.stats.consistent());
    }
}

#[test]
fn deterministic_matches_oracle_with_invariants() {
    for seed in 0..120u64 {
        let n = 1 + (seed as usize * 13) % 160;
        let g = generate_functional_graph(n, seed ^ 0x71);
        let expected = oracle_cycles(&g);
        let run = run_deterministic_cycles(&g, &RunOptions::default()).unwrap();
        check_cycle_report(&g, &run.report, &expected).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        check_deactivation_safety(&run.report, 5)
            .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        check_coloring_contract(&run.report).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert!(run.stats.consistent());
    }
}

#[test]
fn one_seed_many_flips_on_a_fixed_graph() {
    let g = generate_functional_graph(96, 12345);
    let expected = oracle_cycles(&g);
    for seed in 0..100u64 {
        let run = run_las_vegas_cycles(&g, seed, &RunOptions::default()).unwrap();
        check_cycle_report(&g, &run.report, &expected).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
    }
}

#[test]
fn pure_cycles_resolve_for_both_variants() {
    for &len in &[1usize, 2, 3, 5, 16, 64] {
        let g = generate_cycle_graph(len, len as u64);
        let expected = oracle_cycles(&g);
        assert_eq!(expected.cycles.len(), 1);
        let lv = run_las_vegas_cycles(&g, 99, &RunOptions::default()).unwrap();
        check_cycle_report(&g, &lv.report, &expected).unwrap();
        let det = run_deterministic_cycles(&g, &RunOptions::default()).unwrap();
        check_cycle_report(&g, &det.report, &expected).unwrap();
        assert_eq!(det.stats.per_stage[0].cycle_lengths, vec![len]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Membership from both protocol variants equals the walk oracle on
    /// arbitrary successor vectors.
    #[test]
    fn protocols_agree_with_oracle(succ in prop::collection::vec(0..40usize, 1..40)) {
        let n = succ.len();
        let succ: Vec<NodeId> = succ.into_iter().map(|s| NodeId(s % n)).collect();
        let g = FunctionalGraph::new(succ);
        let expected = oracle_cycles(&g);
        let lv = run_las_vegas_cycles(&g, 7, &RunOptions::default()).unwrap();
        prop_assert_eq!(&lv.report.in_cycle, &expected.in_cycle);
        let det = run_deterministic_cycles(&g, &RunOptions::default()).unwrap();
        prop_assert_eq!(&det.report.in_cycle, &expected.in_cycle);
    }
}
