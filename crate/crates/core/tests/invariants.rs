//! Exact identities and inequalities on random small graphs.

use clockrc::domination::verify_alpha_bound;
use clockrc::oracle::{check_cell, lemma_sweep};
use clockrc::reflection::injection_sweep;
use clockrc::{Exec, Graph, WeightTable};
use proptest::prelude::*;

/// Random graph with 1–2 boundary vertices and up to 4 free vertices.
fn small_graph() -> impl Strategy<Value = Graph> {
    (1usize..=2, 1usize..=4)
        .prop_flat_map(|(b, m)| {
            let n = b + m;
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|a| (a + 1..n).map(move |c| (a, c)))
                .filter(|&(a, c)| !(a < b && c < b))
                .collect();
            (
                Just(b),
                Just(n),
                proptest::sample::subsequence(pairs.clone(), 0..=pairs.len().min(5)),
            )
        })
        .prop_map(|(b, n, edges)| Graph::new(n, 0..b, edges).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_checks_hold(g in small_graph(), q in 2usize..=5, beta in 0.05f64..5.0) {
        let wt = WeightTable::new(q, beta).unwrap();
        let report = check_cell("random", &g, &wt).unwrap();
        prop_assert!(report.passes(), "{report:?}");
        prop_assert!(verify_alpha_bound(&g, &wt).unwrap().passes());
    }

    #[test]
    fn injection_agrees_with_counts(g in small_graph(), q in 2usize..=5) {
        let wt = WeightTable::new(q, 1.0).unwrap();
        let lemma = lemma_sweep(&g, &wt).unwrap();
        let sweep = injection_sweep(&g, &wt, Exec::Sequential).unwrap();
        prop_assert!(lemma.passes());
        prop_assert!(sweep.passes(), "{:?}", sweep.failures.first());
        prop_assert_eq!(lemma.outcomes, sweep.outcomes);
    }
}
