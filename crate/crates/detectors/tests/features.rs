//! Feature-level properties over random graphs.

use detectors::{apigraph_fit, ApigraphExtractor, MamadroidExtractor};
use fcg_core::testutil::{permute_node_ids, random_graph, random_insertions, TestGraphSpec};
use fcg_core::{apply_perturbation, candidate_endpoints, Granularity};
use proptest::prelude::*;

fn row_sums_are_one_or_zero(values: &[f64], n: usize) -> bool {
    values.chunks(n).all(|row| {
        let sum: f64 = row.iter().sum();
        sum.abs() < 1e-9 || (sum - 1.0).abs() < 1e-9
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn markov_rows_stochastic_or_zero(seed in 0u64..10_000) {
        let g = random_graph(seed, &TestGraphSpec::default());
        for level in [Granularity::Class, Granularity::Package, Granularity::Family] {
            let ex = MamadroidExtractor::fit(std::slice::from_ref(&g), level).unwrap();
            let f = ex.extract(&g);
            prop_assert!(row_sums_are_one_or_zero(&f.values, ex.n_states()));
        }
        let map = apigraph_fit(std::slice::from_ref(&g), 3, seed).unwrap();
        let ex = ApigraphExtractor { map };
        let f = ex.extract(&g);
        prop_assert!(row_sums_are_one_or_zero(&f.values, ex.n_states()));
    }

    #[test]
    fn extraction_is_node_permutation_invariant(seed in 0u64..10_000) {
        let g = random_graph(seed, &TestGraphSpec::default());
        let h = permute_node_ids(&g, seed ^ 0xfeed);
        for level in [Granularity::Package, Granularity::Family] {
            let ex = MamadroidExtractor::fit(std::slice::from_ref(&g), level).unwrap();
            prop_assert_eq!(ex.extract(&g), ex.extract(&h));
        }
        let map = apigraph_fit(std::slice::from_ref(&g), 3, seed).unwrap();
        let ex = ApigraphExtractor { map };
        prop_assert_eq!(ex.extract(&g), ex.extract(&h));
    }

    #[test]
    fn one_insertion_changes_at_most_two_matrix_rows(seed in 0u64..10_000) {
        let g = random_graph(seed, &TestGraphSpec::default());
        let insertions = random_insertions(&g, 1, seed ^ 0xcafe);
        prop_assume!(!insertions.is_empty());
        let sets = candidate_endpoints(&g);
        let perturbed = apply_perturbation(&g, &sets, &insertions).unwrap();
        for level in [Granularity::Class, Granularity::Package, Granularity::Family] {
            let ex = MamadroidExtractor::fit(std::slice::from_ref(&g), level).unwrap();
            let before = ex.extract(&g);
            let after = ex.extract(&perturbed);
            let n = ex.n_states();
            let changed_rows = before
                .values
                .chunks(n)
                .zip(after.values.chunks(n))
                .filter(|(b, a)| b != a)
                .count();
            prop_assert!(changed_rows <= 2, "{changed_rows} rows changed at {level}");
        }
    }
}
