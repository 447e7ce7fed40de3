mod common;

use dso_core::evaporation::evaporate;
use dso_core::graph::transition_matrix;
use dso_core::markov::{avoidance_hitting_cost, Avoid};
use dso_core::oracle::{preprocess_mp, BuildOptions};
use dso_core::reference::*;
use dso_core::{Graph, TransitionPolicy};
use proptest::prelude::*;

#[test]
fn cycle_walks_converge_to_the_matrix_cost() {
    let g = Graph::parse("n 3\n0 1 1\n1 0 1\n1 2 2\n").unwrap();
    let p = transition_matrix(&g, TransitionPolicy::DegreeWeighted);
    let chain = evaporate(&g, &p, 0.3).unwrap();
    let walks = enumerate_walks(&g, &p, &chain, 0, 2, 60);
    assert!(walks.residual < 1e-12);
    let u = avoidance_hitting_cost(&g, chain.dense(), 2, Avoid::Leak).unwrap();
    assert!((walks.hitting_cost().unwrap() - u[0].value().unwrap()).abs() < 1e-9);
    assert!((walks.decomposed_cost().unwrap() - u[0].value().unwrap()).abs() < 1e-9);
}

#[test]
fn truncation_is_reported() {
    let g = Graph::parse("n 3\n0 1 1\n1 0 1\n1 2 1\n").unwrap();
    let p = transition_matrix(&g, TransitionPolicy::Uniform);
    let chain = evaporate(&g, &p, 0.9).unwrap();
    let walks = enumerate_walks(&g, &p, &chain, 0, 2, 5);
    assert!(walks.truncated && walks.residual > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn failures_equal_deleted_nodes(g in common::graphs(2, 25), bits in any::<u64>()) {
        let t = (bits % g.n() as u64) as usize;
        let others: Vec<usize> = (0..g.n()).filter(|&v| v != t).collect();
        let fails = common::pick(&others, (bits >> 8) as usize % g.n(), bits >> 16);
        let with = dijkstra_reduced(&g, t, &fails).unwrap();
        let without = dijkstra_reduced(&g.without_nodes(&fails), t, &[]).unwrap();
        for v in 0..g.n() {
            let expected = if fails.contains(&v) { None } else { without.distance_units[v] };
            prop_assert_eq!(with.distance_units[v], expected);
        }
    }

    #[test]
    fn walk_enumeration_matches_matrix_costs(g in common::graphs(2, 7), alpha in 0.05f64..0.35) {
        let t = common::busiest_target(&g);
        let p = transition_matrix(&g, TransitionPolicy::DegreeWeighted);
        let chain = evaporate(&g, &p, alpha).unwrap();
        let u = avoidance_hitting_cost(&g, chain.dense(), t, Avoid::Leak).unwrap();
        for s in common::sources(&g, t) {
            let walks = enumerate_walks(&g, &p, &chain, s, t, 200);
            prop_assume!(walks.residual < 1e-12);
            let matrix = u[s].value().unwrap();
            prop_assert!((walks.hitting_cost().unwrap() - matrix).abs() < 1e-9);
            prop_assert!((walks.decomposed_cost().unwrap() - matrix).abs() < 1e-9);
        }
    }

    #[test]
    fn shortest_path_flows_match_the_limit(g in common::graphs(2, 12)) {
        let t = common::busiest_target(&g);
        let p = transition_matrix(&g, TransitionPolicy::DegreeWeighted);
        let opts = BuildOptions { alpha: Some(1e-8), allow_unsafe: true, ..Default::default() };
        let o = preprocess_mp(&g, &opts).unwrap();
        for s in common::sources(&g, t) {
            let exact = shortest_path_flows(&g, &p, s, t).unwrap();
            let flows = dso_core::evaporation::node_flows_in(o.fundamental(), s, t).unwrap();
            for m in 0..g.n() {
                prop_assert!((exact[m] - flows[m]).abs() < 1e-4, "s={} m={} {} vs {}", s, m, exact[m], flows[m]);
            }
            prop_assert_eq!(exact[s], 1.0);
            prop_assert_eq!(exact[t], 1.0);
        }
    }
}
