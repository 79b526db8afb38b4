//! Liveness against brute-force reachability, plus structural checks on the corpus.

mod common;

use common::{dag, load};
use graphvx::optimize::{alive_vertices, classify, eliminate_dead_nodes, Dag, Vertex};
use proptest::prelude::*;

#[test]
fn alive_set_matches_reachability_on_random_dags() {
    for seed in 0..500 {
        let d = dag::random(seed, 60, 2.5);
        assert_eq!(alive_vertices(&d), dag::brute_force_alive(&d), "seed {seed}");
    }
}

#[test]
fn classification_of_a_chain() {
    // in -> op -> v -> op -> out, plus an isolated non-virtual object.
    let d = Dag {
        vertices: vec![
            Vertex::Data { is_virtual: false },
            Vertex::Operator,
            Vertex::Data { is_virtual: true },
            Vertex::Operator,
            Vertex::Data { is_virtual: false },
            Vertex::Data { is_virtual: false },
        ],
        edges: vec![(0, 1), (1, 2), (2, 3), (3, 4)],
    };
    let c = classify(&d);
    assert_eq!(c.d_in.into_iter().collect::<Vec<_>>(), vec![0, 5]);
    assert_eq!(c.d_out.into_iter().collect::<Vec<_>>(), vec![4]);
    assert_eq!(alive_vertices(&d), vec![true, true, true, true, true, false]);
}

#[test]
fn edge_fig1_drops_the_unused_derivative() {
    let c = load("edge_fig1", Some((32, 32)));
    let f = eliminate_dead_nodes(&c.expanded).unwrap();
    let dead: Vec<String> = f.dead_nodes().iter().map(|n| c.expanded.graph().nodes[n].op.name()).collect();
    assert_eq!(dead, vec!["SobelX"]);
    let virt2 = c.loaded.id("virt2").unwrap();
    assert_eq!(f.dead_data(), vec![virt2]);
}

#[test]
fn intermediate_non_virtual_objects_stay_alive() {
    // A non-virtual object read by a later node is both a root and a leaf.
    let d = Dag {
        vertices: vec![
            Vertex::Data { is_virtual: false },
            Vertex::Operator,
            Vertex::Data { is_virtual: false },
            Vertex::Operator,
            Vertex::Data { is_virtual: true },
        ],
        edges: vec![(0, 1), (1, 2), (2, 3), (3, 4)],
    };
    assert_eq!(alive_vertices(&d), vec![true, true, true, false, false]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn alive_is_closed_under_predecessors(seed in any::<u64>(), factor in 0.5f64..4.0) {
        let d = dag::random(seed, 60, factor);
        let alive = alive_vertices(&d);
        for &(a, b) in &d.edges {
            prop_assert!(!alive[b] || alive[a]);
        }
        prop_assert_eq!(alive, dag::brute_force_alive(&d));
    }
}
