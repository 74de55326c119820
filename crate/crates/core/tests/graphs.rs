use std::collections::BTreeSet;

use approx::assert_relative_eq;
use proptest::prelude::*;
use slice_planner::decision_graph::{
    build_decision_graph, DecisionGraph, DecisionVertex, EdgeKind, ResidualLedger,
};
use slice_planner::expanded_graph::{
    assign_weights, expand, find_candidates, prune_edges, CandidatePath, Layer, SearchSpec,
};
use slice_planner::model::{parse_scenario, Scenario, ServiceRequest};
use slice_planner::synth::{random_scenario, SynthOptions};

fn robots() -> Scenario {
    parse_scenario(include_str!("../scenarios/robots.toml")).unwrap()
}

fn lone_node() -> Scenario {
    parse_scenario(
        r#"
name = "lone"
locations = ["a"]

[[nodes]]
id = "c"
resources = { cpu = 10.0 }
coverage = ["a"]
interfaces = ["x"]
reliability = 0.9999

[[links]]
id = "a-c"
from = "a"
to = "c"
delay = 1.0
capacity = 10.0

[[vnfs]]
id = "f1"
resources = { cpu = 0.1 }

[[vnfs]]
id = "f2"
resources = { cpu = 0.1 }

[[vnfs]]
id = "f3"
resources = { cpu = 0.1 }

[[services]]
id = "s"
chain = ["f1", "f2", "f3"]
max_delay = 10.0
min_reliability = 0.99

[[services.endpoints]]
location = "a"
load = 1.0
"#,
    )
    .unwrap()
}

/// Every compute node allowed at every layer, no node costs.
fn open_spec(
    s: &Scenario,
    req: &ServiceRequest,
    dg: &DecisionGraph,
    layers: usize,
    max_candidates: usize,
) -> SearchSpec {
    let n = s.graph.nodes.len();
    let lifetime = &req.endpoints[0].lifetime;
    SearchSpec {
        source: dg.vertex_index(DecisionVertex::Endpoint(0)).unwrap(),
        start_depth: [0, 0],
        layers: (0..layers)
            .map(|_| Layer {
                allowed: s.graph.nodes.iter().map(|x| x.is_compute()).collect(),
                node_cost: vec![0.0; n],
                traffic: 0.0,
            })
            .collect(),
        max_candidates,
        delay_budget: req.delay_target(),
        reliability_floor: lifetime
            .iter()
            .map(|&t| (t, req.reliability_target()))
            .collect(),
    }
}

fn candidates(
    s: &Scenario,
    req: &ServiceRequest,
    gamma: u32,
    k_paths: usize,
    max_candidates: usize,
) -> Vec<CandidatePath> {
    let chain = req.graph.root_to_leaf_paths()[0].len();
    let ledger = ResidualLedger::new(&s.graph);
    let dg = prune_edges(
        &build_decision_graph(&s.graph, &ledger, req, chain, k_paths),
        &s.graph,
        req,
        None,
    );
    let wg = assign_weights(
        &dg,
        req.max_delay,
        req.min_reliability,
        &req.endpoints[0].lifetime,
    );
    let xg = expand(&wg, gamma, 0.0);
    find_candidates(
        &xg,
        &s.graph,
        &open_spec(s, req, &dg, chain, max_candidates),
    )
    .candidates
}

/// Single-endpoint chain requests drawn from the synthetic generator.
fn chain_requests(seed: u64) -> (Scenario, ServiceRequest) {
    let s = random_scenario(seed, &SynthOptions::oracle_sized());
    let req = s.services[0].clone();
    (s, req)
}

#[test]
fn vertex_count_is_endpoints_plus_compute_times_chain() {
    let s = robots();
    let req = &s.services[0];
    let dg = build_decision_graph(&s.graph, &ResidualLedger::new(&s.graph), req, 3, 1);
    assert_eq!(dg.vertices.len(), 1 + 6 * 3);
}

#[test]
fn lone_node_graph_has_replica_chain_and_one_virtual_edge() {
    let s = lone_node();
    let dg = build_decision_graph(
        &s.graph,
        &ResidualLedger::new(&s.graph),
        &s.services[0],
        3,
        1,
    );
    let c = |replica| {
        dg.vertex_index(DecisionVertex::Compute { node: 0, replica })
            .unwrap()
    };
    let e = dg.vertex_index(DecisionVertex::Endpoint(0)).unwrap();
    assert_eq!(dg.vertices.len(), 4);
    let arcs: BTreeSet<(usize, usize, bool)> = dg
        .edges
        .iter()
        .map(|x| (x.from, x.to, x.is_auxiliary()))
        .collect();
    assert_eq!(
        arcs,
        BTreeSet::from([(e, c(0), false), (c(0), c(1), true), (c(1), c(2), true)])
    );
}

#[test]
fn robot_to_robot_edges_go_through_each_access_point() {
    let s = robots();
    let g = &s.graph;
    let dg = build_decision_graph(g, &ResidualLedger::new(g), &s.services[0], 1, 20);
    let node = |id: &str| g.nodes.iter().position(|n| n.id.as_str() == id).unwrap();
    let from = dg
        .vertex_index(DecisionVertex::Compute {
            node: node("robo1"),
            replica: 0,
        })
        .unwrap();
    let to = dg
        .vertex_index(DecisionVertex::Compute {
            node: node("robo2"),
            replica: 0,
        })
        .unwrap();
    let mut got: Vec<(f64, f64)> = dg
        .edges
        .iter()
        .filter(|e| e.from == from && e.to == to && e.links().len() == 2)
        .map(|e| (e.delay, e.reliability[0]))
        .collect();
    got.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Links are lossless, so each realization keeps the access point and robo2 reliabilities.
    let expected = [
        (2.0, 0.999999 * 0.99999),
        (4.0, 0.99999 * 0.99999),
        (6.0, 0.9994 * 0.99999),
    ];
    assert_eq!(got.len(), expected.len());
    for ((d, r), (ed, er)) in got.iter().zip(expected) {
        assert_relative_eq!(*d, ed);
        assert_relative_eq!(*r, er, max_relative = 1e-15);
    }
}

#[test]
fn virtual_edges_equal_fold_of_their_realization() {
    for seed in 0..50 {
        let s = random_scenario(seed, &SynthOptions::default());
        let ledger = ResidualLedger::new(&s.graph);
        let dg = build_decision_graph(&s.graph, &ledger, &s.services[0], 2, 3);
        for e in &dg.edges {
            if let EdgeKind::Virtual { links } = &e.kind {
                let (cap, delay, rel) = DecisionGraph::fold_realization(&s.graph, &ledger, links);
                assert_eq!((cap, delay, &rel), (e.capacity, e.delay, &e.reliability));
            } else {
                assert_eq!(e.delay, 0.0);
                assert!(e.reliability.iter().all(|&r| r == 1.0));
            }
        }
    }
}

#[test]
fn lone_node_yields_exactly_one_candidate() {
    let s = lone_node();
    let got = candidates(&s, &s.services[0], 10, 1, 16);
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].placement, vec![0, 0, 0]);
}

#[test]
fn candidates_are_deterministic() {
    for seed in 0..30 {
        let (s, req) = chain_requests(seed);
        assert_eq!(
            candidates(&s, &req, 10, 3, 32),
            candidates(&s, &req, 10, 3, 32)
        );
    }
}

#[test]
fn every_candidate_meets_the_additive_targets() {
    for seed in 0..200 {
        let (s, req) = chain_requests(seed);
        let g = &s.graph;
        let chain = req.graph.root_to_leaf_paths()[0].len();
        let dg = prune_edges(
            &build_decision_graph(g, &ResidualLedger::new(g), &req, chain, 3),
            g,
            &req,
            None,
        );
        for gamma in [1, 3, 10, 40] {
            for c in candidates(&s, &req, gamma, 3, 64) {
                let links: Vec<usize> = c
                    .edges
                    .iter()
                    .flat_map(|&e| dg.edges[e].links().to_vec())
                    .collect();
                let delay: f64 = links.iter().map(|&l| g.links[l].delay).sum();
                assert!(delay <= req.delay_target(), "seed {seed}: delay {delay}");
                for &t in &req.endpoints[0].lifetime {
                    let rel: f64 = links
                        .iter()
                        .map(|&l| {
                            g.links[l].reliability.at(t) * g.vertex_reliability(g.links[l].to, t)
                        })
                        .product();
                    assert!(
                        rel >= req.reliability_target(),
                        "seed {seed}: reliability {rel} at t={t}"
                    );
                }
            }
        }
    }
}

#[test]
fn expanded_size_within_bound() {
    for seed in 0..100 {
        let (s, req) = chain_requests(seed);
        let chain = req.graph.root_to_leaf_paths()[0].len() as u64;
        let dg = build_decision_graph(
            &s.graph,
            &ResidualLedger::new(&s.graph),
            &req,
            chain as usize,
            2,
        );
        let wg = assign_weights(
            &dg,
            req.max_delay,
            req.min_reliability,
            &req.endpoints[0].lifetime,
        );
        let compute = s.graph.compute_nodes().count() as u64;
        for gamma in [1u64, 2, 5, 17, 40] {
            let xg = expand(&wg, gamma as u32, 0.0);
            let bound = (gamma + 1).pow(2) * (chain * compute + req.endpoints.len() as u64);
            assert!(
                xg.vertex_count() <= bound,
                "{} > {bound}",
                xg.vertex_count()
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn refining_gamma_only_adds_candidates(seed in 0u64..10_000, gamma in 1u32..8, m in 2u32..4) {
        let (s, req) = chain_requests(seed);
        let key = |c: &CandidatePath| (c.placement.clone(), c.edges.clone());
        let coarse: BTreeSet<_> = candidates(&s, &req, gamma, 2, 100_000).iter().map(key).collect();
        let fine: BTreeSet<_> = candidates(&s, &req, gamma * m, 2, 100_000).iter().map(key).collect();
        prop_assert!(coarse.is_subset(&fine), "seed {seed}: {:?} not within {:?}", coarse, fine);
    }
}
