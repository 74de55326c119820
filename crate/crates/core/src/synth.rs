//! Seeded generator of small random scenarios for property tests and `validate --random`.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    Endpoint, EndpointId, InterfaceId, LinkId, LocationId, NodeId, PhysicalGraph, PhysicalLink,
    PhysicalNode, PlannerConfig, Reliability, ResourceKind, Scenario, ServiceGraph, ServiceRequest,
    Upstream, Vertex, Vnf, VnfId,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub max_vnfs: usize,
    pub max_endpoints: usize,
    pub max_services: usize,
    /// Allow branching service graphs.
    pub trees: bool,
    /// Allow more than one time step and time-varying reliability.
    pub time_varying: bool,
    pub max_instance_replication: u32,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            min_nodes: 3,
            max_nodes: 6,
            max_vnfs: 3,
            max_endpoints: 3,
            max_services: 2,
            trees: true,
            time_varying: true,
            max_instance_replication: 2,
        }
    }
}

impl SynthOptions {
    /// Instances the exhaustive oracle accepts: one endpoint, a chain, no replication.
    pub fn oracle_sized() -> Self {
        Self {
            min_nodes: 3,
            max_nodes: 4,
            max_vnfs: 2,
            max_endpoints: 1,
            max_services: 1,
            trees: false,
            time_varying: true,
            max_instance_replication: 0,
        }
    }
}

fn reliability(rng: &mut ChaCha8Rng, steps: usize, lo: f64) -> Reliability {
    if steps > 1 && rng.gen_bool(0.3) {
        Reliability::Steps(
            (0..steps)
                .map(|_| {
                    if rng.gen_bool(0.05) {
                        0.0
                    } else {
                        rng.gen_range(lo..=1.0)
                    }
                })
                .collect(),
        )
    } else {
        Reliability::Constant(rng.gen_range(lo..=1.0))
    }
}

pub fn random_scenario(seed: u64, opts: &SynthOptions) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = if opts.time_varying {
        rng.gen_range(1..=3)
    } else {
        1
    };
    let locations: Vec<LocationId> = (0..rng.gen_range(1..=2))
        .map(|i| LocationId(format!("a{i}")))
        .collect();
    let cpu = ResourceKind::cpu();
    let storage = ResourceKind::from("storage");
    let interfaces = [InterfaceId::from("x"), InterfaceId::from("y")];

    let n_vnfs = rng.gen_range(1..=opts.max_vnfs.max(1));
    let vnfs: Vec<Vnf> = (0..n_vnfs)
        .map(|j| {
            let mut per_unit_resource = BTreeMap::from([(cpu.clone(), rng.gen_range(0.05..0.5))]);
            if rng.gen_bool(0.25) {
                per_unit_resource.insert(storage.clone(), rng.gen_range(0.5..2.0));
            }
            let required_interfaces = if rng.gen_bool(0.25) {
                BTreeSet::from([interfaces[0].clone()])
            } else {
                BTreeSet::new()
            };
            Vnf {
                id: VnfId(format!("v{j}")),
                per_unit_resource,
                required_interfaces,
            }
        })
        .collect();

    let n_nodes = rng.gen_range(opts.min_nodes..=opts.max_nodes.max(opts.min_nodes));
    let mut nodes = Vec::with_capacity(n_nodes);
    for i in 0..n_nodes {
        let mut resources = BTreeMap::new();
        let mut resource_unit_cost = BTreeMap::new();
        if rng.gen_bool(0.8) {
            resources.insert(cpu.clone(), rng.gen_range(0.3..4.0));
            resource_unit_cost.insert(cpu.clone(), rng.gen_range(0.5..5.0));
            if rng.gen_bool(0.6) {
                resources.insert(storage.clone(), rng.gen_range(0.0..10.0));
                resource_unit_cost.insert(storage.clone(), rng.gen_range(0.0..0.5));
            }
        }
        let mut node_interfaces = BTreeSet::new();
        for iface in &interfaces {
            if rng.gen_bool(0.6) {
                node_interfaces.insert(iface.clone());
            }
        }
        let coverage: BTreeSet<LocationId> = if node_interfaces.is_empty() {
            BTreeSet::new()
        } else {
            locations
                .iter()
                .filter(|_| rng.gen_bool(0.5))
                .cloned()
                .collect()
        };
        let vnf_instantiation_cost = vnfs
            .iter()
            .map(|v| (v.id.clone(), rng.gen_range(0.0..3.0)))
            .collect();
        nodes.push(PhysicalNode {
            id: NodeId(format!("n{i}")),
            resources,
            interfaces: node_interfaces,
            coverage,
            reliability: reliability(&mut rng, steps, 0.99),
            resource_unit_cost,
            vnf_instantiation_cost,
            tier: None,
        });
    }

    let mut links = Vec::new();
    for (li, loc) in locations.iter().enumerate() {
        for (n, node) in nodes.iter().enumerate() {
            if node.coverage.contains(loc) {
                links.push(PhysicalLink {
                    id: LinkId(format!("{loc}-{}", node.id)),
                    from: Vertex::Location(li),
                    to: Vertex::Node(n),
                    delay: rng.gen_range(0.5..3.0),
                    capacity: rng.gen_range(0.5..10.0),
                    unit_cost: rng.gen_range(0.0..1.0),
                    reliability: reliability(&mut rng, steps, 0.995),
                });
            }
        }
    }
    for a in 0..n_nodes {
        for b in a + 1..n_nodes {
            if rng.gen_bool(0.5) {
                let delay = rng.gen_range(0.5..5.0);
                let capacity = rng.gen_range(0.5..10.0);
                let unit_cost = rng.gen_range(0.0..1.0);
                let rel = reliability(&mut rng, steps, 0.995);
                for (x, y) in [(a, b), (b, a)] {
                    links.push(PhysicalLink {
                        id: LinkId(format!("{}-{}", nodes[x].id, nodes[y].id)),
                        from: Vertex::Node(x),
                        to: Vertex::Node(y),
                        delay,
                        capacity,
                        unit_cost,
                        reliability: rel.clone(),
                    });
                }
            }
        }
    }

    let ids: Vec<VnfId> = vnfs.iter().map(|v| v.id.clone()).collect();
    let services = (0..rng.gen_range(1..=opts.max_services.max(1)))
        .map(|k| {
            let mut order = ids.clone();
            order.shuffle(&mut rng);
            let mut graph = if opts.trees && order.len() == 3 && rng.gen_bool(0.4) {
                let children =
                    BTreeMap::from([(order[0].clone(), vec![order[1].clone(), order[2].clone()])]);
                ServiceGraph {
                    root: Some(order[0].clone()),
                    children,
                    chi: BTreeMap::new(),
                }
            } else {
                ServiceGraph::chain(&order)
            };
            if order.len() >= 2 && rng.gen_bool(0.4) {
                let next = graph
                    .children(&order[0])
                    .first()
                    .cloned()
                    .expect("root has a child");
                graph.chi.insert(
                    (Upstream::Endpoint, order[0].clone(), next),
                    rng.gen_range(0.5..1.5),
                );
            }
            let id = format!("s{k}");
            let mut locs = locations.clone();
            locs.shuffle(&mut rng);
            locs.truncate(rng.gen_range(1..=opts.max_endpoints.max(1)));
            let endpoints = locs
                .into_iter()
                .map(|loc| {
                    let mut lifetime: Vec<usize> =
                        (0..steps).filter(|_| rng.gen_bool(0.7)).collect();
                    if lifetime.is_empty() {
                        lifetime.push(rng.gen_range(0..steps));
                    }
                    Endpoint {
                        id: EndpointId(format!("{id}@{loc}")),
                        location: loc,
                        load: rng.gen_range(0.1..2.0),
                        lifetime,
                    }
                })
                .collect();
            let instance_count = if opts.max_instance_replication > 0 && rng.gen_bool(0.1) {
                BTreeMap::from([(order[0].clone(), 2)])
            } else {
                BTreeMap::new()
            };
            ServiceRequest {
                id,
                graph,
                endpoints,
                max_delay: if rng.gen_bool(0.9) {
                    Some(rng.gen_range(5.0..60.0))
                } else {
                    None
                },
                min_reliability: [None, Some(0.9), Some(0.95), Some(0.98), Some(0.99)]
                    .choose(&mut rng)
                    .copied()
                    .flatten(),
                isolated: rng.gen_bool(0.3),
                instance_count,
            }
        })
        .collect();

    let config = PlannerConfig {
        gamma: *[5, 10, 20].choose(&mut rng).expect("non-empty"),
        max_instance_replication: opts.max_instance_replication,
        ..PlannerConfig::default()
    };
    Scenario {
        name: format!("synth-{seed}"),
        graph: PhysicalGraph::new(nodes, locations, links, steps),
        vnfs: vnfs.into_iter().map(|v| (v.id.clone(), v)).collect(),
        services,
        config,
        currency: "USD".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_scenario() {
        let a = random_scenario(7, &SynthOptions::default());
        let b = random_scenario(7, &SynthOptions::default());
        assert_eq!(
            format!("{:?}", a.graph.nodes),
            format!("{:?}", b.graph.nodes)
        );
        assert_eq!(format!("{:?}", a.services), format!("{:?}", b.services));
    }

    #[test]
    fn oracle_sized_scenarios_are_single_endpoint_chains() {
        for seed in 0..50 {
            let s = random_scenario(seed, &SynthOptions::oracle_sized());
            assert_eq!(s.services.len(), 1);
            assert_eq!(s.services[0].endpoints.len(), 1);
            assert_eq!(s.services[0].graph.root_to_leaf_paths().len(), 1);
        }
    }
}
