//! Independent KPI checker shared by the planner tests, the oracle and the CLI.
//!
//! Everything here is recomputed from the physical graph and the service request; the only
//! inputs taken from the deployment are the decisions themselves (placement, routes, CPU).

use std::collections::BTreeMap;

use super::{Deployment, EndpointId, ResourceKind, Scenario, ServiceRequest, Vertex, VnfId};
use crate::decision_graph::ResidualLedger;

const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointKpi {
    pub endpoint: EndpointId,
    /// Worst end-to-end delay over the branches of the service graph (ms).
    pub delay: f64,
    /// Worst branch reliability at each lifetime step, as `(t, value)`.
    pub reliability: Vec<(usize, f64)>,
    pub delay_ok: bool,
    pub reliability_ok: bool,
}

impl EndpointKpi {
    pub fn min_reliability(&self) -> f64 {
        self.reliability.iter().map(|(_, r)| *r).fold(1.0, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KpiReport {
    pub endpoints: Vec<EndpointKpi>,
    pub availability_ok: bool,
    pub capacity_ok: bool,
    pub interfaces_ok: bool,
    /// Routes contiguous, loads consistent with the service graph, resources sized correctly.
    pub structure_ok: bool,
    pub violations: Vec<String>,
}

impl KpiReport {
    pub fn all_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(1e-12)
}

/// Checks a deployment against every KPI of `req` and against the residual capacities in
/// `ledger` (the state *before* the deployment is committed).
///
/// Unstable queues (`cpu <= r_cpu * load`) yield an infinite delay rather than an error.
pub fn evaluate_deployment(
    dep: &Deployment,
    req: &ServiceRequest,
    scenario: &Scenario,
    ledger: &ResidualLedger,
) -> KpiReport {
    let g = &scenario.graph;
    let mut violations = Vec::new();
    let mut availability_ok = true;
    let mut interfaces_ok = true;
    let mut structure_ok = true;
    let mut link_use: BTreeMap<usize, f64> = BTreeMap::new();
    let mut node_use: BTreeMap<(usize, ResourceKind), f64> = BTreeMap::new();
    let mut endpoints = Vec::new();
    let branches = req.graph.root_to_leaf_paths();

    for endpoint in &req.endpoints {
        let Some(plan) = dep.endpoints.iter().find(|p| p.endpoint == endpoint.id) else {
            availability_ok = false;
            violations.push(format!("{}: endpoint not served", endpoint.id));
            continue;
        };
        let Some(loc) = g.location_idx(&endpoint.location) else {
            availability_ok = false;
            violations.push(format!("{}: unknown location", endpoint.id));
            continue;
        };

        // Per-stage checks and usage accounting.
        let mut stage_nodes = Vec::with_capacity(plan.stages.len());
        for (si, s) in plan.stages.iter().enumerate() {
            let tag = format!("{}/stage {si} ({} on {})", endpoint.id, s.vnf, s.node);
            let Some(node) = g.node_idx(&s.node) else {
                structure_ok = false;
                violations.push(format!("{tag}: unknown node"));
                stage_nodes.push(None);
                continue;
            };
            stage_nodes.push(Some(node));
            let Some(vnf) = scenario.vnfs.get(&s.vnf) else {
                structure_ok = false;
                violations.push(format!("{tag}: unknown vnf"));
                continue;
            };
            if !g.nodes[node].supports(vnf) {
                interfaces_ok = false;
                violations.push(format!("{tag}: node lacks a required interface"));
            }
            for (kind, per_unit) in &vnf.per_unit_resource {
                let needed = per_unit * s.load;
                if kind.is_cpu() {
                    if !(s.cpu > needed) {
                        violations.push(format!(
                            "{tag}: cpu {} does not exceed r*load {needed}",
                            s.cpu
                        ));
                        structure_ok = false;
                    }
                    *node_use.entry((node, kind.clone())).or_default() += s.cpu;
                } else {
                    let given = s.other.get(kind).copied().unwrap_or(0.0);
                    if !close(given, needed) {
                        structure_ok = false;
                        violations.push(format!("{tag}: {kind} sized {given}, needs {needed}"));
                    }
                    *node_use.entry((node, kind.clone())).or_default() += given;
                }
            }
            for l in &s.route {
                match g.link_idx(l) {
                    Some(li) => *link_use.entry(li).or_default() += s.traffic,
                    None => {
                        structure_ok = false;
                        violations.push(format!("{tag}: unknown link {l}"));
                    }
                }
            }
        }

        // Route contiguity and availability.
        for (si, s) in plan.stages.iter().enumerate() {
            let tag = format!("{}/stage {si}", endpoint.id);
            let Some(node) = stage_nodes[si] else {
                continue;
            };
            let start = match s.parent {
                None => Vertex::Location(loc),
                Some(p) if p < si => match stage_nodes[p] {
                    Some(pn) => Vertex::Node(pn),
                    None => continue,
                },
                Some(_) => {
                    structure_ok = false;
                    violations.push(format!("{tag}: parent must precede the stage"));
                    continue;
                }
            };
            if s.parent.is_none() {
                let first_ok = s
                    .route
                    .first()
                    .and_then(|l| g.link_idx(l))
                    .map(|li| match g.links[li].to {
                        Vertex::Node(n) => {
                            g.links[li].from == start
                                && g.nodes[n].coverage.contains(&endpoint.location)
                        }
                        Vertex::Location(_) => false,
                    })
                    .unwrap_or(false);
                if !first_ok {
                    availability_ok = false;
                    violations.push(format!(
                        "{tag}: first hop does not reach a node covering {}",
                        endpoint.location
                    ));
                }
            }
            let mut cur = start;
            for l in &s.route {
                let Some(li) = g.link_idx(l) else { continue };
                if g.links[li].from != cur {
                    structure_ok = false;
                    violations.push(format!("{tag}: route is not contiguous at {l}"));
                }
                cur = g.links[li].to;
            }
            if cur != Vertex::Node(node) {
                structure_ok = false;
                violations.push(format!("{tag}: route does not end at {}", s.node));
            }
        }

        // End-to-end KPIs per branch.
        let mut worst_delay: f64 = 0.0;
        let mut worst_rel: BTreeMap<usize, f64> =
            endpoint.lifetime.iter().map(|&t| (t, 1.0)).collect();
        let leaves = plan.leaves();
        let mut covered_branches = vec![false; branches.len()];
        for leaf in leaves {
            let path = plan.path_to(leaf);
            // Collapse replicated instances: consecutive stages of the same VNF.
            let mut runs: Vec<(VnfId, Vec<usize>)> = Vec::new();
            for &si in &path {
                match runs.last_mut() {
                    Some((v, members)) if *v == plan.stages[si].vnf => members.push(si),
                    _ => runs.push((plan.stages[si].vnf.clone(), vec![si])),
                }
            }
            let seq: Vec<VnfId> = runs.iter().map(|(v, _)| v.clone()).collect();
            match branches.iter().position(|b| *b == seq) {
                Some(bi) => covered_branches[bi] = true,
                None => {
                    structure_ok = false;
                    violations.push(format!(
                        "{}: branch {:?} is not a root-to-leaf path",
                        endpoint.id, seq
                    ));
                    continue;
                }
            }
            let loads = req.graph.loads_along(&seq, endpoint.load);
            let mut delay = 0.0;
            let mut rel: BTreeMap<usize, f64> =
                endpoint.lifetime.iter().map(|&t| (t, 1.0)).collect();
            for (ri, (vnf_id, members)) in runs.iter().enumerate() {
                let k = members.len() as f64;
                let r_cpu = scenario
                    .vnfs
                    .get(vnf_id)
                    .map(|v| v.cpu_per_unit())
                    .unwrap_or(0.0);
                for &si in members {
                    let s = &plan.stages[si];
                    if !close(s.traffic, loads[ri])
                        || !close(s.load, loads[ri] / k)
                        || !close(s.weight, 1.0 / k)
                    {
                        structure_ok = false;
                        violations.push(format!(
                            "{}/stage {si}: traffic/load/weight ({}, {}, {}) inconsistent with service graph ({}, {}, {})",
                            endpoint.id,
                            s.traffic,
                            s.load,
                            s.weight,
                            loads[ri],
                            loads[ri] / k,
                            1.0 / k
                        ));
                    }
                    for l in &s.route {
                        let Some(li) = g.link_idx(l) else { continue };
                        let link = &g.links[li];
                        delay += link.delay;
                        for (t, r) in rel.iter_mut() {
                            *r *= link.reliability.at(*t) * g.vertex_reliability(link.to, *t);
                        }
                    }
                    let slack = s.cpu - r_cpu * s.load;
                    delay += if slack > 0.0 {
                        s.weight / slack
                    } else {
                        f64::INFINITY
                    };
                }
            }
            worst_delay = worst_delay.max(delay);
            for (t, r) in rel {
                let w = worst_rel.get_mut(&t).expect("same lifetime");
                *w = w.min(r);
            }
        }
        if let Some(bi) = covered_branches.iter().position(|c| !c) {
            structure_ok = false;
            violations.push(format!(
                "{}: branch {:?} not deployed",
                endpoint.id, branches[bi]
            ));
        }

        let delay_ok = worst_delay <= req.delay_target() * (1.0 + REL_TOL);
        let reliability_ok = worst_rel
            .values()
            .all(|&r| r >= req.reliability_target() * (1.0 - REL_TOL));
        if !delay_ok {
            violations.push(format!(
                "{}: delay {worst_delay} exceeds {}",
                endpoint.id,
                req.delay_target()
            ));
        }
        if !reliability_ok {
            violations.push(format!(
                "{}: reliability {:?} below {}",
                endpoint.id,
                worst_rel,
                req.reliability_target()
            ));
        }
        endpoints.push(EndpointKpi {
            endpoint: endpoint.id.clone(),
            delay: worst_delay,
            reliability: worst_rel.into_iter().collect(),
            delay_ok,
            reliability_ok,
        });
    }

    let mut capacity_ok = true;
    for (li, used) in &link_use {
        let residual = ledger.link_residual(*li);
        if *used > residual + REL_TOL * residual.abs().max(1.0) {
            capacity_ok = false;
            violations.push(format!(
                "link {}: carries {used} > residual {residual}",
                g.links[*li].id
            ));
        }
    }
    for ((n, kind), used) in &node_use {
        let residual = ledger.node_residual(*n, kind);
        if *used > residual + REL_TOL * residual.abs().max(1.0) {
            capacity_ok = false;
            violations.push(format!(
                "node {}: {kind} {used} > residual {residual}",
                g.nodes[*n].id
            ));
        }
    }

    KpiReport {
        endpoints,
        availability_ok,
        capacity_ok,
        interfaces_ok,
        structure_ok,
        violations,
    }
}
