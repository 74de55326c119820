//! Request planning: chain decomposition, per-chain candidate search, CPU sizing, cost-based
//! selection, bottleneck replication and the final ledger commit.
//!
//! Endpoints are planned one after another against a working copy of the ledger, so later
//! endpoints see the capacity consumed by earlier ones and may reuse the VNF instances they
//! created at no instantiation cost. Within an endpoint, the chains of a tree-shaped service
//! graph are placed in depth-first order; a chain that shares a prefix with an earlier one
//! starts from the node hosting the last shared VNF, with whatever delay and reliability
//! budget the prefix left.

pub mod decompose;
pub mod evaluate;
mod sweep;

use std::collections::BTreeMap;
use std::fmt;

pub use decompose::{decompose, Chain};
pub use evaluate::{evaluate, slots, Context, EvalFailure, Evaluated, Slot};
pub use sweep::{apply_axis, sweep, Axis, SweepPoint};

use crate::cpu_assign::{bottleneck_vnf, CpuProblem};
use crate::decision_graph::{build_decision_graph, DecisionVertex, ResidualLedger};
use crate::expanded_graph::{
    assign_weights, expand, find_candidates, prune_availability, prune_edges, steepness, Dims,
    Layer, SearchSpec,
};
use crate::model::{
    Deployment, EndpointPlan, PlannerConfig, ResourceKind, Scenario, ServiceRequest, Stage, VnfId,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RejectReason {
    /// Some endpoint location is not covered by any usable point of access.
    Availability,
    /// No placement fits the quantized delay/reliability budgets.
    AdditiveKpi,
    /// Placements exist but none leaves a processing budget.
    Delay,
    /// Placements exist but link, node or CPU capacity is insufficient.
    Capacity,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::Availability => "availability",
            RejectReason::AdditiveKpi => "additive-kpi",
            RejectReason::Delay => "delay",
            RejectReason::Capacity => "capacity",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub reason: RejectReason,
    /// Resolution used, so callers can retry with a finer one.
    pub gamma: u32,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanOutcome {
    Accepted(Deployment),
    Rejected(Rejection),
}

impl PlanOutcome {
    pub fn deployment(&self) -> Option<&Deployment> {
        match self {
            PlanOutcome::Accepted(d) => Some(d),
            PlanOutcome::Rejected(_) => None,
        }
    }

    pub fn cost(&self) -> Option<f64> {
        self.deployment().map(|d| d.cost.total())
    }

    pub fn is_accepted(&self) -> bool {
        matches!(self, PlanOutcome::Accepted(_))
    }

    pub fn rejection(&self) -> Option<&Rejection> {
        match self {
            PlanOutcome::Accepted(_) => None,
            PlanOutcome::Rejected(r) => Some(r),
        }
    }
}

/// Size of the search structures, for complexity accounting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanStats {
    pub searches: usize,
    pub max_decision_vertices: usize,
    pub max_expanded_vertices: u64,
    pub max_expanded_edges: u64,
    pub candidates_evaluated: usize,
    pub replications: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub outcome: PlanOutcome,
    pub stats: PlanStats,
}

enum Failure {
    Reject(RejectReason, String),
    Cpu(Vec<CpuProblem>),
}

struct Anchor {
    stage: usize,
    node: usize,
    /// End-to-end delay up to and including the anchor instance.
    delay: f64,
    reliability: Vec<(usize, f64)>,
}

struct ChainChoice {
    nodes: Vec<usize>,
    routes: Vec<Vec<usize>>,
    eval: Evaluated,
}

/// Plans `req` without touching `ledger`.
pub fn propose(
    req: &ServiceRequest,
    scenario: &Scenario,
    ledger: &ResidualLedger,
    cfg: &PlannerConfig,
) -> PlanResult {
    let mut stats = PlanStats::default();
    let vnfs: Vec<VnfId> = {
        let mut all: Vec<VnfId> = req
            .graph
            .root_to_leaf_paths()
            .into_iter()
            .flatten()
            .collect();
        all.sort();
        all.dedup();
        all
    };
    let rejected = |reason, detail: String, stats| PlanResult {
        outcome: PlanOutcome::Rejected(Rejection {
            reason,
            gamma: cfg.gamma,
            detail,
        }),
        stats,
    };
    if vnfs.is_empty() || req.endpoints.is_empty() {
        return rejected(
            RejectReason::AdditiveKpi,
            "request has no VNF or no endpoint".into(),
            stats,
        );
    }
    let base: BTreeMap<VnfId, u32> = vnfs
        .iter()
        .map(|v| (v.clone(), req.instances_of(v)))
        .collect();
    let mut counts = base.clone();
    loop {
        match attempt(req, scenario, ledger, cfg, &counts, &mut stats) {
            Ok(dep) => {
                return PlanResult {
                    outcome: PlanOutcome::Accepted(dep),
                    stats,
                }
            }
            Err(Failure::Reject(reason, detail)) => return rejected(reason, detail, stats),
            Err(Failure::Cpu(problems)) => match bottleneck_vnf(&problems) {
                Some(v) if counts[&v] < base[&v] + cfg.max_instance_replication => {
                    *counts.get_mut(&v).expect("known vnf") += 1;
                    stats.replications += 1;
                    log::info!(
                        "{}: cpu bottleneck on {v}, retrying with {} instances",
                        req.id,
                        counts[&v]
                    );
                }
                Some(v) => {
                    let detail = format!("cpu exhausted; {v} already has {} instances", counts[&v]);
                    return rejected(RejectReason::Capacity, detail, stats);
                }
                None => return rejected(RejectReason::Capacity, "cpu exhausted".into(), stats),
            },
        }
    }
}

/// Plans `req` and, on acceptance, commits the deployment to `ledger`.
pub fn plan(
    req: &ServiceRequest,
    scenario: &Scenario,
    ledger: &mut ResidualLedger,
    cfg: &PlannerConfig,
) -> PlanResult {
    let mut result = propose(req, scenario, ledger, cfg);
    if let PlanOutcome::Accepted(dep) = &result.outcome {
        if let Err(e) = ledger.commit(dep, &scenario.graph) {
            result.outcome = PlanOutcome::Rejected(Rejection {
                reason: RejectReason::Capacity,
                gamma: cfg.gamma,
                detail: e.to_string(),
            });
        }
    }
    result
}

fn attempt(
    req: &ServiceRequest,
    scenario: &Scenario,
    ledger: &ResidualLedger,
    cfg: &PlannerConfig,
    counts: &BTreeMap<VnfId, u32>,
    stats: &mut PlanStats,
) -> Result<Deployment, Failure> {
    let g = &scenario.graph;
    let mut work = ledger.clone();
    let mut dep = Deployment {
        service: req.id.clone(),
        isolated: req.isolated,
        endpoints: Vec::new(),
        new_instances: Default::default(),
        cost: Default::default(),
    };
    let chains = decompose(&req.graph);
    for endpoint in &req.endpoints {
        let sub = ServiceRequest {
            endpoints: vec![endpoint.clone()],
            ..req.clone()
        };
        let mut stages: Vec<Stage> = Vec::new();
        let mut reach: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
        let mut last_stage_of: BTreeMap<VnfId, usize> = BTreeMap::new();
        for chain in &chains {
            let anchor = (chain.anchor > 0).then(|| {
                let si = last_stage_of[&chain.vnfs[chain.anchor - 1]];
                Anchor {
                    stage: si,
                    node: g.node_idx(&stages[si].node).expect("placed node"),
                    delay: reach[si].0,
                    reliability: reach[si].1.clone(),
                }
            });
            let chain_slots = slots(req, &chain.vnfs, counts, endpoint.load, chain.anchor);
            let choice = search_chain(
                scenario,
                &sub,
                &work,
                cfg,
                &chain_slots,
                anchor.as_ref(),
                stats,
            )
            .map_err(|f| match f {
                Failure::Reject(r, d) => Failure::Reject(r, format!("{}: {d}", endpoint.id)),
                cpu => cpu,
            })?;
            let routes: Vec<&[usize]> = choice.routes.iter().map(Vec::as_slice).collect();
            let first = stages.len();
            let new_stages = evaluate::to_stages(
                scenario,
                &chain_slots,
                &choice.nodes,
                &routes,
                &choice.eval,
                anchor.as_ref().map(|a| a.stage),
                first,
            );
            for (i, route) in routes.iter().enumerate() {
                let (d0, r0) = match (i, &anchor) {
                    (0, Some(a)) => (a.delay, a.reliability.clone()),
                    (0, None) => (0.0, endpoint.lifetime.iter().map(|&t| (t, 1.0)).collect()),
                    _ => reach[first + i - 1].clone(),
                };
                let delay = d0
                    + route.iter().map(|&l| g.links[l].delay).sum::<f64>()
                    + choice.eval.processing[i];
                let rel = r0
                    .into_iter()
                    .map(|(t, r)| {
                        let hop: f64 = route
                            .iter()
                            .map(|&l| {
                                g.links[l].reliability.at(t)
                                    * g.vertex_reliability(g.links[l].to, t)
                            })
                            .product();
                        (t, r * hop)
                    })
                    .collect();
                reach.push((delay, rel));
            }
            let partial = Deployment {
                service: req.id.clone(),
                isolated: req.isolated,
                endpoints: vec![EndpointPlan {
                    endpoint: endpoint.id.clone(),
                    stages: new_stages.clone(),
                }],
                new_instances: Default::default(),
                cost: Default::default(),
            };
            work.commit(&partial, g)
                .map_err(|e| Failure::Reject(RejectReason::Capacity, e.to_string()))?;
            dep.cost += choice.eval.cost;
            dep.new_instances.extend(
                choice
                    .eval
                    .new_instances
                    .iter()
                    .map(|(v, n)| (v.clone(), g.nodes[*n].id.clone())),
            );
            for (i, s) in new_stages.iter().enumerate() {
                last_stage_of.insert(s.vnf.clone(), first + i);
            }
            stages.extend(new_stages);
        }
        dep.endpoints.push(EndpointPlan {
            endpoint: endpoint.id.clone(),
            stages,
        });
    }
    Ok(dep)
}

fn layers(
    scenario: &Scenario,
    req: &ServiceRequest,
    ledger: &ResidualLedger,
    slots: &[Slot],
    check_capacity: bool,
) -> Vec<Layer> {
    let g = &scenario.graph;
    let cpu = ResourceKind::cpu();
    slots
        .iter()
        .map(|s| {
            let vnf = scenario.vnf(&s.vnf);
            let mut allowed = vec![false; g.nodes.len()];
            let mut node_cost = vec![0.0; g.nodes.len()];
            for (n, node) in g.nodes.iter().enumerate() {
                let fits = vnf.per_unit_resource.iter().all(|(k, r)| {
                    let need = r * s.load;
                    let have = ledger.node_residual(n, k);
                    if *k == cpu {
                        have > need
                    } else {
                        have >= need
                    }
                });
                allowed[n] = node.is_compute() && node.supports(vnf) && (!check_capacity || fits);
                let inst = if s.replica == 0 && !ledger.reusable(&s.vnf, n, &req.id, req.isolated) {
                    node.instantiation_cost(&s.vnf)
                } else {
                    0.0
                };
                node_cost[n] = inst
                    + vnf
                        .per_unit_resource
                        .iter()
                        .map(|(k, r)| node.unit_cost(k) * r * s.load)
                        .sum::<f64>();
            }
            Layer {
                allowed,
                node_cost,
                traffic: if check_capacity { s.traffic } else { 0.0 },
            }
        })
        .collect()
}

/// Start depth, exact network-delay budget and per-step reliability floor of a chain search.
fn budgets(
    gamma: u32,
    req: &ServiceRequest,
    dims: Dims,
    anchor: Option<&Anchor>,
) -> ([u32; 2], f64, Vec<(usize, f64)>) {
    let d = req.delay_target();
    let h = req.reliability_target();
    let lifetime = &req.endpoints[0].lifetime;
    let spent = anchor.map_or(0.0, |a| a.delay);
    let prefix_rel = |t: usize| {
        anchor
            .and_then(|a| a.reliability.iter().find(|(s, _)| *s == t).map(|(_, r)| *r))
            .unwrap_or(1.0)
    };
    let floor: Vec<(usize, f64)> = lifetime.iter().map(|&t| (t, h / prefix_rel(t))).collect();
    let mut start = [0u32; 2];
    if anchor.is_some() {
        if dims.delay {
            start[0] = steepness(gamma, spent / d).min(u32::MAX as u64) as u32;
        }
        if dims.reliability {
            let used = lifetime
                .iter()
                .map(|&t| prefix_rel(t).ln() / h.ln())
                .fold(0.0, f64::max);
            start[1] = steepness(gamma, used).min(u32::MAX as u64) as u32;
        }
    }
    (start, d - spent, floor)
}

fn search_chain(
    scenario: &Scenario,
    req: &ServiceRequest,
    ledger: &ResidualLedger,
    cfg: &PlannerConfig,
    slots: &[Slot],
    anchor: Option<&Anchor>,
    stats: &mut PlanStats,
) -> Result<ChainChoice, Failure> {
    let g = &scenario.graph;
    let chain_len = slots.len() + anchor.is_some() as usize;
    let dg = build_decision_graph(g, ledger, req, chain_len, cfg.k_paths);
    let pruned = match anchor {
        None => prune_availability(&dg, g, req, Some(scenario.vnf(&slots[0].vnf)))
            .map_err(|e| Failure::Reject(RejectReason::Availability, e.to_string()))?,
        Some(_) => prune_edges(&dg, g, req, None),
    };
    let source = match anchor {
        None => DecisionVertex::Endpoint(0),
        Some(a) => DecisionVertex::Compute {
            node: a.node,
            replica: 0,
        },
    };
    let source = pruned.vertex_index(source).ok_or_else(|| {
        Failure::Reject(
            RejectReason::Availability,
            "anchor node is not a compute node".into(),
        )
    })?;
    let wg = assign_weights(
        &pruned,
        req.max_delay,
        req.min_reliability,
        &req.endpoints[0].lifetime,
    );
    let (start_depth, delay_budget, reliability_floor) = budgets(cfg.gamma, req, wg.dims, anchor);
    let spec = SearchSpec {
        source,
        start_depth,
        layers: layers(scenario, req, ledger, slots, true),
        max_candidates: cfg.max_candidates,
        delay_budget,
        reliability_floor,
    };
    let demand = slots
        .iter()
        .map(|s| s.traffic)
        .fold(f64::INFINITY, f64::min);
    let xg = expand(&wg, cfg.gamma, demand);
    stats.searches += 1;
    stats.max_decision_vertices = stats.max_decision_vertices.max(pruned.vertices.len());
    stats.max_expanded_vertices = stats.max_expanded_vertices.max(xg.vertex_count());
    stats.max_expanded_edges = stats.max_expanded_edges.max(xg.edge_count());
    let found = find_candidates(&xg, g, &spec);
    log::debug!(
        "{}: gamma {} expanded {} vertices / {} edges, reachable per layer {:?}, {} candidates",
        req.id,
        cfg.gamma,
        xg.vertex_count(),
        xg.edge_count(),
        found.reachable_per_layer,
        found.candidates.len()
    );

    if found.candidates.is_empty() {
        let relaxed_graph = expand(&wg, cfg.gamma, 0.0);
        let relaxed = SearchSpec {
            layers: layers(scenario, req, ledger, slots, false),
            ..spec
        };
        let again = find_candidates(&relaxed_graph, g, &relaxed);
        return Err(if again.candidates.is_empty() {
            Failure::Reject(
                RejectReason::AdditiveKpi,
                format!("no placement within the budgets at gamma {}", cfg.gamma),
            )
        } else {
            Failure::Reject(
                RejectReason::Capacity,
                "every placement within the budgets lacks capacity".into(),
            )
        });
    }

    let ctx = Context {
        scenario,
        req,
        ledger,
        prefix_delay: anchor.map_or(0.0, |a| a.delay),
    };
    let mut best: Option<ChainChoice> = None;
    let mut cpu_failures = Vec::new();
    let mut delay_failures = 0usize;
    for c in &found.candidates {
        if let Some(b) = &best {
            if b.eval.cost.total() <= c.provisional_cost {
                break;
            }
        }
        stats.candidates_evaluated += 1;
        let routes: Vec<Vec<usize>> = c
            .edges
            .iter()
            .map(|&e| pruned.edges[e].links().to_vec())
            .collect();
        let refs: Vec<&[usize]> = routes.iter().map(Vec::as_slice).collect();
        match evaluate(&ctx, slots, &c.placement, &refs) {
            Ok(eval) => {
                if best
                    .as_ref()
                    .is_none_or(|b| eval.cost.total() < b.eval.cost.total())
                {
                    best = Some(ChainChoice {
                        nodes: c.placement.clone(),
                        routes,
                        eval,
                    });
                }
            }
            Err(EvalFailure::Delay) => delay_failures += 1,
            Err(EvalFailure::Cpu(p)) => cpu_failures.push(p),
            Err(EvalFailure::LinkCapacity | EvalFailure::ResourceCapacity) => {}
        }
    }
    match best {
        Some(b) => Ok(b),
        None if !cpu_failures.is_empty() => Err(Failure::Cpu(cpu_failures)),
        None if delay_failures > 0 => Err(Failure::Reject(
            RejectReason::Delay,
            "network delay leaves no processing budget".into(),
        )),
        None => Err(Failure::Reject(
            RejectReason::Capacity,
            "aggregate link or node capacity exceeded".into(),
        )),
    }
}
