//! Exhaustive reference planner for small single-endpoint chains.
//!
//! Every assignment of VNFs to compute nodes is combined with every loop-free route (up to a
//! hop bound) for every hop; each combination is costed with the same evaluation as the
//! planner, including the optimal CPU sizing. Instances that would need more than the
//! configured number of combinations are refused rather than truncated.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::decision_graph::{all_simple_paths, ResidualLedger};
use crate::model::{Deployment, EndpointPlan, PlannerConfig, Scenario, ServiceRequest, Vertex};
use crate::planner::evaluate::to_stages;
use crate::planner::{
    evaluate, slots, Context, EvalFailure, PlanOutcome, RejectReason, Rejection, Slot,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    /// Maximum number of compute nodes.
    pub max_nodes: usize,
    pub max_chain_len: usize,
    /// Maximum number of (placement, routes) combinations.
    pub max_strings: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_nodes: 16,
            max_chain_len: 5,
            max_strings: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OracleError {
    #[error("oracle supports {0}")]
    Unsupported(&'static str),
    #[error("{what} is {value}, above the oracle limit of {limit}")]
    LimitExceeded {
        what: &'static str,
        value: u64,
        limit: u64,
    },
}

/// Cost, nodes, routes and evaluation of the best combination so far.
type Best = (f64, Vec<usize>, Vec<Vec<usize>>, crate::planner::Evaluated);

struct Search<'a> {
    ctx: Context<'a>,
    slots: Vec<Slot>,
    candidates: Vec<Vec<usize>>,
    location: Vertex,
    /// Routes from the location to each node, and between node pairs.
    first_routes: BTreeMap<usize, Vec<Vec<usize>>>,
    routes: BTreeMap<(usize, usize), Vec<Vec<usize>>>,
    lifetime: Vec<usize>,
    excluded: &'a [Deployment],
    best: Option<Best>,
    kpi_feasible: bool,
    capacity_failures: usize,
}

impl Search<'_> {
    fn hop_routes(&self, i: usize, nodes: &[usize]) -> &[Vec<usize>] {
        static SAME_NODE: [Vec<usize>; 1] = [Vec::new()];
        if i == 0 {
            &self.first_routes[&nodes[0]]
        } else if nodes[i - 1] == nodes[i] {
            &SAME_NODE
        } else {
            &self.routes[&(nodes[i - 1], nodes[i])]
        }
    }

    fn count(&self, i: usize, nodes: &mut Vec<usize>) -> u64 {
        if i == self.slots.len() {
            return 1;
        }
        let mut total = 0u64;
        for &n in &self.candidates[i] {
            nodes.push(n);
            let r = self.hop_routes(i, nodes).len() as u64;
            if r > 0 {
                total = total.saturating_add(r.saturating_mul(self.count(i + 1, nodes)));
            }
            nodes.pop();
        }
        total
    }

    fn walk(
        &mut self,
        i: usize,
        nodes: &mut Vec<usize>,
        routes: &mut Vec<Vec<usize>>,
        delay: f64,
        rel: &[f64],
    ) {
        let g = &self.ctx.scenario.graph;
        if i == self.slots.len() {
            self.leaf(nodes, routes);
            return;
        }
        for ni in 0..self.candidates[i].len() {
            let n = self.candidates[i][ni];
            nodes.push(n);
            let options = self.hop_routes(i, nodes).to_vec();
            for r in options {
                let d = delay + r.iter().map(|&l| g.links[l].delay).sum::<f64>();
                let next: Vec<f64> = self
                    .lifetime
                    .iter()
                    .zip(rel)
                    .map(|(&t, &acc)| {
                        acc * r
                            .iter()
                            .map(|&l| {
                                g.links[l].reliability.at(t)
                                    * g.vertex_reliability(g.links[l].to, t)
                            })
                            .product::<f64>()
                    })
                    .collect();
                let h = self.ctx.req.reliability_target();
                if d >= self.ctx.req.delay_target()
                    || next.iter().any(|&x| x < h * (1.0 - 1e-12) || x <= 0.0)
                {
                    continue;
                }
                routes.push(r);
                self.walk(i + 1, nodes, routes, d, &next);
                routes.pop();
            }
            nodes.pop();
        }
    }

    fn leaf(&mut self, nodes: &[usize], routes: &[Vec<usize>]) {
        self.kpi_feasible = true;
        let g = &self.ctx.scenario.graph;
        let is_excluded = self.excluded.iter().any(|d| {
            let stages = d
                .endpoints
                .first()
                .map(|p| p.stages.as_slice())
                .unwrap_or(&[]);
            stages.len() == nodes.len()
                && stages.iter().zip(nodes).zip(routes).all(|((s, &n), r)| {
                    s.node == g.nodes[n].id
                        && s.route
                            .iter()
                            .map(|l| g.link_idx(l))
                            .eq(r.iter().map(|&l| Some(l)))
                })
        });
        if is_excluded {
            return;
        }
        let refs: Vec<&[usize]> = routes.iter().map(Vec::as_slice).collect();
        match evaluate(&self.ctx, &self.slots, nodes, &refs) {
            Ok(eval) => {
                let total = eval.cost.total();
                if self.best.as_ref().is_none_or(|b| total < b.0) {
                    self.best = Some((total, nodes.to_vec(), routes.to_vec(), eval));
                }
            }
            Err(EvalFailure::Delay) => {}
            Err(_) => self.capacity_failures += 1,
        }
    }
}

/// Minimum-cost deployment of `req` over the whole search space.
pub fn optimal(
    req: &ServiceRequest,
    scenario: &Scenario,
    ledger: &ResidualLedger,
    cfg: &PlannerConfig,
    limits: &OracleLimits,
) -> Result<PlanOutcome, OracleError> {
    optimal_excluding(req, scenario, ledger, cfg, limits, &[])
}

/// [`optimal`] over the search space minus the placements and routes of `excluded`.
pub fn optimal_excluding(
    req: &ServiceRequest,
    scenario: &Scenario,
    ledger: &ResidualLedger,
    cfg: &PlannerConfig,
    limits: &OracleLimits,
    excluded: &[Deployment],
) -> Result<PlanOutcome, OracleError> {
    let g = &scenario.graph;
    if req.endpoints.len() != 1 {
        return Err(OracleError::Unsupported("a single endpoint only"));
    }
    let paths = req.graph.root_to_leaf_paths();
    if paths.len() != 1 {
        return Err(OracleError::Unsupported("pure chains only"));
    }
    let chain = &paths[0];
    if chain.iter().any(|v| req.instances_of(v) > 1) {
        return Err(OracleError::Unsupported("one instance per VNF only"));
    }
    let compute: Vec<usize> = g.compute_nodes().collect();
    if compute.len() > limits.max_nodes {
        return Err(OracleError::LimitExceeded {
            what: "compute node count",
            value: compute.len() as u64,
            limit: limits.max_nodes as u64,
        });
    }
    if chain.len() > limits.max_chain_len {
        return Err(OracleError::LimitExceeded {
            what: "chain length",
            value: chain.len() as u64,
            limit: limits.max_chain_len as u64,
        });
    }
    let endpoint = &req.endpoints[0];
    let rejected = |reason, detail: &str| {
        Ok(PlanOutcome::Rejected(Rejection {
            reason,
            gamma: cfg.gamma,
            detail: detail.to_owned(),
        }))
    };
    let Some(loc) = g.location_idx(&endpoint.location) else {
        return rejected(RejectReason::Availability, "unknown location");
    };
    let location = Vertex::Location(loc);

    let chain_slots = slots(req, chain, &BTreeMap::new(), endpoint.load, 0);
    let candidates: Vec<Vec<usize>> = chain_slots
        .iter()
        .map(|s| {
            compute
                .iter()
                .copied()
                .filter(|&n| g.nodes[n].supports(scenario.vnf(&s.vnf)))
                .collect()
        })
        .collect();
    let first_routes: BTreeMap<usize, Vec<Vec<usize>>> = compute
        .iter()
        .map(|&n| {
            let routes = all_simple_paths(g, location, Vertex::Node(n), cfg.oracle_max_hops)
                .into_iter()
                .filter(|r| match g.links[r[0]].to {
                    Vertex::Node(m) => g.nodes[m].coverage.contains(&endpoint.location),
                    Vertex::Location(_) => false,
                })
                .collect();
            (n, routes)
        })
        .collect();
    if candidates[0].iter().all(|n| first_routes[n].is_empty()) {
        return rejected(
            RejectReason::Availability,
            "no covering point of access reaches a host",
        );
    }
    let mut routes = BTreeMap::new();
    for &a in &compute {
        for &b in &compute {
            if a != b {
                routes.insert(
                    (a, b),
                    all_simple_paths(g, Vertex::Node(a), Vertex::Node(b), cfg.oracle_max_hops),
                );
            }
        }
    }

    let mut search = Search {
        ctx: Context {
            scenario,
            req,
            ledger,
            prefix_delay: 0.0,
        },
        slots: chain_slots,
        candidates,
        location,
        first_routes,
        routes,
        lifetime: endpoint.lifetime.clone(),
        excluded,
        best: None,
        kpi_feasible: false,
        capacity_failures: 0,
    };
    let combos = search.count(0, &mut Vec::new());
    if combos > limits.max_strings {
        return Err(OracleError::LimitExceeded {
            what: "combination count",
            value: combos,
            limit: limits.max_strings,
        });
    }
    log::debug!("oracle: {combos} combinations from {:?}", search.location);
    let ones = vec![1.0; search.lifetime.len()];
    search.walk(0, &mut Vec::new(), &mut Vec::new(), 0.0, &ones);

    match search.best {
        Some((_, nodes, routes, eval)) => {
            let refs: Vec<&[usize]> = routes.iter().map(Vec::as_slice).collect();
            let stages = to_stages(scenario, &search.slots, &nodes, &refs, &eval, None, 0);
            Ok(PlanOutcome::Accepted(Deployment {
                service: req.id.clone(),
                isolated: req.isolated,
                endpoints: vec![EndpointPlan {
                    endpoint: endpoint.id.clone(),
                    stages,
                }],
                new_instances: eval
                    .new_instances
                    .iter()
                    .map(|(v, n)| (v.clone(), g.nodes[*n].id.clone()))
                    .collect(),
                cost: eval.cost,
            }))
        }
        None if !search.kpi_feasible => rejected(
            RejectReason::AdditiveKpi,
            "no placement meets the delay and reliability targets",
        ),
        None if search.capacity_failures > 0 => rejected(
            RejectReason::Capacity,
            "every feasible placement lacks capacity",
        ),
        None => rejected(
            RejectReason::Delay,
            "no placement leaves a processing budget",
        ),
    }
}
