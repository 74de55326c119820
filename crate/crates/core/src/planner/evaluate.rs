//! Full costing of a fixed placement and routing, shared by the planner and the oracle.

use std::collections::{BTreeMap, BTreeSet};

use crate::cpu_assign::{self, CpuError, CpuInstance, CpuProblem};
use crate::decision_graph::ResidualLedger;
use crate::model::{CostBreakdown, ResourceKind, Scenario, ServiceRequest, Stage, VnfId};

const SLACK: f64 = 1e-9;

/// One VNF instance to place, with the traffic it sees.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub vnf: VnfId,
    pub replica: u32,
    /// Mb/s on the hop into the instance.
    pub traffic: f64,
    /// Mb/s processed by the instance.
    pub load: f64,
    pub weight: f64,
}

/// Instance slots for `path[from..]`, each VNF repeated `counts[v]` times (default 1).
/// Replicas sit one after another; each processes an equal share of the VNF's load.
pub fn slots(
    req: &ServiceRequest,
    path: &[VnfId],
    counts: &BTreeMap<VnfId, u32>,
    load: f64,
    from: usize,
) -> Vec<Slot> {
    let loads = req.graph.loads_along(path, load);
    let mut out = Vec::new();
    for (v, &l) in path.iter().zip(&loads).skip(from) {
        let k = counts.get(v).copied().unwrap_or(1).max(1);
        for replica in 0..k {
            out.push(Slot {
                vnf: v.clone(),
                replica,
                traffic: l,
                load: l / k as f64,
                weight: 1.0 / k as f64,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalFailure {
    LinkCapacity,
    ResourceCapacity,
    Delay,
    /// CPU caps too tight for the delay budget.
    Cpu(CpuProblem),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated {
    pub cpu: Vec<f64>,
    pub other: Vec<BTreeMap<ResourceKind, f64>>,
    /// Processing delay of each slot (ms).
    pub processing: Vec<f64>,
    /// Network delay of the routes (ms).
    pub network_delay: f64,
    pub cost: CostBreakdown,
    /// (VNF, node) pairs charged an instantiation cost.
    pub new_instances: BTreeSet<(VnfId, usize)>,
}

pub struct Context<'a> {
    pub scenario: &'a Scenario,
    pub req: &'a ServiceRequest,
    pub ledger: &'a ResidualLedger,
    /// Delay already spent upstream of the first slot (network plus processing, ms).
    pub prefix_delay: f64,
}

fn exceeds(need: f64, have: f64) -> bool {
    need > have + SLACK * have.abs().max(1.0)
}

/// Checks aggregate capacities, sizes every resource and returns the cost of placing `slots`
/// on `nodes` with traffic routed over `routes` (physical link indices).
pub fn evaluate(
    ctx: &Context<'_>,
    slots: &[Slot],
    nodes: &[usize],
    routes: &[&[usize]],
) -> Result<Evaluated, EvalFailure> {
    let g = &ctx.scenario.graph;
    let ledger = ctx.ledger;

    let mut link_use: BTreeMap<usize, f64> = BTreeMap::new();
    for (s, r) in slots.iter().zip(routes) {
        for &l in *r {
            *link_use.entry(l).or_default() += s.traffic;
        }
    }
    if link_use
        .iter()
        .any(|(&l, &u)| exceeds(u, ledger.link_residual(l)))
    {
        return Err(EvalFailure::LinkCapacity);
    }

    let mut other = Vec::with_capacity(slots.len());
    let mut node_use: BTreeMap<(usize, ResourceKind), f64> = BTreeMap::new();
    for (s, &n) in slots.iter().zip(nodes) {
        let vnf = ctx.scenario.vnf(&s.vnf);
        let sized: BTreeMap<ResourceKind, f64> = vnf
            .per_unit_resource
            .iter()
            .filter(|(k, _)| !k.is_cpu())
            .map(|(k, r)| (k.clone(), r * s.load))
            .collect();
        for (k, v) in &sized {
            *node_use.entry((n, k.clone())).or_default() += v;
        }
        other.push(sized);
    }
    if node_use
        .iter()
        .any(|((n, k), &u)| exceeds(u, ledger.node_residual(*n, k)))
    {
        return Err(EvalFailure::ResourceCapacity);
    }

    let cpu_kind = ResourceKind::cpu();
    let mut groups: Vec<usize> = Vec::new();
    let mut instances = Vec::with_capacity(slots.len());
    for (i, (s, &n)) in slots.iter().zip(nodes).enumerate() {
        let group = match groups.iter().position(|&x| x == n) {
            Some(gi) => gi,
            None => {
                groups.push(n);
                groups.len() - 1
            }
        };
        instances.push(CpuInstance {
            vnf: s.vnf.clone(),
            position: i,
            group,
            unit_cost: g.nodes[n].unit_cost(&cpu_kind),
            base: ctx.scenario.vnf(&s.vnf).cpu_per_unit() * s.load,
            weight: s.weight,
        });
    }
    let network_delay: f64 = routes
        .iter()
        .flat_map(|r| r.iter())
        .map(|&l| g.links[l].delay)
        .sum();
    let problem = CpuProblem {
        instances,
        caps: groups
            .iter()
            .map(|&n| ledger.node_residual(n, &cpu_kind))
            .collect(),
        network_delay: ctx.prefix_delay + network_delay,
        max_delay: ctx.req.delay_target(),
    };
    let solution = match cpu_assign::solve(&problem) {
        Ok(s) => s,
        Err(CpuError::Delay { .. }) => return Err(EvalFailure::Delay),
        Err(CpuError::Capacity { .. }) => return Err(EvalFailure::Cpu(problem)),
    };

    let mut cost = CostBreakdown::default();
    let mut new_instances = BTreeSet::new();
    for ((s, &n), a) in slots.iter().zip(nodes).zip(&solution.cpu) {
        let node = &g.nodes[n];
        if !ledger.reusable(&s.vnf, n, &ctx.req.id, ctx.req.isolated)
            && new_instances.insert((s.vnf.clone(), n))
        {
            cost.instantiation += node.instantiation_cost(&s.vnf);
        }
        cost.resource += node.unit_cost(&cpu_kind) * a;
    }
    for (sized, &n) in other.iter().zip(nodes) {
        for (k, v) in sized {
            cost.resource += g.nodes[n].unit_cost(k) * v;
        }
    }
    for (s, r) in slots.iter().zip(routes) {
        cost.transport += s.traffic * r.iter().map(|&l| g.links[l].unit_cost).sum::<f64>();
    }
    let processing = problem
        .instances
        .iter()
        .zip(&solution.cpu)
        .map(|(inst, a)| inst.weight / (a - inst.base))
        .collect();
    Ok(Evaluated {
        cpu: solution.cpu,
        other,
        processing,
        network_delay,
        cost,
        new_instances,
    })
}

/// Turns an evaluated placement into deployment stages. The first slot hangs off
/// `first_parent`; each later slot off the one before it.
pub fn to_stages(
    scenario: &Scenario,
    slots: &[Slot],
    nodes: &[usize],
    routes: &[&[usize]],
    eval: &Evaluated,
    first_parent: Option<usize>,
    first_index: usize,
) -> Vec<Stage> {
    let g = &scenario.graph;
    slots
        .iter()
        .enumerate()
        .map(|(i, s)| Stage {
            parent: if i == 0 {
                first_parent
            } else {
                Some(first_index + i - 1)
            },
            vnf: s.vnf.clone(),
            replica: s.replica,
            node: g.nodes[nodes[i]].id.clone(),
            route: routes[i].iter().map(|&l| g.links[l].id.clone()).collect(),
            traffic: s.traffic,
            load: s.load,
            weight: s.weight,
            cpu: eval.cpu[i],
            other: eval.other[i].clone(),
        })
        .collect()
}
