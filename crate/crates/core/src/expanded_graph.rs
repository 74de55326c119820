//! Availability pruning, KPI-budget weights, the quantized expanded graph and the layered
//! search for candidate placements.
//!
//! The expanded graph replicates every decision vertex once per pair of depths
//! `(delay depth, reliability depth)` in `0..=gamma`. An edge of the decision graph with weight
//! `w` becomes edges `(i, j) -> (i + ceil(gamma * w[0]), j + ceil(gamma * w[1]))`, so any path
//! that stays inside the grid consumes at most the whole budget of each additive KPI. The
//! expanded edges are not materialized: an [`ExpandedArc`] stands for the family of expanded
//! edges generated by one decision edge.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::decision_graph::{DecisionGraph, DecisionVertex};
use crate::model::{EndpointId, PhysicalGraph, ServiceRequest, Vertex, Vnf};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("no point of access covers endpoint(s) {endpoints:?}")]
pub struct AvailabilityError {
    pub endpoints: Vec<EndpointId>,
}

/// Drops the edges that cannot serve the request: endpoint edges whose first hop does not
/// reach a node covering the endpoint's location, endpoint edges into nodes that cannot host
/// `first_vnf`, and any edge whose reliability vanishes at a relevant time step.
pub fn prune_edges(
    dg: &DecisionGraph,
    g: &PhysicalGraph,
    req: &ServiceRequest,
    first_vnf: Option<&Vnf>,
) -> DecisionGraph {
    let all_steps: BTreeSet<usize> = req
        .endpoints
        .iter()
        .flat_map(|e| e.lifetime.iter().copied())
        .collect();
    let all_steps: Vec<usize> = all_steps.into_iter().collect();
    dg.filter_edges(|_, e| match dg.vertices[e.from] {
        DecisionVertex::Endpoint(ei) => {
            let endpoint = &req.endpoints[ei];
            let covered = e.links().first().is_some_and(|&l| match g.links[l].to {
                Vertex::Node(n) => g.nodes[n].coverage.contains(&endpoint.location),
                Vertex::Location(_) => false,
            });
            let hosts = match (first_vnf, dg.vertices[e.to].node()) {
                (Some(v), Some(n)) => g.nodes[n].supports(v),
                _ => true,
            };
            covered && hosts && endpoint.lifetime.iter().all(|&t| e.reliability[t] > 0.0)
        }
        DecisionVertex::Compute { .. } => all_steps.iter().all(|&t| e.reliability[t] > 0.0),
    })
}

/// [`prune_edges`], failing when some endpoint is left without any outgoing edge.
pub fn prune_availability(
    dg: &DecisionGraph,
    g: &PhysicalGraph,
    req: &ServiceRequest,
    first_vnf: Option<&Vnf>,
) -> Result<DecisionGraph, AvailabilityError> {
    let pruned = prune_edges(dg, g, req, first_vnf);
    let stranded: Vec<EndpointId> = req
        .endpoints
        .iter()
        .enumerate()
        .filter(|(ei, _)| {
            pruned
                .vertex_index(DecisionVertex::Endpoint(*ei))
                .is_none_or(|v| pruned.out_edges(v).is_empty())
        })
        .map(|(_, e)| e.id.clone())
        .collect();
    if stranded.is_empty() {
        Ok(pruned)
    } else {
        Err(AvailabilityError {
            endpoints: stranded,
        })
    }
}

/// Fraction of the delay and reliability budgets consumed by one decision edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KpiWeight {
    pub delay_frac: f64,
    /// `ln(eta) / ln(H)`.
    pub rel_frac: f64,
}

/// Which additive KPIs are binding; unbound dimensions are not expanded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub delay: bool,
    pub reliability: bool,
}

impl Dims {
    pub fn count(&self) -> u32 {
        self.delay as u32 + self.reliability as u32
    }
}

#[derive(Debug, Clone)]
pub struct WeightedGraph<'a> {
    pub dg: &'a DecisionGraph,
    /// `None` for edges whose worst-case reliability is zero.
    pub weights: Vec<Option<KpiWeight>>,
    pub dims: Dims,
}

pub fn delay_weight(delay: f64, max_delay: f64) -> f64 {
    delay / max_delay
}

pub fn reliability_weight(eta: f64, min_reliability: f64) -> f64 {
    if eta >= 1.0 {
        0.0
    } else {
        eta.ln() / min_reliability.ln()
    }
}

/// Weights every edge against the targets, using the worst reliability over `lifetime`.
pub fn assign_weights<'a>(
    dg: &'a DecisionGraph,
    max_delay: Option<f64>,
    min_reliability: Option<f64>,
    lifetime: &[usize],
) -> WeightedGraph<'a> {
    let max_delay = max_delay.filter(|d| d.is_finite());
    let min_reliability = min_reliability.filter(|h| *h > 0.0 && *h < 1.0);
    let dims = Dims {
        delay: max_delay.is_some(),
        reliability: min_reliability.is_some(),
    };
    let weights = dg
        .edges
        .iter()
        .map(|e| {
            let eta = e.min_reliability(lifetime);
            if !(eta > 0.0) {
                return None;
            }
            Some(KpiWeight {
                delay_frac: max_delay.map_or(0.0, |d| delay_weight(e.delay, d)),
                rel_frac: min_reliability.map_or(0.0, |h| reliability_weight(eta, h)),
            })
        })
        .collect();
    WeightedGraph { dg, weights, dims }
}

/// `ceil(gamma * frac)`, snapping products within floating-point noise of an integer so that
/// e.g. `3 * (2/3)` gives 2. Exact KPIs are re-verified on every candidate anyway.
pub fn steepness(gamma: u32, frac: f64) -> u64 {
    if frac <= 0.0 {
        return 0;
    }
    let x = gamma as f64 * frac;
    if !x.is_finite() {
        return u64::MAX;
    }
    let r = x.round();
    if r >= 1.0 && (x - r).abs() <= 1e-9 * r {
        r as u64
    } else {
        x.ceil() as u64
    }
}

/// One decision edge lifted into the expanded graph: every expanded vertex `(i, j)` of `from`
/// connects to `(i + step[0], j + step[1])` of `to` when that vertex exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpandedArc {
    pub edge: usize,
    pub from: usize,
    pub to: usize,
    pub step: [u32; 2],
}

#[derive(Debug, Clone)]
pub struct ExpandedGraph<'a> {
    pub wg: &'a WeightedGraph<'a>,
    pub gamma: u32,
    pub arcs: Vec<ExpandedArc>,
    out: Vec<Vec<usize>>,
}

impl<'a> ExpandedGraph<'a> {
    pub fn dg(&self) -> &'a DecisionGraph {
        self.wg.dg
    }

    fn side(&self, active: bool) -> u64 {
        if active {
            self.gamma as u64 + 1
        } else {
            1
        }
    }

    /// Depth levels per base vertex: `(gamma + 1)^d` for `d` binding additive KPIs.
    pub fn levels(&self) -> u64 {
        self.side(self.wg.dims.delay) * self.side(self.wg.dims.reliability)
    }

    pub fn vertex_count(&self) -> u64 {
        self.levels() * self.dg().vertices.len() as u64
    }

    /// Number of explicit expanded edges represented by the arcs.
    pub fn edge_count(&self) -> u64 {
        let d = self.side(self.wg.dims.delay);
        let r = self.side(self.wg.dims.reliability);
        self.arcs
            .iter()
            .map(|a| (d - a.step[0] as u64) * (r - a.step[1] as u64))
            .sum()
    }

    pub fn out_arcs(&self, base: usize) -> &[usize] {
        &self.out[base]
    }

    pub fn dims(&self) -> Dims {
        self.wg.dims
    }
}

/// Builds the expanded graph at resolution `gamma`, keeping decision edges whose capacity is at
/// least `demand` Mb/s and whose steepness fits in the grid.
pub fn expand<'a>(wg: &'a WeightedGraph<'a>, gamma: u32, demand: f64) -> ExpandedGraph<'a> {
    assert!(gamma >= 1, "resolution must be at least 1");
    let dg = wg.dg;
    let mut arcs = Vec::new();
    let mut out = vec![Vec::new(); dg.vertices.len()];
    for (i, e) in dg.edges.iter().enumerate() {
        let Some(w) = wg.weights[i] else { continue };
        if e.capacity < demand {
            continue;
        }
        let sd = if wg.dims.delay {
            steepness(gamma, w.delay_frac)
        } else {
            0
        };
        let sr = if wg.dims.reliability {
            steepness(gamma, w.rel_frac)
        } else {
            0
        };
        if sd > gamma as u64 || sr > gamma as u64 {
            continue;
        }
        out[e.from].push(arcs.len());
        arcs.push(ExpandedArc {
            edge: i,
            from: e.from,
            to: e.to,
            step: [sd as u32, sr as u32],
        });
    }
    ExpandedGraph {
        wg,
        gamma,
        arcs,
        out,
    }
}

/// Per-layer inputs of the candidate search: one layer per VNF instance to place.
#[derive(Debug, Clone)]
pub struct Layer {
    /// Physical nodes allowed to host this instance.
    pub allowed: Vec<bool>,
    /// Cost of hosting this instance on each node, excluding transport (lower bound on CPU).
    pub node_cost: Vec<f64>,
    /// Mb/s carried on the hop into this instance.
    pub traffic: f64,
}

#[derive(Debug, Clone)]
pub struct SearchSpec {
    /// Decision vertex the paths start from (an endpoint, or an anchored compute vertex).
    pub source: usize,
    /// Depth already consumed before the source.
    pub start_depth: [u32; 2],
    pub layers: Vec<Layer>,
    pub max_candidates: usize,
    /// Network delay the path may still add (ms).
    pub delay_budget: f64,
    /// Minimum path reliability at each lifetime step.
    pub reliability_floor: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePath {
    /// Decision edges, one per layer.
    pub edges: Vec<usize>,
    /// Physical node hosting each layer's instance.
    pub placement: Vec<usize>,
    /// Total steepness per dimension, including the start depth.
    pub depth: [u32; 2],
    pub provisional_cost: f64,
    pub network_delay: f64,
    /// Path reliability at each lifetime step.
    pub reliability: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchResult {
    pub candidates: Vec<CandidatePath>,
    /// Distinct reachable expanded vertices per layer (layer 0 is the source).
    pub reachable_per_layer: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    base: usize,
    depth: [u32; 2],
    cost: f64,
    steep: u32,
    parent: usize,
    arc: usize,
}

const NO_PARENT: usize = usize::MAX;

/// Counts kept entries with depth component-wise at most a query point.
struct Fenwick2D {
    side: usize,
    tree: Vec<u32>,
}

impl Fenwick2D {
    fn new(side: usize) -> Self {
        Self {
            side,
            tree: vec![0; (side + 1) * (side + 1)],
        }
    }

    fn add(&mut self, i: usize, j: usize) {
        let mut x = i + 1;
        while x <= self.side {
            let mut y = j + 1;
            while y <= self.side {
                self.tree[x * (self.side + 1) + y] += 1;
                y += y & y.wrapping_neg();
            }
            x += x & x.wrapping_neg();
        }
    }

    fn count(&self, i: usize, j: usize) -> u32 {
        let mut s = 0;
        let mut x = i + 1;
        while x > 0 {
            let mut y = j + 1;
            while y > 0 {
                s += self.tree[x * (self.side + 1) + y];
                y -= y & y.wrapping_neg();
            }
            x -= x & x.wrapping_neg();
        }
        s
    }
}

/// Keeps, per base vertex, only entries not dominated by `k` cheaper entries with smaller or
/// equal depth: any completion of a dominated entry has `k` cheaper distinct alternatives.
fn prune_dominated(entries: Vec<Entry>, k: usize, side: usize) -> Vec<Entry> {
    let mut by_base: BTreeMap<usize, Vec<Entry>> = BTreeMap::new();
    for e in entries {
        by_base.entry(e.base).or_default().push(e);
    }
    let mut kept = Vec::new();
    for (_, mut group) in by_base {
        group.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(a.steep.cmp(&b.steep)));
        let mut fw = Fenwick2D::new(side);
        for e in group {
            let (i, j) = (e.depth[0] as usize, e.depth[1] as usize);
            if (fw.count(i, j) as usize) < k {
                fw.add(i, j);
                kept.push(e);
            }
        }
    }
    kept
}

/// Layered search over the expanded graph: paths with exactly `spec.layers.len()` edges from
/// the source, where the target of the `l`-th edge hosts the `l`-th instance.
///
/// This is Bellman-Ford restricted to that many relaxation rounds, keeping for every reachable
/// expanded vertex the cheapest partial paths by provisional cost. Returned candidates are
/// de-duplicated by placement and route, re-verified against the exact delay and reliability
/// budgets, and sorted by (provisional cost, total steepness, placement).
pub fn find_candidates(
    xg: &ExpandedGraph<'_>,
    g: &PhysicalGraph,
    spec: &SearchSpec,
) -> SearchResult {
    let dg = xg.dg();
    let gamma = xg.gamma;
    let dims = xg.dims();
    let k = spec.max_candidates.max(1);
    let side = gamma as usize + 1;
    let n_layers = spec.layers.len();

    let hop_cost = |layer: &Layer, edge: usize| -> f64 {
        let transport: f64 = dg.edges[edge]
            .links()
            .iter()
            .map(|&l| g.links[l].unit_cost)
            .sum();
        transport * layer.traffic
    };

    let mut layers: Vec<Vec<Entry>> = Vec::with_capacity(n_layers + 1);
    if spec.start_depth[0] > gamma || spec.start_depth[1] > gamma {
        return SearchResult {
            candidates: Vec::new(),
            reachable_per_layer: vec![0],
        };
    }
    layers.push(vec![Entry {
        base: spec.source,
        depth: spec.start_depth,
        cost: 0.0,
        steep: 0,
        parent: NO_PARENT,
        arc: NO_PARENT,
    }]);
    let mut reachable = vec![1];

    for (li, layer) in spec.layers.iter().enumerate() {
        let prev = &layers[li];
        let mut next = Vec::new();
        for (pi, p) in prev.iter().enumerate() {
            for &ai in xg.out_arcs(p.base) {
                let arc = xg.arcs[ai];
                let Some(node) = dg.vertices[arc.to].node() else {
                    continue;
                };
                if !layer.allowed[node] || dg.edges[arc.edge].capacity < layer.traffic {
                    continue;
                }
                let depth = [p.depth[0] + arc.step[0], p.depth[1] + arc.step[1]];
                if depth[0] > gamma || depth[1] > gamma {
                    continue;
                }
                next.push(Entry {
                    base: arc.to,
                    depth,
                    cost: p.cost + hop_cost(layer, arc.edge) + layer.node_cost[node],
                    steep: p.steep + arc.step[0] + arc.step[1],
                    parent: pi,
                    arc: ai,
                });
            }
        }
        let states: BTreeSet<(usize, [u32; 2])> = next.iter().map(|e| (e.base, e.depth)).collect();
        reachable.push(states.len());
        let kept = prune_dominated(next, k, side);
        layers.push(kept);
    }

    let finals = &layers[n_layers];
    let mut raw: Vec<CandidatePath> = finals
        .iter()
        .map(|f| {
            let mut edges = Vec::with_capacity(n_layers);
            let mut cur = *f;
            let mut li = n_layers;
            while cur.parent != NO_PARENT {
                edges.push(xg.arcs[cur.arc].edge);
                li -= 1;
                cur = layers[li][cur.parent];
            }
            edges.reverse();
            let placement = edges
                .iter()
                .map(|&e| dg.vertices[dg.edges[e].to].node().expect("compute"))
                .collect();
            let network_delay = edges.iter().map(|&e| dg.edges[e].delay).sum();
            let reliability = spec
                .reliability_floor
                .iter()
                .map(|&(t, _)| {
                    (
                        t,
                        edges.iter().map(|&e| dg.edges[e].reliability[t]).product(),
                    )
                })
                .collect();
            CandidatePath {
                edges,
                placement,
                depth: f.depth,
                provisional_cost: f.cost,
                network_delay,
                reliability,
            }
        })
        .collect();

    raw.sort_by(|a, b| {
        a.provisional_cost
            .total_cmp(&b.provisional_cost)
            .then((a.depth[0] + a.depth[1]).cmp(&(b.depth[0] + b.depth[1])))
            .then_with(|| a.placement.cmp(&b.placement))
            .then_with(|| a.edges.cmp(&b.edges))
    });

    let mut seen = BTreeSet::new();
    let mut candidates = Vec::new();
    for c in raw {
        let key: (Vec<usize>, Vec<Vec<usize>>) = (
            c.placement.clone(),
            c.edges
                .iter()
                .map(|&e| dg.edges[e].links().to_vec())
                .collect(),
        );
        if !seen.insert(key) {
            continue;
        }
        let delay_ok = !dims.delay || c.network_delay <= spec.delay_budget * (1.0 + 1e-12);
        let rel_ok = !dims.reliability
            || c.reliability
                .iter()
                .zip(&spec.reliability_floor)
                .all(|((_, r), (_, floor))| *r >= *floor * (1.0 - 1e-12));
        if !(delay_ok && rel_ok) {
            log::warn!(
                "discarding candidate {:?}: exact KPI re-check failed",
                c.placement
            );
            continue;
        }
        candidates.push(c);
        if candidates.len() == k {
            break;
        }
    }
    SearchResult {
        candidates,
        reachable_per_layer: reachable,
    }
}
