//! Decision graph: endpoints, compute nodes and their replicas, connected by auxiliary edges
//! and by virtual links that aggregate physical paths.

mod ledger;
pub mod paths;

use std::collections::HashMap;
use std::fmt::Write as _;

pub use ledger::{LedgerError, ResidualLedger, Usage};
pub use paths::{all_simple_paths, k_shortest_paths, PhysPath};

use crate::model::{PhysicalGraph, ServiceRequest, Vertex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DecisionVertex {
    /// Index into the request's endpoints.
    Endpoint(usize),
    /// Physical node index and replica number; replica 0 is the node itself.
    Compute { node: usize, replica: u32 },
}

impl DecisionVertex {
    pub fn node(&self) -> Option<usize> {
        match self {
            DecisionVertex::Compute { node, .. } => Some(*node),
            DecisionVertex::Endpoint(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EdgeKind {
    Auxiliary,
    /// Physical links traversed, in order.
    Virtual {
        links: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionEdge {
    pub from: usize,
    pub to: usize,
    /// Mb/s, minimum residual over the realization.
    pub capacity: f64,
    /// ms, sum over the realization.
    pub delay: f64,
    /// Product of link reliabilities and of the reliability of every node entered, per time step.
    pub reliability: Vec<f64>,
    pub kind: EdgeKind,
}

impl DecisionEdge {
    pub fn links(&self) -> &[usize] {
        match &self.kind {
            EdgeKind::Auxiliary => &[],
            EdgeKind::Virtual { links } => links,
        }
    }

    pub fn is_auxiliary(&self) -> bool {
        matches!(self.kind, EdgeKind::Auxiliary)
    }

    /// Worst-case reliability over the given time steps.
    pub fn min_reliability(&self, lifetime: &[usize]) -> f64 {
        lifetime
            .iter()
            .map(|&t| self.reliability[t])
            .fold(1.0, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct DecisionGraph {
    pub vertices: Vec<DecisionVertex>,
    pub edges: Vec<DecisionEdge>,
    /// Number of VNF instances the graph was built for (replicas per node + 1).
    pub chain_len: usize,
    out: Vec<Vec<usize>>,
    index: HashMap<DecisionVertex, usize>,
}

impl DecisionGraph {
    fn new(vertices: Vec<DecisionVertex>, edges: Vec<DecisionEdge>, chain_len: usize) -> Self {
        let index = vertices.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let mut out = vec![Vec::new(); vertices.len()];
        for (i, e) in edges.iter().enumerate() {
            out[e.from].push(i);
        }
        Self {
            vertices,
            edges,
            chain_len,
            out,
            index,
        }
    }

    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out[v]
    }

    pub fn vertex_index(&self, v: DecisionVertex) -> Option<usize> {
        self.index.get(&v).copied()
    }

    /// Copy of the graph keeping only the edges for which `keep` holds.
    pub fn filter_edges(
        &self,
        mut keep: impl FnMut(usize, &DecisionEdge) -> bool,
    ) -> DecisionGraph {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .filter(|(i, e)| keep(*i, e))
            .map(|(_, e)| e.clone())
            .collect();
        DecisionGraph::new(self.vertices.clone(), edges, self.chain_len)
    }

    /// Recomputes `(capacity, delay, reliability)` of a virtual edge from its realization.
    pub fn fold_realization(
        g: &PhysicalGraph,
        ledger: &ResidualLedger,
        links: &[usize],
    ) -> (f64, f64, Vec<f64>) {
        let capacity = links
            .iter()
            .map(|&l| ledger.link_residual(l))
            .fold(f64::INFINITY, f64::min);
        let delay = links.iter().map(|&l| g.links[l].delay).sum();
        let reliability = (0..g.time_steps)
            .map(|t| {
                links
                    .iter()
                    .map(|&l| g.links[l].reliability.at(t) * g.vertex_reliability(g.links[l].to, t))
                    .product()
            })
            .collect();
        (capacity, delay, reliability)
    }

    /// Vertex/edge attribute dump in Graphviz DOT.
    pub fn to_dot(&self, g: &PhysicalGraph, req: &ServiceRequest) -> String {
        let name = |v: &DecisionVertex| match v {
            DecisionVertex::Endpoint(e) => req.endpoints[*e].id.to_string(),
            DecisionVertex::Compute { node, replica: 0 } => g.nodes[*node].id.to_string(),
            DecisionVertex::Compute { node, replica } => format!("{}#{replica}", g.nodes[*node].id),
        };
        let mut s = String::from("digraph decision {\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(s, "  v{i} [label=\"{}\"];", name(v));
        }
        for e in &self.edges {
            let route: Vec<&str> = e.links().iter().map(|&l| g.links[l].id.as_str()).collect();
            let _ = writeln!(
                s,
                "  v{} -> v{} [delay={}, capacity={}, reliability=\"{:?}\", route=\"{}\"{}];",
                e.from,
                e.to,
                e.delay,
                e.capacity,
                e.reliability,
                route.join(","),
                if e.is_auxiliary() {
                    ", style=dashed"
                } else {
                    ""
                }
            );
        }
        s.push_str("}\n");
        s
    }
}

/// Builds the decision graph for placing a sequence of `chain_len` VNF instances for `req`.
///
/// Endpoint vertices connect to replica 0 of every compute node reachable from the endpoint's
/// location; every replica of a compute node connects to replica 0 of every other compute
/// node. Each virtual edge carries one physical realization; up to `k_paths` minimum-delay
/// realizations are kept per vertex pair. Capacities come from the ledger's residuals.
pub fn build_decision_graph(
    g: &PhysicalGraph,
    ledger: &ResidualLedger,
    req: &ServiceRequest,
    chain_len: usize,
    k_paths: usize,
) -> DecisionGraph {
    let chain_len = chain_len.max(1);
    let compute: Vec<usize> = g.compute_nodes().collect();
    let mut vertices = Vec::new();
    for e in 0..req.endpoints.len() {
        vertices.push(DecisionVertex::Endpoint(e));
    }
    for &c in &compute {
        for r in 0..chain_len as u32 {
            vertices.push(DecisionVertex::Compute {
                node: c,
                replica: r,
            });
        }
    }
    let index: HashMap<DecisionVertex, usize> =
        vertices.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let vid = |v: DecisionVertex| index[&v];

    let virtual_edge = |from: usize, to: usize, p: &PhysPath| {
        let (capacity, delay, reliability) = DecisionGraph::fold_realization(g, ledger, &p.links);
        DecisionEdge {
            from,
            to,
            capacity,
            delay,
            reliability,
            kind: EdgeKind::Virtual {
                links: p.links.clone(),
            },
        }
    };

    let mut edges = Vec::new();
    for (ei, endpoint) in req.endpoints.iter().enumerate() {
        let Some(loc) = g.location_idx(&endpoint.location) else {
            continue;
        };
        for &c in &compute {
            for p in k_shortest_paths(g, Vertex::Location(loc), Vertex::Node(c), k_paths) {
                edges.push(virtual_edge(
                    vid(DecisionVertex::Endpoint(ei)),
                    vid(DecisionVertex::Compute {
                        node: c,
                        replica: 0,
                    }),
                    &p,
                ));
            }
        }
    }
    for &c in &compute {
        for r in 0..chain_len as u32 {
            let from = vid(DecisionVertex::Compute {
                node: c,
                replica: r,
            });
            if r + 1 < chain_len as u32 {
                edges.push(DecisionEdge {
                    from,
                    to: vid(DecisionVertex::Compute {
                        node: c,
                        replica: r + 1,
                    }),
                    capacity: f64::INFINITY,
                    delay: 0.0,
                    reliability: vec![1.0; g.time_steps],
                    kind: EdgeKind::Auxiliary,
                });
            }
        }
        for &d in &compute {
            if d == c {
                continue;
            }
            let realizations = k_shortest_paths(g, Vertex::Node(c), Vertex::Node(d), k_paths);
            for r in 0..chain_len as u32 {
                let from = vid(DecisionVertex::Compute {
                    node: c,
                    replica: r,
                });
                for p in &realizations {
                    edges.push(virtual_edge(
                        from,
                        vid(DecisionVertex::Compute {
                            node: d,
                            replica: 0,
                        }),
                        p,
                    ));
                }
            }
        }
    }
    DecisionGraph::new(vertices, edges, chain_len)
}
