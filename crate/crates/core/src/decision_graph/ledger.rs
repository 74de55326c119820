use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::{Deployment, NodeId, PhysicalGraph, ResourceKind, VnfId};

#[derive(Debug, Error, PartialEq)]
pub enum LedgerError {
    #[error("deployment references unknown {0}")]
    Unknown(String),
    #[error("insufficient residual on {what}: need {need}, have {have}")]
    Insufficient { what: String, need: f64, have: f64 },
    #[error("deployment was never committed")]
    NotCommitted,
}

#[derive(Debug, Clone, PartialEq)]
struct Owner {
    service: String,
    isolated: bool,
}

/// Resources consumed by one deployment, in index space.
#[derive(Debug, Clone, PartialEq)]
pub struct Usage {
    service: String,
    isolated: bool,
    links: BTreeMap<usize, f64>,
    nodes: BTreeMap<(usize, ResourceKind), f64>,
    instances: BTreeSet<(VnfId, usize)>,
}

impl Usage {
    pub fn of(dep: &Deployment, g: &PhysicalGraph) -> Result<Self, LedgerError> {
        let mut links = BTreeMap::new();
        let mut nodes = BTreeMap::new();
        let mut instances = BTreeSet::new();
        for plan in &dep.endpoints {
            for s in &plan.stages {
                let n = g
                    .node_idx(&s.node)
                    .ok_or_else(|| LedgerError::Unknown(format!("node {}", s.node)))?;
                instances.insert((s.vnf.clone(), n));
                *nodes.entry((n, ResourceKind::cpu())).or_insert(0.0) += s.cpu;
                for (k, v) in &s.other {
                    *nodes.entry((n, k.clone())).or_insert(0.0) += v;
                }
                for l in &s.route {
                    let li = g
                        .link_idx(l)
                        .ok_or_else(|| LedgerError::Unknown(format!("link {l}")))?;
                    *links.entry(li).or_insert(0.0) += s.traffic;
                }
            }
        }
        Ok(Self {
            service: dep.service.clone(),
            isolated: dep.isolated,
            links,
            nodes,
            instances,
        })
    }
}

/// Residual link and node capacities after the committed services, plus the registry of
/// deployed VNF instances available for reuse.
///
/// Residuals are always recomputed as `capacity - usage_1 - usage_2 - ...` in commit order, so a
/// commit followed by a rollback restores the ledger bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualLedger {
    link_capacity: Vec<f64>,
    node_capacity: Vec<BTreeMap<ResourceKind, f64>>,
    commits: Vec<Usage>,
    link_residual: Vec<f64>,
    node_residual: Vec<BTreeMap<ResourceKind, f64>>,
    instances: BTreeMap<(VnfId, usize), Vec<Owner>>,
}

const SLACK: f64 = 1e-9;

impl ResidualLedger {
    pub fn new(g: &PhysicalGraph) -> Self {
        let link_capacity: Vec<f64> = g.links.iter().map(|l| l.capacity).collect();
        let node_capacity: Vec<_> = g.nodes.iter().map(|n| n.resources.clone()).collect();
        Self {
            link_residual: link_capacity.clone(),
            node_residual: node_capacity.clone(),
            link_capacity,
            node_capacity,
            commits: Vec::new(),
            instances: BTreeMap::new(),
        }
    }

    pub fn link_residual(&self, link: usize) -> f64 {
        self.link_residual[link]
    }

    pub fn node_residual(&self, node: usize, kind: &ResourceKind) -> f64 {
        self.node_residual[node].get(kind).copied().unwrap_or(0.0)
    }

    pub fn commits(&self) -> usize {
        self.commits.len()
    }

    /// Whether `service` may reuse an instance of `vnf` already running on `node`.
    pub fn reusable(&self, vnf: &VnfId, node: usize, service: &str, isolated: bool) -> bool {
        self.instances
            .get(&(vnf.clone(), node))
            .map(|owners| {
                owners
                    .iter()
                    .any(|o| o.service == service || (!isolated && !o.isolated))
            })
            .unwrap_or(false)
    }

    pub fn has_instance(&self, vnf: &VnfId, node: &NodeId, g: &PhysicalGraph) -> bool {
        g.node_idx(node)
            .map(|n| self.instances.contains_key(&(vnf.clone(), n)))
            .unwrap_or(false)
    }

    pub fn commit(&mut self, dep: &Deployment, g: &PhysicalGraph) -> Result<(), LedgerError> {
        let usage = Usage::of(dep, g)?;
        self.commit_usage(usage, g)
    }

    pub fn commit_usage(&mut self, usage: Usage, g: &PhysicalGraph) -> Result<(), LedgerError> {
        for (&l, &need) in &usage.links {
            let have = self.link_residual[l];
            if need > have + SLACK * have.abs().max(1.0) {
                return Err(LedgerError::Insufficient {
                    what: format!("link {}", g.links[l].id),
                    need,
                    have,
                });
            }
        }
        for ((n, kind), &need) in &usage.nodes {
            let have = self.node_residual(*n, kind);
            if need > have + SLACK * have.abs().max(1.0) {
                return Err(LedgerError::Insufficient {
                    what: format!("node {} {kind}", g.nodes[*n].id),
                    need,
                    have,
                });
            }
        }
        self.apply(&usage);
        self.commits.push(usage);
        Ok(())
    }

    pub fn rollback(&mut self, dep: &Deployment, g: &PhysicalGraph) -> Result<(), LedgerError> {
        let usage = Usage::of(dep, g)?;
        let pos = self
            .commits
            .iter()
            .rposition(|u| *u == usage)
            .ok_or(LedgerError::NotCommitted)?;
        self.commits.remove(pos);
        self.link_residual = self.link_capacity.clone();
        self.node_residual = self.node_capacity.clone();
        self.instances.clear();
        let commits = std::mem::take(&mut self.commits);
        for u in &commits {
            self.apply(u);
        }
        self.commits = commits;
        Ok(())
    }

    fn apply(&mut self, usage: &Usage) {
        for (&l, &v) in &usage.links {
            self.link_residual[l] -= v;
        }
        for ((n, kind), &v) in &usage.nodes {
            *self.node_residual[*n].entry(kind.clone()).or_insert(0.0) -= v;
        }
        for key in &usage.instances {
            self.instances.entry(key.clone()).or_default().push(Owner {
                service: usage.service.clone(),
                isolated: usage.isolated,
            });
        }
    }
}
