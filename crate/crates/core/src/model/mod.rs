//! Domain model: physical infrastructure, services, KPI targets, deployments and costs.
//!
//! All model types are immutable once a scenario has been loaded. Algorithms work on dense
//! indices (`usize`) into [`PhysicalGraph::nodes`] and [`PhysicalGraph::links`]; identifiers
//! are kept for reporting and for the scenario file format.

mod ids;
pub mod kpi;
pub mod scenario;

use std::collections::{BTreeMap, BTreeSet, HashMap};

pub use ids::{EndpointId, InterfaceId, LinkId, LocationId, NodeId, ResourceKind, VnfId};
pub use kpi::{evaluate_deployment, EndpointKpi, KpiReport};
pub use scenario::{load_scenario, parse_scenario, Scenario, ScenarioError};

/// Reliability of a node or link over the discrete time steps of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Reliability {
    Constant(f64),
    /// One value per time step.
    Steps(Vec<f64>),
}

impl Reliability {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            Reliability::Constant(v) => *v,
            Reliability::Steps(vs) => vs.get(t).copied().unwrap_or(0.0),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Reliability::Constant(v) => vec![*v],
            Reliability::Steps(vs) => vs.clone(),
        }
    }
}

impl Default for Reliability {
    fn default() -> Self {
        Reliability::Constant(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct PhysicalNode {
    pub id: NodeId,
    pub resources: BTreeMap<ResourceKind, f64>,
    pub interfaces: BTreeSet<InterfaceId>,
    /// Locations this node reaches through its radio interfaces.
    pub coverage: BTreeSet<LocationId>,
    pub reliability: Reliability,
    pub resource_unit_cost: BTreeMap<ResourceKind, f64>,
    pub vnf_instantiation_cost: BTreeMap<VnfId, f64>,
    /// Free-form label used in reports (`fog`, `mec`, `cloud`, `macro`, ...).
    pub tier: Option<String>,
}

impl PhysicalNode {
    pub fn capacity(&self, kind: &ResourceKind) -> f64 {
        self.resources.get(kind).copied().unwrap_or(0.0)
    }

    /// Nodes with CPU can host VNF instances; everything else only forwards traffic.
    pub fn is_compute(&self) -> bool {
        self.capacity(&ResourceKind::cpu()) > 0.0
    }

    pub fn is_poa(&self) -> bool {
        !self.coverage.is_empty()
    }

    pub fn unit_cost(&self, kind: &ResourceKind) -> f64 {
        self.resource_unit_cost.get(kind).copied().unwrap_or(0.0)
    }

    pub fn instantiation_cost(&self, vnf: &VnfId) -> f64 {
        self.vnf_instantiation_cost.get(vnf).copied().unwrap_or(0.0)
    }

    pub fn supports(&self, vnf: &Vnf) -> bool {
        vnf.required_interfaces.is_subset(&self.interfaces)
    }
}

/// A vertex of the physical graph: either a network node or a location where endpoints live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Vertex {
    Node(usize),
    Location(usize),
}

#[derive(Debug, Clone)]
pub struct PhysicalLink {
    pub id: LinkId,
    pub from: Vertex,
    pub to: Vertex,
    /// ms
    pub delay: f64,
    /// Mb/s
    pub capacity: f64,
    /// currency per Mb/s carried over one accounting period
    pub unit_cost: f64,
    pub reliability: Reliability,
}

#[derive(Debug, Clone)]
pub struct PhysicalGraph {
    pub nodes: Vec<PhysicalNode>,
    pub locations: Vec<LocationId>,
    pub links: Vec<PhysicalLink>,
    /// Number of discrete time steps; reliability profiles are defined over `0..time_steps`.
    pub time_steps: usize,
    node_index: HashMap<NodeId, usize>,
    location_index: HashMap<LocationId, usize>,
    link_index: HashMap<LinkId, usize>,
    out_links: HashMap<Vertex, Vec<usize>>,
}

impl PhysicalGraph {
    pub fn new(
        nodes: Vec<PhysicalNode>,
        locations: Vec<LocationId>,
        links: Vec<PhysicalLink>,
        time_steps: usize,
    ) -> Self {
        let node_index = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        let location_index = locations
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        let link_index = links
            .iter()
            .enumerate()
            .map(|(i, l)| (l.id.clone(), i))
            .collect();
        let mut out_links: HashMap<Vertex, Vec<usize>> = HashMap::new();
        for (i, l) in links.iter().enumerate() {
            out_links.entry(l.from).or_default().push(i);
        }
        Self {
            nodes,
            locations,
            links,
            time_steps,
            node_index,
            location_index,
            link_index,
            out_links,
        }
    }

    pub fn node_idx(&self, id: &NodeId) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn location_idx(&self, id: &LocationId) -> Option<usize> {
        self.location_index.get(id).copied()
    }

    pub fn link_idx(&self, id: &LinkId) -> Option<usize> {
        self.link_index.get(id).copied()
    }

    pub fn out_links(&self, v: Vertex) -> &[usize] {
        self.out_links.get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn compute_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_compute())
            .map(|(i, _)| i)
    }

    /// Reliability of a vertex at time `t`; locations are traffic sources and count as 1.
    pub fn vertex_reliability(&self, v: Vertex, t: usize) -> f64 {
        match v {
            Vertex::Node(i) => self.nodes[i].reliability.at(t),
            Vertex::Location(_) => 1.0,
        }
    }

    pub fn vertex_name(&self, v: Vertex) -> &str {
        match v {
            Vertex::Node(i) => self.nodes[i].id.as_str(),
            Vertex::Location(i) => self.locations[i].as_str(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Vnf {
    pub id: VnfId,
    /// Resource units needed per Mb/s of processed traffic. For `cpu` the unit is a service
    /// rate (1/ms), so that `1 / (a - r * load)` is a delay in ms.
    pub per_unit_resource: BTreeMap<ResourceKind, f64>,
    pub required_interfaces: BTreeSet<InterfaceId>,
}

impl Vnf {
    pub fn cpu_per_unit(&self) -> f64 {
        self.per_unit_resource
            .get(&ResourceKind::cpu())
            .copied()
            .unwrap_or(0.0)
    }
}

/// Where the traffic entering a VNF was last processed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Upstream {
    Endpoint,
    Vnf(VnfId),
}

/// Service graph: an out-tree of VNFs rooted at the VNF that first processes endpoint traffic.
/// A pure chain is the special case where every VNF has at most one child.
#[derive(Debug, Clone, Default)]
pub struct ServiceGraph {
    pub root: Option<VnfId>,
    /// Children of each VNF in declaration order.
    pub children: BTreeMap<VnfId, Vec<VnfId>>,
    /// Traffic scaling coefficients keyed by (upstream, current, next); missing entries are 1.
    pub chi: BTreeMap<(Upstream, VnfId, VnfId), f64>,
}

impl ServiceGraph {
    pub fn chain(vnfs: &[VnfId]) -> Self {
        let mut g = ServiceGraph {
            root: vnfs.first().cloned(),
            ..Default::default()
        };
        for w in vnfs.windows(2) {
            g.children
                .entry(w[0].clone())
                .or_default()
                .push(w[1].clone());
        }
        g
    }

    pub fn chi(&self, upstream: &Upstream, cur: &VnfId, next: &VnfId) -> f64 {
        self.chi
            .get(&(upstream.clone(), cur.clone(), next.clone()))
            .copied()
            .unwrap_or(1.0)
    }

    pub fn children(&self, v: &VnfId) -> &[VnfId] {
        self.children.get(v).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All root-to-leaf VNF sequences, depth first in declaration order.
    pub fn root_to_leaf_paths(&self) -> Vec<Vec<VnfId>> {
        let mut out = Vec::new();
        if let Some(root) = &self.root {
            let mut stack = vec![root.clone()];
            self.collect_paths(&mut stack, &mut out);
        }
        out
    }

    fn collect_paths(&self, stack: &mut Vec<VnfId>, out: &mut Vec<Vec<VnfId>>) {
        let last = stack.last().cloned().expect("non-empty stack");
        let kids = self.children(&last);
        if kids.is_empty() {
            out.push(stack.clone());
            return;
        }
        for k in kids {
            stack.push(k.clone());
            self.collect_paths(stack, out);
            stack.pop();
        }
    }

    pub fn vnf_count(&self) -> usize {
        let mut seen = BTreeSet::new();
        if let Some(r) = &self.root {
            seen.insert(r.clone());
        }
        for kids in self.children.values() {
            seen.extend(kids.iter().cloned());
        }
        seen.len()
    }

    /// Mb/s entering each VNF of `path` for an endpoint offering `load`, following the χ
    /// coefficients along the path.
    pub fn loads_along(&self, path: &[VnfId], load: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(path.len());
        let mut current = load;
        for (i, v) in path.iter().enumerate() {
            if i > 0 {
                let upstream = if i >= 2 {
                    Upstream::Vnf(path[i - 2].clone())
                } else {
                    Upstream::Endpoint
                };
                current *= self.chi(&upstream, &path[i - 1], v);
            }
            out.push(current);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Endpoint {
    pub id: EndpointId,
    pub location: LocationId,
    /// Mb/s offered at this endpoint.
    pub load: f64,
    /// Time steps during which the service must be available here.
    pub lifetime: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ServiceRequest {
    pub id: String,
    pub graph: ServiceGraph,
    pub endpoints: Vec<Endpoint>,
    /// ms; `None` means unconstrained.
    pub max_delay: Option<f64>,
    /// `None` means unconstrained.
    pub min_reliability: Option<f64>,
    /// Isolated services neither reuse nor share VNF instances with other services.
    pub isolated: bool,
    /// Instances per VNF; absent means 1.
    pub instance_count: BTreeMap<VnfId, u32>,
}

impl ServiceRequest {
    pub fn delay_target(&self) -> f64 {
        self.max_delay.unwrap_or(f64::INFINITY)
    }

    pub fn reliability_target(&self) -> f64 {
        self.min_reliability.unwrap_or(0.0)
    }

    pub fn instances_of(&self, vnf: &VnfId) -> u32 {
        self.instance_count.get(vnf).copied().unwrap_or(1).max(1)
    }

    /// Locations where the service must be available.
    pub fn availability(&self) -> BTreeSet<LocationId> {
        self.endpoints.iter().map(|e| e.location.clone()).collect()
    }

    pub fn scale_load(&self, factor: f64) -> ServiceRequest {
        let mut out = self.clone();
        for e in &mut out.endpoints {
            e.load *= factor;
        }
        out
    }
}

/// Knobs shared by the planner, the oracle and the CLI.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    /// Quantization resolution of the KPI budgets.
    pub gamma: u32,
    pub max_candidates: usize,
    /// Extra instances the planner may add per VNF when CPU capacity is the bottleneck.
    pub max_instance_replication: u32,
    /// Physical realizations kept per virtual link.
    pub k_paths: usize,
    /// Hop bound for the oracle's route enumeration.
    pub oracle_max_hops: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            gamma: 10,
            max_candidates: 64,
            max_instance_replication: 3,
            k_paths: 1,
            oracle_max_hops: 6,
        }
    }
}

/// One placed VNF instance together with the route that brings traffic to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    /// Stage whose node the traffic comes from; `None` means the endpoint's location.
    pub parent: Option<usize>,
    pub vnf: VnfId,
    /// Which instance of a replicated VNF this stage is (0-based).
    pub replica: u32,
    pub node: NodeId,
    /// Physical links from the parent's node (or the endpoint) to `node`, in order.
    pub route: Vec<LinkId>,
    /// Mb/s carried on every link of `route`.
    pub traffic: f64,
    /// Mb/s processed by this instance for this endpoint.
    pub load: f64,
    /// Fraction of the flow seen by this instance (1 / number of instances of the VNF).
    pub weight: f64,
    /// CPU service rate assigned (1/ms).
    pub cpu: f64,
    /// Exact-sized non-CPU resources.
    pub other: BTreeMap<ResourceKind, f64>,
}

/// The stages serving one endpoint, organized as a tree mirroring the service graph.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointPlan {
    pub endpoint: EndpointId,
    pub stages: Vec<Stage>,
}

impl EndpointPlan {
    /// Stages that no other stage uses as parent.
    pub fn leaves(&self) -> Vec<usize> {
        let mut has_child = vec![false; self.stages.len()];
        for s in &self.stages {
            if let Some(p) = s.parent {
                has_child[p] = true;
            }
        }
        (0..self.stages.len()).filter(|&i| !has_child[i]).collect()
    }

    /// Stage indices from the first stage down to `leaf`.
    pub fn path_to(&self, leaf: usize) -> Vec<usize> {
        let mut path = vec![leaf];
        let mut cur = leaf;
        while let Some(p) = self.stages[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CostBreakdown {
    pub instantiation: f64,
    pub resource: f64,
    pub transport: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.instantiation + self.resource + self.transport
    }
}

impl std::ops::AddAssign for CostBreakdown {
    fn add_assign(&mut self, rhs: Self) {
        self.instantiation += rhs.instantiation;
        self.resource += rhs.resource;
        self.transport += rhs.transport;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub service: String,
    pub isolated: bool,
    pub endpoints: Vec<EndpointPlan>,
    /// VNF instances this deployment creates (not reused).
    pub new_instances: BTreeSet<(VnfId, NodeId)>,
    pub cost: CostBreakdown,
}

impl Deployment {
    /// Distinct (VNF, node) pairs hosting traffic of this deployment.
    pub fn placement(&self) -> BTreeSet<(VnfId, NodeId)> {
        self.endpoints
            .iter()
            .flat_map(|p| p.stages.iter().map(|s| (s.vnf.clone(), s.node.clone())))
            .collect()
    }
}
