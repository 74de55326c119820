//! Scenario files.
//!
//! A scenario is a single TOML document with the top-level keys `name`, `locations`,
//! `config`, `costs`, `nodes`, `links`, `vnfs` and `services`. Unknown keys are rejected.
//! See `scenarios/README.md` for the full schema.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::{
    Endpoint, EndpointId, InterfaceId, LinkId, LocationId, NodeId, PhysicalGraph, PhysicalLink,
    PhysicalNode, PlannerConfig, Reliability, ResourceKind, ServiceGraph, ServiceRequest, Upstream,
    Vertex, Vnf, VnfId,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("schema error: {0}")]
    Schema(#[from] toml::de::Error),
    #[error("{at}: {msg}")]
    Invalid { at: String, msg: String },
}

fn invalid(at: impl Into<String>, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        at: at.into(),
        msg: msg.into(),
    }
}

/// A fully validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub graph: PhysicalGraph,
    pub vnfs: BTreeMap<VnfId, Vnf>,
    pub services: Vec<ServiceRequest>,
    pub config: PlannerConfig,
    pub currency: String,
}

impl Scenario {
    pub fn vnf(&self, id: &VnfId) -> &Vnf {
        &self.vnfs[id]
    }

    pub fn service(&self, id: &str) -> Option<&ServiceRequest> {
        self.services.iter().find(|s| s.id == id)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    locations: Vec<String>,
    #[serde(default)]
    config: RawConfig,
    #[serde(default)]
    costs: RawCosts,
    #[serde(default)]
    nodes: Vec<RawNode>,
    #[serde(default)]
    links: Vec<RawLink>,
    #[serde(default)]
    vnfs: Vec<RawVnf>,
    #[serde(default)]
    services: Vec<RawService>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    gamma: u32,
    max_candidates: usize,
    max_instance_replication: u32,
    k_paths: usize,
    oracle_max_hops: usize,
    time_steps: usize,
}

impl Default for RawConfig {
    fn default() -> Self {
        let d = PlannerConfig::default();
        Self {
            gamma: d.gamma,
            max_candidates: d.max_candidates,
            max_instance_replication: d.max_instance_replication,
            k_paths: d.k_paths,
            oracle_max_hops: d.oracle_max_hops,
            time_steps: 1,
        }
    }
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum TransportUnit {
    /// Currency per Gbit transferred; converted with `period_s`.
    PerGbit,
    /// Currency per Mb/s sustained over one accounting period.
    PerMbps,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawCosts {
    currency: String,
    period_s: f64,
    transport_unit: TransportUnit,
}

impl Default for RawCosts {
    fn default() -> Self {
        Self {
            currency: "USD".into(),
            period_s: 1.0,
            transport_unit: TransportUnit::PerMbps,
        }
    }
}

#[derive(Debug, Deserialize, Clone)]
#[serde(untagged)]
enum RawReliability {
    Constant(f64),
    Steps(Vec<f64>),
}

impl Default for RawReliability {
    fn default() -> Self {
        RawReliability::Constant(1.0)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    id: String,
    #[serde(default)]
    tier: Option<String>,
    #[serde(default)]
    resources: BTreeMap<String, f64>,
    #[serde(default)]
    interfaces: Vec<String>,
    #[serde(default)]
    coverage: Vec<String>,
    #[serde(default)]
    reliability: RawReliability,
    #[serde(default)]
    resource_cost: BTreeMap<String, f64>,
    #[serde(default)]
    instantiation_cost: BTreeMap<String, f64>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    id: String,
    from: String,
    to: String,
    delay: f64,
    capacity: f64,
    #[serde(default)]
    cost: f64,
    #[serde(default)]
    reliability: RawReliability,
    #[serde(default = "yes")]
    bidirectional: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVnf {
    id: String,
    resources: BTreeMap<String, f64>,
    #[serde(default)]
    interfaces: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChi {
    prev: String,
    cur: String,
    next: String,
    value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEndpoint {
    location: String,
    load: f64,
    #[serde(default)]
    lifetime: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawService {
    id: String,
    #[serde(default)]
    chain: Option<Vec<String>>,
    /// Directed VNF edges of a tree-shaped service graph.
    #[serde(default)]
    graph: Option<Vec<(String, String)>>,
    #[serde(default)]
    chi: Vec<RawChi>,
    #[serde(default)]
    max_delay: Option<f64>,
    #[serde(default)]
    min_reliability: Option<f64>,
    #[serde(default)]
    isolated: bool,
    #[serde(default)]
    instances: BTreeMap<String, u32>,
    endpoints: Vec<RawEndpoint>,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario = toml::from_str(text)?;
    build(raw)
}

fn reliability(
    raw: &RawReliability,
    time_steps: usize,
    at: &str,
) -> Result<Reliability, ScenarioError> {
    let check = |v: f64| {
        if v > 0.0 && v <= 1.0 {
            Ok(())
        } else {
            Err(invalid(at, format!("reliability {v} outside (0, 1]")))
        }
    };
    match raw {
        RawReliability::Constant(v) => {
            check(*v)?;
            Ok(Reliability::Constant(*v))
        }
        RawReliability::Steps(vs) => {
            if vs.len() != time_steps {
                return Err(invalid(
                    at,
                    format!(
                        "reliability has {} steps, scenario declares {time_steps}",
                        vs.len()
                    ),
                ));
            }
            vs.iter().try_for_each(|v| check(*v))?;
            Ok(Reliability::Steps(vs.clone()))
        }
    }
}

fn kinds(
    map: &BTreeMap<String, f64>,
    at: &str,
    what: &str,
) -> Result<BTreeMap<ResourceKind, f64>, ScenarioError> {
    map.iter()
        .map(|(k, v)| {
            if !v.is_finite() || *v < 0.0 {
                Err(invalid(
                    at,
                    format!("{what} `{k}` must be finite and >= 0, got {v}"),
                ))
            } else {
                Ok((ResourceKind(k.clone()), *v))
            }
        })
        .collect()
}

fn build(raw: RawScenario) -> Result<Scenario, ScenarioError> {
    let cfg = &raw.config;
    if cfg.time_steps == 0 {
        return Err(invalid("config.time_steps", "must be >= 1"));
    }
    if cfg.gamma == 0 {
        return Err(invalid("config.gamma", "must be >= 1"));
    }
    if cfg.max_candidates == 0 || cfg.k_paths == 0 {
        return Err(invalid("config", "max_candidates and k_paths must be >= 1"));
    }
    if !(raw.costs.period_s > 0.0) {
        return Err(invalid("costs.period_s", "must be > 0"));
    }
    if raw.nodes.is_empty() {
        return Err(invalid("nodes", "scenario has no nodes"));
    }
    let time_steps = cfg.time_steps;

    let mut vnfs = BTreeMap::new();
    for (i, v) in raw.vnfs.iter().enumerate() {
        let at = format!("vnfs[{i}] ({})", v.id);
        let per_unit_resource = kinds(&v.resources, &at, "resource")?;
        if per_unit_resource
            .get(&ResourceKind::cpu())
            .copied()
            .unwrap_or(0.0)
            <= 0.0
        {
            return Err(invalid(&at, "cpu per traffic unit must be > 0"));
        }
        let vnf = Vnf {
            id: VnfId(v.id.clone()),
            per_unit_resource,
            required_interfaces: v.interfaces.iter().cloned().map(InterfaceId).collect(),
        };
        if vnfs.insert(vnf.id.clone(), vnf).is_some() {
            return Err(invalid(&at, "duplicate vnf id"));
        }
    }

    let mut location_set = BTreeSet::new();
    for (i, l) in raw.locations.iter().enumerate() {
        if !location_set.insert(l.clone()) {
            return Err(invalid(
                format!("locations[{i}]"),
                format!("duplicate location `{l}`"),
            ));
        }
    }
    let locations: Vec<LocationId> = raw.locations.iter().cloned().map(LocationId).collect();

    let mut nodes = Vec::with_capacity(raw.nodes.len());
    let mut node_names = HashMap::new();
    for (i, n) in raw.nodes.iter().enumerate() {
        let at = format!("nodes[{i}] ({})", n.id);
        if node_names.insert(n.id.clone(), i).is_some() {
            return Err(invalid(&at, "duplicate node id"));
        }
        if location_set.contains(&n.id) {
            return Err(invalid(&at, "node id clashes with a location"));
        }
        let coverage: BTreeSet<LocationId> = n.coverage.iter().cloned().map(LocationId).collect();
        for c in &coverage {
            if !location_set.contains(c.as_str()) {
                return Err(invalid(
                    &at,
                    format!("coverage references unknown location `{c}`"),
                ));
            }
        }
        if !coverage.is_empty() && n.interfaces.is_empty() {
            return Err(invalid(
                &at,
                "node covers locations but has no radio interface",
            ));
        }
        let mut instantiation_cost = BTreeMap::new();
        for (v, c) in &n.instantiation_cost {
            if !vnfs.contains_key(v.as_str()) {
                return Err(invalid(
                    &at,
                    format!("instantiation_cost references unknown vnf `{v}`"),
                ));
            }
            if !(*c >= 0.0) {
                return Err(invalid(
                    &at,
                    format!("instantiation cost for `{v}` must be >= 0"),
                ));
            }
            instantiation_cost.insert(VnfId(v.clone()), *c);
        }
        nodes.push(PhysicalNode {
            id: NodeId(n.id.clone()),
            resources: kinds(&n.resources, &at, "capacity")?,
            interfaces: n.interfaces.iter().cloned().map(InterfaceId).collect(),
            coverage,
            reliability: reliability(&n.reliability, time_steps, &at)?,
            resource_unit_cost: kinds(&n.resource_cost, &at, "resource cost")?,
            vnf_instantiation_cost: instantiation_cost,
            tier: n.tier.clone(),
        });
    }

    let resolve = |name: &str, at: &str| -> Result<Vertex, ScenarioError> {
        if let Some(&i) = node_names.get(name) {
            return Ok(Vertex::Node(i));
        }
        if let Some(i) = raw.locations.iter().position(|l| l == name) {
            return Ok(Vertex::Location(i));
        }
        Err(invalid(at, format!("unknown node or location `{name}`")))
    };

    let cost_factor = match raw.costs.transport_unit {
        TransportUnit::PerMbps => 1.0,
        // 1 Mb/s over `period_s` seconds is `period_s / 1000` Gbit.
        TransportUnit::PerGbit => raw.costs.period_s / 1000.0,
    };

    let mut links = Vec::new();
    let mut link_names = BTreeSet::new();
    for (i, l) in raw.links.iter().enumerate() {
        let at = format!("links[{i}] ({})", l.id);
        let from = resolve(&l.from, &at)?;
        let to = resolve(&l.to, &at)?;
        if from == to {
            return Err(invalid(&at, "self loop"));
        }
        if matches!((from, to), (Vertex::Location(_), Vertex::Location(_))) {
            return Err(invalid(&at, "links between two locations are not allowed"));
        }
        if !(l.delay >= 0.0) || !l.delay.is_finite() {
            return Err(invalid(&at, format!("delay must be >= 0, got {}", l.delay)));
        }
        if !(l.capacity > 0.0) {
            return Err(invalid(
                &at,
                format!("capacity must be > 0, got {}", l.capacity),
            ));
        }
        if !(l.cost >= 0.0) {
            return Err(invalid(&at, "cost must be >= 0"));
        }
        let rel = reliability(&l.reliability, time_steps, &at)?;
        let mut push = |id: String, from, to| -> Result<(), ScenarioError> {
            if !link_names.insert(id.clone()) {
                return Err(invalid(&at, format!("duplicate link id `{id}`")));
            }
            links.push(PhysicalLink {
                id: LinkId(id),
                from,
                to,
                delay: l.delay,
                capacity: l.capacity,
                unit_cost: l.cost * cost_factor,
                reliability: rel.clone(),
            });
            Ok(())
        };
        push(l.id.clone(), from, to)?;
        if l.bidirectional {
            push(format!("{}~rev", l.id), to, from)?;
        }
    }

    let mut services = Vec::new();
    for (i, s) in raw.services.iter().enumerate() {
        let at = format!("services[{i}] ({})", s.id);
        if services.iter().any(|o: &ServiceRequest| o.id == s.id) {
            return Err(invalid(&at, "duplicate service id"));
        }
        let graph = service_graph(s, &vnfs, &at)?;
        if let Some(d) = s.max_delay {
            if !(d > 0.0) {
                return Err(invalid(&at, "max_delay must be > 0"));
            }
        }
        if let Some(h) = s.min_reliability {
            if !(h > 0.0 && h < 1.0) {
                return Err(invalid(&at, "min_reliability must lie in (0, 1)"));
            }
        }
        if s.endpoints.is_empty() {
            return Err(invalid(&at, "service has no endpoints"));
        }
        let mut endpoints = Vec::new();
        for (j, e) in s.endpoints.iter().enumerate() {
            let eat = format!("{at}.endpoints[{j}]");
            if !location_set.contains(&e.location) {
                return Err(invalid(&eat, format!("unknown location `{}`", e.location)));
            }
            if !(e.load > 0.0) || !e.load.is_finite() {
                return Err(invalid(&eat, "load must be > 0"));
            }
            let lifetime = e
                .lifetime
                .clone()
                .unwrap_or_else(|| (0..time_steps).collect());
            if lifetime.is_empty() || lifetime.iter().any(|&t| t >= time_steps) {
                return Err(invalid(
                    &eat,
                    "lifetime must be a non-empty subset of the time steps",
                ));
            }
            let id = EndpointId(format!("{}@{}", s.id, e.location));
            if endpoints.iter().any(|o: &Endpoint| o.id == id) {
                return Err(invalid(&eat, "duplicate endpoint location"));
            }
            endpoints.push(Endpoint {
                id,
                location: LocationId(e.location.clone()),
                load: e.load,
                lifetime,
            });
        }
        let mut instance_count = BTreeMap::new();
        for (v, k) in &s.instances {
            if !vnfs.contains_key(v.as_str()) || *k == 0 {
                return Err(invalid(&at, format!("bad instance count for `{v}`")));
            }
            instance_count.insert(VnfId(v.clone()), *k);
        }
        services.push(ServiceRequest {
            id: s.id.clone(),
            graph,
            endpoints,
            max_delay: s.max_delay,
            min_reliability: s.min_reliability,
            isolated: s.isolated,
            instance_count,
        });
    }

    Ok(Scenario {
        name: raw.name.clone(),
        graph: PhysicalGraph::new(nodes, locations, links, time_steps),
        vnfs,
        services,
        config: PlannerConfig {
            gamma: cfg.gamma,
            max_candidates: cfg.max_candidates,
            max_instance_replication: cfg.max_instance_replication,
            k_paths: cfg.k_paths,
            oracle_max_hops: cfg.oracle_max_hops,
        },
        currency: raw.costs.currency.clone(),
    })
}

fn service_graph(
    s: &RawService,
    vnfs: &BTreeMap<VnfId, Vnf>,
    at: &str,
) -> Result<ServiceGraph, ScenarioError> {
    let edges: Vec<(String, String)> = match (&s.chain, &s.graph) {
        (Some(chain), None) => {
            if chain.is_empty() {
                return Err(invalid(at, "empty chain"));
            }
            if chain.len() == 1 {
                Vec::new()
            } else {
                chain
                    .windows(2)
                    .map(|w| (w[0].clone(), w[1].clone()))
                    .collect()
            }
        }
        (None, Some(g)) if !g.is_empty() => g.clone(),
        _ => {
            return Err(invalid(
                at,
                "exactly one of `chain` or a non-empty `graph` is required",
            ))
        }
    };
    let known = |v: &str| -> Result<VnfId, ScenarioError> {
        if vnfs.contains_key(v) {
            Ok(VnfId(v.to_owned()))
        } else {
            Err(invalid(at, format!("unknown vnf `{v}`")))
        }
    };

    let mut g = ServiceGraph::default();
    let mut parent: BTreeMap<VnfId, VnfId> = BTreeMap::new();
    let mut all: Vec<VnfId> = Vec::new();
    if let Some(chain) = &s.chain {
        if chain.len() == 1 {
            all.push(known(&chain[0])?);
        }
    }
    for (a, b) in &edges {
        let (a, b) = (known(a)?, known(b)?);
        if a == b {
            return Err(invalid(at, format!("self loop on `{a}`")));
        }
        if parent.insert(b.clone(), a.clone()).is_some() {
            return Err(invalid(
                at,
                format!("`{b}` has more than one upstream vnf; service graphs must be trees"),
            ));
        }
        g.children.entry(a.clone()).or_default().push(b.clone());
        for v in [a, b] {
            if !all.contains(&v) {
                all.push(v);
            }
        }
    }
    // Acyclic: walking parents from any vertex must terminate.
    for v in &all {
        let mut cur = v.clone();
        let mut steps = 0;
        while let Some(p) = parent.get(&cur) {
            cur = p.clone();
            steps += 1;
            if steps > all.len() {
                return Err(invalid(at, "service graph is cyclic"));
            }
        }
    }
    let roots: Vec<&VnfId> = all.iter().filter(|v| !parent.contains_key(*v)).collect();
    if roots.len() != 1 {
        return Err(invalid(
            at,
            format!(
                "service graph must have exactly one root vnf, found {}",
                roots.len()
            ),
        ));
    }
    g.root = Some(roots[0].clone());

    for (j, c) in s.chi.iter().enumerate() {
        let cat = format!("{at}.chi[{j}]");
        if !(c.value >= 0.0) {
            return Err(invalid(&cat, "chi must be >= 0"));
        }
        let upstream = if c.prev == "endpoint" {
            Upstream::Endpoint
        } else {
            Upstream::Vnf(known(&c.prev)?)
        };
        g.chi
            .insert((upstream, known(&c.cur)?, known(&c.next)?), c.value);
    }
    Ok(g)
}
