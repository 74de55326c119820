//! Multi-KPI network slice placement.
//!
//! Given a physical infrastructure (fog, MEC and cloud nodes, radio points of access, links)
//! and a service request (a tree of VNFs, per-endpoint loads, delay/reliability/availability
//! targets), the planner selects points of access, places VNF instances, routes traffic and
//! assigns CPU so that every KPI holds at minimum cost.
//!
//! Pipeline: [`decision_graph`] → [`expanded_graph`] (quantized KPI budgets, layered search) →
//! [`cpu_assign`] (closed-form convex CPU sizing) → [`planner`] (cost selection, replication,
//! commit). [`oracle`] is an exhaustive reference for small instances.

// `!(x > y)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cpu_assign;
pub mod decision_graph;
pub mod expanded_graph;
pub mod model;
pub mod oracle;
pub mod planner;
pub mod synth;
