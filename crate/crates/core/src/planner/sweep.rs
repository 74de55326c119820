use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use super::{propose, PlanResult};
use crate::decision_graph::ResidualLedger;
use crate::model::{PlannerConfig, Scenario, ServiceRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Target delay (ms).
    Delay,
    /// Multiplier on every endpoint's load.
    Load,
    /// Target reliability.
    Reliability,
    /// Quantization resolution.
    Gamma,
}

impl Axis {
    pub fn as_str(&self) -> &'static str {
        match self {
            Axis::Delay => "delay",
            Axis::Load => "load",
            Axis::Reliability => "reliability",
            Axis::Gamma => "gamma",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "delay" => Ok(Axis::Delay),
            "load" => Ok(Axis::Load),
            "reliability" => Ok(Axis::Reliability),
            "gamma" => Ok(Axis::Gamma),
            other => Err(format!(
                "unknown axis {other:?} (expected delay, load, reliability or gamma)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub request: ServiceRequest,
    pub config: PlannerConfig,
    pub result: PlanResult,
    pub elapsed: Duration,
}

/// The request and configuration for one sweep point.
pub fn apply_axis(
    req: &ServiceRequest,
    cfg: &PlannerConfig,
    axis: Axis,
    value: f64,
) -> (ServiceRequest, PlannerConfig) {
    let mut req = req.clone();
    let mut cfg = cfg.clone();
    match axis {
        Axis::Delay => req.max_delay = Some(value),
        Axis::Load => req = req.scale_load(value),
        Axis::Reliability => req.min_reliability = Some(value),
        Axis::Gamma => cfg.gamma = value as u32,
    }
    (req, cfg)
}

/// Plans `req` once per value, each time on a fresh ledger.
pub fn sweep(
    scenario: &Scenario,
    req: &ServiceRequest,
    axis: Axis,
    values: &[f64],
    cfg: &PlannerConfig,
) -> Vec<SweepPoint> {
    values
        .iter()
        .map(|&value| {
            let (request, config) = apply_axis(req, cfg, axis, value);
            let ledger = ResidualLedger::new(&scenario.graph);
            let start = Instant::now();
            let result = propose(&request, scenario, &ledger, &config);
            SweepPoint {
                value,
                request,
                config,
                result,
                elapsed: start.elapsed(),
            }
        })
        .collect()
}
