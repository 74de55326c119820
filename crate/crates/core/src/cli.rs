//! Command-line front end.
//!
//! Results are written as CSV, one [`ResultRow`] per planned point, to `--out` or stdout.
//! Human-readable summaries and logs go to stderr; set `RUST_LOG` to control verbosity.
//!
//! Exit codes: 0 when every plan is accepted, 2 when some plan is rejected (`plan`, `oracle`),
//! 1 on input errors or failed validation.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};

use crate::decision_graph::{build_decision_graph, ResidualLedger};
use crate::model::{
    evaluate_deployment, load_scenario, parse_scenario, Deployment, PlannerConfig, Scenario,
    ScenarioError, ServiceRequest, Vertex,
};
use crate::oracle::{optimal, OracleLimits};
use crate::planner::{self, apply_axis, decompose, propose, Axis, PlanOutcome, PlanResult};
use crate::synth::{random_scenario, SynthOptions};

const ROBOTS: &str = include_str!("../scenarios/robots.toml");
const VEHICULAR: &str = include_str!("../scenarios/vehicular.toml");

/// Text of a scenario bundled with the binary.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "robots" => Some(ROBOTS),
        "vehicular" => Some(VEHICULAR),
        _ => None,
    }
}

/// Loads a scenario from a path, falling back to the bundled scenario of that name.
pub fn resolve_scenario(arg: &str) -> Result<Scenario, ScenarioError> {
    if Path::new(arg).exists() {
        return load_scenario(arg);
    }
    match bundled(arg) {
        Some(text) => parse_scenario(text),
        None => load_scenario(arg),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "slice-planner",
    version,
    about = "Multi-KPI network slice placement"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan every service of a scenario (or one with --service) on a shared ledger.
    Plan(PlanArgs),
    /// Re-plan one service over a range of values of one parameter.
    Sweep(SweepArgs),
    /// Exhaustive optimum for a small single-endpoint chain.
    Oracle(CommonArgs),
    /// Plan one service at several resolutions.
    Compare(CompareArgs),
    /// Check scenario files, or random scenarios, against the KPI checker.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Scenario file, or the name of a bundled scenario (robots, vehicular).
    pub scenario: String,
    /// Service to plan; defaults to all services (plan) or the first one.
    #[arg(long)]
    pub service: Option<String>,
    /// Quantization resolution; overrides the scenario's value.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub gamma: Option<u32>,
    /// Output CSV file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Add a wall-clock column (makes output vary between runs).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Write the decision graph of the first chain as Graphviz DOT.
    #[arg(long)]
    pub dump_decision_graph: Option<PathBuf>,
    /// Print expanded-graph statistics to stderr.
    #[arg(long)]
    pub debug_expanded: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub axis: Axis,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    /// Add the exhaustive optimum as a column.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated resolutions.
    #[arg(long, value_delimiter = ',', required = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub gamma_list: Vec<u32>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Scenario files or bundled names to load and plan.
    pub scenarios: Vec<String>,
    /// Number of random scenarios to generate.
    #[arg(long, default_value_t = 0)]
    pub random: u64,
    /// Seed of the first random scenario.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

/// One output line: a planned point with its outcome, costs and selected resources.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub service: String,
    pub axis: String,
    pub value: String,
    pub gamma: u32,
    pub outcome: String,
    pub reason: String,
    pub cost: CostColumns,
    /// Worst end-to-end delay over the endpoints (ms).
    pub delay_ms: Option<f64>,
    /// Lowest reliability over endpoints and lifetime steps.
    pub reliability: Option<f64>,
    /// `endpoint:delay:reliability` per endpoint, `;`-separated.
    pub endpoint_kpis: String,
    /// Points of access used as first hop, as `node:count`.
    pub poas: String,
    /// Tiers hosting VNF instances, as `tier:count`.
    pub tiers: String,
    pub oracle_cost: Option<f64>,
    pub wall: Option<Duration>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CostColumns {
    pub total: Option<f64>,
    pub instantiation: Option<f64>,
    pub resource: Option<f64>,
    pub transport: Option<f64>,
}

fn counts(items: impl Iterator<Item = String>) -> String {
    let mut m: BTreeMap<String, usize> = BTreeMap::new();
    for i in items {
        *m.entry(i).or_default() += 1;
    }
    m.iter()
        .map(|(k, v)| format!("{k}:{v}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// First-hop nodes, one per endpoint.
pub fn selected_poas(dep: &Deployment, scenario: &Scenario) -> String {
    let g = &scenario.graph;
    counts(dep.endpoints.iter().filter_map(|p| {
        let first = p.stages.first()?.route.first()?;
        match g.links[g.link_idx(first)?].to {
            Vertex::Node(n) => Some(g.nodes[n].id.to_string()),
            Vertex::Location(_) => None,
        }
    }))
}

/// Tier (or node id when untiered) of every stage.
pub fn selected_tiers(dep: &Deployment, scenario: &Scenario) -> String {
    let g = &scenario.graph;
    counts(dep.endpoints.iter().flat_map(|p| p.stages.iter()).map(|s| {
        let node = &g.nodes[g.node_idx(&s.node).expect("known node")];
        node.tier.clone().unwrap_or_else(|| node.id.to_string())
    }))
}

impl ResultRow {
    pub fn new(
        scenario: &Scenario,
        req: &ServiceRequest,
        ledger: &ResidualLedger,
        axis: &str,
        value: String,
        gamma: u32,
        outcome: &PlanOutcome,
    ) -> Self {
        let mut row = ResultRow {
            scenario: scenario.name.clone(),
            service: req.id.clone(),
            axis: axis.to_owned(),
            value,
            gamma,
            outcome: if outcome.is_accepted() {
                "accepted"
            } else {
                "rejected"
            }
            .into(),
            reason: outcome
                .rejection()
                .map(|r| r.reason.to_string())
                .unwrap_or_default(),
            cost: CostColumns::default(),
            delay_ms: None,
            reliability: None,
            endpoint_kpis: String::new(),
            poas: String::new(),
            tiers: String::new(),
            oracle_cost: None,
            wall: None,
        };
        if let Some(dep) = outcome.deployment() {
            let kpi = evaluate_deployment(dep, req, scenario, ledger);
            row.cost = CostColumns {
                total: Some(dep.cost.total()),
                instantiation: Some(dep.cost.instantiation),
                resource: Some(dep.cost.resource),
                transport: Some(dep.cost.transport),
            };
            row.delay_ms = kpi.endpoints.iter().map(|e| e.delay).reduce(f64::max);
            row.reliability = kpi
                .endpoints
                .iter()
                .map(|e| e.min_reliability())
                .reduce(f64::min);
            row.endpoint_kpis = kpi
                .endpoints
                .iter()
                .map(|e| format!("{}:{}:{}", e.endpoint, e.delay, e.min_reliability()))
                .collect::<Vec<_>>()
                .join(";");
            row.poas = selected_poas(dep, scenario);
            row.tiers = selected_tiers(dep, scenario);
        }
        row
    }

    pub fn header(oracle: bool, timing: bool) -> Vec<&'static str> {
        let mut h = vec![
            "scenario",
            "service",
            "axis",
            "value",
            "gamma",
            "outcome",
            "reason",
            "cost_total",
            "cost_instantiation",
            "cost_resource",
            "cost_transport",
            "delay_ms",
            "reliability",
            "endpoint_kpis",
            "poas",
            "tiers",
        ];
        if oracle {
            h.push("oracle_cost");
        }
        if timing {
            h.push("wall_ms");
        }
        h
    }

    pub fn record(&self, oracle: bool, timing: bool) -> Vec<String> {
        let num = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut r = vec![
            self.scenario.clone(),
            self.service.clone(),
            self.axis.clone(),
            self.value.clone(),
            self.gamma.to_string(),
            self.outcome.clone(),
            self.reason.clone(),
            num(self.cost.total),
            num(self.cost.instantiation),
            num(self.cost.resource),
            num(self.cost.transport),
            num(self.delay_ms),
            num(self.reliability),
            self.endpoint_kpis.clone(),
            self.poas.clone(),
            self.tiers.clone(),
        ];
        if oracle {
            r.push(num(self.oracle_cost));
        }
        if timing {
            r.push(
                self.wall
                    .map(|d| format!("{:.3}", d.as_secs_f64() * 1e3))
                    .unwrap_or_default(),
            );
        }
        r
    }
}

/// Writes rows as CSV with the documented header.
pub fn write_csv(
    out: impl Write,
    rows: &[ResultRow],
    oracle: bool,
    timing: bool,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ResultRow::header(oracle, timing))?;
    for row in rows {
        w.write_record(row.record(oracle, timing))?;
    }
    w.flush()?;
    Ok(())
}

fn emit(common: &CommonArgs, rows: &[ResultRow], oracle: bool) -> Result<(), String> {
    let result = match &common.out {
        Some(path) => {
            let file = fs::File::create(path)
                .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            write_csv(io::BufWriter::new(file), rows, oracle, common.timing)
        }
        None => write_csv(io::stdout().lock(), rows, oracle, common.timing),
    };
    result.map_err(|e| format!("cannot write results: {e}"))
}

fn config(scenario: &Scenario, common: &CommonArgs) -> PlannerConfig {
    let mut cfg = scenario.config.clone();
    if let Some(g) = common.gamma {
        cfg.gamma = g;
    }
    cfg
}

fn pick_service<'a>(
    scenario: &'a Scenario,
    name: Option<&str>,
) -> Result<&'a ServiceRequest, String> {
    match name {
        Some(id) => scenario
            .service(id)
            .ok_or_else(|| format!("no service {id:?} in {}", scenario.name)),
        None => scenario
            .services
            .first()
            .ok_or_else(|| format!("{} has no services", scenario.name)),
    }
}

fn summarize(req: &ServiceRequest, result: &PlanResult, currency: &str) {
    match &result.outcome {
        PlanOutcome::Accepted(dep) => {
            eprintln!(
                "{}: accepted, cost {:.6} {currency}",
                req.id,
                dep.cost.total()
            );
            for p in &dep.endpoints {
                let hosts: Vec<String> = p
                    .stages
                    .iter()
                    .map(|s| format!("{}@{}", s.vnf, s.node))
                    .collect();
                eprintln!("  {}: {}", p.endpoint, hosts.join(" -> "));
            }
        }
        PlanOutcome::Rejected(r) => eprintln!(
            "{}: rejected ({}, gamma {}): {}",
            req.id, r.reason, r.gamma, r.detail
        ),
    }
}

fn cmd_plan(args: &PlanArgs) -> Result<ExitCode, String> {
    let scenario = resolve_scenario(&args.common.scenario).map_err(|e| e.to_string())?;
    let cfg = config(&scenario, &args.common);
    let services: Vec<&ServiceRequest> = match &args.common.service {
        Some(_) => vec![pick_service(&scenario, args.common.service.as_deref())?],
        None => scenario.services.iter().collect(),
    };
    if let Some(path) = &args.dump_decision_graph {
        let req = pick_service(&scenario, args.common.service.as_deref())?;
        let chain = decompose(&req.graph)
            .into_iter()
            .next()
            .ok_or("service has no VNF")?;
        let dg = build_decision_graph(
            &scenario.graph,
            &ResidualLedger::new(&scenario.graph),
            req,
            chain.vnfs.len(),
            cfg.k_paths,
        );
        fs::write(path, dg.to_dot(&scenario.graph, req))
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    let mut ledger = ResidualLedger::new(&scenario.graph);
    let mut rows = Vec::new();
    let mut all_accepted = true;
    for req in services {
        let before = ledger.clone();
        let start = Instant::now();
        let result = planner::plan(req, &scenario, &mut ledger, &cfg);
        let wall = start.elapsed();
        summarize(req, &result, &scenario.currency);
        if args.debug_expanded {
            eprintln!("  stats: {:?}", result.stats);
        }
        all_accepted &= result.outcome.is_accepted();
        let mut row = ResultRow::new(
            &scenario,
            req,
            &before,
            "",
            String::new(),
            cfg.gamma,
            &result.outcome,
        );
        row.wall = Some(wall);
        rows.push(row);
    }
    emit(&args.common, &rows, false)?;
    Ok(if all_accepted {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode, String> {
    let scenario = resolve_scenario(&args.common.scenario).map_err(|e| e.to_string())?;
    let cfg = config(&scenario, &args.common);
    let req = pick_service(&scenario, args.common.service.as_deref())?;
    if args.axis == Axis::Gamma && args.values.iter().any(|v| *v < 1.0 || v.fract() != 0.0) {
        return Err("gamma values must be positive integers".into());
    }
    let ledger = ResidualLedger::new(&scenario.graph);
    let mut rows = Vec::new();
    for point in planner::sweep(&scenario, req, args.axis, &args.values, &cfg) {
        let mut row = ResultRow::new(
            &scenario,
            &point.request,
            &ledger,
            args.axis.as_str(),
            point.value.to_string(),
            point.config.gamma,
            &point.result.outcome,
        );
        row.wall = Some(point.elapsed);
        if args.oracle {
            let o = optimal(
                &point.request,
                &scenario,
                &ledger,
                &point.config,
                &OracleLimits::default(),
            )
            .map_err(|e| e.to_string())?;
            row.oracle_cost = o.cost();
        }
        rows.push(row);
    }
    emit(&args.common, &rows, args.oracle)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(args: &CommonArgs) -> Result<ExitCode, String> {
    let scenario = resolve_scenario(&args.scenario).map_err(|e| e.to_string())?;
    let cfg = config(&scenario, args);
    let req = pick_service(&scenario, args.service.as_deref())?;
    let ledger = ResidualLedger::new(&scenario.graph);
    let start = Instant::now();
    let outcome = optimal(req, &scenario, &ledger, &cfg, &OracleLimits::default())
        .map_err(|e| e.to_string())?;
    let wall = start.elapsed();
    summarize(
        req,
        &PlanResult {
            outcome: outcome.clone(),
            stats: Default::default(),
        },
        &scenario.currency,
    );
    let mut row = ResultRow::new(
        &scenario,
        req,
        &ledger,
        "",
        String::new(),
        cfg.gamma,
        &outcome,
    );
    row.wall = Some(wall);
    emit(args, &[row], false)?;
    Ok(if outcome.is_accepted() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_compare(args: &CompareArgs) -> Result<ExitCode, String> {
    let scenario = resolve_scenario(&args.common.scenario).map_err(|e| e.to_string())?;
    let cfg = config(&scenario, &args.common);
    let req = pick_service(&scenario, args.common.service.as_deref())?;
    let ledger = ResidualLedger::new(&scenario.graph);
    let mut rows = Vec::new();
    for &gamma in &args.gamma_list {
        let (req, cfg) = apply_axis(req, &cfg, Axis::Gamma, gamma as f64);
        let start = Instant::now();
        let result = propose(&req, &scenario, &ledger, &cfg);
        let wall = start.elapsed();
        let mut row = ResultRow::new(
            &scenario,
            &req,
            &ledger,
            "gamma",
            gamma.to_string(),
            gamma,
            &result.outcome,
        );
        row.wall = Some(wall);
        rows.push(row);
    }
    emit(&args.common, &rows, false)?;
    Ok(ExitCode::SUCCESS)
}

/// Plans every service of `scenario` in order and checks each accepted deployment.
/// Returns (accepted, rejected, violation messages).
pub fn validate_scenario(scenario: &Scenario) -> (usize, usize, Vec<String>) {
    let mut ledger = ResidualLedger::new(&scenario.graph);
    let (mut accepted, mut rejected, mut violations) = (0, 0, Vec::new());
    for req in &scenario.services {
        let before = ledger.clone();
        let result = planner::plan(req, scenario, &mut ledger, &scenario.config);
        match result.outcome.deployment() {
            Some(dep) => {
                accepted += 1;
                let report = evaluate_deployment(dep, req, scenario, &before);
                violations.extend(
                    report
                        .violations
                        .into_iter()
                        .map(|v| format!("{}/{}: {v}", scenario.name, req.id)),
                );
            }
            None => rejected += 1,
        }
    }
    (accepted, rejected, violations)
}

fn cmd_validate(args: &ValidateArgs) -> Result<ExitCode, String> {
    if args.scenarios.is_empty() && args.random == 0 {
        return Err("nothing to validate: give scenario files or --random N".into());
    }
    let (mut accepted, mut rejected, mut violations) = (0, 0, Vec::new());
    let mut tally = |s: &Scenario| {
        let (a, r, v) = validate_scenario(s);
        accepted += a;
        rejected += r;
        violations.extend(v);
    };
    for name in &args.scenarios {
        let scenario = resolve_scenario(name).map_err(|e| format!("{name}: {e}"))?;
        tally(&scenario);
    }
    for seed in args.seed..args.seed + args.random {
        tally(&random_scenario(seed, &SynthOptions::default()));
    }
    for v in &violations {
        eprintln!("violation: {v}");
    }
    eprintln!(
        "{accepted} accepted, {rejected} rejected, {} violations",
        violations.len()
    );
    Ok(if violations.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

pub fn run(cli: Cli) -> ExitCode {
    let result = match &cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
