//! Batch comparison of solvers and agent strategies over sampled regions.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{
    run_claba, run_laba, AgentOptions, AgentRunResult, ClabaRoles, ConstraintTester, EngineExecutor, RagContext,
    ScriptedProposer,
};
use crate::data_io::{sample_regions, DataError, RegionSpec};
use crate::model::ProblemInstance;
use crate::rag::VectorStore;
use crate::solvers::{solve, Algorithm, ObjectiveMode, SolverConfig};

pub const REPORT_HEADER: &str = "region,method,coverage,cost,feasible,wall_ms,iterations";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Greedy,
    Sa,
    Pso,
    /// PSO with the coverage-first objective.
    PsoCov,
    Laba,
    Claba,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Greedy, Method::Sa, Method::Pso, Method::PsoCov, Method::Laba, Method::Claba];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::Sa => "sa",
            Method::Pso => "pso",
            Method::PsoCov => "pso-cov",
            Method::Laba => "laba",
            Method::Claba => "claba",
        }
    }

    pub fn is_agent(self) -> bool {
        matches!(self, Method::Laba | Method::Claba)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown method `{s}` (expected greedy, sa, pso, pso-cov, laba or claba)"))
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub regions: usize,
    pub region_width: i64,
    pub region_height: i64,
    /// Drives region sampling and every per-region solver seed.
    pub seed: u64,
    pub methods: Vec<Method>,
    pub max_evaluations: usize,
    pub cap: usize,
    pub proposer: ScriptedProposer,
    pub top_k: usize,
    /// Regions solved concurrently.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            regions: 25,
            region_width: 100,
            region_height: 100,
            seed: 0,
            methods: vec![Method::Greedy, Method::Sa, Method::Pso],
            max_evaluations: SolverConfig::default().max_evaluations,
            cap: crate::agent::DEFAULT_CAP,
            proposer: ScriptedProposer::budget_doubling(),
            top_k: 3,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub region: usize,
    pub method: Method,
    pub coverage: f64,
    pub cost: f64,
    pub feasible: bool,
    pub wall_ms: f64,
    /// Agent methods only.
    pub iterations: Option<usize>,
    /// Set when the method failed to produce a deployment.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    pub mean_coverage: f64,
    pub mean_cost: f64,
    pub success_rate: f64,
    pub mean_wall_ms: f64,
    pub mean_iterations: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub regions: Vec<RegionSpec>,
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<AggregateRow>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Per-method means in order of first appearance.
pub fn aggregate(rows: &[ReportRow]) -> Vec<AggregateRow> {
    let mut methods: Vec<Method> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    methods
        .into_iter()
        .map(|m| {
            let of = || rows.iter().filter(move |r| r.method == m);
            AggregateRow {
                method: m,
                mean_coverage: mean(of().map(|r| r.coverage)),
                mean_cost: mean(of().map(|r| r.cost)),
                success_rate: mean(of().map(|r| if r.feasible { 1.0 } else { 0.0 })),
                mean_wall_ms: mean(of().map(|r| r.wall_ms)),
                mean_iterations: m.is_agent().then(|| mean(of().filter_map(|r| r.iterations.map(|i| i as f64)))),
            }
        })
        .collect()
}

impl ExperimentReport {
    pub fn from_rows(regions: Vec<RegionSpec>, rows: Vec<ReportRow>) -> Self {
        let aggregates = aggregate(&rows);
        ExperimentReport { regions, rows, aggregates }
    }

    pub fn aggregate_for(&self, method: Method) -> Option<&AggregateRow> {
        self.aggregates.iter().find(|a| a.method == method)
    }

    /// Copy with all wall times zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        let rows = self.rows.iter().map(|r| ReportRow { wall_ms: 0.0, ..r.clone() }).collect();
        Self::from_rows(self.regions.clone(), rows)
    }

    /// Per-region rows, then one `mean` row per method whose `feasible`
    /// column holds the success rate.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            let iterations = r.iterations.map(|i| i.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.3},{}",
                r.region,
                r.method,
                r.coverage,
                r.cost,
                u8::from(r.feasible),
                r.wall_ms,
                iterations
            );
        }
        for a in &self.aggregates {
            let iterations = a.mean_iterations.map(|i| i.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "mean,{},{},{},{},{:.3},{}",
                a.method, a.mean_coverage, a.mean_cost, a.success_rate, a.mean_wall_ms, iterations
            );
        }
        out
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<8} {:>9} {:>9} {:>8} {:>10} {:>10}\n",
            "method", "coverage", "cost", "success", "wall ms", "iterations"
        );
        for a in &self.aggregates {
            let iterations = a.mean_iterations.map(|i| format!("{i:.2}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<8} {:>9.4} {:>9.2} {:>8.2} {:>10.2} {:>10}",
                a.method.as_str(),
                a.mean_coverage,
                a.mean_cost,
                a.success_rate,
                a.mean_wall_ms,
                iterations
            );
        }
        out
    }
}

/// Seed for region `index`, independent of evaluation order.
pub fn derive_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64 + 1);
    rng.next_u64()
}

fn solver_row(region: usize, method: Method, instance: &ProblemInstance, config: SolverConfig) -> ReportRow {
    match solve(instance, &config) {
        Ok(res) => ReportRow {
            region,
            method,
            coverage: res.report.coverage_ratio,
            cost: res.report.cost,
            feasible: res.report.feasible,
            wall_ms: res.wall_time.as_secs_f64() * 1e3,
            iterations: None,
            error: None,
        },
        Err(e) => failed_row(region, method, e.to_string()),
    }
}

fn failed_row(region: usize, method: Method, error: String) -> ReportRow {
    ReportRow {
        region,
        method,
        coverage: 0.0,
        cost: 0.0,
        feasible: false,
        wall_ms: 0.0,
        iterations: None,
        error: Some(error),
    }
}

fn agent_row(region: usize, method: Method, run: impl FnOnce() -> Result<AgentRunResult, String>) -> ReportRow {
    let start = Instant::now();
    match run() {
        Ok(res) => ReportRow {
            region,
            method,
            coverage: res.report.coverage_ratio,
            cost: res.report.cost,
            feasible: res.success,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            iterations: Some(res.iterations_used),
            error: None,
        },
        Err(e) => failed_row(region, method, e),
    }
}

fn run_region(
    region: usize,
    instance: &ProblemInstance,
    config: &ExperimentConfig,
    store: Option<&VectorStore>,
) -> Vec<ReportRow> {
    let seed = derive_seed(config.seed, region);
    let base = |alg| SolverConfig::new(alg).with_seed(seed).with_max_evaluations(config.max_evaluations);
    let mut options = AgentOptions::with_cap(config.cap);
    if let Some(store) = store {
        options = options.with_rag(RagContext::new(store, config.top_k));
    }
    config
        .methods
        .iter()
        .map(|&method| match method {
            Method::Greedy => solver_row(region, method, instance, base(Algorithm::Greedy)),
            Method::Sa => solver_row(region, method, instance, base(Algorithm::Sa)),
            Method::Pso => solver_row(region, method, instance, base(Algorithm::Pso)),
            Method::PsoCov => solver_row(
                region,
                method,
                instance,
                base(Algorithm::Pso).with_objective(ObjectiveMode::CoverageFirst),
            ),
            Method::Laba => agent_row(region, method, || {
                run_laba(instance, &mut config.proposer.clone(), &options).map_err(|e| e.to_string())
            }),
            Method::Claba => agent_row(region, method, || {
                let (mut modeler, mut planner) = (config.proposer.clone(), config.proposer.clone());
                let roles = ClabaRoles {
                    modeler: &mut modeler,
                    planner: &mut planner,
                    executor: &mut EngineExecutor,
                    tester: &mut ConstraintTester::default(),
                };
                run_claba(instance, roles, &options).map_err(|e| e.to_string())
            }),
        })
        .collect()
}

/// Samples regions from `parent` and runs every method on each.
///
/// Rows are ordered by region then method, whatever the concurrency.
pub fn run_experiment(
    parent: &ProblemInstance,
    config: &ExperimentConfig,
    store: Option<&VectorStore>,
) -> Result<ExperimentReport, DataError> {
    let sampled = sample_regions(parent, config.regions, config.region_width, config.region_height, config.seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .map_err(|e| DataError::Region(format!("cannot start worker pool: {e}")))?;
    let per_region: Vec<Vec<ReportRow>> = pool.install(|| {
        sampled.par_iter().enumerate().map(|(i, (_, inst))| run_region(i, inst, config, store)).collect()
    });
    let regions = sampled.into_iter().map(|(spec, _)| spec).collect();
    Ok(ExperimentReport::from_rows(regions, per_region.into_iter().flatten().collect()))
}
