//! Deployment solvers: greedy coverage-per-cost, simulated annealing and
//! binary particle-swarm optimization.
//!
//! Every solver hard-enforces one station per site and the minimum-distance
//! constraints, so a returned deployment can only fall short on coverage.
//! All three are deterministic for a fixed instance and configuration.

mod greedy;
mod pso;
mod sa;
pub(crate) mod space;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::{check_constraints, EvaluationReport};
use crate::model::{CandidateFilter, Deployment, ModelError, ProblemInstance};

pub use greedy::solve_greedy;
pub use pso::solve_pso;
pub use sa::solve_sa;

/// Cost weight used by the coverage-first objective.
pub const COVERAGE_FIRST_COST_WEIGHT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Greedy,
    Sa,
    Pso,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Greedy => "greedy",
            Algorithm::Sa => "sa",
            Algorithm::Pso => "pso",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "greedy" => Ok(Algorithm::Greedy),
            "sa" => Ok(Algorithm::Sa),
            "pso" => Ok(Algorithm::Pso),
            other => Err(format!("unknown algorithm `{other}` (expected greedy, sa or pso)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// Minimize cost, penalizing coverage shortfall.
    #[default]
    CostFirst,
    /// Maximize covered traffic with a small cost tie-breaker.
    CoverageFirst,
}

impl std::str::FromStr for ObjectiveMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "cost_first" | "cost" => Ok(ObjectiveMode::CostFirst),
            "coverage_first" | "coverage" => Ok(ObjectiveMode::CoverageFirst),
            other => Err(format!("unknown objective mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaParams {
    pub t0: f64,
    pub alpha: f64,
    pub moves_per_temp: usize,
}

impl Default for SaParams {
    fn default() -> Self {
        // t0 = 10 * C_h under the default parameters.
        SaParams { t0: 100.0, alpha: 0.95, moves_per_temp: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoParams {
    pub swarm_size: usize,
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
    pub v_max: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        PsoParams { swarm_size: 40, inertia: 0.72, c1: 1.49, c2: 1.49, v_max: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Evaluation budget shared by all algorithms.
    pub max_evaluations: usize,
    pub objective_mode: ObjectiveMode,
    /// Weight on coverage shortfall and distance violations.
    pub penalty_weight: f64,
    pub candidates: CandidateFilter,
    pub sa: SaParams,
    pub pso: PsoParams,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            algorithm: Algorithm::Greedy,
            seed: 0,
            max_evaluations: 20_000,
            objective_mode: ObjectiveMode::CostFirst,
            penalty_weight: 1000.0,
            candidates: CandidateFilter::WeakCellsOnly,
            sa: SaParams::default(),
            pso: PsoParams::default(),
        }
    }
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        SolverConfig { algorithm, ..Self::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_evaluations(mut self, n: usize) -> Self {
        self.max_evaluations = n;
        self
    }

    pub fn with_objective(mut self, mode: ObjectiveMode) -> Self {
        self.objective_mode = mode;
        self
    }

    pub fn with_candidates(mut self, filter: CandidateFilter) -> Self {
        self.candidates = filter;
        self
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |msg: String| Err(SolveError::InvalidConfig(msg));
        if self.max_evaluations == 0 {
            return bad("max_evaluations must be positive".into());
        }
        if !(self.penalty_weight.is_finite() && self.penalty_weight > 0.0) {
            return bad(format!("penalty_weight must be positive, got {}", self.penalty_weight));
        }
        if !(self.sa.t0.is_finite() && self.sa.t0 > 0.0) {
            return bad(format!("sa.t0 must be positive, got {}", self.sa.t0));
        }
        if !(self.sa.alpha > 0.0 && self.sa.alpha < 1.0) {
            return bad(format!("sa.alpha must lie strictly inside (0, 1), got {}", self.sa.alpha));
        }
        if self.sa.moves_per_temp == 0 {
            return bad("sa.moves_per_temp must be positive".into());
        }
        if self.pso.swarm_size == 0 {
            return bad("pso.swarm_size must be positive".into());
        }
        if !(self.pso.v_max.is_finite() && self.pso.v_max > 0.0) {
            return bad(format!("pso.v_max must be positive, got {}", self.pso.v_max));
        }
        for (name, v) in [("inertia", self.pso.inertia), ("c1", self.pso.c1), ("c2", self.pso.c2)] {
            if !v.is_finite() {
                return bad(format!("pso.{name} must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub best_energy: f64,
    pub coverage_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub deployment: Deployment,
    pub report: EvaluationReport,
    pub evaluations_used: usize,
    pub wall_time: Duration,
    pub trace: Option<Vec<TracePoint>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("no candidate sites although the instance has weak traffic")]
    NoCandidates,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Penalized energy from its parts.
pub(crate) fn energy_from_parts(
    mode: ObjectiveMode,
    penalty: f64,
    theta: f64,
    cost: f64,
    covered: f64,
    total_weak: f64,
    distance_violation: f64,
) -> f64 {
    let distance_term = penalty * distance_violation;
    match mode {
        ObjectiveMode::CostFirst => {
            let ratio = if total_weak > 0.0 { (covered / total_weak).clamp(0.0, 1.0) } else { 1.0 };
            cost + penalty * (theta - ratio).max(0.0) * total_weak + distance_term
        }
        ObjectiveMode::CoverageFirst => -covered + COVERAGE_FIRST_COST_WEIGHT * cost + distance_term,
    }
}

/// Penalized energy of a deployment, computed from scratch.
///
/// Cost-first: `cost + λ·max(0, θ − ratio)·W + λ·Σ distance shortfalls`, where
/// `W` is the total weak traffic. Coverage-first: `−covered + ε·cost + λ·Σ distance shortfalls`.
pub fn energy(
    instance: &ProblemInstance,
    deployment: &Deployment,
    mode: ObjectiveMode,
    penalty_weight: f64,
) -> f64 {
    let report = check_constraints(instance, deployment);
    energy_from_parts(
        mode,
        penalty_weight,
        instance.params().theta_cp,
        report.cost,
        report.covered_traffic,
        report.total_weak_traffic,
        report.distance_violation_total(),
    )
}

/// Runs the algorithm named in `config`.
pub fn solve(instance: &ProblemInstance, config: &SolverConfig) -> Result<SolveResult, SolveError> {
    match config.algorithm {
        Algorithm::Greedy => solve_greedy(instance, config),
        Algorithm::Sa => solve_sa(instance, config),
        Algorithm::Pso => solve_pso(instance, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_roundtrip_and_defaults() {
        let cfg: SolverConfig = serde_json::from_str(r#"{"algorithm":"sa","seed":3}"#).unwrap();
        assert_eq!(cfg.algorithm, Algorithm::Sa);
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.sa, SaParams::default());
        let back: SolverConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<SolverConfig>(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let mut c = SolverConfig::default();
        c.sa.alpha = 1.0;
        assert!(c.validate().is_err());
        let c = SolverConfig::default().with_max_evaluations(0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn energy_penalizes_shortfall() {
        let e = energy_from_parts(ObjectiveMode::CostFirst, 10.0, 0.9, 3.0, 80.0, 100.0, 0.0);
        assert!((e - (3.0 + 10.0 * 0.1 * 100.0)).abs() < 1e-9);
        let e = energy_from_parts(ObjectiveMode::CostFirst, 10.0, 0.9, 3.0, 95.0, 100.0, 0.5);
        assert!((e - 8.0).abs() < 1e-12);
        let e = energy_from_parts(ObjectiveMode::CostFirst, 10.0, 0.9, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(e, 0.0);
    }
}
