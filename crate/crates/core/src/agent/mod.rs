//! Feedback-driven agent loops over a pluggable proposer.
//!
//! [`run_laba`] drives a single proposer through model, plan, execute, check
//! and revise. [`run_claba`] splits the same work across four roles: a
//! modeler and a planner (both proposers), an executor and a tester.
//! Proposals are structured solver plans run by the built-in engine, and
//! success is always re-verified with [`check_constraints`] on the original
//! instance.

mod external;
mod protocol;
mod scripted;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::coverage::{check_constraints, ConstraintViolation, EvaluationReport, ViolationKind};
use crate::model::{CandidateFilter, Deployment, ProblemInstance, RadioParams};
use crate::rag::{augment_prompt_with_budget, RagError, VectorStore, DEFAULT_PROMPT_BUDGET};
use crate::solvers::{solve, ObjectiveMode, SolveError};

pub use external::{ExternalProposer, DEFAULT_TIMEOUT, PROPOSER_ENDPOINT_ENV};
pub use protocol::{
    serve_proposer, Phase, PlanError, PlanProposal, Proposer, ProposerError, ProposerReply, ProposerRequest, Role,
    SolverPlan,
};
pub use scripted::{
    designated_document, sample_knowledge_base, Action, RevisionRule, ScriptedProposer, Trigger, INITIAL_SA_BUDGET,
    RAG_MARKER,
};

pub const DEFAULT_CAP: usize = 10;
/// Executor failures the planner may fix before an iteration is spent.
pub const DEFAULT_INNER_RETRIES: usize = 3;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("iteration cap must be at least 1")]
    ZeroCap,
    #[error("success rate of an empty collection is undefined")]
    NoResults,
    #[error("retrieval failed: {0}")]
    Rag(#[from] RagError),
    #[error("could not write transcript: {0}")]
    Io(#[from] std::io::Error),
}

/// Structured digest of an instance, sent with every request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub width: i64,
    pub height: i64,
    pub weak_cells: usize,
    pub total_weak_traffic: f64,
    pub existing_stations: usize,
    pub params: RadioParams,
    pub candidate_count: usize,
    pub task: String,
}

pub fn summarize_problem(instance: &ProblemInstance) -> ProblemSummary {
    let p = instance.params();
    let candidate_count = instance.candidate_sites(&CandidateFilter::WeakCellsOnly).map_or(0, |c| c.len());
    let task = format!(
        "Place new macro stations (radius {}, cost {}) and micro stations (radius {}, cost {}) on a {}x{} grid \
         so that at least {} of the weak-coverage traffic ({}) is covered, with no two stations closer than {}, \
         at minimum total cost. There are {} weak cells and {} existing stations.",
        p.d_h,
        p.c_h,
        p.d_d,
        p.c_d,
        instance.width(),
        instance.height(),
        p.theta_cp,
        instance.total_weak_traffic(),
        p.d_min,
        instance.weak_cells().count(),
        instance.existing_stations().len(),
    );
    ProblemSummary {
        width: instance.width(),
        height: instance.height(),
        weak_cells: instance.weak_cells().count(),
        total_weak_traffic: instance.total_weak_traffic(),
        existing_stations: instance.existing_stations().len(),
        params: *p,
        candidate_count,
        task,
    }
}

/// Which problem constraints the modeler considers active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintToggles {
    /// Traffic coverage threshold.
    pub c1: bool,
    /// Binary placement decisions.
    pub c2: bool,
    /// At most one station per site.
    pub c3: bool,
    /// Spacing between new stations.
    pub c4: bool,
    /// Spacing between new and existing stations.
    pub c5: bool,
}

impl Default for ConstraintToggles {
    fn default() -> Self {
        ConstraintToggles { c1: true, c2: true, c3: true, c4: true, c5: true }
    }
}

impl ConstraintToggles {
    fn disabled_for(&self, kind: ViolationKind) -> Option<&'static str> {
        match kind {
            ViolationKind::CoverageShortfall if !self.c1 => Some("C1"),
            ViolationKind::DuplicateSite if !self.c3 => Some("C3"),
            ViolationKind::NewNewDistance if !self.c4 => Some("C4"),
            ViolationKind::NewExistingDistance if !self.c5 => Some("C5"),
            _ => None,
        }
    }
}

/// The modeler's formulation of the problem.
///
/// A threshold override changes the target handed to the solver only; the
/// final check always uses the instance's own threshold.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub objective_mode: ObjectiveMode,
    pub constraints: ConstraintToggles,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_cp: Option<f64>,
    pub notes: String,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), String> {
        match self.theta_cp {
            Some(t) if !(t > 0.0 && t <= 1.0) => Err(format!("theta_cp override must lie in (0, 1], got {t}")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The proposer timed out, declined or broke the protocol.
    Protocol,
    /// The plan could not be executed.
    Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackError {
    pub kind: FailureKind,
    pub message: String,
}

/// What went wrong in one iteration, as handed back to the proposer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub violations: Vec<ConstraintViolation>,
    pub coverage_ratio: f64,
    pub cost: f64,
    pub iteration: usize,
    pub hint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<FeedbackError>,
    /// Tester criteria beyond the problem constraints that failed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed_criteria: Vec<String>,
}

impl Feedback {
    pub fn from_report(report: &EvaluationReport, iteration: usize, model: Option<&ModelSpec>) -> Self {
        let mut parts = Vec::new();
        if let Some(v) = report.violations.iter().find(|v| v.kind == ViolationKind::CoverageShortfall) {
            parts.push(format!(
                "coverage {:.4} is {:.4} short of the target; give the solver more evaluations or favor coverage",
                report.coverage_ratio, v.measure
            ));
        }
        for kind in [
            ViolationKind::NewNewDistance,
            ViolationKind::NewExistingDistance,
            ViolationKind::DuplicateSite,
            ViolationKind::OutOfBounds,
        ] {
            let n = report.count(kind);
            if n > 0 {
                parts.push(format!("{n} {kind} violation(s)"));
            }
        }
        if let Some(m) = model {
            for v in &report.violations {
                if let Some(c) = m.constraints.disabled_for(v.kind) {
                    parts.push(format!("{c} was disabled in the model but is still enforced"));
                    break;
                }
            }
        }
        let hint = if parts.is_empty() { "all constraints satisfied".to_string() } else { parts.join("; ") };
        Feedback {
            violations: report.violations.clone(),
            coverage_ratio: report.coverage_ratio,
            cost: report.cost,
            iteration,
            hint,
            error: None,
            failed_criteria: Vec::new(),
        }
    }

    pub fn from_failure(kind: FailureKind, message: String, iteration: usize) -> Self {
        let hint = match kind {
            FailureKind::Protocol => format!("proposer exchange failed: {message}"),
            FailureKind::Execution => format!("plan could not be executed: {message}"),
        };
        Feedback {
            violations: Vec::new(),
            coverage_ratio: 0.0,
            cost: 0.0,
            iteration,
            hint,
            error: Some(FeedbackError { kind, message }),
            failed_criteria: Vec::new(),
        }
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

/// One recorded event of a run, attributed to a role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    /// Loop iteration; 0 for the one-off modeling exchange of the pipeline.
    pub iteration: usize,
    pub role: Role,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Exchange {
        phase: Phase,
        request: Value,
        #[serde(skip_serializing_if = "Option::is_none")]
        reply: Option<Value>,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    Execution {
        plan: PlanProposal,
        #[serde(skip_serializing_if = "Option::is_none")]
        deployment: Option<Deployment>,
        #[serde(skip_serializing_if = "Option::is_none")]
        evaluations_used: Option<usize>,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    Test {
        passed: bool,
        report: EvaluationReport,
        #[serde(skip_serializing_if = "Option::is_none")]
        feedback: Option<Feedback>,
    },
}

impl TranscriptEntry {
    pub fn is_exchange(&self) -> bool {
        matches!(self.event, Event::Exchange { .. })
    }

    pub fn phase(&self) -> Option<Phase> {
        match &self.event {
            Event::Exchange { phase, .. } => Some(*phase),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRunResult {
    pub success: bool,
    pub iterations_used: usize,
    pub deployment: Deployment,
    pub report: EvaluationReport,
    pub transcript: Vec<TranscriptEntry>,
}

impl AgentRunResult {
    /// Writes the transcript as one JSON record per line.
    pub fn write_transcript(&self, mut out: impl Write) -> std::io::Result<()> {
        for entry in &self.transcript {
            serde_json::to_writer(&mut out, entry)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save_transcript(&self, path: &Path) -> std::io::Result<()> {
        let mut buf = Vec::new();
        self.write_transcript(&mut buf)?;
        std::fs::write(path, buf)
    }

    pub fn exchanges(&self, role: Role) -> usize {
        self.transcript.iter().filter(|e| e.role == role && e.is_exchange()).count()
    }
}

/// Fraction of successful runs.
pub fn success_rate(results: &[AgentRunResult]) -> Result<f64, AgentError> {
    if results.is_empty() {
        return Err(AgentError::NoResults);
    }
    Ok(results.iter().filter(|r| r.success).count() as f64 / results.len() as f64)
}

/// Retrieval settings: documents are attached to every proposer request.
#[derive(Clone, Copy)]
pub struct RagContext<'a> {
    pub store: &'a VectorStore,
    pub top_k: usize,
    pub budget: usize,
}

impl<'a> RagContext<'a> {
    pub fn new(store: &'a VectorStore, top_k: usize) -> Self {
        RagContext { store, top_k, budget: DEFAULT_PROMPT_BUDGET }
    }
}

#[derive(Clone, Copy)]
pub struct AgentOptions<'a> {
    pub cap: usize,
    pub rag: Option<RagContext<'a>>,
    pub inner_retries: usize,
}

impl Default for AgentOptions<'_> {
    fn default() -> Self {
        AgentOptions { cap: DEFAULT_CAP, rag: None, inner_retries: DEFAULT_INNER_RETRIES }
    }
}

impl<'a> AgentOptions<'a> {
    pub fn with_cap(cap: usize) -> Self {
        AgentOptions { cap, ..Self::default() }
    }

    pub fn with_rag(mut self, rag: RagContext<'a>) -> Self {
        self.rag = Some(rag);
        self
    }
}

#[derive(Debug, Clone)]
pub struct Execution {
    pub deployment: Deployment,
    pub evaluations_used: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecutionError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("solver failed: {0}")]
    Solver(#[from] SolveError),
}

/// Runs plans (the executor role).
pub trait PlanExecutor: Send {
    fn execute(
        &mut self,
        instance: &ProblemInstance,
        model: &ModelSpec,
        plan: &PlanProposal,
    ) -> Result<Execution, ExecutionError>;
}

/// Executes plans with the built-in solvers.
#[derive(Debug, Clone, Copy, Default)]
pub struct EngineExecutor;

impl PlanExecutor for EngineExecutor {
    fn execute(
        &mut self,
        instance: &ProblemInstance,
        model: &ModelSpec,
        plan: &PlanProposal,
    ) -> Result<Execution, ExecutionError> {
        let plan = plan.resolve()?;
        let result = match model.theta_cp {
            Some(theta) if theta != instance.params().theta_cp => {
                let target = instance
                    .with_params(RadioParams { theta_cp: theta, ..*instance.params() })
                    .map_err(SolveError::from)?;
                solve(&target, &plan.config)?
            }
            _ => solve(instance, &plan.config)?,
        };
        Ok(Execution { deployment: result.deployment, evaluations_used: result.evaluations_used })
    }
}

/// Extra acceptance criteria for the tester role.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestPredicate {
    MinCoverage(f64),
    MaxCost(f64),
}

impl TestPredicate {
    fn check(&self, report: &EvaluationReport) -> Result<(), (String, Option<ConstraintViolation>)> {
        match *self {
            TestPredicate::MinCoverage(min) if report.coverage_ratio < min => Err((
                format!("coverage {:.4} below required {min}", report.coverage_ratio),
                Some(ConstraintViolation {
                    kind: ViolationKind::CoverageShortfall,
                    detail: format!("tester requires coverage of at least {min}"),
                    measure: min - report.coverage_ratio,
                    subjects: Vec::new(),
                }),
            )),
            TestPredicate::MaxCost(max) if report.cost > max => {
                Err((format!("cost {} above allowed {max}", report.cost), None))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome {
    pub passed: bool,
    pub report: EvaluationReport,
    pub feedback: Option<Feedback>,
}

/// Validates deployments (the tester role).
pub trait SolutionTester: Send {
    fn test(&mut self, instance: &ProblemInstance, deployment: &Deployment, iteration: usize) -> TestOutcome;
}

/// Constraint check plus optional user predicates.
#[derive(Debug, Clone, Default)]
pub struct ConstraintTester {
    pub predicates: Vec<TestPredicate>,
    pub model: Option<ModelSpec>,
}

impl ConstraintTester {
    pub fn new(predicates: Vec<TestPredicate>) -> Self {
        ConstraintTester { predicates, model: None }
    }
}

impl SolutionTester for ConstraintTester {
    fn test(&mut self, instance: &ProblemInstance, deployment: &Deployment, iteration: usize) -> TestOutcome {
        let report = check_constraints(instance, deployment);
        let mut feedback = Feedback::from_report(&report, iteration, self.model.as_ref());
        for p in &self.predicates {
            if let Err((msg, violation)) = p.check(&report) {
                feedback.failed_criteria.push(msg.clone());
                if let Some(v) = violation {
                    if !feedback.has(v.kind) {
                        feedback.violations.push(v);
                    }
                }
                if feedback.hint == "all constraints satisfied" {
                    feedback.hint = msg;
                } else {
                    feedback.hint = format!("{}; {msg}", feedback.hint);
                }
            }
        }
        let passed = report.feasible && feedback.failed_criteria.is_empty();
        TestOutcome { passed, report, feedback: (!passed).then_some(feedback) }
    }
}

/// Proposers and components for the four pipeline roles.
pub struct ClabaRoles<'a> {
    pub modeler: &'a mut dyn Proposer,
    pub planner: &'a mut dyn Proposer,
    pub executor: &'a mut dyn PlanExecutor,
    pub tester: &'a mut dyn SolutionTester,
}

struct Session<'a, 'o> {
    summary: ProblemSummary,
    options: &'o AgentOptions<'a>,
    transcript: Vec<TranscriptEntry>,
}

impl Session<'_, '_> {
    fn request(
        &self,
        phase: Phase,
        role: Role,
        model: Option<&ModelSpec>,
        feedback: Option<&Feedback>,
        plan: Option<&PlanProposal>,
    ) -> Result<ProposerRequest, AgentError> {
        let mut req = ProposerRequest::new(phase, role, self.summary.clone());
        req.model = model.cloned();
        req.feedback = feedback.cloned();
        req.plan = plan.cloned();
        if let Some(rag) = &self.options.rag {
            let query = match feedback {
                Some(f) => format!("{}\n{}", self.summary.task, f.hint),
                None => self.summary.task.clone(),
            };
            let hits = rag.store.retrieve(&query, rag.top_k)?;
            req.prompt = Some(augment_prompt_with_budget(&query, &hits, rag.budget));
            req.retrieved = Some(hits.into_iter().map(|h| h.document.text).collect());
        }
        Ok(req)
    }

    /// Sends a request and records the exchange.
    fn exchange(
        &mut self,
        proposer: &mut dyn Proposer,
        iteration: usize,
        request: ProposerRequest,
    ) -> Result<ProposerReply, ProposerError> {
        let outcome = proposer.propose(&request).and_then(|r| match r {
            ProposerReply::Error(e) => Err(ProposerError::Declined(e)),
            ok => Ok(ok),
        });
        let (reply, error) = match &outcome {
            Ok(r) => (Some(r.to_value()), None),
            Err(e) => (None, Some(e.to_string())),
        };
        self.transcript.push(TranscriptEntry {
            iteration,
            role: request.role,
            event: Event::Exchange {
                phase: request.phase,
                request: serde_json::to_value(&request).expect("request serializes"),
                reply,
                error,
            },
        });
        outcome
    }

    fn ask_model(&mut self, p: &mut dyn Proposer, iteration: usize, role: Role) -> Result<ModelSpec, Feedback> {
        let req = self.request(Phase::Model, role, None, None, None).map_err(|e| rag_failure(e, iteration))?;
        match self.exchange(p, iteration, req) {
            Ok(ProposerReply::Model(m)) => Ok(m),
            Ok(_) => Err(Feedback::from_failure(
                FailureKind::Protocol,
                "expected a `model` reply".into(),
                iteration,
            )),
            Err(e) => Err(Feedback::from_failure(FailureKind::Protocol, e.to_string(), iteration)),
        }
    }

    fn ask_plan(
        &mut self,
        p: &mut dyn Proposer,
        iteration: usize,
        role: Role,
        model: &ModelSpec,
        feedback: Option<&Feedback>,
        previous: Option<&PlanProposal>,
    ) -> Result<PlanProposal, Feedback> {
        let phase = if feedback.is_some() { Phase::Revise } else { Phase::Plan };
        let req =
            self.request(phase, role, Some(model), feedback, previous).map_err(|e| rag_failure(e, iteration))?;
        match self.exchange(p, iteration, req) {
            Ok(ProposerReply::Plan(plan)) => Ok(plan),
            Ok(_) => {
                Err(Feedback::from_failure(FailureKind::Protocol, "expected a `plan` reply".into(), iteration))
            }
            Err(e) => Err(Feedback::from_failure(FailureKind::Protocol, e.to_string(), iteration)),
        }
    }

    fn execute(
        &mut self,
        executor: &mut dyn PlanExecutor,
        instance: &ProblemInstance,
        model: &ModelSpec,
        plan: &PlanProposal,
        iteration: usize,
        role: Role,
    ) -> Result<Deployment, Feedback> {
        let outcome = executor.execute(instance, model, plan);
        let (deployment, evaluations_used, error) = match &outcome {
            Ok(x) => (Some(x.deployment.clone()), Some(x.evaluations_used), None),
            Err(e) => (None, None, Some(e.to_string())),
        };
        self.transcript.push(TranscriptEntry {
            iteration,
            role,
            event: Event::Execution { plan: plan.clone(), deployment, evaluations_used, error },
        });
        outcome
            .map(|x| x.deployment)
            .map_err(|e| Feedback::from_failure(FailureKind::Execution, e.to_string(), iteration))
    }

    fn record_test(&mut self, iteration: usize, role: Role, outcome: &TestOutcome) {
        self.transcript.push(TranscriptEntry {
            iteration,
            role,
            event: Event::Test {
                passed: outcome.passed,
                report: outcome.report.clone(),
                feedback: outcome.feedback.clone(),
            },
        });
    }
}

fn rag_failure(e: AgentError, iteration: usize) -> Feedback {
    Feedback::from_failure(FailureKind::Protocol, e.to_string(), iteration)
}

fn finish(
    instance: &ProblemInstance,
    success: bool,
    iterations_used: usize,
    deployment: Deployment,
    transcript: Vec<TranscriptEntry>,
) -> AgentRunResult {
    let report = check_constraints(instance, &deployment);
    let success = success && report.feasible;
    AgentRunResult { success, iterations_used, deployment, report, transcript }
}

/// The single-agent loop.
///
/// Each iteration obtains a model (until one is accepted), then a plan or a
/// revised plan, runs it and checks the result. Failed exchanges and failed
/// executions consume the iteration and are fed back as [`Feedback`].
pub fn run_laba(
    instance: &ProblemInstance,
    proposer: &mut dyn Proposer,
    options: &AgentOptions<'_>,
) -> Result<AgentRunResult, AgentError> {
    if options.cap == 0 {
        return Err(AgentError::ZeroCap);
    }
    let mut s = Session { summary: summarize_problem(instance), options, transcript: Vec::new() };
    let mut tester = ConstraintTester::default();
    let mut executor = EngineExecutor;
    let mut model: Option<ModelSpec> = None;
    let mut feedback: Option<Feedback> = None;
    let mut plan: Option<PlanProposal> = None;
    let mut deployment = Deployment::empty();

    for iteration in 1..=options.cap {
        let m = match &model {
            Some(m) => m.clone(),
            None => match s.ask_model(proposer, iteration, Role::Solo) {
                Ok(m) => {
                    tester.model = Some(m.clone());
                    model = Some(m.clone());
                    m
                }
                Err(f) => {
                    feedback = Some(f);
                    continue;
                }
            },
        };
        let proposal = match s.ask_plan(proposer, iteration, Role::Solo, &m, feedback.as_ref(), plan.as_ref()) {
            Ok(p) => p,
            Err(f) => {
                feedback = Some(f);
                continue;
            }
        };
        plan = Some(proposal.clone());
        match s.execute(&mut executor, instance, &m, &proposal, iteration, Role::Solo) {
            Ok(d) => deployment = d,
            Err(f) => {
                feedback = Some(f);
                continue;
            }
        }
        let outcome = tester.test(instance, &deployment, iteration);
        s.record_test(iteration, Role::Solo, &outcome);
        if outcome.passed {
            return Ok(finish(instance, true, iteration, deployment, s.transcript));
        }
        feedback = outcome.feedback;
    }
    Ok(finish(instance, false, options.cap, deployment, s.transcript))
}

/// The four-role pipeline.
///
/// The modeler is asked once; if it fails the run ends. The planner then
/// proposes and revises plans. Execution errors go straight back to the
/// planner for up to `options.inner_retries` fixes without consuming an
/// iteration. The tester's verdict ends the iteration.
pub fn run_claba(
    instance: &ProblemInstance,
    roles: ClabaRoles<'_>,
    options: &AgentOptions<'_>,
) -> Result<AgentRunResult, AgentError> {
    if options.cap == 0 {
        return Err(AgentError::ZeroCap);
    }
    let ClabaRoles { modeler, planner, executor, tester } = roles;
    let mut s = Session { summary: summarize_problem(instance), options, transcript: Vec::new() };
    let model = match s.ask_model(modeler, 0, Role::Agent1) {
        Ok(m) => m,
        Err(_) => return Ok(finish(instance, false, 1, Deployment::empty(), s.transcript)),
    };
    let mut feedback: Option<Feedback> = None;
    let mut plan: Option<PlanProposal> = None;
    let mut deployment = Deployment::empty();

    'outer: for iteration in 1..=options.cap {
        let mut retries = 0;
        let executed = loop {
            let proposal =
                match s.ask_plan(planner, iteration, Role::Agent2, &model, feedback.as_ref(), plan.as_ref()) {
                    Ok(p) => p,
                    Err(f) => {
                        feedback = Some(f);
                        continue 'outer;
                    }
                };
            plan = Some(proposal.clone());
            match s.execute(executor, instance, &model, &proposal, iteration, Role::Agent3) {
                Ok(d) => break d,
                Err(f) => {
                    feedback = Some(f);
                    if retries >= options.inner_retries {
                        continue 'outer;
                    }
                    retries += 1;
                }
            }
        };
        deployment = executed;
        let outcome = tester.test(instance, &deployment, iteration);
        s.record_test(iteration, Role::Agent4, &outcome);
        // A custom tester's verdict is not trusted on its own.
        let verified = check_constraints(instance, &deployment);
        if outcome.passed && verified.feasible {
            return Ok(finish(instance, true, iteration, deployment, s.transcript));
        }
        feedback = Some(match outcome.feedback {
            Some(f) if !outcome.passed => f,
            _ => Feedback::from_report(&verified, iteration, Some(&model)),
        });
    }
    Ok(finish(instance, false, options.cap, deployment, s.transcript))
}
