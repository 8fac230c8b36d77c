//! Deterministic in-process proposer driven by a rule table.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::protocol::{Phase, PlanProposal, Proposer, ProposerError, ProposerReply, ProposerRequest};
use super::{FailureKind, Feedback, ModelSpec};
use crate::coverage::ViolationKind;
use crate::model::CandidateFilter;
use crate::rag::{parse_knowledge_base, Document};
use crate::solvers::{Algorithm, ObjectiveMode, SolverConfig};

/// SA budget of the first plan from the budget-doubling preset.
pub const INITIAL_SA_BUDGET: usize = 8;

/// Text the gated preset looks for in the augmented prompt.
pub const RAG_MARKER: &str = "greedy coverage per cost over weak cells";

const KNOWLEDGE: &str = include_str!("../../data/knowledge.txt");

/// The bundled knowledge base: siting recipes, solver tuning notes and distractors.
pub fn sample_knowledge_base() -> Vec<Document> {
    parse_knowledge_base(KNOWLEDGE, Path::new("knowledge.txt")).expect("bundled knowledge base parses")
}

/// The document that unlocks the gated preset.
pub fn designated_document() -> Document {
    sample_knowledge_base()
        .into_iter()
        .find(|d| d.text.contains(RAG_MARKER))
        .expect("bundled knowledge base holds the designated document")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Always,
    Violation(ViolationKind),
    ProtocolError,
    ExecutionError,
}

impl Trigger {
    fn matches(&self, feedback: &Feedback) -> bool {
        let failure = feedback.error.as_ref().map(|e| e.kind);
        match self {
            Trigger::Always => true,
            Trigger::Violation(kind) => feedback.has(*kind),
            Trigger::ProtocolError => failure == Some(FailureKind::Protocol),
            Trigger::ExecutionError => failure == Some(FailureKind::Execution),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Keep,
    /// Multiplies `max_evaluations`.
    ScaleBudget(f64),
    SetAlgorithm(String),
    SetObjective(ObjectiveMode),
    /// Increments the seed.
    NextSeed,
    Replace(PlanProposal),
}

impl Action {
    fn apply(&self, mut plan: PlanProposal) -> PlanProposal {
        match self {
            Action::Keep => {}
            Action::ScaleBudget(factor) => {
                let current = plan.max_evaluations().unwrap_or(SolverConfig::default().max_evaluations as u64);
                let next = ((current as f64) * factor).round().max(1.0) as u64;
                plan.config.insert("max_evaluations".into(), Value::from(next));
            }
            Action::SetAlgorithm(tag) => plan.algorithm = tag.clone(),
            Action::SetObjective(mode) => {
                plan.config.insert("objective_mode".into(), serde_json::to_value(mode).expect("mode serializes"));
            }
            Action::NextSeed => {
                let seed = plan.config.get("seed").and_then(Value::as_u64).unwrap_or(0);
                plan.config.insert("seed".into(), Value::from(seed.wrapping_add(1)));
            }
            Action::Replace(p) => return p.clone(),
        }
        plan
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionRule {
    pub when: Trigger,
    pub then: Action,
}

/// A proposer whose answers are a pure function of the request.
///
/// Model requests get `model`. Plan requests get `plan`. Revise requests take
/// the plan under revision and apply the first rule whose trigger matches the
/// feedback. When `gate` is set, a plan is only produced if the augmented
/// prompt contains the gate text; otherwise `fallback` is returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedProposer {
    #[serde(default)]
    pub model: ModelSpec,
    pub plan: PlanProposal,
    #[serde(default)]
    pub revisions: Vec<RevisionRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<PlanProposal>,
}

fn no_candidates_plan() -> PlanProposal {
    PlanProposal::from_config(
        &SolverConfig::new(Algorithm::Greedy).with_candidates(CandidateFilter::ExplicitList(Vec::new())),
    )
}

impl ScriptedProposer {
    pub const PRESETS: [&'static str; 5] = ["greedy", "unreachable", "budget-doubling", "rag-gated", "repair"];

    pub fn new(plan: PlanProposal) -> Self {
        ScriptedProposer { model: ModelSpec::default(), plan, revisions: Vec::new(), gate: None, fallback: None }
    }

    /// Always proposes the default greedy plan.
    pub fn greedy() -> Self {
        Self::new(PlanProposal::from_config(&SolverConfig::new(Algorithm::Greedy)))
    }

    /// Proposes a plan with no candidate sites, which fails whenever there is weak traffic.
    pub fn unreachable() -> Self {
        Self::new(no_candidates_plan())
    }

    /// Starts SA with [`INITIAL_SA_BUDGET`] evaluations and doubles the budget after each shortfall.
    pub fn budget_doubling() -> Self {
        let cfg = SolverConfig::new(Algorithm::Sa).with_max_evaluations(INITIAL_SA_BUDGET);
        ScriptedProposer {
            revisions: vec![RevisionRule {
                when: Trigger::Violation(ViolationKind::CoverageShortfall),
                then: Action::ScaleBudget(2.0),
            }],
            ..Self::new(PlanProposal::from_config(&cfg))
        }
    }

    /// Greedy only when the prompt carries [`RAG_MARKER`]; an empty plan otherwise.
    pub fn rag_gated() -> Self {
        ScriptedProposer {
            gate: Some(RAG_MARKER.to_string()),
            fallback: Some(no_candidates_plan()),
            ..Self::greedy()
        }
    }

    /// First names an algorithm the engine lacks, then switches to greedy once told.
    pub fn repair() -> Self {
        let mut plan = PlanProposal::from_config(&SolverConfig::new(Algorithm::Greedy));
        plan.algorithm = "simplex".into();
        ScriptedProposer {
            revisions: vec![RevisionRule { when: Trigger::ExecutionError, then: Action::SetAlgorithm("greedy".into()) }],
            ..Self::new(plan)
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "greedy" => Some(Self::greedy()),
            "unreachable" => Some(Self::unreachable()),
            "budget-doubling" => Some(Self::budget_doubling()),
            "rag-gated" => Some(Self::rag_gated()),
            "repair" => Some(Self::repair()),
            _ => None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rule table serializes")
    }

    fn gate_open(&self, request: &ProposerRequest) -> bool {
        match &self.gate {
            None => true,
            Some(marker) => request.prompt.as_deref().is_some_and(|p| p.contains(marker.as_str())),
        }
    }

    /// The plan answered for `request`, which must be a plan or revise request.
    pub fn plan_for(&self, request: &ProposerRequest) -> PlanProposal {
        if !self.gate_open(request) {
            return self.fallback.clone().unwrap_or_else(no_candidates_plan);
        }
        let base = match &request.plan {
            Some(p) if request.phase == Phase::Revise && Some(p) != self.fallback.as_ref() => p.clone(),
            _ => self.plan.clone(),
        };
        if request.phase != Phase::Revise {
            return base;
        }
        let Some(feedback) = &request.feedback else { return base };
        match self.revisions.iter().find(|r| r.when.matches(feedback)) {
            Some(rule) => rule.then.apply(base),
            None => base,
        }
    }
}

impl Proposer for ScriptedProposer {
    fn propose(&mut self, request: &ProposerRequest) -> Result<ProposerReply, ProposerError> {
        Ok(match request.phase {
            Phase::Model => ProposerReply::Model(self.model.clone()),
            Phase::Plan | Phase::Revise => ProposerReply::Plan(self.plan_for(request)),
            Phase::Test => ProposerReply::Error("scripted proposer does not act as a tester".into()),
        })
    }
}
