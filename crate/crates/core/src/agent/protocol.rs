//! Line-delimited JSON messages exchanged with a proposer.

use std::io::{BufRead, Write};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::{Feedback, ModelSpec, ProblemSummary};
use crate::model::CandidateFilter;
use crate::solvers::{Algorithm, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Model,
    Plan,
    Revise,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Agent1,
    Agent2,
    Agent3,
    Agent4,
    Solo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposerRequest {
    pub phase: Phase,
    pub role: Role,
    pub summary: ProblemSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<Feedback>,
    /// Texts of the retrieved knowledge documents, best first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieved: Option<Vec<String>>,
    /// The augmented prompt built from the retrieved documents.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    /// The plan being revised.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanProposal>,
}

impl ProposerRequest {
    pub fn new(phase: Phase, role: Role, summary: ProblemSummary) -> Self {
        ProposerRequest { phase, role, summary, model: None, feedback: None, retrieved: None, prompt: None, plan: None }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }
}

/// A solver plan as sent over the wire; [`PlanProposal::resolve`] validates it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanProposal {
    pub algorithm: String,
    pub config: Map<String, Value>,
    pub candidate_filter: String,
}

const CONFIG_KEYS: [&str; 6] = ["seed", "max_evaluations", "objective_mode", "penalty_weight", "sa", "pso"];
const SA_KEYS: [&str; 3] = ["t0", "alpha", "moves_per_temp"];
const PSO_KEYS: [&str; 5] = ["swarm_size", "inertia", "c1", "c2", "v_max"];

fn retain_keys(map: &Map<String, Value>, keys: &[&str]) -> Map<String, Value> {
    map.iter().filter(|(k, _)| keys.contains(&k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect()
}

/// A validated plan ready for execution.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverPlan {
    pub algorithm: Algorithm,
    pub config: SolverConfig,
    pub candidate_filter: CandidateFilter,
}

impl PlanProposal {
    pub fn from_config(config: &SolverConfig) -> Self {
        let Value::Object(mut map) = serde_json::to_value(config).expect("config serializes") else {
            unreachable!("solver config serializes to an object")
        };
        map.remove("algorithm");
        map.remove("candidates");
        PlanProposal {
            algorithm: config.algorithm.as_str().to_string(),
            config: map,
            candidate_filter: config.candidates.to_wire(),
        }
    }

    pub fn max_evaluations(&self) -> Option<u64> {
        self.config.get("max_evaluations").and_then(Value::as_u64)
    }

    /// Checks the tag, filter and configuration. Unknown config keys are ignored.
    pub fn resolve(&self) -> Result<SolverPlan, PlanError> {
        let algorithm: Algorithm =
            self.algorithm.parse().map_err(|_| PlanError::UnknownAlgorithm(self.algorithm.clone()))?;
        let candidate_filter = CandidateFilter::parse_wire(&self.candidate_filter).map_err(PlanError::Invalid)?;
        let mut clean = retain_keys(&self.config, &CONFIG_KEYS);
        for (key, keys) in [("sa", &SA_KEYS[..]), ("pso", &PSO_KEYS[..])] {
            if let Some(Value::Object(inner)) = clean.get(key) {
                let inner = retain_keys(inner, keys);
                clean.insert(key.to_string(), Value::Object(inner));
            }
        }
        let mut config: SolverConfig =
            serde_json::from_value(Value::Object(clean)).map_err(|e| PlanError::Invalid(e.to_string()))?;
        config.algorithm = algorithm;
        config.candidates = candidate_filter.clone();
        config.validate().map_err(|e| PlanError::Invalid(e.to_string()))?;
        Ok(SolverPlan { algorithm, config, candidate_filter })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("unknown algorithm tag `{0}`")]
    UnknownAlgorithm(String),
    #[error("invalid plan: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProposerReply {
    Model(ModelSpec),
    Plan(PlanProposal),
    /// The proposer declined; counts as an unproductive exchange.
    Error(String),
}

impl ProposerReply {
    pub fn to_value(&self) -> Value {
        match self {
            ProposerReply::Model(m) => serde_json::json!({ "model": m }),
            ProposerReply::Plan(p) => serde_json::json!({ "plan": p }),
            ProposerReply::Error(e) => serde_json::json!({ "error": e }),
        }
    }

    pub fn to_json(&self) -> String {
        self.to_value().to_string()
    }

    /// Parses one reply line. Unknown fields are ignored.
    pub fn parse(line: &str) -> Result<Self, ProposerError> {
        let value: Value =
            serde_json::from_str(line).map_err(|e| ProposerError::Protocol(format!("reply is not JSON: {e}")))?;
        let Value::Object(obj) = value else {
            return Err(ProposerError::Protocol("reply must be a JSON object".into()));
        };
        let field = |name: &str, v: &Value| -> Result<ProposerReply, ProposerError> {
            let bad = |e: serde_json::Error| ProposerError::Protocol(format!("malformed `{name}`: {e}"));
            match name {
                "error" => match v {
                    Value::String(s) => Ok(ProposerReply::Error(s.clone())),
                    _ => Err(ProposerError::Protocol("`error` must be a string".into())),
                },
                "model" => {
                    let m: ModelSpec = serde_json::from_value(v.clone()).map_err(bad)?;
                    m.validate().map_err(|e| ProposerError::Protocol(format!("malformed `model`: {e}")))?;
                    Ok(ProposerReply::Model(m))
                }
                _ => Ok(ProposerReply::Plan(serde_json::from_value(v.clone()).map_err(bad)?)),
            }
        };
        for name in ["error", "model", "plan"] {
            if let Some(v) = obj.get(name) {
                return field(name, v);
            }
        }
        Err(ProposerError::Protocol("reply has none of `model`, `plan` or `error`".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProposerError {
    #[error("proposer did not answer within {0:?}")]
    Timeout(Duration),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("proposer declined: {0}")]
    Declined(String),
}

/// A backend that turns requests into model specs and plans.
///
/// Bindings used by concurrent runs must be separate instances.
pub trait Proposer: Send {
    fn propose(&mut self, request: &ProposerRequest) -> Result<ProposerReply, ProposerError>;
}

impl<P: Proposer + ?Sized> Proposer for Box<P> {
    fn propose(&mut self, request: &ProposerRequest) -> Result<ProposerReply, ProposerError> {
        (**self).propose(request)
    }
}

/// Answers line-delimited requests from `input` until it closes.
///
/// Malformed requests get an `{"error": ...}` line so the caller never stalls.
pub fn serve_proposer<P: Proposer + ?Sized>(
    proposer: &mut P,
    input: impl BufRead,
    mut output: impl Write,
) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<ProposerRequest>(&line) {
            Ok(request) => match proposer.propose(&request) {
                Ok(reply) => reply,
                Err(e) => ProposerReply::Error(e.to_string()),
            },
            Err(e) => ProposerReply::Error(format!("malformed request: {e}")),
        };
        writeln!(output, "{}", reply.to_json())?;
        output.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::ObjectiveMode;

    #[test]
    fn reply_parsing() {
        let r = ProposerReply::parse(r#"{"model":{"objective_mode":"coverage_first","extra":1},"note":"x"}"#).unwrap();
        let ProposerReply::Model(m) = r else { panic!("expected model") };
        assert_eq!(m.objective_mode, ObjectiveMode::CoverageFirst);
        assert!(m.constraints.c4);

        let plan = r#"{"plan":{"algorithm":"sa","config":{"seed":3,"max_evaluations":50,"bogus":true},"candidate_filter":"all_cells"}}"#;
        let ProposerReply::Plan(p) = ProposerReply::parse(plan).unwrap() else { panic!("expected plan") };
        let resolved = p.resolve().unwrap();
        assert_eq!(resolved.algorithm, Algorithm::Sa);
        assert_eq!(resolved.config.max_evaluations, 50);
        assert_eq!(resolved.config.seed, 3);
        assert_eq!(resolved.candidate_filter, CandidateFilter::AllCells);

        assert_eq!(ProposerReply::parse(r#"{"error":"busy"}"#).unwrap(), ProposerReply::Error("busy".into()));
        for bad in [
            "not json",
            "[1]",
            "{}",
            r#"{"plan":{"algorithm":"sa","config":{}}}"#,
            r#"{"plan":{"config":{},"candidate_filter":"all_cells"}}"#,
            r#"{"model":{"theta_cp":1.5}}"#,
        ] {
            assert!(matches!(ProposerReply::parse(bad), Err(ProposerError::Protocol(_))), "{bad}");
        }
    }

    #[test]
    fn plan_resolution_errors() {
        let mut p = PlanProposal::from_config(&SolverConfig::default());
        assert_eq!(p.resolve().unwrap().config, SolverConfig::default());
        p.algorithm = "simplex".into();
        assert_eq!(p.resolve().unwrap_err(), PlanError::UnknownAlgorithm("simplex".into()));
        let mut p = PlanProposal::from_config(&SolverConfig::default());
        p.config.insert("max_evaluations".into(), Value::from(0));
        assert!(matches!(p.resolve(), Err(PlanError::Invalid(_))));
        p.config.insert("max_evaluations".into(), Value::from(10));
        p.candidate_filter = "nearby".into();
        assert!(matches!(p.resolve(), Err(PlanError::Invalid(_))));
    }

    #[test]
    fn reply_roundtrip() {
        let plan = PlanProposal::from_config(&SolverConfig::new(Algorithm::Pso).with_seed(9));
        let reply = ProposerReply::Plan(plan);
        assert_eq!(ProposerReply::parse(&reply.to_json()).unwrap(), reply);
    }
}
