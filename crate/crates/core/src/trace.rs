//! Structured execution trace, one JSON object per line.

use serde::{Deserialize, Serialize};

use crate::planner::{GroundAction, GroundLiteral};

pub const RECORD_KINDS: [&str; 7] = ["plan", "step", "observation", "conflict", "assumption", "replan", "result"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictKind {
    /// The step about to run can no longer start.
    CurrentStep,
    /// A later step would fail once the plan gets there.
    FutureStep,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictReport {
    pub step_index: usize,
    pub action: GroundAction,
    pub failed_literal: GroundLiteral,
    pub kind: ConflictKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeClass {
    Ineffective,
    EffectiveLoss,
    EffectiveOpportunity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub reason: String,
    pub steps: Vec<String>,
    pub explored_states: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub action: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationRecord {
    /// `action` or `event`.
    pub source: String,
    pub facts: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entities: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding: Option<(String, String)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forgotten: Vec<String>,
    pub class: ChangeClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumptionRecord {
    /// `assume`, or `abandon` when a user-named origin is given up.
    pub action: String,
    pub object: String,
    pub site: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordinal: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplanRecord {
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_length: Option<usize>,
    pub adopted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub assumptions: Vec<String>,
    pub actions: usize,
    pub attempts: u32,
    pub opportunity: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Record {
    Plan(PlanRecord),
    Step(StepRecord),
    Observation(ObservationRecord),
    Conflict(ConflictReport),
    Assumption(AssumptionRecord),
    Replan(ReplanRecord),
    Result(ResultRecord),
}

impl Record {
    pub fn kind(&self) -> &'static str {
        match self {
            Record::Plan(_) => "plan",
            Record::Step(_) => "step",
            Record::Observation(_) => "observation",
            Record::Conflict(_) => "conflict",
            Record::Assumption(_) => "assumption",
            Record::Replan(_) => "replan",
            Record::Result(_) => "result",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tick: u64,
    pub seq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<u64>,
    #[serde(flatten)]
    pub record: Record,
}

impl TraceRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trace records serialize")
    }
}

/// Append-only trace with a global sequence number.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new() -> Self {
        Trace::default()
    }

    pub fn push(&mut self, tick: u64, task: Option<u64>, record: Record) -> &TraceRecord {
        let seq = self.records.len() as u64;
        self.records.push(TraceRecord { tick, seq, task, record });
        self.records.last().expect("just pushed")
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn since(&self, seq: usize) -> &[TraceRecord] {
        &self.records[seq.min(self.records.len())..]
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_line());
            out.push('\n');
        }
        out
    }

    /// Parses trace text back, rejecting unknown kinds.
    pub fn parse(text: &str) -> Result<Vec<TraceRecord>, serde_json::Error> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect()
    }
}
