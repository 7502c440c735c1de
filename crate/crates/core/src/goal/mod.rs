//! Goal conditions, task specs and the frame-to-goal compiler.

mod asp;
mod compile;
mod specialize;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use asp::export_asp;
pub use compile::{compile_task, specialize_goal, CompileEnv, CompileError};
pub use specialize::{category_of, category_of_type, specialize, specialize_in, Category, SpecializeError};

/// Who a condition talks about: the single typed variable `X` or a named instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subject {
    Var,
    Const(String),
}

/// Constraints on the condition variable.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Guard {
    #[serde(rename = "type")]
    pub type_name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, String>,
    /// Site or room the user said the object comes from. Candidates must be
    /// believed or assumed there.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

/// `lower { relation(X,target) : type(X), attrs } upper`, or a ground literal
/// when the subject is a constant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub lower: u32,
    pub upper: u32,
    /// `in` until specialized against the knowledge base.
    pub relation: String,
    pub subject: Subject,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<Guard>,
    /// Instances tracked for this condition. `None` means every instance of
    /// the guard type.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<BTreeSet<String>>,
    /// Satisfying beliefs must be re-observed during the task.
    #[serde(default)]
    pub verify: bool,
}

impl Condition {
    pub fn ground(relation: impl Into<String>, subject: impl Into<String>, target: impl Into<String>) -> Self {
        Condition {
            lower: 1,
            upper: 1,
            relation: relation.into(),
            subject: Subject::Const(subject.into()),
            target: target.into(),
            guard: None,
            candidates: None,
            verify: false,
        }
    }

    pub fn counted(
        lower: u32,
        upper: u32,
        relation: impl Into<String>,
        type_name: impl Into<String>,
        target: impl Into<String>,
    ) -> Self {
        Condition {
            lower,
            upper,
            relation: relation.into(),
            subject: Subject::Var,
            target: target.into(),
            guard: Some(Guard {
                type_name: type_name.into(),
                ..Guard::default()
            }),
            candidates: None,
            verify: false,
        }
    }

    pub fn guard_type(&self) -> Option<&str> {
        self.guard.as_ref().map(|g| g.type_name.as_str())
    }

    /// Constants the condition names directly.
    pub fn mentioned(&self) -> Vec<&str> {
        let mut out = vec![self.target.as_str()];
        if let Subject::Const(c) = &self.subject {
            out.push(c);
        }
        if let Some(c) = &self.candidates {
            out.extend(c.iter().map(String::as_str));
        }
        out
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.subject {
            Subject::Const(c) => write!(f, "{}({},{})", self.relation, c, self.target),
            Subject::Var => {
                write!(f, "{} {{ {}(X,{})", self.lower, self.relation, self.target)?;
                if let Some(g) = &self.guard {
                    write!(f, " : {}(X)", g.type_name)?;
                    for (k, v) in &g.attributes {
                        write!(f, ", {k}(X,{v})")?;
                    }
                }
                write!(f, " }} {}", self.upper)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GoalCondition {
    pub conditions: Vec<Condition>,
}

impl GoalCondition {
    pub fn new(conditions: Vec<Condition>) -> Self {
        GoalCondition { conditions }
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }
}

/// `assume(in(object, site))`. A missing site is a placeholder filled from the
/// executor's location preferences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumptionTemplate {
    pub object: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<String>,
}

impl fmt::Display for AssumptionTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.site {
            Some(s) => write!(f, "assume(in({},{}))", self.object, s),
            None => write!(f, "assume(in({},_))", self.object),
        }
    }
}

/// A slot the user has to confirm before the task can start.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clarification {
    pub slot: String,
    pub candidates: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TaskSpec {
    pub goal: GoalCondition,
    pub assumptions: Vec<AssumptionTemplate>,
    #[serde(default)]
    pub pending_clarifications: Vec<Clarification>,
    /// Type lemmas mentioned by the command, in utterance order.
    #[serde(default)]
    pub objects: Vec<String>,
    /// The person the result is reported to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requester: Option<String>,
}
