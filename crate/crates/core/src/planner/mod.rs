//! Action models, initial-state construction and shortest-plan search.

mod domain;
mod initial;
mod relevant;
mod search;
mod state;

use serde::{Deserialize, Serialize};

pub use domain::{ActionSchema, AtomTemplate, Domain, DomainError, EffectTemplate, LiteralTemplate, Param, Term};
pub use initial::{build_initial_state, known_candidates, InitError, InitialState, MintedInstance};
pub use relevant::{extract_relevant, state_from_kb};
pub use search::{plan, plan_batch, Compiled, PlanError, PlanningProblem, SearchMode, DEFAULT_HORIZON};
pub use state::{
    apply_action, apply_effects, first_unmet, ground_effects, ground_preconditions, project_action, ApplyError,
    Effects, GroundAction, GroundLiteral, State,
};

use crate::goal::{Condition, GoalCondition, Subject};
use crate::kb::Atom;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub action: GroundAction,
    /// Preconditions the step expects to hold when it starts.
    pub pre: Vec<GroundLiteral>,
    /// Expected state after the step.
    pub post: State,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub initial: State,
    pub steps: Vec<PlanStep>,
    #[serde(default)]
    pub explored_states: usize,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn actions(&self) -> Vec<GroundAction> {
        self.steps.iter().map(|s| s.action.clone()).collect()
    }

    /// Replaces an instance id everywhere, e.g. when a placeholder is
    /// matched to the object it stood for.
    pub fn rename(&mut self, from: &str, to: &str) {
        self.initial = self.initial.rename(from, to);
        for s in &mut self.steps {
            s.action = s.action.rename(from, to);
            for l in &mut s.pre {
                l.atom = l.atom.rename(from, to);
            }
            s.post = s.post.rename(from, to);
        }
    }
}

/// Instances a condition counts over in `state`.
pub fn condition_subjects(cond: &Condition, state: &State) -> Vec<String> {
    match (&cond.subject, &cond.candidates, &cond.guard) {
        (Subject::Const(s), _, _) => vec![s.clone()],
        (Subject::Var, Some(c), _) => c.iter().cloned().collect(),
        (Subject::Var, None, Some(g)) => state.instances_of(&g.type_name).map(str::to_string).collect(),
        (Subject::Var, None, None) => Vec::new(),
    }
}

/// Subjects for which `relation(subject, target)` holds.
pub fn condition_witnesses(cond: &Condition, state: &State) -> Vec<String> {
    condition_subjects(cond, state)
        .into_iter()
        .filter(|s| state.holds(&Atom::new(cond.relation.clone(), [s.as_str(), cond.target.as_str()])))
        .collect()
}

pub fn condition_satisfied(cond: &Condition, state: &State) -> bool {
    let n = condition_witnesses(cond, state).len() as u32;
    cond.lower <= n && n <= cond.upper
}

pub fn goal_satisfied(goal: &GoalCondition, state: &State) -> bool {
    goal.conditions.iter().all(|c| condition_satisfied(c, state))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Ok,
    StepFailed {
        index: usize,
        action: GroundAction,
        literal: GroundLiteral,
    },
    Malformed {
        index: usize,
        message: String,
    },
    GoalMiss {
        unmet: Vec<String>,
    },
}

/// Simulates `actions` from `s0` and reports the first broken step or an
/// unmet goal.
pub fn validate_plan(domain: &Domain, s0: &State, actions: &[GroundAction], goal: &GoalCondition) -> Verdict {
    let mut state = s0.clone();
    for (index, a) in actions.iter().enumerate() {
        match apply_action(domain, &state, a) {
            Ok(next) => state = next,
            Err(ApplyError::Inapplicable { literal, .. }) => {
                return Verdict::StepFailed {
                    index,
                    action: a.clone(),
                    literal,
                }
            }
            Err(e) => {
                return Verdict::Malformed {
                    index,
                    message: e.to_string(),
                }
            }
        }
    }
    let unmet: Vec<String> = goal
        .conditions
        .iter()
        .filter(|c| !condition_satisfied(c, &state))
        .map(|c| c.to_string())
        .collect();
    if unmet.is_empty() {
        Verdict::Ok
    } else {
        Verdict::GoalMiss { unmet }
    }
}
