use crate::goal::GoalCondition;
use crate::planner::{condition_satisfied, first_unmet, project_action, Domain, GroundAction, State};
use crate::sim::Sensed;
use crate::trace::{ChangeClass, ConflictKind, ConflictReport};

/// Projects the remaining plan forward from `state` and reports every step
/// whose preconditions fail, earliest first. `offset` is the plan index of
/// `remaining[0]`, which is the step about to run.
pub fn detect_conflicts(domain: &Domain, state: &State, remaining: &[GroundAction], offset: usize) -> Vec<ConflictReport> {
    let mut out = Vec::new();
    let mut s = state.clone();
    for (i, a) in remaining.iter().enumerate() {
        if let Ok(Some(lit)) = first_unmet(domain, &s, a) {
            out.push(ConflictReport {
                step_index: offset + i,
                action: a.clone(),
                failed_literal: lit,
                kind: if i == 0 {
                    ConflictKind::CurrentStep
                } else {
                    ConflictKind::FutureStep
                },
            });
        }
        // push past a broken step so later ones are still checked
        if let Ok(next) = project_action(domain, &s, a) {
            s = next;
        }
    }
    out
}

/// Sorts a knowledge change into loss (the plan broke), opportunity (a
/// new way to satisfy an open condition appeared) or ineffective.
/// `state` is the belief after the change.
pub fn classify_change(
    domain: &Domain,
    state: &State,
    remaining: &[GroundAction],
    offset: usize,
    goal: &GoalCondition,
    delta: &[Sensed],
) -> (ChangeClass, Vec<ConflictReport>) {
    let conflicts = detect_conflicts(domain, state, remaining, offset);
    if !conflicts.is_empty() {
        return (ChangeClass::EffectiveLoss, conflicts);
    }
    let open: Vec<_> = goal.conditions.iter().filter(|c| !condition_satisfied(c, state)).collect();
    let opportunity = delta.iter().filter(|s| s.positive).any(|s| {
        let subject = &s.atom.args[0];
        open.iter().any(|c| match (s.atom.pred.as_str(), c.guard_type()) {
            ("isPlaced", Some(t)) => {
                state.facts.contains(&crate::kb::Atom::new(t, [subject.as_str()]))
                    && !c.candidates.as_ref().is_some_and(|cands| cands.contains(subject))
            }
            ("isNear", _) => c.mentioned().contains(&subject.as_str()),
            _ => false,
        })
    });
    if opportunity {
        (ChangeClass::EffectiveOpportunity, Vec::new())
    } else {
        (ChangeClass::Ineffective, Vec::new())
    }
}
