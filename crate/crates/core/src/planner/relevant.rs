use std::collections::BTreeSet;

use super::state::State;
use crate::goal::GoalCondition;
use crate::kb::{Atom, KnowledgeBase};

/// Expands type-level arguments (`graspable(drink)`) to every instance of
/// the type. Arguments that are instance ids are kept as they are.
fn expand(kb: &KnowledgeBase, atom: &Atom, out: &mut BTreeSet<Atom>) {
    let Some(pos) = atom
        .args
        .iter()
        .position(|a| !kb.contains_instance(a) && kb.hierarchy().contains(a))
    else {
        out.insert(atom.clone());
        return;
    };
    let type_name = atom.args[pos].clone();
    for inst in kb.instances_of(&type_name) {
        let mut args = atom.args.clone();
        args[pos] = inst.to_string();
        expand(
            kb,
            &Atom {
                pred: atom.pred.clone(),
                args,
            },
            out,
        );
    }
}

/// Every instance, relation and assumption in the knowledge base, closed
/// under the static laws.
pub fn state_from_kb(kb: &KnowledgeBase) -> State {
    let mut facts = kb.closure_facts();
    for atom in kb.positive_beliefs() {
        expand(kb, atom, &mut facts);
    }
    let assumed = kb
        .assumed_atoms()
        .filter(|a| a.args.iter().all(|x| kb.contains_instance(x)))
        .cloned()
        .collect();
    State { facts, assumed }
}

/// Ids that survive extraction: all rooms, furniture (doors included), the
/// robot and its grippers, whatever the goal names, every instance of a goal
/// guard type, and anything the robot is carrying.
fn relevant_ids(kb: &KnowledgeBase, goal: &GoalCondition) -> BTreeSet<String> {
    let mut ids = BTreeSet::new();
    for e in kb.entities() {
        if matches!(kb.hierarchy().root_of(&e.type_name), Some("room" | "furniture" | "robot")) {
            ids.insert(e.id.clone());
        }
    }
    for c in &goal.conditions {
        ids.extend(c.mentioned().into_iter().map(str::to_string));
        if let Some(t) = c.guard_type() {
            ids.extend(kb.instances_of(t).map(str::to_string));
        }
    }
    for atom in kb.positive_beliefs() {
        if atom.pred == "inHand" || (atom.pred == "isHeld" && atom.args[1] == "robot") {
            ids.insert(atom.args[0].clone());
        }
    }
    ids
}

/// The slice of the knowledge base the planner needs for `goal`.
pub fn extract_relevant(kb: &KnowledgeBase, goal: &GoalCondition) -> State {
    let ids = relevant_ids(kb, goal);
    let full = state_from_kb(kb);
    let keep = |a: &Atom| a.args.iter().all(|x| ids.contains(x));
    State {
        facts: full.facts.into_iter().filter(|a| keep(a)).collect(),
        assumed: full.assumed.into_iter().filter(|a| keep(a)).collect(),
    }
}
