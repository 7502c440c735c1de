//! Initial-state construction: fill the open world with assumed instances
//! until every counted goal condition has enough candidates.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::relevant::state_from_kb;
use super::state::State;
use crate::goal::{category_of, category_of_type, specialize, AssumptionTemplate, Category, Condition, GoalCondition, Guard, Subject};
use crate::kb::{Atom, KnowledgeBase};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InitError {
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("no site left to assume a `{0}` at")]
    NoAssumptionSite(String),
    #[error("cannot relate `{0}` to site `{1}`")]
    Unrelatable(String, String),
}

/// An instance created to stand for an object the robot has not seen yet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MintedInstance {
    pub id: String,
    pub type_name: String,
    /// Index of the goal condition it was minted for.
    pub condition: usize,
    pub properties: BTreeMap<String, String>,
    /// Memberships and inherited type-level facts.
    pub facts: Vec<Atom>,
    pub assumptions: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitialState {
    pub state: State,
    /// The goal with candidate sets filled in.
    pub goal: GoalCondition,
    pub minted: Vec<MintedInstance>,
}

/// Known instances that can satisfy a guard: right type, matching
/// attributes, and believed or assumed at the origin when one is given.
pub fn known_candidates(kb: &KnowledgeBase, guard: &Guard) -> BTreeSet<String> {
    let at = |inst: &str, site: &str| {
        let a = Atom::new("isPlaced", [inst, site]);
        kb.holds(&a) || kb.is_assumed(&a)
    };
    kb.instances_of(&guard.type_name)
        .filter(|id| {
            let e = kb.entity(id).expect("listed instance");
            guard
                .attributes
                .iter()
                .all(|(k, v)| e.properties.get(k) == Some(v))
        })
        .filter(|id| match &guard.origin {
            None => true,
            Some(o) => match category_of(kb, o) {
                Some(Category::Room) => {
                    kb.holds(&Atom::new("inRoom", [*id, o.as_str()]))
                        || kb
                            .instances_of("furniture")
                            .any(|f| kb.holds(&Atom::new("inRoom", [f, o.as_str()])) && at(id, f))
                }
                Some(Category::Furniture) => at(id, o),
                _ => kb.holds(&Atom::new("isHeld", [*id, o.as_str()])),
            },
        })
        .map(str::to_string)
        .collect()
}

fn is_site(kb: &KnowledgeBase, id: &str) -> bool {
    kb.holds(&Atom::new("isPlacement", [id]))
}

/// Builds the planning start state.
///
/// Starts from the whole knowledge base closed under the static laws. For
/// every goal condition whose guard type was mentioned in the command
/// (`objects`), mints `<type>_a<k>` instances while the condition needs more
/// candidates than are known. Each minted instance gets the type's
/// memberships and type-level facts, joins the condition's candidate set,
/// and is assumed at a site: the template's named site when it is a
/// placement, otherwise whatever `choose_site(type, condition)` proposes.
pub fn build_initial_state(
    kb: &KnowledgeBase,
    objects: &[String],
    goal: &GoalCondition,
    assumptions: &[AssumptionTemplate],
    choose_site: &mut dyn FnMut(&str, &Condition) -> Option<String>,
) -> Result<InitialState, InitError> {
    for o in objects {
        if !kb.hierarchy().contains(o) && !kb.contains_instance(o) {
            return Err(InitError::UnknownConcept(o.clone()));
        }
    }
    let mut state = state_from_kb(kb);
    let mut goal = goal.clone();
    let mut minted = Vec::new();
    let mut claimed: BTreeSet<String> = BTreeSet::new();
    let mut counter = kb.minted_count();

    for (ci, cond) in goal.conditions.iter_mut().enumerate() {
        let Some(guard) = cond.guard.clone() else {
            continue;
        };
        if !kb.hierarchy().contains(&guard.type_name) {
            return Err(InitError::UnknownConcept(guard.type_name.clone()));
        }
        let mut cands = known_candidates(kb, &guard);
        if let Some(prev) = &cond.candidates {
            cands.extend(prev.iter().filter(|c| kb.contains_instance(c)).cloned());
        }
        let mut available: Vec<String> = cands.iter().filter(|c| !claimed.contains(*c)).cloned().collect();
        let n = cond.lower as usize;
        let mut m = available.len();
        let minting = objects.contains(&guard.type_name);
        while minting && n > m {
            counter += 1;
            let id = KnowledgeBase::minted_id(&guard.type_name, counter);
            let mut facts: Vec<Atom> = kb
                .hierarchy()
                .lineage(&guard.type_name)
                .expect("checked above")
                .into_iter()
                .map(|t| Atom::new(t, [id.as_str()]))
                .collect();
            facts.extend(kb.type_level_facts(&guard.type_name, &id));

            let template_site = assumptions
                .iter()
                .find(|a| a.object == guard.type_name)
                .and_then(|a| a.site.clone())
                .filter(|s| is_site(kb, s));
            let site = match template_site {
                Some(s) => s,
                None => choose_site(&guard.type_name, cond)
                    .ok_or_else(|| InitError::NoAssumptionSite(guard.type_name.clone()))?,
            };
            let subject_cat = category_of_type(kb, &guard.type_name)
                .ok_or_else(|| InitError::UnknownConcept(guard.type_name.clone()))?;
            let pred = category_of(kb, &site)
                .and_then(|t| specialize(subject_cat, t))
                .ok_or_else(|| InitError::Unrelatable(id.clone(), site.clone()))?;
            let assumed = Atom::new(pred, [id.as_str(), site.as_str()]);

            state.facts.extend(facts.iter().cloned());
            state.assumed.insert(assumed.clone());
            cands.insert(id.clone());
            available.push(id.clone());
            minted.push(MintedInstance {
                id,
                type_name: guard.type_name.clone(),
                condition: ci,
                properties: guard.attributes.clone(),
                facts,
                assumptions: vec![assumed],
            });
            m += 1;
        }
        claimed.extend(available.into_iter().take(n));

        if cond.verify {
            // a find must observe the object, so held beliefs are re-opened
            for c in &cands {
                let atom = Atom::new(cond.relation.clone(), [c.as_str(), cond.target.as_str()]);
                if state.facts.remove(&atom) {
                    state.assumed.insert(atom);
                }
            }
        }
        cond.candidates = Some(cands);
    }

    // ground templates such as assume(in(robot,study)) only fill gaps
    for a in assumptions {
        let (Some(site), true) = (&a.site, kb.contains_instance(&a.object)) else {
            continue;
        };
        let (Some(s), Some(t)) = (category_of(kb, &a.object), category_of(kb, site)) else {
            continue;
        };
        let Some(pred) = specialize(s, t) else {
            continue;
        };
        if state.with_first(pred, &a.object).next().is_none() {
            state.assumed.insert(Atom::new(pred, [a.object.as_str(), site.as_str()]));
        }
    }

    // people the goal names but whose whereabouts are unknown
    let people: BTreeSet<(usize, String)> = goal
        .conditions
        .iter()
        .enumerate()
        .flat_map(|(i, c)| {
            let mut v = vec![c.target.clone()];
            if let Subject::Const(s) = &c.subject {
                v.push(s.clone());
            }
            v.into_iter().map(move |p| (i, p))
        })
        .filter(|(_, p)| category_of(kb, p) == Some(Category::Person) && kb.contains_instance(p))
        .collect();
    let mut placed: BTreeSet<String> = BTreeSet::new();
    for (i, p) in people {
        let known = state.with_first("isNear", &p).next().is_some()
            || state.assumed.iter().any(|a| a.pred == "isNear" && a.args[0] == p);
        if known || !placed.insert(p.clone()) {
            continue;
        }
        if let Some(site) = choose_site(&p, &goal.conditions[i]) {
            state.assumed.insert(Atom::new("isNear", [p.as_str(), site.as_str()]));
        }
    }

    Ok(InitialState { state, goal, minted })
}
