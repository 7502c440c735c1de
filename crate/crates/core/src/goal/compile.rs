use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{
    category_of, specialize_in, AssumptionTemplate, Category, Clarification, Condition, GoalCondition, Guard,
    SpecializeError, Subject, TaskSpec,
};
use crate::kb::{Atom, KnowledgeBase};
use crate::parser::{ActionFrame, Attribute, ModValue, Modifier, Primitive, Slot};
use crate::planner::known_candidates;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("no site named `{0}` is known")]
    NoSite(String),
    #[error("`{verb}` needs {what}")]
    MissingSlot { verb: String, what: &'static str },
}

/// Who is talking and what earlier clarifications settled.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompileEnv {
    pub requester: Option<String>,
    /// Lemma → instance id answers to earlier clarifications.
    pub bindings: BTreeMap<String, String>,
}

enum Noun {
    Inst(String),
    Type(String),
}

struct Compiler<'a> {
    kb: &'a KnowledgeBase,
    env: &'a CompileEnv,
    mods: &'a [Modifier],
    spec: TaskSpec,
}

fn placements(kb: &KnowledgeBase, room: Option<&str>) -> Vec<String> {
    kb.instances_of("furniture")
        .filter(|f| kb.holds(&Atom::new("isPlacement", [*f])))
        .filter(|f| room.is_none_or(|r| kb.holds(&Atom::new("inRoom", [*f, r]))))
        .map(str::to_string)
        .collect()
}

impl Compiler<'_> {
    fn mods_of(&self, token: usize) -> impl Iterator<Item = &Modifier> {
        self.mods.iter().filter(move |m| m.target_index == token)
    }

    fn noun(&self, lemma: &str) -> Result<Noun, CompileError> {
        if let Some(b) = self.env.bindings.get(lemma) {
            return Ok(Noun::Inst(b.clone()));
        }
        if self.kb.contains_instance(lemma) {
            Ok(Noun::Inst(lemma.to_string()))
        } else if self.kb.hierarchy().contains(lemma) {
            Ok(Noun::Type(lemma.to_string()))
        } else {
            Err(CompileError::UnknownConcept(lemma.to_string()))
        }
    }

    fn clarify(&mut self, slot: &str, candidates: Vec<String>, question: String) {
        self.spec.pending_clarifications.push(Clarification {
            slot: slot.to_string(),
            candidates,
            question: Some(question),
        });
    }

    /// Resolves a source or goal slot to one instance. Type names with
    /// several instances ask the user.
    fn place(&mut self, slot: &Slot) -> Result<Option<String>, CompileError> {
        match self.noun(&slot.value) {
            Ok(Noun::Inst(i)) => Ok(Some(i)),
            Ok(Noun::Type(t)) => {
                let all: Vec<String> = self.kb.instances_of(&t).map(str::to_string).collect();
                match all.len() {
                    0 => Err(CompileError::NoSite(slot.value.clone())),
                    1 => Ok(all.into_iter().next()),
                    _ => {
                        self.clarify(&slot.value, all, format!("Which {} do you mean?", slot.value));
                        Ok(None)
                    }
                }
            }
            Err(_) => Err(CompileError::NoSite(slot.value.clone())),
        }
    }

    /// Variable condition for the object slot, or a constant when the noun
    /// names (or definitely refers to) one instance. `None` when a
    /// clarification was raised instead.
    fn object(&mut self, slot: &Slot, origin: Option<&str>) -> Result<Option<(Subject, Option<Guard>, u32)>, CompileError> {
        let token = slot.antecedent.unwrap_or(slot.token);
        let mut count = 1;
        let mut attributes = BTreeMap::new();
        let mut definite = false;
        for m in self.mods_of(token) {
            match (m.attribute, &m.value) {
                (Attribute::Number, ModValue::Int(n)) => count = *n,
                (Attribute::Size, v) => {
                    attributes.insert("size".to_string(), v.to_string());
                }
                (Attribute::Color, v) => {
                    attributes.insert("color".to_string(), v.to_string());
                }
                (Attribute::Possession, ModValue::Text(p)) if p == "my" => {
                    if let Some(r) = &self.env.requester {
                        attributes.insert("owner".to_string(), r.clone());
                    }
                }
                (Attribute::Det, _) => definite = m.is_definite(),
                _ => {}
            }
        }
        match self.noun(&slot.value)? {
            Noun::Inst(i) => Ok(Some((Subject::Const(i), None, 1))),
            Noun::Type(t) => {
                let guard = Guard {
                    type_name: t.clone(),
                    attributes,
                    origin: origin.map(str::to_string),
                };
                if definite && count == 1 {
                    let known: Vec<String> = known_candidates(self.kb, &guard).into_iter().collect();
                    match known.len() {
                        0 => {}
                        1 => return Ok(Some((Subject::Const(known[0].clone()), None, 1))),
                        _ => {
                            self.clarify(&slot.value, known, format!("Which {t} do you mean?"));
                            return Ok(None);
                        }
                    }
                }
                if !self.spec.objects.contains(&t) {
                    self.spec.objects.push(t);
                }
                Ok(Some((Subject::Var, Some(guard), count)))
            }
        }
    }

    fn condition(subject: Subject, guard: Option<Guard>, count: u32, target: String) -> Condition {
        Condition {
            lower: count,
            upper: count,
            relation: "in".to_string(),
            subject,
            target,
            guard,
            candidates: None,
            verify: false,
        }
    }

    fn assume(&mut self, object: &Subject, guard: &Option<Guard>, site: Option<String>) {
        let object = match (object, guard) {
            (Subject::Const(c), _) => c.clone(),
            (Subject::Var, Some(g)) => g.type_name.clone(),
            (Subject::Var, None) => return,
        };
        let t = AssumptionTemplate { object, site };
        if !self.spec.assumptions.contains(&t) {
            self.spec.assumptions.push(t);
        }
    }

    fn frame(&mut self, f: &ActionFrame) -> Result<Option<Condition>, CompileError> {
        let need = |what| CompileError::MissingSlot {
            verb: f.verb.clone(),
            what,
        };
        match f.action {
            Primitive::Get | Primitive::Give | Primitive::Put => {
                let obj = f.object.as_ref().ok_or_else(|| need("an object"))?;
                let source = match &f.source {
                    Some(s) => self.place(s)?,
                    None => None,
                };
                let target = match (f.action, &f.goal) {
                    (Primitive::Get, _) => Some(f.actor.clone()),
                    (_, Some(g)) => self.place(g)?,
                    (Primitive::Give, None) => Some(self.env.requester.clone().unwrap_or_else(|| "robot".into())),
                    (_, None) => return Err(need("a destination")),
                };
                let origin = if f.action == Primitive::Give { source.as_deref() } else { None };
                let Some((subject, guard, count)) = self.object(obj, origin)? else {
                    return Ok(None);
                };
                if f.action != Primitive::Give {
                    // the source site, if any; a placeholder otherwise
                    let site = source.filter(|s| self.kb.contains_instance(s));
                    self.assume(&subject, &guard, site);
                }
                Ok(target.map(|t| Self::condition(subject, guard, count, t)))
            }
            Primitive::Move => {
                let goal = f.goal.as_ref().ok_or_else(|| need("a destination"))?;
                let Some(target) = self.place(goal)? else {
                    return Ok(None);
                };
                if let Some(s) = &f.source {
                    if let Some(site) = self.place(s)? {
                        self.assume(&Subject::Const(f.actor.clone()), &None, Some(site));
                    }
                }
                Ok(Some(Condition::ground("in", f.actor.clone(), target)))
            }
            Primitive::Guide => {
                let obj = f.object.as_ref().ok_or_else(|| need("someone to accompany"))?;
                let goal = f.goal.as_ref().ok_or_else(|| need("a destination"))?;
                let Noun::Inst(person) = self.noun(&obj.value)? else {
                    return Err(CompileError::UnknownConcept(obj.value.clone()));
                };
                let Some(target) = self.place(goal)? else {
                    return Ok(None);
                };
                Ok(Some(Condition::ground("in", person, target)))
            }
            Primitive::Find => {
                let obj = f.object.as_ref().ok_or_else(|| need("something to look for"))?;
                let source = match &f.source {
                    Some(s) => self.place(s)?,
                    None => None,
                };
                if let Ok(Noun::Inst(p)) = self.noun(&obj.value) {
                    if category_of(self.kb, &p) == Some(Category::Person) {
                        if let Some(site) = source {
                            self.assume(&Subject::Const(p.clone()), &None, Some(site));
                        }
                        return Ok(Some(Condition::ground("in", f.actor.clone(), p)));
                    }
                }
                let site = match source {
                    Some(s) if category_of(self.kb, &s) == Some(Category::Furniture) => s,
                    other => {
                        if f.source.is_none() || other.is_some() {
                            let sites = placements(self.kb, other.as_deref());
                            let q = match &other {
                                Some(r) => format!("Where in the {r} should I look for the {}?", obj.value),
                                None => format!("Where should I look for the {}?", obj.value),
                            };
                            self.clarify("site", sites, q);
                        }
                        return Ok(None);
                    }
                };
                let Some((subject, guard, count)) = self.object(obj, None)? else {
                    return Ok(None);
                };
                self.assume(&subject, &guard, Some(site.clone()));
                let mut c = Self::condition(subject, guard, count, site);
                c.verify = true;
                Ok(Some(c))
            }
        }
    }
}

/// Turns resolved frames and modifiers into goal conditions and
/// assumption templates. Conditions keep the generic `in` relation; see
/// [`specialize_goal`].
pub fn compile_task(
    frames: &[ActionFrame],
    mods: &[Modifier],
    kb: &KnowledgeBase,
    env: &CompileEnv,
) -> Result<TaskSpec, CompileError> {
    let mut c = Compiler {
        kb,
        env,
        mods,
        spec: TaskSpec {
            requester: env.requester.clone(),
            ..TaskSpec::default()
        },
    };
    // get frames whose object is picked up again by a later pronoun only
    // describe an intermediate step
    let passed_on: BTreeSet<usize> = frames
        .iter()
        .filter_map(|f| f.object.as_ref().and_then(|o| o.antecedent))
        .collect();
    let mut conditions = Vec::new();
    for f in frames {
        let cond = c.frame(f)?;
        let intermediate = f.action == Primitive::Get
            && f.object.as_ref().is_some_and(|o| passed_on.contains(&o.token));
        if let Some(cond) = cond.filter(|_| !intermediate) {
            if !conditions.contains(&cond) {
                conditions.push(cond);
            }
        }
    }
    c.spec.goal = GoalCondition::new(conditions);
    Ok(c.spec)
}

/// Replaces every `in` by the concrete relation for its argument categories.
pub fn specialize_goal(goal: &GoalCondition, kb: &KnowledgeBase) -> Result<GoalCondition, SpecializeError> {
    let mut out = goal.clone();
    for c in &mut out.conditions {
        if c.relation == "in" {
            c.relation = specialize_in(c, kb)?.to_string();
        }
    }
    Ok(out)
}
