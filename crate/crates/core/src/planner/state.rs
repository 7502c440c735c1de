use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::domain::{AtomTemplate, Domain, LiteralTemplate, Term};
use crate::kb::Atom;

/// A closed-world planning state: positive facts plus the assumption
/// namespace. Anything absent is false.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct State {
    pub facts: BTreeSet<Atom>,
    pub assumed: BTreeSet<Atom>,
}

impl State {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stored fact or the derived proximity law: `isNear(A,H)` holds for a
    /// human `H` when both `A` and `H` are near the same location.
    pub fn holds(&self, atom: &Atom) -> bool {
        if self.facts.contains(atom) {
            return true;
        }
        if atom.pred != "isNear" || atom.args.len() != 2 {
            return false;
        }
        let (a, h) = (&atom.args[0], &atom.args[1]);
        if !self.facts.contains(&Atom::new("human", [h.as_str()])) {
            return false;
        }
        self.near_of(a)
            .any(|l| l != h && self.facts.contains(&Atom::new("isNear", [h.as_str(), l])))
    }

    fn near_of<'a>(&'a self, subject: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.facts
            .range(Atom::new("isNear", [subject])..)
            .take_while(move |a| a.pred == "isNear" && a.args[0] == subject)
            .filter(|a| a.args.len() == 2)
            .map(|a| a.args[1].as_str())
    }

    pub fn is_assumed(&self, atom: &Atom) -> bool {
        self.assumed.contains(atom)
    }

    pub fn rename(&self, from: &str, to: &str) -> State {
        State {
            facts: self.facts.iter().map(|a| a.rename(from, to)).collect(),
            assumed: self.assumed.iter().map(|a| a.rename(from, to)).collect(),
        }
    }

    pub fn literal_holds(&self, lit: &GroundLiteral) -> bool {
        let v = if lit.assumed {
            self.assumed.contains(&lit.atom)
        } else {
            self.holds(&lit.atom)
        };
        v != lit.negated
    }

    /// Instances carrying the membership fact `type_name(i)`.
    pub fn instances_of<'a>(&'a self, type_name: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.facts
            .range(Atom::new(type_name, Vec::<String>::new())..)
            .take_while(move |a| a.pred == type_name)
            .filter(|a| a.args.len() == 1)
            .map(|a| a.args[0].as_str())
    }

    /// Facts whose predicate is `pred` and first argument `first`.
    pub fn with_first<'a>(&'a self, pred: &'a str, first: &'a str) -> impl Iterator<Item = &'a Atom> + 'a {
        self.facts
            .range(Atom::new(pred, [first])..)
            .take_while(move |a| a.pred == pred && a.args.first().map(String::as_str) == Some(first))
    }

    /// Functional constraints: one room for the robot, at most one object
    /// per gripper, and an object is either placed at one location or in a hand.
    pub fn check_invariants(&self) -> Result<(), String> {
        let robot_rooms = self.with_first("inRoom", "robot").count();
        if robot_rooms != 1 {
            return Err(format!("robot is in {robot_rooms} rooms"));
        }
        let mut per_gripper: BTreeMap<&str, usize> = BTreeMap::new();
        let mut per_object: BTreeMap<&str, usize> = BTreeMap::new();
        for a in &self.facts {
            match a.pred.as_str() {
                "inHand" => {
                    *per_gripper.entry(&a.args[1]).or_default() += 1;
                    *per_object.entry(&a.args[0]).or_default() += 1;
                }
                "isPlaced" => *per_object.entry(&a.args[0]).or_default() += 1,
                _ => {}
            }
        }
        if let Some((g, n)) = per_gripper.iter().find(|(_, n)| **n > 1) {
            return Err(format!("gripper {g} holds {n} objects"));
        }
        if let Some((o, n)) = per_object.iter().find(|(_, n)| **n > 1) {
            return Err(format!("object {o} is at {n} places"));
        }
        for g in per_gripper.keys() {
            if self.facts.contains(&Atom::new("empty", [*g])) {
                return Err(format!("gripper {g} is both empty and holding"));
            }
        }
        Ok(())
    }

    /// Symmetric difference against another state, as signed literals.
    pub fn diff(&self, other: &State) -> Vec<GroundLiteral> {
        let mut out = Vec::new();
        for (assumed, a, b) in [(false, &self.facts, &other.facts), (true, &self.assumed, &other.assumed)] {
            for atom in a.difference(b) {
                out.push(GroundLiteral { negated: true, assumed, atom: atom.clone() });
            }
            for atom in b.difference(a) {
                out.push(GroundLiteral { negated: false, assumed, atom: atom.clone() });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundLiteral {
    pub negated: bool,
    pub assumed: bool,
    pub atom: Atom,
}

impl fmt::Display for GroundLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("not ")?;
        }
        if self.assumed {
            write!(f, "assume({})", self.atom)
        } else {
            write!(f, "{}", self.atom)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
}

impl GroundAction {
    pub fn new<I, S>(name: &str, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        GroundAction {
            name: name.to_string(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    pub fn parse(text: &str) -> Option<GroundAction> {
        let atom = Atom::parse(text)?;
        Some(GroundAction {
            name: atom.pred,
            args: atom.args,
        })
    }

    pub fn mentions(&self, id: &str) -> bool {
        self.args.iter().any(|a| a == id)
    }

    pub fn rename(&self, from: &str, to: &str) -> GroundAction {
        GroundAction {
            name: self.name.clone(),
            args: self
                .args
                .iter()
                .map(|a| if a == from { to.to_string() } else { a.clone() })
                .collect(),
        }
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApplyError {
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("{action} expects {expected} argument(s), got {got}")]
    Arity {
        action: String,
        expected: usize,
        got: usize,
    },
    #[error("{action} is not applicable: {literal} does not hold")]
    Inapplicable {
        action: String,
        literal: GroundLiteral,
    },
}

/// The literal changes one action makes, computed on the pre-state.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Effects {
    pub adds: BTreeSet<GroundLiteral>,
    pub deletes: BTreeSet<GroundLiteral>,
}

fn bind_params<'d>(
    domain: &'d Domain,
    action: &GroundAction,
) -> Result<(&'d super::domain::ActionSchema, BTreeMap<String, String>), ApplyError> {
    let (_, schema) = domain
        .schema(&action.name)
        .ok_or_else(|| ApplyError::UnknownAction(action.name.clone()))?;
    if schema.params.len() != action.args.len() {
        return Err(ApplyError::Arity {
            action: action.to_string(),
            expected: schema.params.len(),
            got: action.args.len(),
        });
    }
    let binding = schema
        .params
        .iter()
        .zip(&action.args)
        .map(|(p, a)| (p.var.clone(), a.clone()))
        .collect();
    Ok((schema, binding))
}

fn instantiate(t: &AtomTemplate, binding: &BTreeMap<String, String>) -> Atom {
    Atom {
        pred: t.pred.clone(),
        args: t
            .args
            .iter()
            .map(|a| match a {
                Term::Const(c) => c.clone(),
                Term::Var(v) => binding.get(v).cloned().unwrap_or_else(|| v.clone()),
            })
            .collect(),
    }
}

fn ground_literal(t: &LiteralTemplate, binding: &BTreeMap<String, String>) -> GroundLiteral {
    GroundLiteral {
        negated: t.negated,
        assumed: t.assumed,
        atom: instantiate(&t.atom, binding),
    }
}

/// Extends `binding` with every assignment of the condition's free variables
/// that makes the condition a stored fact of `state`.
fn condition_bindings(
    cond: &AtomTemplate,
    binding: &BTreeMap<String, String>,
    state: &State,
) -> Vec<BTreeMap<String, String>> {
    let pattern = cond.partial(|v| binding.get(v).cloned());
    let mut out = Vec::new();
    for fact in &state.facts {
        if fact.pred != cond.pred || fact.args.len() != pattern.len() {
            continue;
        }
        let mut b = binding.clone();
        let mut ok = true;
        for ((p, t), arg) in pattern.iter().zip(&cond.args).zip(&fact.args) {
            match (p, t) {
                (Some(v), _) if v != arg => {
                    ok = false;
                    break;
                }
                (Some(_), _) => {}
                (None, Term::Var(name)) => match b.get(name) {
                    Some(prev) if prev != arg => {
                        ok = false;
                        break;
                    }
                    _ => {
                        b.insert(name.clone(), arg.clone());
                    }
                },
                (None, Term::Const(_)) => unreachable!("constants are always bound"),
            }
        }
        if ok {
            out.push(b);
        }
    }
    out
}

pub fn ground_preconditions(domain: &Domain, action: &GroundAction) -> Result<Vec<GroundLiteral>, ApplyError> {
    let (schema, binding) = bind_params(domain, action)?;
    Ok(schema.pre.iter().map(|p| ground_literal(p, &binding)).collect())
}

/// First precondition of `action` that fails in `state`, if any.
pub fn first_unmet(domain: &Domain, state: &State, action: &GroundAction) -> Result<Option<GroundLiteral>, ApplyError> {
    Ok(ground_preconditions(domain, action)?
        .into_iter()
        .find(|l| !state.literal_holds(l)))
}

/// Effects of `action` in `state`, ignoring preconditions.
pub fn ground_effects(domain: &Domain, state: &State, action: &GroundAction) -> Result<Effects, ApplyError> {
    let (schema, binding) = bind_params(domain, action)?;
    let mut fx = Effects::default();
    for e in &schema.effects {
        let bindings = match &e.condition {
            None => vec![binding.clone()],
            Some(c) => condition_bindings(c, &binding, state),
        };
        for b in bindings {
            let lit = ground_literal(&e.literal, &b);
            let positive = GroundLiteral { negated: false, ..lit.clone() };
            if lit.negated {
                fx.deletes.insert(positive);
            } else {
                fx.adds.insert(positive);
            }
        }
    }
    Ok(fx)
}

/// Applies effects with deletes before adds.
pub fn apply_effects(state: &State, fx: &Effects) -> State {
    let mut next = state.clone();
    for d in &fx.deletes {
        if d.assumed {
            next.assumed.remove(&d.atom);
        } else {
            next.facts.remove(&d.atom);
        }
    }
    for a in &fx.adds {
        if a.assumed {
            next.assumed.insert(a.atom.clone());
        } else {
            next.facts.insert(a.atom.clone());
        }
    }
    next
}

/// Reference semantics for one action: check preconditions in order, then
/// apply conditional effects evaluated on the pre-state.
pub fn apply_action(domain: &Domain, state: &State, action: &GroundAction) -> Result<State, ApplyError> {
    if let Some(lit) = first_unmet(domain, state, action)? {
        return Err(ApplyError::Inapplicable {
            action: action.to_string(),
            literal: lit,
        });
    }
    let fx = ground_effects(domain, state, action)?;
    Ok(apply_effects(state, &fx))
}

/// Force-applies the effects regardless of preconditions. Used when
/// projecting a plan past a broken step.
pub fn project_action(domain: &Domain, state: &State, action: &GroundAction) -> Result<State, ApplyError> {
    let fx = ground_effects(domain, state, action)?;
    Ok(apply_effects(state, &fx))
}
