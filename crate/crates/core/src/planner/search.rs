//! Breadth-first search over a bitset encoding of the ground transition system.
//!
//! Compilation grounds every schema over the typed instances of the initial
//! state, drops actions whose static preconditions fail, keeps only actions
//! reachable under a delete-free relaxation, and interns the remaining
//! mutable atoms as bit positions. Layers are expanded either sequentially or
//! with rayon; successors are merged in frontier order in both modes, so the
//! first goal state found always carries the lexicographically smallest
//! shortest plan.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use thiserror::Error;

use super::domain::{AtomTemplate, Domain, Term};
use super::state::{apply_action, ground_preconditions, GroundAction, State};
use super::{Plan, PlanStep};
use crate::goal::{GoalCondition, Subject};
use crate::kb::Atom;

/// A grounded action, its schema index and its parameter bindings.
type RawGround = (GroundAction, usize, Vec<(String, String)>);

pub const DEFAULT_HORIZON: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SearchMode {
    Sequential,
    /// Expands each layer with rayon. Without the `parallel` feature this
    /// behaves exactly like `Sequential`.
    Parallel,
}

impl Default for SearchMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            SearchMode::Parallel
        } else {
            SearchMode::Sequential
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlanningProblem {
    pub initial: State,
    pub goal: GoalCondition,
    pub domain: Arc<Domain>,
    pub horizon: usize,
}

impl PlanningProblem {
    pub fn new(initial: State, goal: GoalCondition, domain: Arc<Domain>) -> Self {
        PlanningProblem {
            initial,
            goal,
            domain,
            horizon: DEFAULT_HORIZON,
        }
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("no plan within {explored_depth} step(s) ({states} states explored)")]
    NoPlan { explored_depth: usize, states: usize },
    #[error("search cancelled after {explored_depth} layer(s)")]
    Cancelled { explored_depth: usize },
    #[error("goal condition `{0}` has not been specialized")]
    Unspecialized(String),
    #[error("goal condition `{0}` has neither a constant subject nor a guard type")]
    Unguarded(String),
    #[error("internal: compiled search disagrees with reference semantics: {0}")]
    Internal(String),
}

type Bits = Box<[u64]>;

#[inline]
fn get(bits: &[u64], i: u32) -> bool {
    bits[(i >> 6) as usize] >> (i & 63) & 1 == 1
}

#[inline]
fn set(bits: &mut [u64], i: u32, v: bool) {
    let w = &mut bits[(i >> 6) as usize];
    if v {
        *w |= 1 << (i & 63);
    } else {
        *w &= !(1 << (i & 63));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lit {
    True,
    Bit(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Test {
    True,
    False,
    Bit(u32),
    /// Direct atom, or any shared location (`isNear(A,L)`, `isNear(H,L)`).
    Near { direct: Option<u32>, pairs: Vec<(Lit, Lit)> },
}

impl Test {
    fn eval(&self, bits: &[u64]) -> bool {
        let lit = |l: &Lit| match l {
            Lit::True => true,
            Lit::Bit(b) => get(bits, *b),
        };
        match self {
            Test::True => true,
            Test::False => false,
            Test::Bit(b) => get(bits, *b),
            Test::Near { direct, pairs } => {
                direct.is_some_and(|b| get(bits, b)) || pairs.iter().any(|(x, y)| lit(x) && lit(y))
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Check {
    test: Test,
    negated: bool,
}

#[derive(Debug, Clone)]
struct Effect {
    cond: Test,
    add: bool,
    bit: u32,
}

#[derive(Debug, Clone)]
struct CompiledAction {
    action: GroundAction,
    pre: Vec<Check>,
    /// Deletes first, then adds.
    effects: Vec<Effect>,
}

#[derive(Debug, Clone)]
struct CompiledCondition {
    lower: u32,
    upper: u32,
    tests: Vec<Test>,
}

/// Ground, pruned and interned form of a planning problem.
pub struct Compiled {
    actions: Vec<CompiledAction>,
    goal: Vec<CompiledCondition>,
    init: Bits,
    atoms: Vec<(bool, Atom)>,
}

type Key = (bool, Atom);

struct Grounder<'a> {
    s0: &'a State,
    /// Effect patterns per (assumed, predicate); `None` is a free position.
    mutable: FxHashMap<(bool, String), Vec<Vec<Option<String>>>>,
    humans: BTreeSet<String>,
}

impl Grounder<'_> {
    fn is_mutable(&self, assumed: bool, atom: &Atom) -> bool {
        self.mutable
            .get(&(assumed, atom.pred.clone()))
            .is_some_and(|pats| {
                pats.iter().any(|p| {
                    p.len() == atom.args.len()
                        && p.iter().zip(&atom.args).all(|(x, a)| x.as_ref().is_none_or(|x| x == a))
                })
            })
    }

    fn is_derived(&self, assumed: bool, atom: &Atom) -> bool {
        !assumed && atom.pred == "isNear" && atom.args.len() == 2 && self.humans.contains(&atom.args[1])
    }

    fn is_dynamic(&self, assumed: bool, atom: &Atom) -> bool {
        self.is_mutable(assumed, atom) || self.is_derived(assumed, atom)
    }

    fn static_holds(&self, assumed: bool, atom: &Atom) -> bool {
        if assumed {
            self.s0.assumed.contains(atom)
        } else {
            self.s0.holds(atom)
        }
    }
}

fn bind(t: &AtomTemplate, b: &BTreeMap<&str, &str>) -> Vec<Option<String>> {
    t.args
        .iter()
        .map(|a| match a {
            Term::Const(c) => Some(c.clone()),
            Term::Var(v) => b.get(v.as_str()).map(|s| s.to_string()),
        })
        .collect()
}

fn full(pred: &str, args: Vec<Option<String>>) -> Atom {
    Atom {
        pred: pred.to_string(),
        args: args.into_iter().map(|a| a.expect("bound")).collect(),
    }
}

/// Candidate completions of a partially bound condition among `facts`,
/// returned as (condition atom, extended binding).
fn completions<'f>(
    cond: &AtomTemplate,
    pattern: &[Option<String>],
    facts: impl Iterator<Item = &'f Atom>,
) -> Vec<(Atom, BTreeMap<String, String>)> {
    let mut out = Vec::new();
    'facts: for f in facts {
        if f.pred != cond.pred || f.args.len() != pattern.len() {
            continue;
        }
        let mut extra: BTreeMap<String, String> = BTreeMap::new();
        for ((p, t), a) in pattern.iter().zip(&cond.args).zip(&f.args) {
            match (p, t) {
                (Some(v), _) => {
                    if v != a {
                        continue 'facts;
                    }
                }
                (None, Term::Var(name)) => {
                    if let Some(prev) = extra.get(name) {
                        if prev != a {
                            continue 'facts;
                        }
                    }
                    extra.insert(name.clone(), a.clone());
                }
                (None, Term::Const(_)) => continue 'facts,
            }
        }
        out.push((f.clone(), extra));
    }
    out
}

struct RawAction {
    action: GroundAction,
    schema: usize,
    binding: Vec<(String, String)>,
    /// Dynamic preconditions only; static ones were checked against S0.
    pre: Vec<(bool, bool, Atom)>,
}

impl Compiled {
    pub fn new(problem: &PlanningProblem) -> Result<Compiled, PlanError> {
        let domain = &problem.domain;
        let s0 = &problem.initial;
        for c in &problem.goal.conditions {
            if c.relation == "in" {
                return Err(PlanError::Unspecialized(c.to_string()));
            }
            if c.subject == Subject::Var && c.guard.is_none() {
                return Err(PlanError::Unguarded(c.to_string()));
            }
        }

        // ground every schema over typed instances
        let mut raw: Vec<RawGround> = Vec::new();
        for (si, schema) in domain.schemas.iter().enumerate() {
            let domains: Vec<Vec<&str>> = schema
                .params
                .iter()
                .map(|p| s0.instances_of(&p.type_name).collect())
                .collect();
            if domains.iter().any(Vec::is_empty) {
                continue;
            }
            let mut idx = vec![0usize; domains.len()];
            loop {
                let args: Vec<String> = idx.iter().zip(&domains).map(|(i, d)| d[*i].to_string()).collect();
                let binding = schema
                    .params
                    .iter()
                    .zip(&args)
                    .map(|(p, a)| (p.var.clone(), a.clone()))
                    .collect();
                raw.push((
                    GroundAction {
                        name: schema.name.clone(),
                        args,
                    },
                    si,
                    binding,
                ));
                // odometer, last position fastest, so tuples come out in lexicographic order
                let mut done = true;
                for k in (0..domains.len()).rev() {
                    idx[k] += 1;
                    if idx[k] < domains[k].len() {
                        done = false;
                        break;
                    }
                    idx[k] = 0;
                }
                if done {
                    break;
                }
            }
        }

        let mut g = Grounder {
            s0,
            mutable: FxHashMap::default(),
            humans: s0.instances_of("human").map(str::to_string).collect(),
        };
        for (_, si, binding) in &raw {
            let b: BTreeMap<&str, &str> = binding.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
            for e in &domain.schemas[*si].effects {
                let lit = &e.literal;
                g.mutable
                    .entry((lit.assumed, lit.atom.pred.clone()))
                    .or_default()
                    .push(bind(&lit.atom, &b));
            }
        }
        for pats in g.mutable.values_mut() {
            pats.sort();
            pats.dedup();
        }

        // static precondition pruning
        let mut actions: Vec<RawAction> = Vec::new();
        'raw: for (action, si, binding) in raw {
            let b: BTreeMap<&str, &str> = binding.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
            let mut pre = Vec::new();
            for p in &domain.schemas[si].pre {
                let atom = full(&p.atom.pred, bind(&p.atom, &b));
                if g.is_dynamic(p.assumed, &atom) {
                    pre.push((p.negated, p.assumed, atom));
                } else if g.static_holds(p.assumed, &atom) == p.negated {
                    continue 'raw;
                }
            }
            actions.push(RawAction {
                action,
                schema: si,
                binding,
                pre,
            });
        }

        // delete-free reachability
        let mut reach: FxHashSet<Key> = s0
            .facts
            .iter()
            .map(|a| (false, a.clone()))
            .chain(s0.assumed.iter().map(|a| (true, a.clone())))
            .collect();
        let relaxed_holds = |reach: &FxHashSet<Key>, assumed: bool, atom: &Atom, g: &Grounder| -> bool {
            if reach.contains(&(assumed, atom.clone())) {
                return true;
            }
            if g.is_derived(assumed, atom) {
                let (a, h) = (&atom.args[0], &atom.args[1]);
                return reach.iter().any(|(asm, f)| {
                    !asm && f.pred == "isNear"
                        && f.args[0] == *a
                        && f.args[1] != *h
                        && reach.contains(&(false, Atom::new("isNear", [h.as_str(), f.args[1].as_str()])))
                });
            }
            false
        };
        let mut fired = vec![false; actions.len()];
        loop {
            let mut added: Vec<Key> = Vec::new();
            for (i, ra) in actions.iter().enumerate() {
                if !fired[i]
                    && !ra
                        .pre
                        .iter()
                        .filter(|(neg, _, _)| !neg)
                        .all(|(_, asm, atom)| relaxed_holds(&reach, *asm, atom, &g))
                {
                    continue;
                }
                fired[i] = true;
                let b: BTreeMap<&str, &str> = ra.binding.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
                for e in &domain.schemas[ra.schema].effects {
                    if e.literal.negated {
                        continue;
                    }
                    match &e.condition {
                        None => {
                            let atom = full(&e.literal.atom.pred, bind(&e.literal.atom, &b));
                            let key = (e.literal.assumed, atom);
                            if !reach.contains(&key) {
                                added.push(key);
                            }
                        }
                        Some(c) => {
                            let pattern = bind(c, &b);
                            let facts = reach.iter().filter(|(a, _)| !a).map(|(_, f)| f);
                            for (_, extra) in completions(c, &pattern, facts) {
                                let mut b2 = b.clone();
                                for (k, v) in &extra {
                                    b2.insert(k, v);
                                }
                                let atom = full(&e.literal.atom.pred, bind(&e.literal.atom, &b2));
                                let key = (e.literal.assumed, atom);
                                if !reach.contains(&key) {
                                    added.push(key);
                                }
                            }
                        }
                    }
                }
            }
            if added.is_empty() {
                break;
            }
            reach.extend(added);
        }

        // intern mutable reachable atoms in a stable order
        let atoms: Vec<Key> = reach
            .iter()
            .filter(|(asm, a)| g.is_mutable(*asm, a))
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: FxHashMap<Key, u32> = atoms.iter().enumerate().map(|(i, k)| (k.clone(), i as u32)).collect();

        let plain = |assumed: bool, atom: &Atom| -> Test {
            let key = (assumed, atom.clone());
            if let Some(&b) = index.get(&key) {
                Test::Bit(b)
            } else if reach.contains(&key) {
                Test::True
            } else {
                Test::False
            }
        };
        let lit_of = |atom: Atom| -> Option<Lit> {
            match plain(false, &atom) {
                Test::True => Some(Lit::True),
                Test::Bit(b) => Some(Lit::Bit(b)),
                _ => None,
            }
        };
        let test_for = |assumed: bool, atom: &Atom| -> Test {
            if !g.is_derived(assumed, atom) {
                return plain(assumed, atom);
            }
            let direct = match plain(false, atom) {
                Test::True => return Test::True,
                Test::Bit(b) => Some(b),
                _ => None,
            };
            let (a, h) = (&atom.args[0], &atom.args[1]);
            let mut locs: BTreeSet<&str> = BTreeSet::new();
            for (asm, f) in reach.iter() {
                if !asm && f.pred == "isNear" && f.args[0] == *a && f.args[1] != *h {
                    locs.insert(&f.args[1]);
                }
            }
            let mut pairs = Vec::new();
            for l in locs {
                let x = lit_of(Atom::new("isNear", [a.as_str(), l]));
                let y = lit_of(Atom::new("isNear", [h.as_str(), l]));
                if let (Some(x), Some(y)) = (x, y) {
                    if x == Lit::True && y == Lit::True {
                        return Test::True;
                    }
                    pairs.push((x, y));
                }
            }
            if direct.is_none() && pairs.is_empty() {
                Test::False
            } else {
                Test::Near { direct, pairs }
            }
        };

        let mut compiled = Vec::new();
        'act: for (i, ra) in actions.into_iter().enumerate() {
            if !fired[i] {
                continue;
            }
            let mut pre = Vec::new();
            for (negated, assumed, atom) in &ra.pre {
                let test = test_for(*assumed, atom);
                match (&test, *negated) {
                    (Test::True, false) | (Test::False, true) => {}
                    (Test::True, true) | (Test::False, false) => continue 'act,
                    _ => pre.push(Check { test, negated: *negated }),
                }
            }
            let b: BTreeMap<&str, &str> = ra.binding.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
            let mut dels = Vec::new();
            let mut adds = Vec::new();
            for e in &domain.schemas[ra.schema].effects {
                let mut instances: Vec<(Test, Atom)> = Vec::new();
                match &e.condition {
                    None => instances.push((Test::True, full(&e.literal.atom.pred, bind(&e.literal.atom, &b)))),
                    Some(c) => {
                        let pattern = bind(c, &b);
                        let facts = reach.iter().filter(|(a, _)| !a).map(|(_, f)| f);
                        let mut found = completions(c, &pattern, facts);
                        found.sort();
                        for (cond_atom, extra) in found {
                            let cond = plain(false, &cond_atom);
                            if cond == Test::False {
                                continue;
                            }
                            let mut b2 = b.clone();
                            for (k, v) in &extra {
                                b2.insert(k, v);
                            }
                            instances.push((cond, full(&e.literal.atom.pred, bind(&e.literal.atom, &b2))));
                        }
                    }
                }
                for (cond, atom) in instances {
                    let Some(&bit) = index.get(&(e.literal.assumed, atom)) else {
                        // an add always targets a reachable mutable atom; an
                        // unreachable delete target is never true
                        continue;
                    };
                    if e.literal.negated {
                        dels.push(Effect { cond, add: false, bit });
                    } else {
                        adds.push(Effect { cond, add: true, bit });
                    }
                }
            }
            dels.extend(adds);
            compiled.push(CompiledAction {
                action: ra.action,
                pre,
                effects: dels,
            });
        }

        let mut goal = Vec::new();
        for c in &problem.goal.conditions {
            let subjects: Vec<String> = match (&c.subject, &c.candidates, &c.guard) {
                (Subject::Const(s), _, _) => vec![s.clone()],
                (Subject::Var, Some(cands), _) => cands.iter().cloned().collect(),
                (Subject::Var, None, Some(gd)) => s0.instances_of(&gd.type_name).map(str::to_string).collect(),
                (Subject::Var, None, None) => unreachable!("checked above"),
            };
            let tests = subjects
                .iter()
                .map(|s| test_for(false, &Atom::new(c.relation.clone(), [s.as_str(), c.target.as_str()])))
                .collect();
            goal.push(CompiledCondition {
                lower: c.lower,
                upper: c.upper,
                tests,
            });
        }

        let words = atoms.len().div_ceil(64).max(1);
        let mut init = vec![0u64; words].into_boxed_slice();
        for (i, (asm, a)) in atoms.iter().enumerate() {
            let present = if *asm { s0.assumed.contains(a) } else { s0.facts.contains(a) };
            set(&mut init, i as u32, present);
        }

        Ok(Compiled {
            actions: compiled,
            goal,
            init,
            atoms,
        })
    }

    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    fn is_goal(&self, bits: &[u64]) -> bool {
        self.goal.iter().all(|c| {
            let n = c.tests.iter().filter(|t| t.eval(bits)).count() as u32;
            c.lower <= n && n <= c.upper
        })
    }

    fn successors(&self, bits: &[u64]) -> Vec<(u32, Bits, bool)> {
        let mut out = Vec::new();
        for (ai, a) in self.actions.iter().enumerate() {
            if !a.pre.iter().all(|c| c.test.eval(bits) != c.negated) {
                continue;
            }
            let mut next: Bits = bits.into();
            for e in &a.effects {
                if e.cond.eval(bits) {
                    set(&mut next, e.bit, e.add);
                }
            }
            if *next == *bits {
                continue;
            }
            let goal = self.is_goal(&next);
            out.push((ai as u32, next, goal));
        }
        out
    }
}

const ROOT: u32 = u32::MAX;

/// Finds a shortest plan; among shortest plans the one whose action sequence
/// is smallest under (declaration order, arguments).
pub fn plan(problem: &PlanningProblem, mode: SearchMode, cancel: Option<&AtomicBool>) -> Result<Plan, PlanError> {
    let compiled = Compiled::new(problem)?;
    let found = search(&compiled, problem.horizon, mode, cancel)?;
    annotate(problem, &compiled, &found.0, found.1)
}

fn search(
    c: &Compiled,
    horizon: usize,
    mode: SearchMode,
    cancel: Option<&AtomicBool>,
) -> Result<(Vec<u32>, usize), PlanError> {
    if c.is_goal(&c.init) {
        return Ok((Vec::new(), 1));
    }
    let mut seen: FxHashSet<Bits> = FxHashSet::default();
    seen.insert(c.init.clone());
    // (parent node, action) per discovered node
    let mut nodes: Vec<(u32, u32)> = Vec::new();
    let mut frontier: Vec<(u32, Bits)> = vec![(ROOT, c.init.clone())];

    for depth in 1..=horizon {
        if cancel.is_some_and(|f| f.load(Ordering::Relaxed)) {
            return Err(PlanError::Cancelled {
                explored_depth: depth - 1,
            });
        }
        let expanded: Vec<Vec<(u32, Bits, bool)>> = expand(c, &frontier, mode);
        let mut next = Vec::new();
        for ((parent, _), succs) in frontier.iter().zip(expanded) {
            for (action, bits, goal) in succs {
                if seen.contains(&bits) {
                    continue;
                }
                seen.insert(bits.clone());
                let id = nodes.len() as u32;
                nodes.push((*parent, action));
                if goal {
                    let mut path = Vec::new();
                    let mut cur = id;
                    while cur != ROOT {
                        let (p, a) = nodes[cur as usize];
                        path.push(a);
                        cur = p;
                    }
                    path.reverse();
                    return Ok((path, seen.len()));
                }
                next.push((id, bits));
            }
        }
        if next.is_empty() {
            return Err(PlanError::NoPlan {
                explored_depth: depth,
                states: seen.len(),
            });
        }
        frontier = next;
    }
    Err(PlanError::NoPlan {
        explored_depth: horizon,
        states: seen.len(),
    })
}

fn expand(c: &Compiled, frontier: &[(u32, Bits)], mode: SearchMode) -> Vec<Vec<(u32, Bits, bool)>> {
    match mode {
        #[cfg(feature = "parallel")]
        SearchMode::Parallel => frontier
            .par_iter()
            .with_min_len(8)
            .map(|(_, b)| c.successors(b))
            .collect(),
        _ => frontier.iter().map(|(_, b)| c.successors(b)).collect(),
    }
}

fn annotate(problem: &PlanningProblem, c: &Compiled, path: &[u32], states: usize) -> Result<Plan, PlanError> {
    let mut state = problem.initial.clone();
    let mut steps = Vec::with_capacity(path.len());
    for &ai in path {
        let action = c.actions[ai as usize].action.clone();
        let pre = ground_preconditions(&problem.domain, &action).map_err(|e| PlanError::Internal(e.to_string()))?;
        state = apply_action(&problem.domain, &state, &action).map_err(|e| PlanError::Internal(e.to_string()))?;
        steps.push(PlanStep {
            action,
            pre,
            post: state.clone(),
        });
    }
    if !super::goal_satisfied(&problem.goal, &state) {
        return Err(PlanError::Internal("final state misses the goal".into()));
    }
    Ok(Plan {
        initial: problem.initial.clone(),
        steps,
        explored_states: states,
    })
}

/// Plans several independent problems, in parallel when `mode` allows.
pub fn plan_batch(problems: &[PlanningProblem], mode: SearchMode) -> Vec<Result<Plan, PlanError>> {
    match mode {
        #[cfg(feature = "parallel")]
        SearchMode::Parallel => problems
            .par_iter()
            .map(|p| plan(p, SearchMode::Sequential, None))
            .collect(),
        _ => problems.iter().map(|p| plan(p, SearchMode::Sequential, None)).collect(),
    }
}
