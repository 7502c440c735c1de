//! A deliberately plain planner used as ground truth: grounds every action
//! schema over the instances in the start state, keeps states as bit
//! vectors and runs breadth-first search. No pruning beyond duplicate states.

use std::collections::{BTreeSet, HashMap, VecDeque};

use butler_core::goal::{GoalCondition, Subject};
use butler_core::kb::Atom;
use butler_core::planner::{Domain, State, Term};
use rustc_hash::FxHashSet;

type Bits = Vec<u64>;

#[derive(Debug, Clone, Copy)]
enum Check {
    /// Stored fact or assumption, by id.
    Id(usize),
    /// `isNear(a, h)` for a human `h`: stored, or both near one location.
    NearHuman { stored: usize, a: usize, h: usize },
    Never,
}

struct Effect {
    when: Vec<usize>,
    add: bool,
    id: usize,
}

struct Ground {
    pre: Vec<(Check, bool)>,
    effects: Vec<Effect>,
}

pub struct Oracle {
    actions: Vec<Ground>,
    /// Per condition: lower, upper and one check per subject.
    goal: Vec<(u32, u32, Vec<Check>)>,
    start: Bits,
    /// `isNear(x, l)` ids by (x, l) for the proximity law.
    near: HashMap<(usize, usize), usize>,
    consts: usize,
}

struct Interner {
    ids: HashMap<(bool, Atom), usize>,
}

impl Interner {
    fn id(&mut self, assumed: bool, atom: Atom) -> usize {
        let n = self.ids.len();
        *self.ids.entry((assumed, atom)).or_insert(n)
    }

    fn get(&self, assumed: bool, atom: &Atom) -> Option<usize> {
        self.ids.get(&(assumed, atom.clone())).copied()
    }
}

fn get(bits: &Bits, i: usize) -> bool {
    bits.get(i / 64).is_some_and(|w| w >> (i % 64) & 1 == 1)
}

fn set(bits: &mut Bits, i: usize, v: bool) {
    if bits.len() <= i / 64 {
        bits.resize(i / 64 + 1, 0);
    }
    if v {
        bits[i / 64] |= 1 << (i % 64);
    } else {
        bits[i / 64] &= !(1 << (i % 64));
    }
}

fn bind(args: &[Term], env: &HashMap<&str, &str>) -> Option<Vec<String>> {
    args.iter()
        .map(|t| match t {
            Term::Const(c) => Some(c.clone()),
            Term::Var(v) => env.get(v.as_str()).map(|x| x.to_string()),
        })
        .collect()
}

impl Oracle {
    pub fn new(domain: &Domain, s0: &State, goal: &GoalCondition) -> Oracle {
        let consts: Vec<String> = s0
            .facts
            .iter()
            .chain(&s0.assumed)
            .flat_map(|a| a.args.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let cid: HashMap<&str, usize> = consts.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let humans: BTreeSet<&str> = s0.instances_of("human").collect();
        let mut it = Interner { ids: HashMap::new() };
        for a in &s0.facts {
            it.id(false, a.clone());
        }
        for a in &s0.assumed {
            it.id(true, a.clone());
        }
        // every isNear pair, so the proximity law can look facts up by id
        let mut near = HashMap::new();
        for x in &consts {
            for l in &consts {
                let id = it.id(false, Atom::new("isNear", [x.as_str(), l.as_str()]));
                near.insert((cid[x.as_str()], cid[l.as_str()]), id);
            }
        }
        let changing: BTreeSet<&str> = domain
            .schemas
            .iter()
            .flat_map(|s| s.effects.iter().map(|e| e.literal.atom.pred.as_str()))
            .collect();

        let check = |it: &mut Interner, assumed: bool, atom: Atom| -> Check {
            if !assumed && atom.pred == "isNear" && atom.args.len() == 2 && humans.contains(atom.args[1].as_str()) {
                let (a, h) = (cid.get(atom.args[0].as_str()), cid.get(atom.args[1].as_str()));
                return match (a, h) {
                    (Some(&a), Some(&h)) => Check::NearHuman {
                        stored: it.id(false, atom),
                        a,
                        h,
                    },
                    _ => Check::Never,
                };
            }
            Check::Id(it.id(assumed, atom))
        };

        let mut actions = Vec::new();
        for schema in &domain.schemas {
            let pools: Vec<Vec<&str>> = schema.params.iter().map(|p| s0.instances_of(&p.type_name).collect()).collect();
            let mut tuple = vec![0usize; pools.len()];
            if pools.iter().any(Vec::is_empty) {
                continue;
            }
            'tuples: loop {
                let env: HashMap<&str, &str> = schema
                    .params
                    .iter()
                    .zip(&tuple)
                    .zip(&pools)
                    .map(|((p, i), pool)| (p.var.as_str(), pool[*i]))
                    .collect();
                let mut pre = Vec::new();
                let mut possible = true;
                for l in &schema.pre {
                    let atom = Atom::new(l.atom.pred.clone(), bind(&l.atom.args, &env).expect("params bind"));
                    if !l.assumed && !changing.contains(atom.pred.as_str()) {
                        // static: decide now against the start state
                        let holds = s0.holds(&atom);
                        if holds == l.negated {
                            possible = false;
                            break;
                        }
                        continue;
                    }
                    pre.push((check(&mut it, l.assumed, atom), l.negated));
                }
                if possible {
                    let mut effects = Vec::new();
                    for e in &schema.effects {
                        let free: Vec<&str> = e
                            .condition
                            .iter()
                            .flat_map(|c| c.vars())
                            .filter(|v| !env.contains_key(v))
                            .collect::<BTreeSet<_>>()
                            .into_iter()
                            .collect();
                        let mut pick = vec![0usize; free.len()];
                        loop {
                            let mut env = env.clone();
                            for (v, i) in free.iter().zip(&pick) {
                                env.insert(v, consts[*i].as_str());
                            }
                            let when = e
                                .condition
                                .iter()
                                .map(|c| it.id(false, Atom::new(c.pred.clone(), bind(&c.args, &env).expect("bound"))))
                                .collect();
                            let atom = Atom::new(e.literal.atom.pred.clone(), bind(&e.literal.atom.args, &env).expect("bound"));
                            effects.push(Effect {
                                when,
                                add: !e.literal.negated,
                                id: it.id(e.literal.assumed, atom),
                            });
                            if !odometer(&mut pick, consts.len()) {
                                break;
                            }
                        }
                    }
                    actions.push(Ground { pre, effects });
                }
                let sizes: Vec<usize> = pools.iter().map(Vec::len).collect();
                let mut k = 0;
                loop {
                    if k == tuple.len() {
                        break 'tuples;
                    }
                    tuple[k] += 1;
                    if tuple[k] < sizes[k] {
                        break;
                    }
                    tuple[k] = 0;
                    k += 1;
                }
            }
        }

        let mut conds = Vec::new();
        for c in &goal.conditions {
            let subjects: Vec<String> = match (&c.subject, &c.candidates, &c.guard) {
                (Subject::Const(s), _, _) => vec![s.clone()],
                (Subject::Var, Some(cands), _) => cands.iter().cloned().collect(),
                (Subject::Var, None, Some(g)) => s0.instances_of(&g.type_name).map(str::to_string).collect(),
                (Subject::Var, None, None) => Vec::new(),
            };
            let checks = subjects
                .iter()
                .map(|s| check(&mut it, false, Atom::new(c.relation.clone(), [s.as_str(), c.target.as_str()])))
                .collect();
            conds.push((c.lower, c.upper, checks));
        }

        let mut start = Bits::new();
        for a in &s0.facts {
            set(&mut start, it.get(false, a).expect("interned"), true);
        }
        for a in &s0.assumed {
            set(&mut start, it.get(true, a).expect("interned"), true);
        }
        let words = it.ids.len().div_ceil(64);
        start.resize(words, 0);
        Oracle {
            actions,
            goal: conds,
            start,
            near,
            consts: consts.len(),
        }
    }

    fn holds(&self, s: &Bits, c: Check) -> bool {
        match c {
            Check::Id(i) => get(s, i),
            Check::Never => false,
            Check::NearHuman { stored, a, h } => {
                get(s, stored)
                    || (0..self.consts).any(|l| l != h && get(s, self.near[&(a, l)]) && get(s, self.near[&(h, l)]))
            }
        }
    }

    fn is_goal(&self, s: &Bits) -> bool {
        self.goal.iter().all(|(lo, hi, checks)| {
            let n = checks.iter().filter(|c| self.holds(s, **c)).count() as u32;
            *lo <= n && n <= *hi
        })
    }

    fn successors<'a>(&'a self, s: &'a Bits) -> impl Iterator<Item = Bits> + 'a {
        self.actions
            .iter()
            .filter(|g| g.pre.iter().all(|(c, neg)| self.holds(s, *c) != *neg))
            .map(|g| {
                let fired: Vec<&Effect> = g.effects.iter().filter(|e| e.when.iter().all(|w| get(s, *w))).collect();
                let mut next = s.clone();
                for e in fired.iter().filter(|e| !e.add) {
                    set(&mut next, e.id, false);
                }
                for e in fired.iter().filter(|e| e.add) {
                    set(&mut next, e.id, true);
                }
                next
            })
    }

    pub fn shortest(&self, horizon: usize) -> Option<usize> {
        if self.is_goal(&self.start) {
            return Some(0);
        }
        let mut seen: FxHashSet<Bits> = FxHashSet::default();
        seen.insert(self.start.clone());
        let mut frontier = VecDeque::from([(self.start.clone(), 0usize)]);
        while let Some((s, d)) = frontier.pop_front() {
            if d == horizon {
                continue;
            }
            for next in self.successors(&s) {
                if self.is_goal(&next) {
                    return Some(d + 1);
                }
                if seen.insert(next.clone()) {
                    frontier.push_back((next, d + 1));
                }
            }
        }
        None
    }
}

fn odometer(pick: &mut [usize], base: usize) -> bool {
    for p in pick.iter_mut() {
        *p += 1;
        if *p < base {
            return true;
        }
        *p = 0;
    }
    false
}
