//! Runs one task against the world: plan, act, sense, detect conflicts and
//! replan. A [`TaskSession`] advances by at most one action per tick so the
//! service can interleave it with events and other requests.

mod absorb;
mod conflict;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use absorb::{absorb, has_location, Absorbed};
pub use conflict::{classify_change, detect_conflicts};

use crate::goal::{specialize_goal, AssumptionTemplate, Condition, GoalCondition, SpecializeError, TaskSpec};
use crate::kb::{Atom, Entity, Epistemic, Fluent, KnowledgeBase, Source};
use crate::planner::{
    build_initial_state, condition_subjects, goal_satisfied, ground_effects, plan, Domain, Effects, InitError, Plan,
    PlanError, PlanningProblem, SearchMode, State, DEFAULT_HORIZON,
};
use crate::sim::{Expectation, Observation, World, ROBOT};
use crate::trace::{
    AssumptionRecord, ChangeClass, ObservationRecord, PlanRecord, Record, ReplanRecord, ResultRecord, StepRecord, Trace,
};

pub const NO_SITE_LEFT: &str = "no required objects in any places";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecConfig {
    /// Attempts per step for actuator failures.
    pub retries: u32,
    /// Ticks a task may run before it times out.
    pub tick_budget: u64,
    pub horizon: usize,
    pub mode: SearchMode,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            retries: 2,
            tick_budget: 500,
            horizon: DEFAULT_HORIZON,
            mode: SearchMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure { reason: String },
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Failure { .. } => "failure",
        }
    }

    pub fn reason(&self) -> Option<&str> {
        match self {
            Outcome::Success => None,
            Outcome::Failure { reason } => Some(reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task: u64,
    pub command: String,
    #[serde(flatten)]
    pub outcome: Outcome,
    /// Sites the robot assumed objects or people at, in order.
    pub assumptions: Vec<String>,
    /// Actions executed, failed attempts included.
    pub actions: usize,
    /// Attempts spent on the step that failed the task, else on the last step.
    pub attempts: u32,
    /// Whether an opportunity replan was adopted.
    pub opportunity: bool,
    pub start_tick: u64,
    pub end_tick: u64,
}

impl TaskResult {
    /// Differences from an expectation, empty when it matches.
    pub fn mismatches(&self, e: &Expectation) -> Vec<String> {
        let mut out = Vec::new();
        if e.outcome != self.outcome.name() {
            out.push(format!("outcome {} != {}", self.outcome.name(), e.outcome));
        }
        if let Some(r) = &e.reason {
            if self.outcome.reason() != Some(r.as_str()) {
                out.push(format!("reason {:?} != {r:?}", self.outcome.reason()));
            }
        }
        if let Some(n) = e.assumptions {
            if self.assumptions.len() != n {
                out.push(format!("assumptions {} != {n}", self.assumptions.len()));
            }
        }
        if let Some(s) = &e.sites {
            if &self.assumptions != s {
                out.push(format!("sites {:?} != {s:?}", self.assumptions));
            }
        }
        if let Some(a) = e.attempts {
            if self.attempts != a {
                out.push(format!("attempts {} != {a}", self.attempts));
            }
        }
        if let Some(o) = e.opportunity {
            if self.opportunity != o {
                out.push(format!("opportunity {} != {o}", self.opportunity));
            }
        }
        out
    }
}

/// Resumable execution state of one task.
#[derive(Debug, Clone)]
pub struct TaskSession {
    pub id: u64,
    pub command: String,
    spec: TaskSpec,
    goal: GoalCondition,
    plan: Option<Plan>,
    step: usize,
    attempts: u32,
    last_attempts: u32,
    /// Attempts spent on the step that made the task fail.
    fatal_attempts: Option<u32>,
    /// The last search failed on freshly assumed sites.
    unreachable: bool,
    assumed_sites: Vec<String>,
    /// Sites already looked at, per object type or person.
    searched: BTreeMap<String, BTreeSet<String>>,
    /// Candidates a find has observed during this task.
    verified: BTreeSet<String>,
    minted: BTreeSet<String>,
    actions: usize,
    start_tick: Option<u64>,
    /// Set once the task has failed and the robot is returning to report.
    report: Option<String>,
    opportunity: bool,
    replan: Option<(String, Option<usize>)>,
    result: Option<TaskResult>,
    domain: Arc<Domain>,
    config: ExecConfig,
}

impl TaskSession {
    pub fn new(
        id: u64,
        command: impl Into<String>,
        spec: TaskSpec,
        kb: &KnowledgeBase,
        domain: Arc<Domain>,
        config: ExecConfig,
    ) -> Result<TaskSession, SpecializeError> {
        let goal = specialize_goal(&spec.goal, kb)?;
        Ok(TaskSession {
            id,
            command: command.into(),
            spec,
            goal,
            plan: None,
            step: 0,
            attempts: 0,
            last_attempts: 0,
            fatal_attempts: None,
            unreachable: false,
            assumed_sites: Vec::new(),
            searched: BTreeMap::new(),
            verified: BTreeSet::new(),
            minted: BTreeSet::new(),
            actions: 0,
            start_tick: None,
            report: None,
            opportunity: false,
            replan: None,
            result: None,
            domain,
            config,
        })
    }

    pub fn goal(&self) -> &GoalCondition {
        &self.goal
    }

    pub fn plan(&self) -> Option<&Plan> {
        self.plan.as_ref()
    }

    /// Index of the next step in [`Self::plan`].
    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn result(&self) -> Option<&TaskResult> {
        self.result.as_ref()
    }

    pub fn is_done(&self) -> bool {
        self.result.is_some()
    }

    /// Planning state for the current goal.
    pub fn belief(&self, kb: &KnowledgeBase) -> State {
        self.belief_for(kb, &self.goal)
    }

    fn belief_for(&self, kb: &KnowledgeBase, goal: &GoalCondition) -> State {
        let mut s = crate::planner::extract_relevant(kb, goal);
        for c in goal.conditions.iter().filter(|c| c.verify) {
            for cand in condition_subjects(c, &s) {
                if self.verified.contains(&cand) {
                    continue;
                }
                let atom = Atom::new(c.relation.clone(), [cand.as_str(), c.target.as_str()]);
                if s.facts.remove(&atom) {
                    s.assumed.insert(atom);
                }
            }
        }
        s
    }

    /// Objects and people the robot should report on when it looks around.
    fn focus(&self, kb: &KnowledgeBase) -> BTreeSet<String> {
        let mut ids: BTreeSet<String> = BTreeSet::new();
        for c in &self.goal.conditions {
            ids.extend(c.mentioned().into_iter().map(str::to_string));
        }
        if let Some(p) = &self.plan {
            for s in &p.steps[self.step.min(p.len())..] {
                ids.extend(s.action.args.iter().cloned());
            }
        }
        ids.into_iter()
            .filter(|id| kb.is_instance_of(id, "object") || kb.is_instance_of(id, "human"))
            .collect()
    }

    /// Applies due world events, then advances the task by at most one
    /// action. Returns true once the task has a result.
    pub fn tick(&mut self, kb: &mut KnowledgeBase, world: &mut World, trace: &mut Trace) -> bool {
        let (_, obs) = world.apply_events();
        self.on_events(obs, kb, world, trace);
        self.advance(kb, world, trace)
    }

    /// Ingests what the robot perceived of this tick's world events.
    pub fn on_events(&mut self, obs: Observation, kb: &mut KnowledgeBase, world: &World, trace: &mut Trace) {
        if self.result.is_none() && !obs.is_empty() {
            self.start_tick.get_or_insert(world.tick());
            self.ingest(obs, "event", kb, world, trace);
        }
    }

    /// Runs at most one action. Returns true once the task has a result.
    pub fn advance(&mut self, kb: &mut KnowledgeBase, world: &mut World, trace: &mut Trace) -> bool {
        if self.result.is_some() {
            return true;
        }
        let t = world.tick();
        let start = *self.start_tick.get_or_insert(t);
        if t.saturating_sub(start) >= self.config.tick_budget {
            self.finish(Outcome::Failure { reason: "timeout".into() }, kb, world, trace);
            return true;
        }
        if self.plan.as_ref().is_some_and(|p| self.step >= p.len()) {
            if !goal_satisfied(&self.goal, &self.belief(kb)) {
                self.invalidate("goal not reached");
            } else {
                self.plan = None;
            }
        }
        if self.plan.is_none() {
            if goal_satisfied(&self.goal, &self.belief(kb)) {
                self.complete(kb, world, trace);
                return true;
            }
            if !self.make_plan(kb, world, trace) {
                return true;
            }
            if self.plan.as_ref().is_some_and(|p| p.is_empty()) {
                self.complete(kb, world, trace);
                return true;
            }
        }
        self.execute_step(kb, world, trace);
        self.result.is_some()
    }

    fn trace(&self, trace: &mut Trace, tick: u64, record: Record) {
        trace.push(tick, Some(self.id), record);
    }

    fn invalidate(&mut self, reason: &str) {
        if let Some(p) = self.plan.take() {
            let remaining = p.len().saturating_sub(self.step);
            if self.replan.is_none() {
                self.replan = Some((reason.to_string(), Some(remaining)));
            }
        } else if self.replan.is_none() {
            self.replan = Some((reason.to_string(), None));
        }
    }

    fn furniture_pool(&self, kb: &KnowledgeBase, world: &World, people: bool) -> Vec<String> {
        let mut pool: Vec<String> = world.search_order().to_vec();
        for f in kb.instances_of("furniture") {
            if kb.is_instance_of(f, "door") || pool.iter().any(|p| p == f) {
                continue;
            }
            if people || kb.holds(&Atom::new("isPlacement", [f])) {
                pool.push(f.to_string());
            }
        }
        pool
    }

    fn is_excluded(&self, subject: &str, site: &str) -> bool {
        self.assumed_sites.iter().any(|s| s == site) || self.searched.get(subject).is_some_and(|s| s.contains(site))
    }

    /// Drops user-named origins once every site there has been tried, so the
    /// object may come from anywhere.
    fn abandon_origins(&mut self, kb: &KnowledgeBase, world: &World, trace: &mut Trace) {
        let t = world.tick();
        let pool = self.furniture_pool(kb, world, false);
        let mut dropped = Vec::new();
        for c in &self.goal.conditions {
            let Some(g) = &c.guard else { continue };
            let Some(origin) = &g.origin else { continue };
            let sites: Vec<&String> = if kb.is_instance_of(origin, "room") {
                pool.iter().filter(|f| kb.holds(&Atom::new("inRoom", [f.as_str(), origin]))).collect()
            } else {
                vec![origin]
            };
            if sites.iter().all(|s| self.is_excluded(&g.type_name, s)) {
                dropped.push((g.type_name.clone(), origin.clone()));
            }
        }
        for (ty, origin) in dropped {
            for c in &mut self.goal.conditions {
                if let Some(g) = c.guard.as_mut().filter(|g| g.type_name == ty && g.origin.as_deref() == Some(&origin)) {
                    g.origin = None;
                }
            }
            self.trace(
                trace,
                t,
                Record::Assumption(AssumptionRecord {
                    action: "abandon".into(),
                    object: ty,
                    site: origin,
                    ordinal: None,
                }),
            );
        }
    }

    /// Location preference: the site the user named, then sites in the room
    /// the user named, then the house search order. Sites already assumed
    /// during this task, or searched for this subject, are skipped.
    fn choose_site(
        &self,
        kb: &KnowledgeBase,
        pool_objects: &[String],
        pool_people: &[String],
        taken: &[&str],
        subject: &str,
        cond: &Condition,
    ) -> Option<String> {
        let person = kb.is_instance_of(subject, "human");
        let mut named: Vec<String> = self
            .spec
            .assumptions
            .iter()
            .filter(|a| a.object == subject)
            .filter_map(|a| a.site.clone())
            .collect();
        if let Some(o) = cond.guard.as_ref().filter(|g| g.type_name == subject).and_then(|g| g.origin.clone()) {
            named.push(o);
        }
        let pool = if person { pool_people } else { pool_objects };
        let mut prefs: Vec<&String> = named.iter().filter(|n| kb.is_instance_of(n, "furniture")).collect();
        for n in named.iter().filter(|n| kb.is_instance_of(n, "room")) {
            prefs.extend(pool.iter().filter(|f| kb.holds(&Atom::new("inRoom", [f.as_str(), n.as_str()]))));
        }
        prefs.extend(pool.iter());
        let rel = if person { "isNear" } else { "isPlaced" };
        prefs
            .into_iter()
            .find(|s| {
                !self.is_excluded(subject, s)
                    && !taken.contains(&s.as_str())
                    && (person || kb.holds(&Atom::new("isPlacement", [s.as_str()])))
                    && !(kb.contains_instance(subject) && kb.believed_false(&Atom::new(rel, [subject, s.as_str()])))
            })
            .cloned()
    }

    /// Builds the start state (minting placeholders where needed), commits
    /// new assumptions to the knowledge base and searches for a plan.
    /// Returns false if the task ended.
    fn make_plan(&mut self, kb: &mut KnowledgeBase, world: &World, trace: &mut Trace) -> bool {
        let t = world.tick();
        let reporting = self.report.is_some();
        if !reporting {
            self.abandon_origins(kb, world, trace);
        }
        let templates: Vec<AssumptionTemplate> = self
            .spec
            .assumptions
            .iter()
            .filter(|a| a.site.as_ref().is_none_or(|s| !self.is_excluded(&a.object, s)))
            .cloned()
            .collect();
        let objects = if reporting { Vec::new() } else { self.spec.objects.clone() };
        let pool_objects = self.furniture_pool(kb, world, false);
        let pool_people = self.furniture_pool(kb, world, true);
        let goal = self.goal.clone();

        let mut chosen: Vec<(String, String)> = Vec::new();
        let res = {
            let mut chooser = |subject: &str, cond: &Condition| {
                let taken: Vec<&str> = chosen.iter().map(|(_, s)| s.as_str()).collect();
                let site = self.choose_site(kb, &pool_objects, &pool_people, &taken, subject, cond)?;
                chosen.push((subject.to_string(), site.clone()));
                Some(site)
            };
            build_initial_state(kb, &objects, &goal, &templates, &mut chooser)
        };
        let init = match res {
            Ok(i) => i,
            Err(e) => {
                let reason = match (&self.report, e) {
                    (Some(r), _) => r.clone(),
                    (None, InitError::NoAssumptionSite(_)) if self.unreachable => "no plan found".to_string(),
                    (None, InitError::NoAssumptionSite(_)) => NO_SITE_LEFT.to_string(),
                    (None, e) => e.to_string(),
                };
                self.finish(Outcome::Failure { reason }, kb, world, trace);
                return false;
            }
        };
        let fresh_sites = !chosen.is_empty();
        for (object, site) in chosen {
            self.assumed_sites.push(site.clone());
            self.trace(
                trace,
                t,
                Record::Assumption(AssumptionRecord {
                    action: "assume".into(),
                    object,
                    site,
                    ordinal: Some(self.assumed_sites.len()),
                }),
            );
        }
        let mut round_minted = Vec::new();
        for m in &init.minted {
            let id = kb.mint_id(&m.type_name);
            debug_assert_eq!(id, m.id);
            let mut e = Entity::new(id.clone(), m.type_name.clone());
            e.properties = m.properties.clone();
            kb.add_entity(e).expect("fresh placeholder id");
            self.minted.insert(id.clone());
            round_minted.push(id);
        }
        let mut round_assumed = Vec::new();
        for a in &init.state.assumed {
            if a.args.iter().all(|x| kb.contains_instance(x)) && !kb.holds(a) && !kb.is_assumed(a) {
                let _ = kb.assert_fluent(Fluent::assumption(a.clone(), Source::Assumed, t));
                round_assumed.push(a.clone());
            }
        }
        self.goal = init.goal;

        let problem =
            PlanningProblem::new(self.belief(kb), self.goal.clone(), self.domain.clone()).with_horizon(self.config.horizon);
        match plan(&problem, self.config.mode, None) {
            Ok(p) => {
                let (reason, old) = self.replan.take().unwrap_or_else(|| ("initial".to_string(), None));
                if reason != "initial" {
                    self.trace(
                        trace,
                        t,
                        Record::Replan(ReplanRecord {
                            reason: reason.clone(),
                            old_length: old,
                            new_length: Some(p.len()),
                            adopted: true,
                        }),
                    );
                }
                self.trace(
                    trace,
                    t,
                    Record::Plan(PlanRecord {
                        reason,
                        steps: p.steps.iter().map(|s| s.action.to_string()).collect(),
                        explored_states: p.explored_states,
                    }),
                );
                self.plan = Some(p);
                self.step = 0;
                self.attempts = 0;
                self.unreachable = false;
                true
            }
            // A site the robot cannot reach is no better than an empty one:
            // take the assumptions back and try the next sites. The tried
            // sites stay spent, so this ends once the pool runs dry.
            Err(PlanError::NoPlan { .. }) if fresh_sites && self.report.is_none() => {
                for a in &round_assumed {
                    kb.retract(a, Epistemic::Assumption);
                }
                for id in round_minted {
                    kb.remove_entity(&id);
                    self.minted.remove(&id);
                }
                self.goal = goal;
                self.unreachable = true;
                self.make_plan(kb, world, trace)
            }
            Err(e) => {
                let reason = match (&self.report, e) {
                    (Some(r), _) => r.clone(),
                    (None, PlanError::NoPlan { .. }) => "no plan found".to_string(),
                    (None, e) => e.to_string(),
                };
                self.finish(Outcome::Failure { reason }, kb, world, trace);
                false
            }
        }
    }

    fn execute_step(&mut self, kb: &mut KnowledgeBase, world: &mut World, trace: &mut Trace) {
        let t = world.tick();
        let index = self.step;
        let action = self.plan.as_ref().expect("planned").steps[index].action.clone();
        let before = self.belief(kb);
        let focus = self.focus(kb);
        let res = world.execute(&action, &focus);
        self.actions += 1;
        self.attempts += 1;
        self.last_attempts = self.attempts;
        self.trace(
            trace,
            t,
            Record::Step(StepRecord {
                index,
                action: action.to_string(),
                ok: res.ok,
                reason: res.reason.clone(),
                attempt: self.attempts,
            }),
        );
        let now = world.tick();

        if res.ok {
            if let Ok(fx) = ground_effects(&self.domain, &before, &action) {
                commit_effects(kb, &fx, now);
            }
            if action.name == "findObj" || action.name == "findPerson" {
                self.verified.insert(action.args[0].clone());
            }
            self.step += 1;
            self.attempts = 0;
            if let Some((from, to)) = res.observation.binding.clone() {
                self.rebind(&from, &to, kb);
            }
            self.ingest(res.observation, "action", kb, world, trace);
            return;
        }

        let reason = res.reason.clone().unwrap_or_default();
        self.ingest(res.observation, "action", kb, world, trace);
        if self.result.is_some() {
            return;
        }
        if res.transient {
            if self.attempts < self.config.retries {
                return;
            }
            self.fatal(reason, kb, world, trace);
            return;
        }
        match action.name.as_str() {
            "findObj" => {
                let (o, l) = (&action.args[0], &action.args[1]);
                let key = kb.entity(o).map(|e| e.type_name.clone()).unwrap_or_else(|| o.clone());
                self.searched.entry(key).or_default().insert(l.clone());
                if self.minted.remove(o) {
                    kb.remove_entity(o);
                    for c in &mut self.goal.conditions {
                        if let Some(cands) = &mut c.candidates {
                            cands.remove(o);
                        }
                    }
                } else {
                    kb.retract(&Atom::new("isPlaced", [o.as_str(), l.as_str()]), Epistemic::Assumption);
                }
            }
            "findPerson" => {
                let (h, l) = (&action.args[0], &action.args[1]);
                self.searched.entry(h.clone()).or_default().insert(l.clone());
                kb.retract(&Atom::new("isNear", [h.as_str(), l.as_str()]), Epistemic::Assumption);
            }
            _ => {}
        }
        self.invalidate(&format!("step failed: {reason}"));
    }

    /// A placeholder turned out to be a real object.
    fn rebind(&mut self, from: &str, to: &str, kb: &mut KnowledgeBase) {
        kb.remove_entity(from);
        self.minted.remove(from);
        if let Some(p) = &mut self.plan {
            p.rename(from, to);
        }
        for c in &mut self.goal.conditions {
            if let Some(cands) = &mut c.candidates {
                if cands.remove(from) {
                    cands.insert(to.to_string());
                }
            }
        }
        if self.verified.remove(from) {
            self.verified.insert(to.to_string());
        }
    }

    /// Folds an observation into the knowledge base, classifies it against
    /// the current plan and reacts.
    fn ingest(&mut self, obs: Observation, source: &str, kb: &mut KnowledgeBase, world: &World, trace: &mut Trace) {
        let t = world.tick();
        let binding = obs.binding.clone();
        let seen_types: Vec<String> = obs.entities.iter().map(|e| e.type_name.clone()).collect();
        let absorbed = absorb(kb, &obs, t);
        for f in &absorbed.forgotten {
            for c in &mut self.goal.conditions {
                if let Some(cands) = &mut c.candidates {
                    cands.remove(f);
                }
            }
        }

        // a look at a site for an open condition's type counts as a search
        if source == "action" {
            if let Some(here) = kb
                .positive_beliefs()
                .find(|a| a.pred == "isNear" && a.args[0] == ROBOT)
                .map(|a| a.args[1].clone())
            {
                let belief = self.belief(kb);
                for c in &self.goal.conditions {
                    let Some(ty) = c.guard_type() else { continue };
                    if crate::planner::condition_satisfied(c, &belief) {
                        continue;
                    }
                    if !seen_types.iter().any(|s| kb.hierarchy().is_a(s, ty)) {
                        self.searched.entry(ty.to_string()).or_default().insert(here.clone());
                    }
                }
            }
        }

        let belief = self.belief(kb);
        let (class, conflicts) = match &self.plan {
            Some(p) if self.step < p.len() => {
                let remaining: Vec<_> = p.steps[self.step..].iter().map(|s| s.action.clone()).collect();
                classify_change(&self.domain, &belief, &remaining, self.step, &self.goal, &absorbed.delta)
            }
            _ => (ChangeClass::Ineffective, Vec::new()),
        };
        if !absorbed.delta.is_empty() || !absorbed.forgotten.is_empty() || binding.is_some() {
            self.trace(
                trace,
                t,
                Record::Observation(ObservationRecord {
                    source: source.to_string(),
                    facts: absorbed.delta.iter().map(|s| s.to_string()).collect(),
                    entities: absorbed.entities.clone(),
                    binding,
                    forgotten: absorbed.forgotten.clone(),
                    class,
                }),
            );
        }
        match class {
            ChangeClass::EffectiveLoss => {
                for c in conflicts {
                    self.trace(trace, t, Record::Conflict(c));
                }
                self.invalidate("loss");
            }
            ChangeClass::EffectiveOpportunity => self.try_opportunity(kb, world, trace),
            ChangeClass::Ineffective => {}
        }
    }

    /// Replans with every known candidate and adopts the result only if it
    /// is strictly shorter than what is left of the current plan.
    fn try_opportunity(&mut self, kb: &mut KnowledgeBase, world: &World, trace: &mut Trace) {
        let t = world.tick();
        let Some(current) = &self.plan else { return };
        let remaining = current.len() - self.step;
        let mut none = |_: &str, _: &Condition| None;
        let Ok(init) = build_initial_state(kb, &[], &self.goal, &[], &mut none) else {
            return;
        };
        let problem = PlanningProblem::new(self.belief_for(kb, &init.goal), init.goal.clone(), self.domain.clone())
            .with_horizon(self.config.horizon);
        let candidate = plan(&problem, self.config.mode, None).ok();
        let adopted = candidate.as_ref().is_some_and(|p| p.len() < remaining);
        self.trace(
            trace,
            t,
            Record::Replan(ReplanRecord {
                reason: "opportunity".into(),
                old_length: Some(remaining),
                new_length: candidate.as_ref().map(Plan::len),
                adopted,
            }),
        );
        if let (true, Some(p)) = (adopted, candidate) {
            self.trace(
                trace,
                t,
                Record::Plan(PlanRecord {
                    reason: "opportunity".into(),
                    steps: p.steps.iter().map(|s| s.action.to_string()).collect(),
                    explored_states: p.explored_states,
                }),
            );
            self.goal = init.goal;
            self.plan = Some(p);
            self.step = 0;
            self.attempts = 0;
            self.opportunity = true;
        }
    }

    /// An unrecoverable step failure. The robot first goes back to whoever
    /// asked, then the task fails with the original reason.
    fn fatal(&mut self, reason: String, kb: &mut KnowledgeBase, world: &World, trace: &mut Trace) {
        self.fatal_attempts.get_or_insert(self.attempts);
        let requester = self.spec.requester.clone().filter(|r| kb.is_instance_of(r, "human"));
        match (&self.report, requester) {
            (None, Some(r)) => {
                self.report = Some(reason.clone());
                self.goal = GoalCondition::new(vec![Condition::ground("isNear", ROBOT, r)]);
                self.plan = None;
                self.replan = Some((format!("report failure: {reason}"), None));
            }
            (Some(r), _) => {
                let r = r.clone();
                self.finish(Outcome::Failure { reason: r }, kb, world, trace);
            }
            (None, None) => self.finish(Outcome::Failure { reason }, kb, world, trace),
        }
    }

    fn complete(&mut self, kb: &mut KnowledgeBase, world: &World, trace: &mut Trace) {
        let outcome = match self.report.take() {
            Some(reason) => Outcome::Failure { reason },
            None => Outcome::Success,
        };
        self.finish(outcome, kb, world, trace);
    }

    fn finish(&mut self, outcome: Outcome, kb: &mut KnowledgeBase, world: &World, trace: &mut Trace) {
        // placeholders are only meaningful while the task runs
        for m in std::mem::take(&mut self.minted) {
            kb.remove_entity(&m);
        }
        let t = world.tick();
        let result = TaskResult {
            task: self.id,
            command: self.command.clone(),
            outcome,
            assumptions: self.assumed_sites.clone(),
            actions: self.actions,
            attempts: self.fatal_attempts.unwrap_or(self.last_attempts),
            opportunity: self.opportunity,
            start_tick: self.start_tick.unwrap_or(t),
            end_tick: t,
        };
        self.trace(
            trace,
            t,
            Record::Result(ResultRecord {
                outcome: result.outcome.name().to_string(),
                reason: result.outcome.reason().map(str::to_string),
                assumptions: result.assumptions.clone(),
                actions: result.actions,
                attempts: result.attempts,
                opportunity: result.opportunity,
            }),
        );
        self.plan = None;
        self.result = Some(result);
    }
}

/// Writes an executed action's effects into the knowledge base.
pub fn commit_effects(kb: &mut KnowledgeBase, fx: &Effects, tick: u64) {
    for d in &fx.deletes {
        let e = if d.assumed { Epistemic::Assumption } else { Epistemic::Belief };
        kb.retract(&d.atom, e);
    }
    for a in &fx.adds {
        let f = if a.assumed {
            Fluent::assumption(a.atom.clone(), Source::Inference, tick)
        } else {
            Fluent::belief(a.atom.clone(), Source::Inference, tick)
        };
        let _ = kb.assert_fluent(f);
    }
}
