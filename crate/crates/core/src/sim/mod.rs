//! Discrete house simulator: ground truth, action execution with failure
//! injection, scripted events and local sensing.

mod file;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use file::{
    Door, EventScript, Expectation, Furniture, Object, Person, PriorKnowledge, Robot, TimedEvent, TypeDecl,
    WorldError, WorldEvent, WorldState, GRIPPER, ROBOT,
};

use crate::kb::{Atom, Entity, Fluent, KbError, KnowledgeBase, Source, TypeHierarchy};
use crate::planner::{GroundAction, State};

/// One sensed atom.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sensed {
    pub atom: Atom,
    pub positive: bool,
}

impl std::fmt::Display for Sensed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "-{}", self.atom)
        }
    }
}

/// What the robot perceives from its pose after an action or event.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub facts: Vec<Sensed>,
    /// Instances seen, with their perception label as type.
    pub entities: Vec<Entity>,
    /// A placeholder id matched to the real object it stood for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding: Option<(String, String)>,
}

impl Observation {
    pub fn is_empty(&self) -> bool {
        self.facts.is_empty() && self.entities.is_empty() && self.binding.is_none()
    }

    fn push(&mut self, atom: Atom, positive: bool) {
        let s = Sensed { atom, positive };
        if !self.facts.contains(&s) {
            self.facts.push(s);
        }
    }

    fn see(&mut self, e: Entity) {
        if !self.entities.iter().any(|x| x.id == e.id) {
            self.entities.push(e);
        }
    }

    fn normalize(&mut self) {
        self.facts.sort();
        self.entities.sort_by(|a, b| a.id.cmp(&b.id));
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionResult {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// The failure came from the actuator rather than the world; retrying
    /// the same action may succeed.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub transient: bool,
    pub observation: Observation,
}

/// The simulated world plus its event script and failure injection state.
#[derive(Debug, Clone)]
pub struct World {
    state: WorldState,
    hierarchy: TypeHierarchy,
    script: Vec<TimedEvent>,
    next_event: usize,
    injected: Vec<WorldEvent>,
    fail_next: BTreeMap<String, u32>,
    rng: ChaCha8Rng,
}

fn failure_reason(action: &str) -> String {
    match action {
        "pickup" => "grasp failed".to_string(),
        "putdown" => "release failed".to_string(),
        other => format!("{other} failed"),
    }
}

impl World {
    pub fn new(state: WorldState, script: &EventScript, seed: u64) -> Result<World, WorldError> {
        state.validate()?;
        script.validate(&state)?;
        let hierarchy = state.hierarchy()?;
        Ok(World {
            state,
            hierarchy,
            script: script.events.clone(),
            next_event: 0,
            injected: Vec::new(),
            fail_next: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn load(world_json: &str, script: &EventScript, seed: u64) -> Result<World, WorldError> {
        World::new(WorldState::from_json(world_json)?, script, seed)
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn hierarchy(&self) -> &TypeHierarchy {
        &self.hierarchy
    }

    pub fn tick(&self) -> u64 {
        self.state.tick
    }

    /// Lets one tick pass with the robot idle.
    pub fn wait(&mut self) {
        self.state.tick += 1;
    }

    pub fn search_order(&self) -> &[String] {
        &self.state.search_order
    }

    /// Ground truth as planner atoms, for co-simulation checks.
    pub fn truth(&self) -> State {
        let mut s = State::new();
        let f = &mut s.facts;
        let lineage = |id: &str, t: &str, f: &mut BTreeSet<Atom>| {
            for x in self.hierarchy.lineage(t).unwrap_or_default() {
                f.insert(Atom::new(x, [id]));
            }
        };
        lineage(ROBOT, "robot", f);
        lineage(GRIPPER, "gripper", f);
        for r in &self.state.rooms {
            lineage(r, "room", f);
        }
        for d in &self.state.doors {
            lineage(&d.id, "door", f);
            f.insert(Atom::new("door", [d.id.as_str(), &d.rooms[0], &d.rooms[1]]));
            f.insert(Atom::new("door", [d.id.as_str(), &d.rooms[1], &d.rooms[0]]));
            if d.open {
                f.insert(Atom::new("open", [d.id.as_str()]));
            }
        }
        for x in &self.state.furniture {
            lineage(&x.id, &x.type_name, f);
            f.insert(Atom::new("inRoom", [x.id.as_str(), &x.room]));
            if x.placement {
                f.insert(Atom::new("isPlacement", [x.id.as_str()]));
            }
        }
        for p in &self.state.people {
            lineage(&p.id, &p.type_name, f);
            f.insert(Atom::new("isNear", [p.id.as_str(), &p.near]));
            if let Some(r) = self.room_of_furniture(&p.near) {
                f.insert(Atom::new("inRoom", [p.id.as_str(), r]));
            }
        }
        for o in &self.state.objects {
            lineage(&o.id, &o.type_name, f);
            if self.state.is_graspable(&self.hierarchy, &o.type_name) {
                f.insert(Atom::new("graspable", [o.id.as_str()]));
            }
            if o.at == GRIPPER {
                f.insert(Atom::new("inHand", [o.id.as_str(), GRIPPER]));
                f.insert(Atom::new("isHeld", [o.id.as_str(), ROBOT]));
            } else if self.state.person(&o.at).is_some() {
                f.insert(Atom::new("isHeld", [o.id.as_str(), &o.at]));
            } else {
                f.insert(Atom::new("isPlaced", [o.id.as_str(), &o.at]));
                if let Some(r) = self.room_of_furniture(&o.at) {
                    f.insert(Atom::new("inRoom", [o.id.as_str(), r]));
                }
            }
        }
        f.insert(Atom::new("inRoom", [ROBOT, &self.state.robot.room]));
        if let Some(n) = &self.state.robot.near {
            f.insert(Atom::new("isNear", [ROBOT, n.as_str()]));
        }
        if self.state.robot.gripper.is_none() {
            f.insert(Atom::new("empty", [GRIPPER]));
        }
        s
    }

    fn room_of_furniture(&self, id: &str) -> Option<&str> {
        self.state.furniture(id).map(|f| f.room.as_str())
    }

    /// What the robot knows before sensing anything: the type hierarchy, the
    /// floor plan with door states, furniture, its own pose and gripper, and
    /// who lives in the house (but not where they are).
    pub fn map_knowledge(&self) -> KnowledgeBase {
        let mut kb = KnowledgeBase::new(self.hierarchy.clone());
        let w = &self.state;
        let add = |kb: &mut KnowledgeBase, id: &str, t: &str| kb.add_entity(Entity::new(id, t)).expect("validated world");
        add(&mut kb, ROBOT, "robot");
        add(&mut kb, GRIPPER, "gripper");
        for r in &w.rooms {
            add(&mut kb, r, "room");
        }
        for d in &w.doors {
            add(&mut kb, &d.id, "door");
        }
        for f in &w.furniture {
            add(&mut kb, &f.id, &f.type_name);
        }
        for p in &w.people {
            add(&mut kb, &p.id, &p.type_name);
        }
        let mut believe = |a: Atom, positive: bool| {
            let f = if positive {
                Fluent::belief(a, Source::Sensor, w.tick)
            } else {
                Fluent::negative(a, Source::Sensor, w.tick)
            };
            kb.assert_fluent(f).expect("validated world");
        };
        for g in &w.graspable {
            believe(Atom::new("graspable", [g.as_str()]), true);
        }
        for d in &w.doors {
            believe(Atom::new("door", [d.id.as_str(), &d.rooms[0], &d.rooms[1]]), true);
            believe(Atom::new("open", [d.id.as_str()]), d.open);
        }
        for f in &w.furniture {
            believe(Atom::new("inRoom", [f.id.as_str(), &f.room]), true);
            if f.placement {
                believe(Atom::new("isPlacement", [f.id.as_str()]), true);
            }
        }
        believe(Atom::new("inRoom", [ROBOT, &w.robot.room]), true);
        if let Some(n) = &w.robot.near {
            believe(Atom::new("isNear", [ROBOT, n.as_str()]), true);
        }
        match &w.robot.gripper {
            None => believe(Atom::new("empty", [GRIPPER]), true),
            Some(o) => {
                let t = w.object(o).expect("validated").type_name.clone();
                add(&mut kb, o, &t);
                let mut believe = |a: Atom| {
                    kb.assert_fluent(Fluent::belief(a, Source::Sensor, w.tick)).expect("validated world");
                };
                believe(Atom::new("inHand", [o.as_str(), GRIPPER]));
                believe(Atom::new("isHeld", [o.as_str(), ROBOT]));
            }
        }
        kb
    }

    /// Map knowledge plus the script's prior beliefs.
    pub fn initial_knowledge(&self, prior: &PriorKnowledge) -> Result<KnowledgeBase, KbError> {
        let mut kb = self.map_knowledge();
        for e in &prior.entities {
            if !kb.contains_instance(&e.id) {
                kb.add_entity(e.clone())?;
            }
        }
        for f in &prior.fluents {
            let atom = Atom::parse(f).ok_or_else(|| KbError::Snapshot(format!("`{f}` is not an atom")))?;
            kb.assert_fluent(Fluent::belief(atom, Source::User, self.state.tick))?;
        }
        Ok(kb)
    }

    /// Queues an event for the next tick after checking it against the
    /// current world.
    pub fn inject(&mut self, event: WorldEvent) -> Result<(), WorldError> {
        let mut objects: BTreeSet<String> = self.state.objects.iter().map(|o| o.id.clone()).collect();
        for e in &self.injected {
            match e {
                WorldEvent::AddObject { id, .. } => {
                    objects.insert(id.clone());
                }
                WorldEvent::RemoveObject { id } => {
                    objects.remove(id);
                }
                _ => {}
            }
        }
        file::check_event(&self.state, &self.hierarchy, &objects, &event).map_err(|m| file::invalid("event", m))?;
        self.injected.push(event);
        Ok(())
    }

    pub fn pending_injected(&self) -> usize {
        self.injected.len()
    }

    /// Applies scripted events due at the current tick and every injected
    /// event. Returns the applied events and what the robot perceives of
    /// them. Events that became invalid (an object already gone) are skipped.
    pub fn apply_events(&mut self) -> (Vec<WorldEvent>, Observation) {
        let mut due = Vec::new();
        while self.next_event < self.script.len() && self.script[self.next_event].tick <= self.state.tick {
            due.push(self.script[self.next_event].event.clone());
            self.next_event += 1;
        }
        due.append(&mut self.injected);
        let mut applied = Vec::new();
        let mut obs = Observation::default();
        for e in due {
            if self.apply_event(&e, &mut obs) {
                applied.push(e);
            }
        }
        obs.normalize();
        (applied, obs)
    }

    fn near(&self) -> Option<&str> {
        self.state.robot.near.as_deref()
    }

    fn apply_event(&mut self, e: &WorldEvent, obs: &mut Observation) -> bool {
        match e {
            WorldEvent::RemoveObject { id } => {
                let Some(i) = self.state.objects.iter().position(|o| &o.id == id) else {
                    return false;
                };
                let o = self.state.objects.remove(i);
                if o.at == GRIPPER {
                    self.state.robot.gripper = None;
                    obs.push(Atom::new("inHand", [o.id.as_str(), GRIPPER]), false);
                    obs.push(Atom::new("empty", [GRIPPER]), true);
                } else if Some(o.at.as_str()) == self.near() {
                    obs.push(Atom::new("isPlaced", [o.id.as_str(), &o.at]), false);
                }
            }
            WorldEvent::AddObject {
                id,
                type_name,
                at,
                properties,
            } => {
                if self.state.object(id).is_some() {
                    return false;
                }
                self.state.objects.push(Object {
                    id: id.clone(),
                    type_name: type_name.clone(),
                    at: at.clone(),
                    properties: properties.clone(),
                });
                if Some(at.as_str()) == self.near() {
                    self.observe_object(id, obs);
                }
            }
            WorldEvent::SetDoor { id, open } => {
                let Some(d) = self.state.doors.iter_mut().find(|d| &d.id == id) else {
                    return false;
                };
                d.open = *open;
                let here = d.rooms.contains(&self.state.robot.room);
                if here {
                    obs.push(Atom::new("open", [id.as_str()]), *open);
                }
            }
            WorldEvent::MovePerson { id, near } => {
                let here = self.near().map(str::to_string);
                let Some(p) = self.state.people.iter_mut().find(|p| &p.id == id) else {
                    return false;
                };
                let old = std::mem::replace(&mut p.near, near.clone());
                if here.as_deref() == Some(old.as_str()) {
                    obs.push(Atom::new("isNear", [id.as_str(), &old]), false);
                }
                if here.as_deref() == Some(near.as_str()) {
                    obs.push(Atom::new("isNear", [id.as_str(), near.as_str()]), true);
                }
            }
            WorldEvent::FailNext { action, count } => {
                *self.fail_next.entry(action.clone()).or_default() += count;
            }
        }
        true
    }

    fn observe_object(&self, id: &str, obs: &mut Observation) {
        let o = self.state.object(id).expect("present");
        obs.see(Entity {
            id: o.id.clone(),
            type_name: o.type_name.clone(),
            properties: o.properties.clone(),
        });
        obs.push(Atom::new("isPlaced", [o.id.as_str(), &o.at]), true);
    }

    /// Everything visible from the current pose: doors of the room, and
    /// the objects and people at the furniture the robot stands by. Goal
    /// objects in `focus` that are expected but absent there are reported
    /// as negative.
    pub fn sense(&self, focus: &BTreeSet<String>) -> Observation {
        let mut obs = Observation::default();
        let room = &self.state.robot.room;
        for d in &self.state.doors {
            if d.rooms.contains(room) {
                obs.push(Atom::new("open", [d.id.as_str()]), d.open);
            }
        }
        if let Some(l) = self.near() {
            for o in &self.state.objects {
                if o.at == l {
                    self.observe_object(&o.id, &mut obs);
                }
            }
            for p in &self.state.people {
                if p.near == l {
                    obs.push(Atom::new("isNear", [p.id.as_str(), l]), true);
                }
            }
            for id in focus {
                if KnowledgeBase::is_minted(id) {
                    continue;
                }
                if let Some(o) = self.state.object(id) {
                    if o.at != l {
                        obs.push(Atom::new("isPlaced", [id.as_str(), l]), false);
                    }
                } else if let Some(p) = self.state.person(id) {
                    if p.near != l {
                        obs.push(Atom::new("isNear", [id.as_str(), l]), false);
                    }
                } else if !self.state.furniture.iter().any(|f| &f.id == id) && !self.state.rooms.contains(id) {
                    // gone from the world altogether
                    obs.push(Atom::new("isPlaced", [id.as_str(), l]), false);
                }
            }
        }
        obs.normalize();
        obs
    }

    fn injected_failure(&mut self, action: &str) -> bool {
        if let Some(n) = self.fail_next.get_mut(action) {
            if *n > 0 {
                *n -= 1;
                return true;
            }
        }
        action == "pickup" && self.state.grasp_failure_rate > 0.0 && self.rng.random_bool(self.state.grasp_failure_rate)
    }

    /// A placeholder stands for any object whose type falls under the
    /// placeholder's type (`coke_a1` matches any coke).
    fn placeholder_type(&self, id: &str) -> Option<String> {
        if !KnowledgeBase::is_minted(id) || self.state.object(id).is_some() {
            return None;
        }
        let (t, _) = id.rsplit_once("_a")?;
        self.hierarchy.contains(t).then(|| t.to_string())
    }

    /// Executes one action against ground truth. Takes one tick whatever the
    /// outcome; the observation reflects the pose afterwards.
    pub fn execute(&mut self, action: &GroundAction, focus: &BTreeSet<String>) -> ActionResult {
        let outcome = self.run(action);
        self.state.tick += 1;
        let mut observation = self.sense(focus);
        let (ok, reason, transient) = match outcome {
            Ok(binding) => {
                if let Some((from, to)) = binding {
                    observation.binding = Some((from, to));
                }
                (true, None, false)
            }
            Err(Fail { reason, absent, transient }) => {
                if let Some(a) = absent {
                    observation.push(a, false);
                    observation.normalize();
                }
                (false, Some(reason), transient)
            }
        };
        ActionResult {
            ok,
            reason,
            transient,
            observation,
        }
    }

    fn run(&mut self, a: &GroundAction) -> Result<Option<(String, String)>, Fail> {
        let args: Vec<&str> = a.args.iter().map(String::as_str).collect();
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(Fail::new(format!("malformed action {a}")))
            }
        };
        let near_is = |w: &World, l: &str| w.state.robot.near.as_deref() == Some(l);
        match a.name.as_str() {
            "moveTo" => {
                arity(2)?;
                let (l, r) = (args[0], args[1]);
                if self.state.robot.room != r {
                    return Err(Fail::new(format!("robot is not in {r}")));
                }
                if self.room_of_furniture(l) != Some(r) {
                    return Err(Fail::new(format!("{l} is not in {r}")));
                }
                if near_is(self, l) {
                    return Err(Fail::new(format!("already near {l}")));
                }
                self.state.robot.near = Some(l.to_string());
                Ok(None)
            }
            "moveIn" => {
                arity(3)?;
                let (r2, r1, d) = (args[0], args[1], args[2]);
                let door = self.state.door(d).ok_or_else(|| Fail::new(format!("unknown door {d}")))?;
                let joins = (door.rooms[0] == r1 && door.rooms[1] == r2) || (door.rooms[0] == r2 && door.rooms[1] == r1);
                if !joins {
                    return Err(Fail::new(format!("{d} does not join {r1} and {r2}")));
                }
                if !door.open {
                    return Err(Fail::new("door closed".to_string()));
                }
                if self.state.robot.room != r1 {
                    return Err(Fail::new(format!("robot is not in {r1}")));
                }
                self.state.robot.room = r2.to_string();
                self.state.robot.near = None;
                Ok(None)
            }
            "pickup" => {
                arity(3)?;
                let (o, l, g) = (args[0], args[1], args[2]);
                if g != GRIPPER || self.state.robot.gripper.is_some() {
                    return Err(Fail::new("gripper is not empty".to_string()));
                }
                if !near_is(self, l) {
                    return Err(Fail::new(format!("robot is not near {l}")));
                }
                let Some(obj) = self.state.object(o) else {
                    return Err(Fail::absent(format!("{o} is not at {l}"), Atom::new("isPlaced", [o, l])));
                };
                if obj.at != l {
                    return Err(Fail::absent(format!("{o} is not at {l}"), Atom::new("isPlaced", [o, l])));
                }
                if !self.state.is_graspable(&self.hierarchy, &obj.type_name) {
                    return Err(Fail::new(format!("{o} cannot be grasped")));
                }
                if self.injected_failure("pickup") {
                    return Err(Fail::injected("pickup"));
                }
                self.set_at(o, GRIPPER);
                self.state.robot.gripper = Some(o.to_string());
                Ok(None)
            }
            "putdown" => {
                arity(3)?;
                let (o, l, g) = (args[0], args[1], args[2]);
                if g != GRIPPER || self.state.robot.gripper.as_deref() != Some(o) {
                    return Err(Fail::new(format!("{o} is not in the gripper")));
                }
                if !near_is(self, l) {
                    return Err(Fail::new(format!("robot is not near {l}")));
                }
                if !self.state.furniture(l).is_some_and(|f| f.placement) {
                    return Err(Fail::new(format!("{l} is not a placement")));
                }
                if self.injected_failure("putdown") {
                    return Err(Fail::injected("putdown"));
                }
                self.set_at(o, l);
                self.state.robot.gripper = None;
                Ok(None)
            }
            "findPerson" => {
                arity(2)?;
                let (h, l) = (args[0], args[1]);
                if !near_is(self, l) {
                    return Err(Fail::new(format!("robot is not near {l}")));
                }
                if self.injected_failure("findPerson") {
                    return Err(Fail::injected("findPerson"));
                }
                match self.state.person(h) {
                    Some(p) if p.near == l => Ok(None),
                    _ => Err(Fail::absent("not found".to_string(), Atom::new("isNear", [h, l]))),
                }
            }
            "findObj" => {
                arity(2)?;
                let (o, l) = (args[0], args[1]);
                if !near_is(self, l) {
                    return Err(Fail::new(format!("robot is not near {l}")));
                }
                if self.injected_failure("findObj") {
                    return Err(Fail::injected("findObj"));
                }
                if let Some(t) = self.placeholder_type(o) {
                    let found = self
                        .state
                        .objects
                        .iter()
                        .find(|x| x.at == l && self.hierarchy.is_a(&x.type_name, &t))
                        .map(|x| x.id.clone());
                    return match found {
                        Some(real) => Ok(Some((o.to_string(), real))),
                        None => Err(Fail::absent("not found".to_string(), Atom::new("isPlaced", [o, l]))),
                    };
                }
                match self.state.object(o) {
                    Some(x) if x.at == l => Ok(None),
                    _ => Err(Fail::absent("not found".to_string(), Atom::new("isPlaced", [o, l]))),
                }
            }
            "give" => {
                arity(3)?;
                let (o, h, g) = (args[0], args[1], args[2]);
                if g != GRIPPER || self.state.robot.gripper.as_deref() != Some(o) {
                    return Err(Fail::new(format!("{o} is not in the gripper")));
                }
                let Some(p) = self.state.person(h) else {
                    return Err(Fail::new(format!("{h} is not a person")));
                };
                if !near_is(self, &p.near.clone()) {
                    return Err(Fail::absent(format!("{h} is not here"), Atom::new("isNear", [h, self.near().unwrap_or("nowhere")])));
                }
                if self.injected_failure("give") {
                    return Err(Fail::injected("give"));
                }
                self.set_at(o, h);
                self.state.robot.gripper = None;
                Ok(None)
            }
            other => Err(Fail::new(format!("unknown action {other}"))),
        }
    }

    fn set_at(&mut self, id: &str, at: &str) {
        if let Some(o) = self.state.objects.iter_mut().find(|o| o.id == id) {
            o.at = at.to_string();
        }
    }
}

struct Fail {
    reason: String,
    absent: Option<Atom>,
    transient: bool,
}

impl Fail {
    fn new(reason: String) -> Fail {
        Fail {
            reason,
            absent: None,
            transient: false,
        }
    }

    fn absent(reason: String, atom: Atom) -> Fail {
        Fail {
            reason,
            absent: Some(atom),
            transient: false,
        }
    }

    fn injected(action: &str) -> Fail {
        Fail {
            reason: failure_reason(action),
            absent: None,
            transient: true,
        }
    }
}

/// The bundled house: five rooms, two bedrooms among them.
pub const HOUSE_WORLD: &str = include_str!("../../data/house.world");
