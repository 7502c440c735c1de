//! World and event-script file formats.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{Atom, TypeHierarchy};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    /// `path` is the JSON path of the offending field, `.` for the root.
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> WorldError {
    WorldError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeDecl {
    pub name: String,
    pub parent: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Door {
    pub id: String,
    pub rooms: [String; 2],
    pub open: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Furniture {
    pub id: String,
    #[serde(rename = "type")]
    pub type_name: String,
    pub room: String,
    #[serde(rename = "isPlacement", default)]
    pub placement: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Object {
    pub id: String,
    #[serde(rename = "type")]
    pub type_name: String,
    /// Furniture id, the gripper id, or a person who was handed the object.
    pub at: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub properties: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Person {
    pub id: String,
    #[serde(rename = "type")]
    pub type_name: String,
    pub near: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Robot {
    pub room: String,
    #[serde(default)]
    pub near: Option<String>,
    /// Object in the gripper.
    #[serde(default)]
    pub gripper: Option<String>,
}

/// Ground truth of the simulated house.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldState {
    /// Types below the five roots, parents first.
    #[serde(default)]
    pub types: Vec<TypeDecl>,
    /// Types whose instances the gripper can hold.
    #[serde(default)]
    pub graspable: Vec<String>,
    pub rooms: Vec<String>,
    #[serde(default)]
    pub doors: Vec<Door>,
    #[serde(default)]
    pub furniture: Vec<Furniture>,
    #[serde(default)]
    pub objects: Vec<Object>,
    #[serde(default)]
    pub people: Vec<Person>,
    pub robot: Robot,
    /// Global order in which placements are assumed and searched.
    #[serde(default)]
    pub search_order: Vec<String>,
    /// Chance that a pickup slips, drawn from the seeded generator.
    #[serde(default)]
    pub grasp_failure_rate: f64,
    #[serde(default)]
    pub tick: u64,
}

pub const ROBOT: &str = "robot";
pub const GRIPPER: &str = "g1";

impl WorldState {
    pub fn from_json(text: &str) -> Result<WorldState, WorldError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let w: WorldState = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(path, e.into_inner().to_string())
        })?;
        w.validate()?;
        Ok(w)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world serializes")
    }

    /// Hierarchy with the file's types plus `door` and `gripper`.
    pub fn hierarchy(&self) -> Result<TypeHierarchy, WorldError> {
        let mut h = TypeHierarchy::new();
        h.add("door", "furniture").map_err(|e| invalid("types", e.to_string()))?;
        h.add("gripper", "robot").map_err(|e| invalid("types", e.to_string()))?;
        for (i, t) in self.types.iter().enumerate() {
            h.add(&t.name, &t.parent)
                .map_err(|e| invalid(format!("types[{i}]"), e.to_string()))?;
        }
        Ok(h)
    }

    pub fn furniture(&self, id: &str) -> Option<&Furniture> {
        self.furniture.iter().find(|f| f.id == id)
    }

    pub fn door(&self, id: &str) -> Option<&Door> {
        self.doors.iter().find(|d| d.id == id)
    }

    pub fn object(&self, id: &str) -> Option<&Object> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn person(&self, id: &str) -> Option<&Person> {
        self.people.iter().find(|p| p.id == id)
    }

    pub fn is_graspable(&self, h: &TypeHierarchy, type_name: &str) -> bool {
        self.graspable.iter().any(|g| h.is_a(type_name, g))
    }

    fn ids(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (i, r) in self.rooms.iter().enumerate() {
            out.push((r.clone(), format!("rooms[{i}]")));
        }
        for (i, d) in self.doors.iter().enumerate() {
            out.push((d.id.clone(), format!("doors[{i}].id")));
        }
        for (i, f) in self.furniture.iter().enumerate() {
            out.push((f.id.clone(), format!("furniture[{i}].id")));
        }
        for (i, o) in self.objects.iter().enumerate() {
            out.push((o.id.clone(), format!("objects[{i}].id")));
        }
        for (i, p) in self.people.iter().enumerate() {
            out.push((p.id.clone(), format!("people[{i}].id")));
        }
        out
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if self.rooms.is_empty() {
            return Err(invalid("rooms", "at least one room is required"));
        }
        let h = self.hierarchy()?;
        let mut seen = BTreeSet::from([ROBOT.to_string(), GRIPPER.to_string()]);
        for (id, path) in self.ids() {
            if id.is_empty() || Atom::parse(&format!("x({id})")).is_none() || id.contains(',') {
                return Err(invalid(path, format!("`{id}` is not a valid id")));
            }
            if h.contains(&id) {
                return Err(invalid(path, format!("`{id}` clashes with a type name")));
            }
            if !seen.insert(id.clone()) {
                return Err(invalid(path, format!("duplicate id `{id}`")));
            }
        }
        let room = |r: &str| self.rooms.iter().any(|x| x == r);
        for (i, d) in self.doors.iter().enumerate() {
            for (k, r) in d.rooms.iter().enumerate() {
                if !room(r) {
                    return Err(invalid(format!("doors[{i}].rooms[{k}]"), format!("unknown room `{r}`")));
                }
            }
            if d.rooms[0] == d.rooms[1] {
                return Err(invalid(format!("doors[{i}].rooms"), "a door joins two different rooms"));
            }
        }
        for (i, f) in self.furniture.iter().enumerate() {
            if !h.is_a(&f.type_name, "furniture") {
                return Err(invalid(format!("furniture[{i}].type"), format!("`{}` is not a furniture type", f.type_name)));
            }
            if !room(&f.room) {
                return Err(invalid(format!("furniture[{i}].room"), format!("unknown room `{}`", f.room)));
            }
        }
        let mut held = None;
        for (i, o) in self.objects.iter().enumerate() {
            if !h.is_a(&o.type_name, "object") {
                return Err(invalid(format!("objects[{i}].type"), format!("`{}` is not an object type", o.type_name)));
            }
            if o.at == GRIPPER {
                if held.replace(o.id.clone()).is_some() {
                    return Err(invalid(format!("objects[{i}].at"), "the gripper holds at most one object"));
                }
                continue;
            }
            match self.furniture(&o.at) {
                Some(f) if f.placement => {}
                Some(_) => {
                    return Err(invalid(format!("objects[{i}].at"), format!("`{}` is not a placement", o.at)));
                }
                None if self.person(&o.at).is_some() => {}
                None => return Err(invalid(format!("objects[{i}].at"), format!("unknown location `{}`", o.at))),
            }
        }
        if held != self.robot.gripper {
            return Err(invalid("robot.gripper", "must name the object whose `at` is the gripper"));
        }
        for (i, p) in self.people.iter().enumerate() {
            if !h.is_a(&p.type_name, "human") {
                return Err(invalid(format!("people[{i}].type"), format!("`{}` is not a human type", p.type_name)));
            }
            if self.furniture(&p.near).is_none() {
                return Err(invalid(format!("people[{i}].near"), format!("unknown furniture `{}`", p.near)));
            }
        }
        if !room(&self.robot.room) {
            return Err(invalid("robot.room", format!("unknown room `{}`", self.robot.room)));
        }
        if let Some(n) = &self.robot.near {
            match self.furniture(n) {
                Some(f) if f.room == self.robot.room => {}
                _ => return Err(invalid("robot.near", format!("`{n}` is not furniture in the robot's room"))),
            }
        }
        for (i, s) in self.search_order.iter().enumerate() {
            if !self.furniture(s).is_some_and(|f| f.placement) {
                return Err(invalid(format!("search_order[{i}]"), format!("`{s}` is not a placement")));
            }
        }
        for (i, g) in self.graspable.iter().enumerate() {
            if !h.contains(g) {
                return Err(invalid(format!("graspable[{i}]"), format!("unknown type `{g}`")));
            }
        }
        if !(0.0..=1.0).contains(&self.grasp_failure_rate) {
            return Err(invalid("grasp_failure_rate", "must be within [0, 1]"));
        }
        Ok(())
    }
}

/// A scripted or injected change to the world.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorldEvent {
    RemoveObject {
        id: String,
    },
    AddObject {
        id: String,
        #[serde(rename = "type")]
        type_name: String,
        at: String,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        properties: BTreeMap<String, String>,
    },
    SetDoor {
        id: String,
        open: bool,
    },
    MovePerson {
        id: String,
        near: String,
    },
    /// The next `count` attempts of `action` fail.
    FailNext {
        action: String,
        count: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub tick: u64,
    #[serde(flatten)]
    pub event: WorldEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorKnowledge {
    /// Instances the robot already knows, beyond rooms, doors, furniture and people.
    #[serde(default)]
    pub entities: Vec<crate::kb::Entity>,
    /// Believed atoms, e.g. `isPlaced(coke1,cupboard)`.
    #[serde(default)]
    pub fluents: Vec<String>,
}

/// What a command is expected to end with.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    /// `success` or `failure`.
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Exact number of assumptions made.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assumptions: Option<usize>,
    /// Sites assumed, in order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<Vec<String>>,
    /// Attempts of the failing step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempts: Option<u32>,
    /// Whether an opportunity replan was adopted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opportunity: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventScript {
    #[serde(default)]
    pub prior: PriorKnowledge,
    #[serde(default)]
    pub events: Vec<TimedEvent>,
    #[serde(default)]
    pub expect: Vec<Expectation>,
}

impl EventScript {
    pub fn from_json(text: &str) -> Result<EventScript, WorldError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(path, e.into_inner().to_string())
        })
    }

    /// Checks ticks are non-decreasing and every id exists in `world` or is
    /// added earlier in the script.
    pub fn validate(&self, world: &WorldState) -> Result<(), WorldError> {
        let h = world.hierarchy()?;
        let mut objects: BTreeSet<String> = world.objects.iter().map(|o| o.id.clone()).collect();
        let mut last = 0;
        for (i, e) in self.events.iter().enumerate() {
            let path = format!("events[{i}]");
            if e.tick < last {
                return Err(invalid(format!("{path}.tick"), "ticks must not decrease"));
            }
            last = e.tick;
            check_event(world, &h, &objects, &e.event).map_err(|m| invalid(path, m))?;
            if let WorldEvent::AddObject { id, .. } = &e.event {
                objects.insert(id.clone());
            }
        }
        for (i, e) in self.prior.entities.iter().enumerate() {
            if !h.contains(&e.type_name) {
                return Err(invalid(format!("prior.entities[{i}].type"), format!("unknown type `{}`", e.type_name)));
            }
        }
        for (i, f) in self.prior.fluents.iter().enumerate() {
            if Atom::parse(f).is_none() {
                return Err(invalid(format!("prior.fluents[{i}]"), format!("`{f}` is not an atom")));
            }
        }
        for (i, x) in self.expect.iter().enumerate() {
            if x.outcome != "success" && x.outcome != "failure" {
                return Err(invalid(format!("expect[{i}].outcome"), "must be `success` or `failure`"));
            }
        }
        Ok(())
    }
}

/// Validates one event against the world; `objects` are the object ids
/// that exist at that point.
pub(crate) fn check_event(
    world: &WorldState,
    h: &TypeHierarchy,
    objects: &BTreeSet<String>,
    e: &WorldEvent,
) -> Result<(), String> {
    match e {
        WorldEvent::RemoveObject { id } => {
            if !objects.contains(id) {
                return Err(format!("unknown object `{id}`"));
            }
        }
        WorldEvent::AddObject { id, type_name, at, .. } => {
            if objects.contains(id) || world.furniture(id).is_some() || world.person(id).is_some() {
                return Err(format!("id `{id}` already exists"));
            }
            if !h.is_a(type_name, "object") {
                return Err(format!("`{type_name}` is not an object type"));
            }
            if !world.furniture(at).is_some_and(|f| f.placement) {
                return Err(format!("`{at}` is not a placement"));
            }
        }
        WorldEvent::SetDoor { id, .. } => {
            if world.door(id).is_none() {
                return Err(format!("unknown door `{id}`"));
            }
        }
        WorldEvent::MovePerson { id, near } => {
            if world.person(id).is_none() {
                return Err(format!("unknown person `{id}`"));
            }
            if world.furniture(near).is_none() {
                return Err(format!("unknown furniture `{near}`"));
            }
        }
        WorldEvent::FailNext { action, .. } => {
            if crate::planner::Domain::standard().schema(action).is_none() {
                return Err(format!("unknown action `{action}`"));
            }
        }
    }
    Ok(())
}
