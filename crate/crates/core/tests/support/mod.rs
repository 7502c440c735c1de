//! Shared helpers for the property suites: a seeded random-house generator
//! and a plain breadth-first oracle built on the reference action semantics.

#![allow(dead_code)]

pub mod criteria;
pub mod oracle;


use butler_core::goal::{Condition, GoalCondition};
use butler_core::kb::{Atom, KnowledgeBase};
use butler_core::planner::{apply_action, Domain, GroundAction, State};
use butler_core::sim::{Door, Furniture, Object, Person, Robot, WorldState, HOUSE_WORLD};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const OBJECT_TYPES: [&str; 6] = ["coke", "beer", "cup", "apple", "book", "bowl"];
const FURNITURE_TYPES: [&str; 4] = ["table", "cabinet", "shelf", "nightstand"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A small house: `rooms` rooms joined in a tree of doors, one to three
/// pieces of furniture each, up to `max_objects` objects and one or two people.
pub fn random_world(rng: &mut ChaCha8Rng, max_objects: usize) -> WorldState {
    let house = WorldState::from_json(HOUSE_WORLD).expect("bundled world");
    let n_rooms = rng.random_range(2..=4);
    let rooms: Vec<String> = (0..n_rooms).map(|i| format!("room{i}")).collect();
    let doors = (1..n_rooms)
        .map(|i| Door {
            id: format!("door{i}"),
            rooms: [rooms[rng.random_range(0..i)].clone(), rooms[i].clone()],
            open: rng.random_bool(0.85),
        })
        .collect();
    let mut furniture = Vec::new();
    for r in &rooms {
        for _ in 0..rng.random_range(1..=3) {
            furniture.push(Furniture {
                id: format!("f{}", furniture.len()),
                type_name: FURNITURE_TYPES.choose(rng).unwrap().to_string(),
                room: r.clone(),
                placement: rng.random_bool(0.85),
            });
        }
    }
    if !furniture.iter().any(|f| f.placement) {
        furniture[0].placement = true;
    }
    let sites: Vec<String> = furniture.iter().filter(|f| f.placement).map(|f| f.id.clone()).collect();
    let n_objects = rng.random_range(0..=max_objects);
    let mut objects: Vec<Object> = (0..n_objects)
        .map(|i| {
            let t = *OBJECT_TYPES.choose(rng).unwrap();
            Object {
                id: format!("{t}{i}"),
                type_name: t.to_string(),
                at: sites.choose(rng).unwrap().clone(),
                properties: Default::default(),
            }
        })
        .collect();
    let people: Vec<Person> = ["ann", "bob"][..rng.random_range(1..=2)]
        .iter()
        .enumerate()
        .map(|(i, p)| Person {
            id: p.to_string(),
            type_name: if i == 0 { "female" } else { "male" }.into(),
            near: furniture.choose(rng).unwrap().id.clone(),
        })
        .collect();
    let start = furniture.choose(rng).unwrap().clone();
    let gripper = match objects.first_mut() {
        Some(o) if rng.random_bool(0.1) => {
            o.at = "g1".into();
            Some(o.id.clone())
        }
        _ => None,
    };
    let mut search_order = sites.clone();
    search_order.shuffle(rng);
    WorldState {
        types: house.types,
        graspable: house.graspable,
        rooms,
        doors,
        furniture,
        objects,
        people,
        robot: Robot {
            room: start.room.clone(),
            near: rng.random_bool(0.7).then_some(start.id),
            gripper,
        },
        search_order,
        grasp_failure_rate: 0.0,
        tick: 0,
    }
}

/// Ground truth of `world` as a planning state, with some knowledge turned
/// into assumptions: a few objects are only assumed where they are and a
/// person's whereabouts may be an assumption too.
pub fn random_state(rng: &mut ChaCha8Rng, world: &WorldState) -> State {
    let sim = butler_core::sim::World::new(world.clone(), &Default::default(), 0).expect("generated world is valid");
    let mut s = sim.truth();
    for o in &world.objects {
        let placed = Atom::new("isPlaced", [o.id.as_str(), o.at.as_str()]);
        if s.facts.contains(&placed) && rng.random_bool(0.25) {
            s.facts.remove(&placed);
            s.facts.retain(|a| !(a.pred == "inRoom" && a.args[0] == o.id));
            // the assumption may point at the wrong site
            let site = if rng.random_bool(0.5) {
                o.at.clone()
            } else {
                world.furniture.iter().filter(|f| f.placement).collect::<Vec<_>>().choose(rng).unwrap().id.clone()
            };
            s.assumed.insert(Atom::new("isPlaced", [o.id.as_str(), site.as_str()]));
        }
    }
    for p in &world.people {
        let near = Atom::new("isNear", [p.id.as_str(), p.near.as_str()]);
        if rng.random_bool(0.25) {
            s.facts.remove(&near);
            s.facts.retain(|a| !(a.pred == "inRoom" && a.args[0] == p.id));
            s.assumed.insert(near);
        }
    }
    s
}

/// One or two goal conditions over what `state` contains.
pub fn random_goal(rng: &mut ChaCha8Rng, world: &WorldState, state: &State) -> GoalCondition {
    let objects: Vec<&Object> = world.objects.iter().collect();
    let people: Vec<&Person> = world.people.iter().collect();
    let sites: Vec<&Furniture> = world.furniture.iter().filter(|f| f.placement).collect();
    let mut conditions = Vec::new();
    for _ in 0..rng.random_range(1..=2) {
        let h = people.choose(rng).unwrap().id.clone();
        let c = match rng.random_range(0..6) {
            0 | 1 if !objects.is_empty() => Condition::ground("isHeld", objects.choose(rng).unwrap().id.clone(), h),
            2 if !objects.is_empty() => {
                Condition::ground("isPlaced", objects.choose(rng).unwrap().id.clone(), sites.choose(rng).unwrap().id.clone())
            }
            3 if !objects.is_empty() => {
                let t = objects.choose(rng).unwrap().type_name.clone();
                let have = state.instances_of(&t).count() as u32;
                let n = rng.random_range(1..=have.min(2));
                Condition::counted(n, n, "isHeld", t, h)
            }
            4 => Condition::ground("isNear", "robot", h),
            _ => Condition::ground("inRoom", "robot", world.rooms.choose(rng).unwrap().clone()),
        };
        conditions.push(c);
    }
    GoalCondition::new(conditions)
}

/// Every ground action applicable in `state` with its successor, by
/// trying each typed parameter tuple against the reference semantics.
pub fn applicable(domain: &Domain, state: &State) -> Vec<(GroundAction, State)> {
    let mut out = Vec::new();
    for schema in &domain.schemas {
        let mut tuples: Vec<Vec<&str>> = vec![Vec::new()];
        for p in &schema.params {
            let pool: Vec<&str> = state.instances_of(&p.type_name).collect();
            tuples = tuples
                .into_iter()
                .flat_map(|t| pool.iter().map(move |x| [t.clone(), vec![*x]].concat()))
                .collect();
        }
        for args in tuples {
            let a = GroundAction::new(&schema.name, args);
            if let Ok(next) = apply_action(domain, state, &a) {
                out.push((a, next));
            }
        }
    }
    out
}

/// Length of a shortest plan within `horizon` steps, by exhaustive
/// breadth-first search over explicit states.
pub fn oracle_length(domain: &Domain, s0: &State, goal: &GoalCondition, horizon: usize) -> Option<usize> {
    oracle::Oracle::new(domain, s0, goal).shortest(horizon)
}

/// A knowledge base for Algorithm-1 style checks: the map plus a random
/// subset of the objects' true positions.
pub fn random_kb(rng: &mut ChaCha8Rng, world: &WorldState) -> KnowledgeBase {
    use butler_core::kb::{Entity, Fluent, Source};
    let sim = butler_core::sim::World::new(world.clone(), &Default::default(), 0).expect("generated world is valid");
    let mut kb = sim.map_knowledge();
    for o in &world.objects {
        if o.at == "g1" || !rng.random_bool(0.5) {
            continue;
        }
        if !kb.contains_instance(&o.id) {
            kb.add_entity(Entity::new(o.id.clone(), o.type_name.clone())).unwrap();
        }
        let atom = Atom::new("isPlaced", [o.id.as_str(), o.at.as_str()]);
        let f = if rng.random_bool(0.8) {
            Fluent::belief(atom, Source::Sensor, 0)
        } else {
            Fluent::assumption(atom, Source::User, 0)
        };
        kb.assert_fluent(f).unwrap();
    }
    kb
}
