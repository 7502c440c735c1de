//! One check per acceptance criterion. Each panics with the offending case
//! and otherwise returns a one-line summary of what it covered.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use butler_core::executor::ExecConfig;
use butler_core::goal::{compile_task, export_asp, AssumptionTemplate, CompileEnv, Condition, GoalCondition, Guard};
use butler_core::kb::{Atom, Entity, KnowledgeBase};
use butler_core::parser::{understand, DiscourseContext, Lexicon};
use butler_core::planner::{
    build_initial_state, ground_preconditions, known_candidates, plan, validate_plan, Domain, GroundAction, PlanError,
    PlanningProblem, SearchMode, Verdict,
};
use butler_core::service::{
    parse_commands, run_scenario, CommandRequest, CommandResponse, Engine, OpenSession, ScenarioReport, TaskStatus,
};
use butler_core::sim::{EventScript, PriorKnowledge, World, WorldEvent, HOUSE_WORLD};
use butler_core::trace::{ConflictKind, Record, Trace, TraceRecord};
use rand::seq::IndexedRandom;
use rand::Rng;

use super::{oracle_length, random_goal, random_kb, random_state, random_world, rng, OBJECT_TYPES};

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

// ---- scenarios ----

pub fn run_bundle(n: u32, mode: SearchMode) -> ScenarioReport {
    let dir = manifest_dir().join("data");
    let events = std::fs::read_to_string(dir.join(format!("scenario{n}.events"))).unwrap();
    let cmds = std::fs::read_to_string(dir.join(format!("scenario{n}.cmds"))).unwrap();
    let script = EventScript::from_json(&events).unwrap();
    let config = ExecConfig {
        mode,
        ..ExecConfig::default()
    };
    run_scenario(HOUSE_WORLD, &script, &parse_commands(&cmds), 0, config).unwrap()
}

pub fn golden_trace_path(n: u32) -> PathBuf {
    manifest_dir().join(format!("data/golden/scenario{n}.trace"))
}

fn records(report: &ScenarioReport) -> Vec<TraceRecord> {
    Trace::parse(&report.trace).expect("trace parses")
}

fn result_of(recs: &[TraceRecord]) -> &butler_core::trace::ResultRecord {
    let mut it = recs.iter().filter_map(|t| match &t.record {
        Record::Result(r) => Some(r),
        _ => None,
    });
    let r = it.next().expect("a result record");
    assert!(it.next().is_none(), "one task, one result");
    r
}

fn assumed(recs: &[TraceRecord], action: &str) -> Vec<(u64, String)> {
    recs.iter()
        .filter_map(|t| match &t.record {
            Record::Assumption(a) if a.action == action => Some((t.seq, a.site.clone())),
            _ => None,
        })
        .collect()
}

/// Runs bundle `n` twice, then checks the outcome it is known for, the
/// golden trace, determinism and the time limit.
pub fn scenario(n: u32) -> String {
    let t = Instant::now();
    let first = run_bundle(n, SearchMode::default());
    let took = t.elapsed();
    assert!(took < Duration::from_secs(5), "scenario {n} took {took:?}");
    assert!(first.passed(), "scenario {n}: {:?}", first.mismatches);
    let again = run_bundle(n, SearchMode::default());
    assert_eq!(first.trace, again.trace, "scenario {n} is not deterministic");
    let golden = std::fs::read_to_string(golden_trace_path(n)).unwrap();
    assert_eq!(first.trace, golden, "scenario {n} drifted from its golden trace");

    let recs = records(&first);
    let res = result_of(&recs);
    let detail = match n {
        1 => {
            assert_eq!(res.outcome, "success");
            assert_eq!(res.assumptions, ["kitchen_table", "cupboard"]);
            "success after assuming kitchen_table then cupboard".to_string()
        }
        2 => {
            assert_eq!(res.outcome, "success");
            let abandoned = assumed(&recs, "abandon");
            assert_eq!(abandoned.len(), 1, "one abandoned site");
            let (at, site) = &abandoned[0];
            // after giving up the named site the plan uses known objects only
            let later = recs.iter().filter(|t| t.seq > *at);
            let mut plans = 0;
            for t in later {
                match &t.record {
                    Record::Assumption(a) => panic!("scenario 2 assumed {} after abandoning", a.site),
                    Record::Plan(p) => {
                        plans += 1;
                        for s in &p.steps {
                            let a = GroundAction::parse(s).unwrap();
                            assert!(
                                a.args.iter().all(|x| !KnowledgeBase::is_minted(x)),
                                "scenario 2 plans with a placeholder: {s}"
                            );
                        }
                    }
                    _ => {}
                }
            }
            assert!(plans > 0);
            format!("success from prior knowledge after abandoning {site}")
        }
        3 => {
            assert_eq!(res.outcome, "success");
            let stale = recs
                .iter()
                .find_map(|t| match &t.record {
                    Record::Observation(o) if !o.forgotten.is_empty() => Some((t.seq, o.forgotten.clone())),
                    _ => None,
                })
                .expect("a stale belief is retracted");
            let fresh: Vec<String> = assumed(&recs, "assume")
                .into_iter()
                .filter(|(seq, _)| *seq > stale.0)
                .map(|(_, s)| s)
                .collect();
            assert_eq!(fresh.len(), 2, "two fresh assumptions after the retraction: {fresh:?}");
            assert_eq!(res.assumptions, fresh);
            format!("retracted {:?}, then assumed {}", stale.1, fresh.join(", "))
        }
        4 => {
            assert_eq!(res.outcome, "success");
            assert!(res.opportunity);
            let original = recs
                .iter()
                .find_map(|t| match &t.record {
                    Record::Plan(p) => Some(p.steps.len()),
                    _ => None,
                })
                .unwrap();
            let (old, new) = recs
                .iter()
                .find_map(|t| match &t.record {
                    Record::Replan(r) if r.reason == "opportunity" && r.adopted => Some((r.old_length?, r.new_length?)),
                    _ => None,
                })
                .expect("an adopted opportunity replan");
            assert!(new < old, "replan {new} is not shorter than the remaining {old}");
            assert!(res.actions < original, "{} actions against an original plan of {original}", res.actions);
            format!("replan {old} -> {new} steps, {} actions against {original} planned", res.actions)
        }
        5 => {
            assert_eq!(res.outcome, "failure");
            assert_eq!(res.reason.as_deref(), Some("grasp failed"));
            assert_eq!(res.attempts, 2);
            let grasps = recs
                .iter()
                .filter(|t| matches!(&t.record, Record::Step(s) if !s.ok && s.action.starts_with("pickup(")))
                .count();
            assert_eq!(grasps, 2, "failed pickups in the trace");
            "failure(grasp failed) after 2 attempts".to_string()
        }
        _ => unreachable!("five scenarios"),
    };
    format!("{detail}; {took:?}, deterministic")
}

// ---- planner ----

pub fn problem(seed: u64, max_objects: usize, horizon: usize) -> PlanningProblem {
    let mut r = rng(seed);
    let world = random_world(&mut r, max_objects);
    let s0 = random_state(&mut r, &world);
    let goal = random_goal(&mut r, &world, &s0);
    PlanningProblem::new(s0, goal, Arc::new(Domain::standard())).with_horizon(horizon)
}

/// 500 random houses; plan lengths equal the breadth-first optimum.
pub fn optimality() -> String {
    let t = Instant::now();
    let mut solved = 0;
    for seed in 0..500 {
        let p = problem(seed, 12, 12);
        let expect = oracle_length(&p.domain, &p.initial, &p.goal, p.horizon);
        let got = plan(&p, SearchMode::default(), None);
        match (expect, &got) {
            (Some(n), Ok(pl)) => {
                assert_eq!(pl.len(), n, "seed {seed}");
                solved += 1;
            }
            (None, Err(PlanError::NoPlan { .. })) => {}
            _ => panic!("seed {seed}: oracle {expect:?}, planner {got:?}"),
        }
    }
    let took = t.elapsed();
    assert!(solved > 250, "generator should mostly produce solvable problems ({solved})");
    assert!(took < Duration::from_secs(60), "took {took:?}");
    format!("500 worlds, {solved} solvable, all lengths agree; {took:?}")
}

/// 1000 fuzzed problems; every returned plan validates.
pub fn soundness() -> String {
    let mut checked = 0;
    for seed in 10_000..11_000 {
        let p = problem(seed, 12, 12);
        if let Ok(pl) = plan(&p, SearchMode::default(), None) {
            assert_eq!(
                validate_plan(&p.domain, &p.initial, &pl.actions(), &p.goal),
                Verdict::Ok,
                "seed {seed}"
            );
            checked += 1;
        }
    }
    assert!(checked > 500, "only {checked} plans");
    format!("1000 problems, {checked} plans, all valid")
}

// ---- initial state ----

/// Whether every condition can get `lower` distinct candidates at once
/// (bipartite matching of condition slots to instances).
fn distinct_cover(conds: &[(usize, &BTreeSet<String>)]) -> bool {
    let slots: Vec<&BTreeSet<String>> = conds.iter().flat_map(|(n, c)| std::iter::repeat_n(*c, *n)).collect();
    let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
    fn augment<'a>(
        i: usize,
        slots: &[&'a BTreeSet<String>],
        owner: &mut BTreeMap<&'a str, usize>,
        seen: &mut BTreeSet<&'a str>,
    ) -> bool {
        for c in slots[i] {
            if !seen.insert(c.as_str()) {
                continue;
            }
            let free = match owner.get(c.as_str()) {
                None => true,
                Some(&j) => augment(j, slots, owner, seen),
            };
            if free {
                owner.insert(c.as_str(), i);
                return true;
            }
        }
        false
    }
    (0..slots.len()).all(|i| augment(i, &slots, &mut owner, &mut BTreeSet::new()))
}

/// 200 random knowledge bases and counted goals: enough candidates for
/// every condition, and placeholders carry the copied facts and one
/// assumption each.
pub fn initial_state() -> String {
    let mut minted_total = 0;
    let mut conditions_total = 0;
    for seed in 0..200u64 {
        let mut r = rng(seed);
        let world = random_world(&mut r, 12);
        let kb = random_kb(&mut r, &world);
        let sites: Vec<String> = world.search_order.clone();
        let rooms = world.rooms.clone();

        let mut conditions = Vec::new();
        let mut templates = Vec::new();
        let mut objects = Vec::new();
        for _ in 0..r.random_range(1..=3) {
            let t = OBJECT_TYPES.choose(&mut r).unwrap().to_string();
            let n = r.random_range(1..=3);
            let mut c = Condition::counted(n, n, "isHeld", t.clone(), "ann");
            let mut guard = Guard {
                type_name: t.clone(),
                ..Guard::default()
            };
            match r.random_range(0..5) {
                0 => guard.origin = Some(rooms.choose(&mut r).unwrap().clone()),
                1 => guard.origin = Some(sites.choose(&mut r).unwrap().clone()),
                2 => {
                    guard.attributes.insert("color".into(), "red".into());
                }
                _ => {}
            }
            c.guard = Some(guard);
            c.verify = r.random_bool(0.2);
            if r.random_bool(0.8) {
                objects.push(t.clone());
            }
            if r.random_bool(0.3) {
                let site = r.random_bool(0.7).then(|| sites.choose(&mut r).unwrap().clone());
                templates.push(AssumptionTemplate { object: t, site });
            }
            conditions.push(c);
        }
        let goal = GoalCondition::new(conditions);

        let mut proposals: Vec<String> = Vec::new();
        let mut chooser = |_: &str, _: &Condition| {
            let s = sites[proposals.len() % sites.len()].clone();
            proposals.push(s.clone());
            Some(s)
        };
        let init = build_initial_state(&kb, &objects, &goal, &templates, &mut chooser)
            .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        let s0 = &init.state;
        minted_total += init.minted.len();

        // every mentioned counted condition can be covered, jointly
        let mentioned: Vec<(usize, &BTreeSet<String>)> = init
            .goal
            .conditions
            .iter()
            .filter(|c| objects.contains(&c.guard_type().unwrap().to_string()))
            .map(|c| (c.lower as usize, c.candidates.as_ref().expect("candidates filled")))
            .collect();
        conditions_total += mentioned.len();
        for (n, cands) in &mentioned {
            assert!(cands.len() >= *n, "seed {seed}: {} < {n}", cands.len());
        }
        assert!(distinct_cover(&mentioned), "seed {seed}: conditions compete for the same instances");

        // known candidates are kept
        for c in &init.goal.conditions {
            let known = known_candidates(&kb, c.guard.as_ref().unwrap());
            assert!(known.is_subset(c.candidates.as_ref().unwrap()), "seed {seed}");
        }

        for m in &init.minted {
            let cond = &init.goal.conditions[m.condition];
            let guard = cond.guard.as_ref().unwrap();
            assert!(objects.contains(&m.type_name), "seed {seed}: minted for an unmentioned type");
            assert_eq!(m.type_name, guard.type_name);
            assert!(KnowledgeBase::is_minted(&m.id) && m.id.starts_with(&format!("{}_a", m.type_name)));
            assert!(!kb.contains_instance(&m.id));
            assert!(cond.candidates.as_ref().unwrap().contains(&m.id), "seed {seed}: {} not a candidate", m.id);
            // copied attributes, memberships and type-level facts
            assert_eq!(m.properties, guard.attributes);
            for t in kb.hierarchy().lineage(&m.type_name).unwrap() {
                let a = Atom::new(t, [m.id.as_str()]);
                assert!(m.facts.contains(&a) && s0.facts.contains(&a), "seed {seed}: {a} missing");
            }
            for a in kb.type_level_facts(&m.type_name, &m.id) {
                assert!(s0.facts.contains(&a), "seed {seed}: {a} missing");
            }
            assert!(s0.facts.contains(&Atom::new("graspable", [m.id.as_str()])));
            // one assumption, at the template's site or a proposed one
            assert_eq!(m.assumptions.len(), 1);
            let a = &m.assumptions[0];
            assert!(s0.assumed.contains(a) && !s0.facts.contains(a));
            assert_eq!((a.pred.as_str(), a.args[0].as_str()), ("isPlaced", m.id.as_str()));
            let site = &a.args[1];
            let from_template = templates
                .iter()
                .find(|t| t.object == m.type_name)
                .and_then(|t| t.site.as_ref());
            match from_template {
                Some(s) => assert_eq!(site, s, "seed {seed}"),
                None => assert!(proposals.contains(site), "seed {seed}"),
            }
        }
        let ids: BTreeSet<&str> = init.minted.iter().map(|m| m.id.as_str()).collect();
        assert_eq!(ids.len(), init.minted.len(), "seed {seed}: duplicate ids");

        // nothing believed about instances is lost
        for a in kb.positive_beliefs().filter(|a| a.args.iter().all(|x| kb.contains_instance(x))) {
            let verified = init.goal.conditions.iter().any(|c| c.verify && c.relation == a.pred);
            assert!(verified || s0.facts.contains(a), "seed {seed}: {a} dropped");
        }
    }
    assert!(minted_total > 100, "the generator should force minting often ({minted_total})");
    format!("200 pairs, {conditions_total} counted conditions covered, {minted_total} placeholders checked")
}

// ---- conflict latency ----

struct Case {
    engine: Engine,
    session: u64,
}

fn latency_case(seed: u64) -> Option<Case> {
    let mut r = rng(seed);
    let mut world = random_world(&mut r, 8);
    // doors stay open so the plans can go anywhere
    for d in &mut world.doors {
        d.open = true;
    }
    world.robot.gripper = None;
    for o in &mut world.objects {
        if o.at == "g1" {
            o.at = world.search_order[0].clone();
        }
    }
    if world.objects.is_empty() {
        return None;
    }
    let speaker = world.people[0].clone();
    let prior = PriorKnowledge {
        entities: world.objects.iter().map(|o| Entity::new(o.id.clone(), o.type_name.clone())).collect(),
        fluents: world
            .objects
            .iter()
            .map(|o| format!("isPlaced({},{})", o.id, o.at))
            .chain([format!("isNear({},{})", speaker.id, speaker.near)])
            .collect(),
    };
    let types: Vec<&str> = world.objects.iter().map(|o| o.type_name.as_str()).collect();
    let text = if r.random_bool(0.5) {
        format!("bring me a {}", types.choose(&mut r).unwrap())
    } else {
        format!("bring me a {} and a {}", types.choose(&mut r).unwrap(), types.choose(&mut r).unwrap())
    };
    let script = EventScript {
        prior,
        ..EventScript::default()
    };
    let mut engine = Engine::load(&world.to_json(), &script, seed, ExecConfig::default()).ok()?;
    let session = engine
        .open_session(OpenSession {
            speaker: Some(speaker.id.clone()),
        })
        .session;
    let resp = engine
        .handle_command(
            session,
            &CommandRequest {
                text,
                ..CommandRequest::default()
            },
        )
        .ok()?;
    matches!(resp, CommandResponse::Accepted { .. }).then_some(Case { engine, session })
}

/// Deletions the robot can see right now that break step `j > current`.
fn visible_deletions(e: &Engine, session: u64) -> Vec<(usize, GroundAction, Atom, WorldEvent)> {
    let domain = Domain::standard();
    let view = &e.plan_view(session).unwrap()[0];
    if view.status != TaskStatus::Running {
        return Vec::new();
    }
    let w = e.world();
    let mut out = Vec::new();
    for (j, text) in view.steps.iter().enumerate().skip(view.step_index + 1) {
        let a = GroundAction::parse(text).unwrap();
        for lit in ground_preconditions(&domain, &a).unwrap() {
            if lit.negated || lit.assumed {
                continue;
            }
            let atom = lit.atom;
            let ev = match atom.pred.as_str() {
                "open" => {
                    let d = w.door(&atom.args[0]).unwrap();
                    (d.open && d.rooms.contains(&w.robot.room)).then(|| WorldEvent::SetDoor {
                        id: d.id.clone(),
                        open: false,
                    })
                }
                "isPlaced" => {
                    let here = w.robot.near.as_deref() == Some(atom.args[1].as_str());
                    let there = w.object(&atom.args[0]).is_some_and(|o| o.at == atom.args[1]);
                    (here && there).then(|| WorldEvent::RemoveObject { id: atom.args[0].clone() })
                }
                _ => None,
            };
            if let Some(ev) = ev {
                out.push((j, a.clone(), atom, ev));
            }
        }
    }
    out
}

/// 100 random deletions of a later step's precondition: the conflict is
/// reported in the tick the change is observed, before that step runs.
pub fn conflict_latency() -> String {
    let mut cases = 0;
    let mut kinds = [0usize; 2];
    for seed in 0..3000u64 {
        if cases == 100 {
            break;
        }
        let Some(Case { mut engine, session }) = latency_case(seed) else {
            continue;
        };
        let mut r = rng(seed ^ 0xdead);
        let mut injected = None;
        for _ in 0..200 {
            engine.tick();
            if engine.is_idle() {
                break;
            }
            let c = visible_deletions(&engine, session);
            if !c.is_empty() && r.random_bool(0.4) {
                let pick = c.choose(&mut r).unwrap().clone();
                let cur = engine.plan_view(session).unwrap()[0].step_index;
                engine.inject_event(pick.3.clone()).unwrap();
                injected = Some((pick, cur, engine.trace().len()));
                break;
            }
        }
        let Some(((j, action, atom, ev), cur, mark)) = injected else {
            continue;
        };
        kinds[usize::from(matches!(ev, WorldEvent::RemoveObject { .. }))] += 1;
        let applied_at = engine.simulator().tick();
        engine.tick();
        let fresh = &engine.trace().records()[mark..];

        let seen = format!("-{atom}");
        let obs = fresh
            .iter()
            .find(|t| matches!(&t.record, Record::Observation(o) if o.facts.contains(&seen)))
            .unwrap_or_else(|| panic!("seed {seed}: {seen} never observed"));
        assert_eq!(obs.tick, applied_at, "seed {seed}: observation is late");

        let conflict = fresh
            .iter()
            .find(|t| matches!(&t.record, Record::Conflict(c) if c.step_index == j && c.action == action))
            .unwrap_or_else(|| panic!("seed {seed}: no conflict for step {j} {action} after {ev:?}"));
        let Record::Conflict(report) = &conflict.record else { unreachable!() };
        assert_eq!(conflict.tick, obs.tick, "seed {seed}");
        assert_eq!(report.kind, ConflictKind::FutureStep, "seed {seed}");
        // the step would have started (j - cur) ticks later at the earliest
        assert!(conflict.tick < obs.tick + (j - cur) as u64);
        // and it does not run before a new plan is made
        for t in fresh.iter().filter(|t| t.seq > conflict.seq) {
            match &t.record {
                Record::Plan(_) => break,
                Record::Step(s) => panic!("seed {seed}: step {} ran before replanning", s.action),
                _ => {}
            }
        }
        cases += 1;
    }
    assert_eq!(cases, 100, "not enough usable cases");
    assert!(kinds[0] > 0 && kinds[1] > 0, "both deletion kinds occur: {kinds:?}");
    format!("100 deletions ({} doors, {} objects), all flagged in the observing tick", kinds[0], kinds[1])
}

// ---- parser ----

pub fn corpus_path() -> PathBuf {
    manifest_dir().join("tests/data/parser_corpus.txt")
}

pub fn render_parse(lex: &Lexicon, text: &str) -> Vec<String> {
    let mut ctx = DiscourseContext::with_speaker("jamie");
    match understand(lex, text, &mut ctx, &BTreeMap::new()) {
        Ok(u) => {
            let line = |name: &str, items: Vec<String>| {
                if items.is_empty() {
                    name.to_string()
                } else {
                    format!("{name} {}", items.join(" "))
                }
            };
            vec![
                line("deps", u.parse.rendered()),
                line("frames", u.frames.iter().map(ToString::to_string).collect()),
                line("mods", u.modifiers.iter().map(ToString::to_string).collect()),
            ]
        }
        Err(e) => vec![format!("error {e}")],
    }
}

/// Commands in the corpus with their expectation lines.
pub fn corpus_entries() -> Vec<(String, Vec<String>)> {
    let text = std::fs::read_to_string(corpus_path()).unwrap();
    let mut entries: Vec<(String, Vec<String>)> = Vec::new();
    for line in text.lines() {
        if let Some(cmd) = line.strip_prefix("> ") {
            entries.push((cmd.to_string(), Vec::new()));
        } else if !line.trim().is_empty() {
            entries.last_mut().expect("expectation before any command").1.push(line.to_string());
        }
    }
    entries
}

pub const REQUIRED_COMMANDS: [&str; 4] = [
    "take this book from the table to the bookshelf",
    "bring James to the office",
    "give Mary two apples",
    "grasp a cup, go to the living room, and give it to Mary",
];

pub fn parser_corpus() -> String {
    let lex = Lexicon::bundled();
    let entries = corpus_entries();
    let mut parsed = 0;
    for (cmd, expected) in &entries {
        assert_eq!(&render_parse(&lex, cmd), expected, "{cmd:?}");
        if !expected[0].starts_with("error") {
            parsed += 1;
        }
    }
    assert!(parsed >= 40, "only {parsed} commands parse");
    for must in REQUIRED_COMMANDS {
        assert!(entries.iter().any(|(c, _)| c == must), "{must:?} missing from the corpus");
    }
    format!("{} golden commands ({parsed} parse), required sentences present", entries.len())
}

// ---- ASP export ----

pub fn asp_golden_path() -> PathBuf {
    manifest_dir().join("tests/data/two_apples.lp")
}

/// The exported program for "give Mary two apples" in the bundled house.
pub fn asp_program() -> String {
    let world = World::load(HOUSE_WORLD, &Default::default(), 0).unwrap();
    let prior = PriorKnowledge {
        fluents: vec!["isNear(jamie,desk)".into()],
        ..Default::default()
    };
    let kb = world.initial_knowledge(&prior).unwrap();
    let mut ctx = DiscourseContext::with_speaker("jamie");
    let u = understand(&Lexicon::bundled(), "give Mary two apples", &mut ctx, &BTreeMap::new()).unwrap();
    let env = CompileEnv {
        requester: Some("jamie".into()),
        ..CompileEnv::default()
    };
    let spec = compile_task(&u.frames, &u.modifiers, &kb, &env).unwrap();
    export_asp(&kb, &spec, &Domain::standard())
}

pub fn asp_export() -> String {
    let text = asp_program();
    let golden = std::fs::read_to_string(asp_golden_path()).unwrap();
    assert_eq!(text, golden, "program drifted from the golden file");
    let lines: Vec<&str> = text.lines().collect();
    for must in ["2 { in(X,mary) : apple(X) } 2.", "drink(A) :- pepsi(A)."] {
        assert!(lines.contains(&must), "{must:?} missing");
    }
    assert_eq!(text, asp_program(), "export is deterministic");
    format!("{} lines, cardinality rule and type rule present", lines.len())
}

// ---- build isolation ----

/// The core crate builds and tests without the service crate or any
/// of its web stack.
pub fn core_stands_alone() -> String {
    let manifest = std::fs::read_to_string(manifest_dir().join("Cargo.toml")).unwrap();
    let mut section = "";
    let mut deps = Vec::new();
    for line in manifest.lines().map(str::trim) {
        if line.starts_with('[') {
            section = line;
            continue;
        }
        if section.contains("dependencies") {
            if let Some((name, _)) = line.split_once('=') {
                deps.push(name.trim().to_string());
            }
        }
    }
    for banned in ["butler", "axum", "tokio", "tower", "clap", "hyper"] {
        assert!(!deps.iter().any(|d| d == banned), "butler-core depends on {banned}");
    }
    format!("{} dependencies, none on the service crate", deps.len())
}
