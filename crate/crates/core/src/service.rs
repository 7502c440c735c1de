//! Transport-independent front end: dialogue sessions, the task queue, the
//! tick loop and read-only views. The HTTP server and the batch runner both
//! drive an [`Engine`], which is what keeps their traces identical.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{absorb, ExecConfig, TaskResult, TaskSession};
use crate::goal::{compile_task, CompileEnv};
use crate::kb::KnowledgeBase;
use crate::parser::{understand, DiscourseContext, Lexicon, ParseError};
use crate::planner::Domain;
use crate::sim::{EventScript, World, WorldError, WorldEvent, WorldState};
use crate::trace::{Trace, TraceRecord};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("unknown session {0}")]
    UnknownSession(u64),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("knowledge base: {0}")]
    Knowledge(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenSession {
    /// Person id of whoever talks in this session; "me" resolves to them.
    #[serde(default)]
    pub speaker: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandRequest {
    pub text: String,
    /// Answers to earlier clarifications: lemma or pronoun to instance id.
    #[serde(default)]
    pub bindings: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CommandResponse {
    Accepted {
        task: u64,
        goal: String,
    },
    ClarificationNeeded {
        slot: String,
        candidates: Vec<String>,
        question: String,
    },
    Rejected {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Queued,
    Running,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskView {
    pub task: u64,
    pub command: String,
    pub status: TaskStatus,
    pub goal: Vec<String>,
    pub step_index: usize,
    pub steps: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<TaskResult>,
}

/// One item of the live stream. `seq` counts stream items, so items are
/// strictly ordered by (tick, seq).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub seq: u64,
    pub tick: u64,
    #[serde(flatten)]
    pub item: StreamItem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamItem {
    Trace { record: TraceRecord },
    /// World state after a tick in which something changed.
    World {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        events: Vec<WorldEvent>,
        snapshot: WorldState,
    },
}

#[derive(Debug, Clone)]
struct Dialogue {
    ctx: DiscourseContext,
    tasks: Vec<u64>,
}

/// Owns the world, the knowledge base and every task. All mutation goes
/// through `&mut self`, so a server wraps it in a single lock.
#[derive(Debug)]
pub struct Engine {
    kb: KnowledgeBase,
    world: World,
    lexicon: Lexicon,
    domain: Arc<Domain>,
    config: ExecConfig,
    dialogues: BTreeMap<u64, Dialogue>,
    queue: VecDeque<TaskSession>,
    active: Option<TaskSession>,
    done: BTreeMap<u64, TaskSession>,
    next_task: u64,
    trace: Trace,
    stream: Vec<StreamEvent>,
    flushed: usize,
}

impl Engine {
    pub fn new(world: World, kb: KnowledgeBase, config: ExecConfig) -> Engine {
        Engine {
            kb,
            world,
            lexicon: Lexicon::bundled(),
            domain: Arc::new(Domain::standard()),
            config,
            dialogues: BTreeMap::new(),
            queue: VecDeque::new(),
            active: None,
            done: BTreeMap::new(),
            next_task: 1,
            trace: Trace::new(),
            stream: Vec::new(),
            flushed: 0,
        }
    }

    /// World file text plus an event script; the robot starts with the map
    /// and the script's prior knowledge.
    pub fn load(world_json: &str, script: &EventScript, seed: u64, config: ExecConfig) -> Result<Engine, EngineError> {
        let world = World::load(world_json, script, seed)?;
        let kb = world
            .initial_knowledge(&script.prior)
            .map_err(|e| EngineError::Knowledge(e.to_string()))?;
        Ok(Engine::new(world, kb, config))
    }

    pub fn open_session(&mut self, req: OpenSession) -> SessionInfo {
        let id = self.dialogues.keys().next_back().map_or(1, |k| k + 1);
        let ctx = match &req.speaker {
            Some(s) => DiscourseContext::with_speaker(s.clone()),
            None => DiscourseContext::new(),
        };
        self.dialogues.insert(id, Dialogue { ctx, tasks: Vec::new() });
        SessionInfo {
            session: id,
            speaker: req.speaker,
        }
    }

    /// Parses and compiles a command. Accepted tasks queue behind the one
    /// that is running.
    pub fn handle_command(&mut self, session: u64, req: &CommandRequest) -> Result<CommandResponse, EngineError> {
        let dlg = self.dialogues.get_mut(&session).ok_or(EngineError::UnknownSession(session))?;
        let u = match understand(&self.lexicon, &req.text, &mut dlg.ctx, &req.bindings) {
            Ok(u) => u,
            Err(ParseError::UnresolvedPronoun { pronoun, .. }) => {
                return Ok(CommandResponse::ClarificationNeeded {
                    question: format!("What does \"{pronoun}\" refer to?"),
                    slot: pronoun,
                    candidates: Vec::new(),
                })
            }
            Err(e) => return Ok(CommandResponse::Rejected { reason: e.to_string() }),
        };
        let env = CompileEnv {
            requester: dlg.ctx.speaker.clone(),
            bindings: req.bindings.clone(),
        };
        let spec = match compile_task(&u.frames, &u.modifiers, &self.kb, &env) {
            Ok(s) => s,
            Err(e) => return Ok(CommandResponse::Rejected { reason: e.to_string() }),
        };
        if let Some(c) = spec.pending_clarifications.first() {
            let question = c
                .question
                .clone()
                .unwrap_or_else(|| format!("Which {}: {}?", c.slot, c.candidates.join(" or ")));
            return Ok(CommandResponse::ClarificationNeeded {
                slot: c.slot.clone(),
                candidates: c.candidates.clone(),
                question,
            });
        }
        if spec.goal.is_empty() {
            return Ok(CommandResponse::Rejected {
                reason: "the command asks for nothing to be done".into(),
            });
        }
        let id = self.next_task;
        let task = match TaskSession::new(id, req.text.clone(), spec, &self.kb, self.domain.clone(), self.config) {
            Ok(t) => t,
            Err(e) => return Ok(CommandResponse::Rejected { reason: e.to_string() }),
        };
        self.next_task += 1;
        let goal = task.goal().conditions.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ");
        dlg.tasks.push(id);
        self.queue.push_back(task);
        Ok(CommandResponse::Accepted { task: id, goal })
    }

    /// Queues a world change for the next tick.
    pub fn inject_event(&mut self, event: WorldEvent) -> Result<(), EngineError> {
        self.world.inject(event)?;
        Ok(())
    }

    /// Advances the world by exactly one tick and returns tasks that
    /// finished during it.
    pub fn tick(&mut self) -> Vec<TaskResult> {
        let t0 = self.world.tick();
        let (events, obs) = self.world.apply_events();
        if self.active.is_none() {
            self.active = self.queue.pop_front();
        }
        let mut finished = Vec::new();
        let mut acted = false;
        match &mut self.active {
            None => {
                absorb(&mut self.kb, &obs, t0);
                self.world.wait();
            }
            Some(task) => {
                task.on_events(obs, &mut self.kb, &self.world, &mut self.trace);
                acted = true;
                loop {
                    let Some(task) = self.active.as_mut() else {
                        self.world.wait();
                        break;
                    };
                    let done = task.advance(&mut self.kb, &mut self.world, &mut self.trace);
                    if done {
                        let task = self.active.take().expect("active");
                        finished.push(task.result().expect("finished").clone());
                        self.done.insert(task.id, task);
                        self.active = self.queue.pop_front();
                    }
                    if self.world.tick() > t0 {
                        break;
                    }
                    if !done {
                        self.world.wait();
                        break;
                    }
                }
            }
        }
        self.flush();
        if acted || !events.is_empty() {
            self.push_item(
                self.world.tick(),
                StreamItem::World {
                    events,
                    snapshot: self.world.state().clone(),
                },
            );
        }
        finished
    }

    fn push_item(&mut self, tick: u64, item: StreamItem) {
        let seq = self.stream.len() as u64;
        self.stream.push(StreamEvent { seq, tick, item });
    }

    fn flush(&mut self) {
        let fresh: Vec<TraceRecord> = self.trace.since(self.flushed).to_vec();
        self.flushed = self.trace.len();
        for record in fresh {
            self.push_item(record.tick, StreamItem::Trace { record });
        }
    }

    pub fn is_idle(&self) -> bool {
        self.active.is_none() && self.queue.is_empty()
    }

    /// Ticks until every queued task has finished or `max_ticks` pass.
    pub fn run_until_idle(&mut self, max_ticks: u64) -> Vec<TaskResult> {
        let mut out = Vec::new();
        let mut n = 0;
        while !self.is_idle() && n < max_ticks {
            out.extend(self.tick());
            n += 1;
        }
        out
    }

    pub fn world(&self) -> &WorldState {
        self.world.state()
    }

    pub fn simulator(&self) -> &World {
        &self.world
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn results(&self) -> Vec<TaskResult> {
        self.done.values().filter_map(|t| t.result().cloned()).collect()
    }

    pub fn stream_since(&self, index: usize) -> &[StreamEvent] {
        &self.stream[index.min(self.stream.len())..]
    }

    pub fn stream_len(&self) -> usize {
        self.stream.len()
    }

    fn view(task: &TaskSession, status: TaskStatus) -> TaskView {
        TaskView {
            task: task.id,
            command: task.command.clone(),
            status,
            goal: task.goal().conditions.iter().map(ToString::to_string).collect(),
            step_index: task.step_index(),
            steps: task
                .plan()
                .map(|p| p.steps.iter().map(|s| s.action.to_string()).collect())
                .unwrap_or_default(),
            result: task.result().cloned(),
        }
    }

    /// Every task submitted through a session, oldest first.
    pub fn plan_view(&self, session: u64) -> Result<Vec<TaskView>, EngineError> {
        let dlg = self.dialogues.get(&session).ok_or(EngineError::UnknownSession(session))?;
        Ok(dlg
            .tasks
            .iter()
            .filter_map(|id| {
                if let Some(t) = self.done.get(id) {
                    return Some(Self::view(t, TaskStatus::Done));
                }
                if let Some(t) = self.active.as_ref().filter(|t| t.id == *id) {
                    return Some(Self::view(t, TaskStatus::Running));
                }
                self.queue.iter().find(|t| t.id == *id).map(|t| Self::view(t, TaskStatus::Queued))
            })
            .collect())
    }
}

/// One line of a `.cmds` file: `speaker: text`, or bare text with no speaker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedCommand {
    pub speaker: Option<String>,
    pub text: String,
}

/// Blank lines and `#` comments are skipped.
pub fn parse_commands(text: &str) -> Vec<ScriptedCommand> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| match l.split_once(':') {
            Some((who, what)) if !who.trim().contains(' ') => ScriptedCommand {
                speaker: Some(who.trim().to_lowercase()),
                text: what.trim().to_string(),
            },
            _ => ScriptedCommand {
                speaker: None,
                text: l.to_string(),
            },
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandOutcome {
    pub command: String,
    pub response: CommandResponse,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<TaskResult>,
}

impl CommandOutcome {
    /// `success`, `failure`, `clarification_needed` or `rejected`.
    pub fn outcome(&self) -> &str {
        match (&self.response, &self.result) {
            (_, Some(r)) => r.outcome.name(),
            (CommandResponse::ClarificationNeeded { .. }, _) => "clarification_needed",
            (CommandResponse::Rejected { .. }, _) => "rejected",
            (CommandResponse::Accepted { .. }, None) => "unfinished",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioReport {
    pub outcomes: Vec<CommandOutcome>,
    pub trace: String,
    pub mismatches: Vec<String>,
    pub final_tick: u64,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Batch run: every command is submitted at tick 0 in file order (one
/// dialogue per speaker), then the world ticks until all tasks end. The
/// report compares outcomes against the script's expectation block.
pub fn run_scenario(
    world_json: &str,
    script: &EventScript,
    commands: &[ScriptedCommand],
    seed: u64,
    config: ExecConfig,
) -> Result<ScenarioReport, EngineError> {
    let mut engine = Engine::load(world_json, script, seed, config)?;
    let mut sessions: BTreeMap<Option<String>, u64> = BTreeMap::new();
    let mut outcomes = Vec::new();
    let mut tasks = Vec::new();
    for c in commands {
        let session = match sessions.get(&c.speaker) {
            Some(s) => *s,
            None => {
                let s = engine
                    .open_session(OpenSession {
                        speaker: c.speaker.clone(),
                    })
                    .session;
                sessions.insert(c.speaker.clone(), s);
                s
            }
        };
        let response = engine.handle_command(
            session,
            &CommandRequest {
                text: c.text.clone(),
                bindings: BTreeMap::new(),
            },
        )?;
        if let CommandResponse::Accepted { task, .. } = &response {
            tasks.push((outcomes.len(), *task));
        }
        outcomes.push(CommandOutcome {
            command: c.text.clone(),
            response,
            result: None,
        });
    }
    let budget = config.tick_budget.saturating_mul(tasks.len().max(1) as u64) + 1;
    engine.run_until_idle(budget);
    let results = engine.results();
    for (i, task) in tasks {
        outcomes[i].result = results.iter().find(|r| r.task == task).cloned();
    }

    let mut mismatches = Vec::new();
    if !script.expect.is_empty() {
        if script.expect.len() != outcomes.len() {
            mismatches.push(format!(
                "{} expectation(s) for {} command(s)",
                script.expect.len(),
                outcomes.len()
            ));
        }
        for (i, (o, e)) in outcomes.iter().zip(&script.expect).enumerate() {
            match &o.result {
                Some(r) => mismatches.extend(r.mismatches(e).into_iter().map(|m| format!("command {}: {m}", i + 1))),
                None if o.outcome() != e.outcome => {
                    mismatches.push(format!("command {}: outcome {} != {}", i + 1, o.outcome(), e.outcome))
                }
                None => {}
            }
        }
    }
    Ok(ScenarioReport {
        outcomes,
        trace: engine.trace().to_ndjson(),
        mismatches,
        final_tick: engine.simulator().tick(),
    })
}
