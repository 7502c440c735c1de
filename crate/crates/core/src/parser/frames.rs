use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::deps::Parse;
use super::lexicon::{Pos, Token};
use super::ParseError;

/// Primitive action classes the goal compiler understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Primitive {
    Get,
    Give,
    Move,
    Find,
    Put,
    /// Accompany a person somewhere. Experimental: compiled as a move goal
    /// for the person.
    Guide,
}

/// A filled frame slot. `token` points back into the utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub value: String,
    pub token: usize,
    /// Token the value was resolved from, for pronouns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub antecedent: Option<usize>,
}

impl Slot {
    fn of(t: &Token) -> Slot {
        Slot {
            value: t.lemma.clone(),
            token: t.index,
            antecedent: None,
        }
    }
}

/// `action(Actor, Action, Object, Source, Goal)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionFrame {
    pub actor: String,
    /// Verb lemma as spoken.
    pub verb: String,
    pub action: Primitive,
    pub object: Option<Slot>,
    pub source: Option<Slot>,
    pub goal: Option<Slot>,
    pub order: usize,
}

impl fmt::Display for ActionFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = |x: &Option<Slot>| x.as_ref().map_or("NIL".to_string(), |s| s.value.clone());
        write!(
            f,
            "action({},{},{},{},{})",
            self.actor,
            self.verb,
            s(&self.object),
            s(&self.source),
            s(&self.goal)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Number,
    Size,
    Color,
    Possession,
    /// Determiner of the noun phrase; `the`/`this` mark a definite reference.
    Det,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModValue {
    Int(u32),
    Text(String),
}

impl fmt::Display for ModValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModValue::Int(n) => write!(f, "{n}"),
            ModValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Modifier {
    pub attribute: Attribute,
    /// Lemma of the modified noun.
    pub target: String,
    pub target_index: usize,
    pub value: ModValue,
}

impl Modifier {
    pub fn is_definite(&self) -> bool {
        self.attribute == Attribute::Det
            && matches!(&self.value, ModValue::Text(v) if matches!(v.as_str(), "the" | "this" | "that" | "these" | "those"))
    }
}

impl fmt::Display for Modifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.attribute {
            Attribute::Number => "number",
            Attribute::Size => "size",
            Attribute::Color => "color",
            Attribute::Possession => "possession",
            Attribute::Det => "det",
        };
        write!(f, "{name}({},{})", self.target, self.value)
    }
}

pub const SUPPORTED_NUMERALS: &str = "one, two, three, four, five, six, seven, eight, nine, ten, or digits";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MentionKind {
    Person,
    Object,
    Location,
    Room,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub lemma: String,
    pub kind: MentionKind,
    pub utterance: usize,
    pub index: usize,
}

/// Nouns heard so far, for pronoun resolution across and within utterances.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscourseContext {
    pub speaker: Option<String>,
    mentions: Vec<Mention>,
    utterance: usize,
}

pub fn mention_kind(t: &Token) -> Option<MentionKind> {
    if !t.pos.is_noun() {
        return None;
    }
    Some(match t.category.as_str() {
        "person" => MentionKind::Person,
        "location" => MentionKind::Location,
        "room" => MentionKind::Room,
        "robot" => return None,
        _ => MentionKind::Object,
    })
}

impl DiscourseContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_speaker(speaker: impl Into<String>) -> Self {
        DiscourseContext {
            speaker: Some(speaker.into()),
            ..Self::default()
        }
    }

    /// Opens a new utterance and records its nouns.
    pub fn hear(&mut self, tokens: &[Token]) {
        self.utterance += 1;
        for t in tokens {
            if let Some(kind) = mention_kind(t) {
                self.mentions.push(Mention {
                    lemma: t.lemma.clone(),
                    kind,
                    utterance: self.utterance,
                    index: t.index,
                });
            }
        }
    }

    pub fn current_utterance(&self) -> usize {
        self.utterance
    }

    /// Mentions strictly before token `index` of the current utterance,
    /// most recent first.
    pub fn before(&self, index: usize) -> impl Iterator<Item = &Mention> {
        let cur = self.utterance;
        self.mentions
            .iter()
            .rev()
            .filter(move |m| m.utterance < cur || m.index < index)
    }

    pub fn mentions(&self) -> &[Mention] {
        &self.mentions
    }
}

fn family(t: &Token) -> &str {
    t.category.strip_prefix("verb:").unwrap_or("unknown")
}

fn animate(t: &Token) -> bool {
    t.category == "person" || t.category == "pron:person" || t.category == "pron:speaker"
}

fn place_like(t: &Token) -> bool {
    t.category == "location" || t.category == "room"
}

/// One frame per verb, and one per object when objects are coordinated.
pub fn extract_frames(parse: &Parse) -> Result<Vec<ActionFrame>, ParseError> {
    let mut frames = Vec::new();
    for v in parse.verbs() {
        let verb = parse.token(v);
        let fam = family(verb);
        if !matches!(fam, "get" | "give" | "take" | "move" | "find" | "put") {
            return Err(ParseError::UnknownAction(verb.lemma.clone()));
        }
        let actor = match parse.dependents(v, "nsubj").next() {
            Some(s) if parse.token(s).category == "pron:addressee" || parse.token(s).category == "robot" => "robot".to_string(),
            Some(s) => parse.token(s).lemma.clone(),
            None => "robot".to_string(),
        };

        // object heads, expanding coordination
        let mut objects: Vec<usize> = Vec::new();
        if let Some(o) = parse.dependents(v, "dobj").next() {
            objects.push(o);
            let mut k = 0;
            while k < objects.len() {
                let extra: Vec<usize> = parse.dependents(objects[k], "conj").collect();
                objects.extend(extra);
                k += 1;
            }
        }
        let recipient = parse.dependents(v, "iobj").next();

        // prepositional chain starting at the verb
        let mut pps: Vec<(String, usize)> = Vec::new();
        let mut gov = v;
        loop {
            let next = parse
                .deps
                .iter()
                .find(|d| d.governor == gov && d.relation.starts_with("nmod:") && d.relation != "nmod:poss");
            match next {
                Some(d) => {
                    pps.push((d.relation["nmod:".len()..].to_string(), d.dependent));
                    gov = d.dependent;
                }
                None => break,
            }
        }
        let mut source = None;
        let mut goal = recipient;
        for (prep, noun) in &pps {
            match prep.as_str() {
                "from" if source.is_none() => source = Some(*noun),
                "to" if goal.is_none() => goal = Some(*noun),
                "in" | "on" | "at" => {
                    let as_source = matches!(fam, "find" | "get");
                    if as_source && source.is_none() {
                        source = Some(*noun);
                    } else if !as_source && goal.is_none() {
                        goal = Some(*noun);
                    }
                }
                _ => {}
            }
        }

        let objs: Vec<Option<usize>> = if objects.is_empty() { vec![None] } else { objects.into_iter().map(Some).collect() };
        for o in objs {
            let obj_tok = o.map(|i| parse.token(i));
            let goal_tok = goal.map(|i| parse.token(i));
            let action = match fam {
                "get" => match goal_tok {
                    Some(g) if place_like(g) => Primitive::Put,
                    Some(_) => Primitive::Give,
                    None => Primitive::Get,
                },
                "give" | "take" => {
                    if obj_tok.is_some_and(animate) {
                        Primitive::Guide
                    } else {
                        match goal_tok {
                            Some(g) if place_like(g) => Primitive::Put,
                            Some(_) => Primitive::Give,
                            None if fam == "take" => Primitive::Get,
                            None => Primitive::Give,
                        }
                    }
                }
                "move" => {
                    if obj_tok.is_some_and(|t| !animate(t)) {
                        Primitive::Put
                    } else {
                        Primitive::Move
                    }
                }
                "find" => Primitive::Find,
                _ => Primitive::Put,
            };
            frames.push(ActionFrame {
                actor: actor.clone(),
                verb: verb.lemma.clone(),
                action,
                object: obj_tok.map(Slot::of),
                source: source.map(|i| Slot::of(parse.token(i))),
                goal: goal_tok.map(Slot::of),
                order: frames.len(),
            });
        }
    }
    Ok(frames)
}

/// One modifier per amod, nummod, neg, nmod:poss and det.
pub fn extract_modifiers(parse: &Parse) -> Result<Vec<Modifier>, ParseError> {
    let mut out = Vec::new();
    for d in &parse.deps {
        let head = parse.token(d.governor.max(1));
        let dep = parse.token(d.dependent);
        let (attribute, value) = match d.relation.as_str() {
            "nummod" => {
                if dep.category == "num:unsupported" {
                    return Err(ParseError::UnsupportedNumber {
                        word: dep.surface.clone(),
                        supported: SUPPORTED_NUMERALS.to_string(),
                    });
                }
                let n: u32 = dep.lemma.parse().map_err(|_| ParseError::UnsupportedNumber {
                    word: dep.surface.clone(),
                    supported: SUPPORTED_NUMERALS.to_string(),
                })?;
                (Attribute::Number, ModValue::Int(n))
            }
            "neg" => (Attribute::Number, ModValue::Int(0)),
            "amod" => match dep.category.as_str() {
                "size" => (Attribute::Size, ModValue::Text(dep.lemma.clone())),
                "color" => (Attribute::Color, ModValue::Text(dep.lemma.clone())),
                _ => continue,
            },
            "nmod:poss" => (Attribute::Possession, ModValue::Text(dep.lemma.clone())),
            "det" => (Attribute::Det, ModValue::Text(dep.lemma.clone())),
            _ => continue,
        };
        out.push(Modifier {
            attribute,
            target: head.lemma.clone(),
            target_index: head.index,
            value,
        });
    }
    Ok(out)
}

/// What a slot may refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Want {
    Person,
    /// A movable object (grasp, give, put, find targets).
    Movable,
    NonPerson,
}

fn resolve_one(
    pronoun: &Token,
    want: Want,
    ctx: &DiscourseContext,
    bindings: &BTreeMap<String, String>,
) -> Result<(String, Option<usize>), ParseError> {
    if let Some(b) = bindings.get(&pronoun.lemma) {
        return Ok((b.clone(), None));
    }
    let unresolved = || ParseError::UnresolvedPronoun {
        pronoun: pronoun.surface.clone(),
        index: pronoun.index,
    };
    match pronoun.category.as_str() {
        "pron:speaker" => return ctx.speaker.clone().map(|s| (s, None)).ok_or_else(unresolved),
        "pron:addressee" => return Ok(("robot".to_string(), None)),
        _ => {}
    }
    let want = if pronoun.category == "pron:person" { Want::Person } else { want };
    ctx.before(pronoun.index)
        .find(|m| match want {
            Want::Person => m.kind == MentionKind::Person,
            Want::Movable => m.kind == MentionKind::Object,
            Want::NonPerson => m.kind != MentionKind::Person,
        })
        .map(|m| {
            let ante = (m.utterance == ctx.current_utterance()).then_some(m.index);
            (m.lemma.clone(), ante)
        })
        .ok_or_else(unresolved)
}

/// Replaces pronoun slots by the closest compatible earlier noun. The
/// context must already contain the current utterance (see
/// [`DiscourseContext::hear`]). `bindings` pre-resolves pronouns by lemma.
pub fn resolve_pronouns(
    frames: &[ActionFrame],
    parse: &Parse,
    ctx: &DiscourseContext,
    bindings: &BTreeMap<String, String>,
) -> Result<Vec<ActionFrame>, ParseError> {
    let mut out = frames.to_vec();
    for f in &mut out {
        let movable = matches!(f.action, Primitive::Get | Primitive::Give | Primitive::Put | Primitive::Find);
        for (slot, want) in [
            (&mut f.object, if movable { Want::Movable } else { Want::NonPerson }),
            (&mut f.source, Want::NonPerson),
            (&mut f.goal, Want::NonPerson),
        ] {
            let Some(s) = slot.as_mut() else { continue };
            let t = parse.token(s.token);
            if t.pos != Pos::PRP {
                continue;
            }
            let (value, ante) = resolve_one(t, want, ctx, bindings)?;
            s.value = value;
            s.antecedent = ante;
        }
    }
    Ok(out)
}
