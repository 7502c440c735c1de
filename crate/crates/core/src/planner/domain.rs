//! Action schemas and the plain-text domain format.
//!
//! ```text
//! action moveTo(L: furniture, R: room)
//!   pre inRoom(robot, R)
//!   pre not isNear(robot, L)
//!   eff isNear(robot, L)
//!   eff not isNear(robot, L1) if isNear(robot, L1)
//! end
//! ```
//!
//! Capitalised arguments are variables. `assume(...)` marks a literal over the
//! assumption namespace. Variables that appear only in an effect's `if`
//! condition are bound by matching the condition against the pre-state.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::kb::Atom;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    fn parse(s: &str) -> Term {
        if s.starts_with(|c: char| c.is_ascii_uppercase()) {
            Term::Var(s.to_string())
        } else {
            Term::Const(s.to_string())
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) | Term::Const(v) => f.write_str(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AtomTemplate {
    pub pred: String,
    pub args: Vec<Term>,
}

impl AtomTemplate {
    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }

    /// Substitutes bound variables; unbound ones are left as `None`.
    pub fn partial(&self, lookup: impl Fn(&str) -> Option<String>) -> Vec<Option<String>> {
        self.args
            .iter()
            .map(|t| match t {
                Term::Const(c) => Some(c.clone()),
                Term::Var(v) => lookup(v),
            })
            .collect()
    }
}

impl fmt::Display for AtomTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.pred)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LiteralTemplate {
    pub negated: bool,
    pub assumed: bool,
    pub atom: AtomTemplate,
}

impl fmt::Display for LiteralTemplate {
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

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EffectTemplate {
    pub literal: LiteralTemplate,
    pub condition: Option<AtomTemplate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Param {
    pub var: String,
    pub type_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<Param>,
    pub pre: Vec<LiteralTemplate>,
    pub effects: Vec<EffectTemplate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("domain line {line}: {message}")]
pub struct DomainError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> DomainError {
    DomainError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    pub schemas: Vec<ActionSchema>,
}

const KEJIA: &str = include_str!("../../data/kejia.domain");

impl Domain {
    /// The household robot's seven actions, loaded from the bundled domain file.
    pub fn standard() -> Domain {
        Domain::parse(KEJIA).expect("bundled domain parses")
    }

    pub fn schema(&self, name: &str) -> Option<(usize, &ActionSchema)> {
        self.schemas.iter().enumerate().find(|(_, s)| s.name == name)
    }

    /// Position of an action name in declaration order; used for tie-breaking.
    pub fn order(&self, name: &str) -> usize {
        self.schema(name).map(|(i, _)| i).unwrap_or(usize::MAX)
    }

    pub fn parse(text: &str) -> Result<Domain, DomainError> {
        let mut schemas: Vec<ActionSchema> = Vec::new();
        let mut current: Option<(usize, ActionSchema)> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (keyword, rest) = body.split_once(char::is_whitespace).unwrap_or((body, ""));
            let rest = rest.trim();
            match keyword {
                "action" => {
                    if current.is_some() {
                        return Err(err(line, "nested `action`; missing `end`"));
                    }
                    let schema = parse_header(rest).map_err(|m| err(line, m))?;
                    if schemas.iter().any(|s| s.name == schema.name) {
                        return Err(err(line, format!("duplicate action `{}`", schema.name)));
                    }
                    current = Some((line, schema));
                }
                "pre" => {
                    let (_, schema) = current
                        .as_mut()
                        .ok_or_else(|| err(line, "`pre` outside an action"))?;
                    schema.pre.push(parse_literal(rest).map_err(|m| err(line, m))?);
                }
                "eff" => {
                    let (_, schema) = current
                        .as_mut()
                        .ok_or_else(|| err(line, "`eff` outside an action"))?;
                    let (lit, cond) = match rest.split_once(" if ") {
                        Some((l, c)) => (l, Some(parse_atom(c.trim()).map_err(|m| err(line, m))?)),
                        None => (rest, None),
                    };
                    let literal = parse_literal(lit.trim()).map_err(|m| err(line, m))?;
                    schema.effects.push(EffectTemplate { literal, condition: cond });
                }
                "end" => {
                    let (start, schema) = current
                        .take()
                        .ok_or_else(|| err(line, "`end` without `action`"))?;
                    check_vars(&schema).map_err(|m| err(start, m))?;
                    schemas.push(schema);
                }
                other => return Err(err(line, format!("unexpected `{other}`"))),
            }
        }
        if let Some((start, _)) = current {
            return Err(err(start, "action is missing `end`"));
        }
        Ok(Domain { schemas })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.schemas {
            let params: Vec<String> = s
                .params
                .iter()
                .map(|p| format!("{}: {}", p.var, p.type_name))
                .collect();
            out.push_str(&format!("action {}({})\n", s.name, params.join(", ")));
            for p in &s.pre {
                out.push_str(&format!("  pre {p}\n"));
            }
            for e in &s.effects {
                match &e.condition {
                    Some(c) => out.push_str(&format!("  eff {} if {c}\n", e.literal)),
                    None => out.push_str(&format!("  eff {}\n", e.literal)),
                }
            }
            out.push_str("end\n\n");
        }
        out
    }
}

fn parse_header(text: &str) -> Result<ActionSchema, String> {
    let open = text.find('(').ok_or("expected `name(params)`")?;
    if !text.ends_with(')') {
        return Err("expected `)` at end of action header".into());
    }
    let name = text[..open].trim();
    if name.is_empty() {
        return Err("missing action name".into());
    }
    let mut params = Vec::new();
    for p in text[open + 1..text.len() - 1].split(',') {
        let p = p.trim();
        if p.is_empty() {
            continue;
        }
        let (var, ty) = p.split_once(':').ok_or(format!("parameter `{p}` needs a type"))?;
        let var = var.trim();
        if !var.starts_with(|c: char| c.is_ascii_uppercase()) {
            return Err(format!("parameter `{var}` must be capitalised"));
        }
        if params.iter().any(|q: &Param| q.var == var) {
            return Err(format!("duplicate parameter `{var}`"));
        }
        params.push(Param {
            var: var.to_string(),
            type_name: ty.trim().to_string(),
        });
    }
    Ok(ActionSchema {
        name: name.to_string(),
        params,
        pre: Vec::new(),
        effects: Vec::new(),
    })
}

fn parse_atom(text: &str) -> Result<AtomTemplate, String> {
    let atom = Atom::parse(text).ok_or(format!("malformed atom `{text}`"))?;
    let mut args: Vec<Term> = atom.args.iter().map(|a| Term::parse(a)).collect();
    // `isPlacement(L, true)` is the boolean-attribute spelling of `isPlacement(L)`
    if args.len() == 2 && args[1] == Term::Const("true".into()) {
        args.pop();
    }
    Ok(AtomTemplate {
        pred: atom.pred,
        args,
    })
}

fn parse_literal(text: &str) -> Result<LiteralTemplate, String> {
    let (negated, rest) = match text.strip_prefix("not ") {
        Some(r) => (true, r.trim()),
        None => (false, text),
    };
    let (assumed, inner) = match rest.strip_prefix("assume(") {
        Some(r) => (
            true,
            r.strip_suffix(')').ok_or(format!("unbalanced `assume` in `{text}`"))?,
        ),
        None => (false, rest),
    };
    Ok(LiteralTemplate {
        negated,
        assumed,
        atom: parse_atom(inner)?,
    })
}

fn check_vars(schema: &ActionSchema) -> Result<(), String> {
    let params: BTreeSet<&str> = schema.params.iter().map(|p| p.var.as_str()).collect();
    for p in &schema.pre {
        if let Some(v) = p.atom.vars().find(|v| !params.contains(v)) {
            return Err(format!("{}: precondition variable `{v}` is not a parameter", schema.name));
        }
    }
    for e in &schema.effects {
        let mut bound = params.clone();
        if let Some(c) = &e.condition {
            bound.extend(c.vars());
        }
        if let Some(v) = e.literal.atom.vars().find(|v| !bound.contains(v)) {
            return Err(format!(
                "{}: effect variable `{v}` is bound by neither a parameter nor the condition",
                schema.name
            ));
        }
    }
    Ok(())
}
