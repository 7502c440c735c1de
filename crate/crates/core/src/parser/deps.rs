//! Recursive-descent parser producing Stanford-style typed dependencies.
//!
//! ```text
//! utterance := clause ( [and] clause )*
//! clause    := [subject] VB [np [np]] pp*
//! np        := PRP | NNP [and np] | [DT] [PRP$] [CD] JJ* (NN|NNS) [and np]
//! pp        := (IN|TO) np
//! ```
//!
//! With two bare noun phrases after the verb the first is the indirect
//! object. The first prepositional phrase attaches to the verb, each later
//! one to the noun of the phrase before it.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::lexicon::{Pos, Token};
use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dependency {
    pub relation: String,
    /// 0 is the synthetic ROOT.
    pub governor: usize,
    pub dependent: usize,
}

impl Dependency {
    fn new(relation: impl Into<String>, governor: usize, dependent: usize) -> Self {
        Dependency {
            relation: relation.into(),
            governor,
            dependent,
        }
    }

    /// `rel(gov-i,dep-j)` using the token surfaces.
    pub fn render(&self, tokens: &[Token]) -> String {
        let word = |i: usize| if i == 0 { "ROOT".to_string() } else { tokens[i - 1].surface.clone() };
        format!(
            "{}({}-{},{}-{})",
            self.relation,
            word(self.governor),
            self.governor,
            word(self.dependent),
            self.dependent
        )
    }
}

/// Tokens and dependencies of one command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parse {
    pub tokens: Vec<Token>,
    pub deps: Vec<Dependency>,
}

impl Parse {
    pub fn token(&self, index: usize) -> &Token {
        &self.tokens[index - 1]
    }

    pub fn rendered(&self) -> Vec<String> {
        self.deps.iter().map(|d| d.render(&self.tokens)).collect()
    }

    /// Dependents of `governor` under `relation`, in order.
    pub fn dependents<'a>(&'a self, governor: usize, relation: &'a str) -> impl Iterator<Item = usize> + 'a {
        self.deps
            .iter()
            .filter(move |d| d.governor == governor && d.relation == relation)
            .map(|d| d.dependent)
    }

    /// Verbs in clause order: the root followed by conjoined verbs.
    pub fn verbs(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.dependents(0, "root").collect();
        if let Some(&root) = out.first() {
            out.extend(
                self.dependents(root, "conj")
                    .filter(|i| self.token(*i).pos == Pos::VB),
            );
        }
        out
    }
}

impl fmt::Display for Parse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.rendered().join(" "))
    }
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
    deps: Vec<Dependency>,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&'t Token> {
        self.tokens.get(self.pos + k)
    }

    fn bump(&mut self) -> &'t Token {
        let t = &self.tokens[self.pos];
        self.pos += 1;
        t
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        match self.peek() {
            Some(t) => ParseError::UnexpectedToken {
                index: t.index,
                word: t.surface.clone(),
                expected,
            },
            None => ParseError::UnexpectedEnd { expected },
        }
    }

    fn at(&self, pos: Pos) -> bool {
        self.peek().is_some_and(|t| t.pos == pos)
    }

    fn starts_np(t: &Token) -> bool {
        matches!(t.pos, Pos::DT | Pos::PRPS | Pos::CD | Pos::JJ | Pos::NN | Pos::NNS | Pos::NNP | Pos::PRP)
    }

    fn utterance(&mut self) -> Result<(), ParseError> {
        let first = self.clause(None)?;
        while self.peek().is_some() {
            if self.at(Pos::CC) {
                if !self.peek_at(1).is_some_and(|t| t.pos == Pos::VB || Self::is_subject_then_verb(self, 1)) {
                    return Err(self.unexpected("a verb after `and`"));
                }
                let cc = self.bump();
                self.deps.push(Dependency::new("cc", first, cc.index));
            }
            self.clause(Some(first))?;
        }
        Ok(())
    }

    fn is_subject_then_verb(&self, k: usize) -> bool {
        let (Some(s), Some(v)) = (self.peek_at(k), self.peek_at(k + 1)) else {
            return false;
        };
        v.pos == Pos::VB && (s.category == "pron:addressee" || s.category == "robot" || s.pos == Pos::NNP)
    }

    fn clause(&mut self, first: Option<usize>) -> Result<usize, ParseError> {
        let subject = if self.is_subject_then_verb(0) {
            Some(self.bump().index)
        } else {
            None
        };
        if !self.at(Pos::VB) {
            return Err(self.unexpected("a verb"));
        }
        let verb = self.bump().index;
        match first {
            None => self.deps.push(Dependency::new("root", 0, verb)),
            Some(f) => self.deps.push(Dependency::new("conj", f, verb)),
        }
        if let Some(s) = subject {
            self.deps.push(Dependency::new("nsubj", verb, s));
        }

        let mut objects = Vec::new();
        while objects.len() < 2 && self.peek().is_some_and(Self::starts_np) {
            objects.push(self.np()?);
        }
        match objects.as_slice() {
            [o] => self.deps.push(Dependency::new("dobj", verb, *o)),
            [i, o] => {
                self.deps.push(Dependency::new("iobj", verb, *i));
                self.deps.push(Dependency::new("dobj", verb, *o));
            }
            _ => {}
        }

        let mut governor = verb;
        while self.at(Pos::IN) || self.at(Pos::TO) {
            let prep = self.bump();
            if !self.peek().is_some_and(Self::starts_np) {
                return Err(self.unexpected("a noun phrase after the preposition"));
            }
            let head = self.np()?;
            self.deps.push(Dependency::new("case", head, prep.index));
            self.deps.push(Dependency::new(format!("nmod:{}", prep.lemma), governor, head));
            governor = head;
        }
        if self.peek().is_some() && !self.at(Pos::VB) && !self.at(Pos::CC) && !self.is_subject_then_verb(0) {
            return Err(self.unexpected("a preposition, `and` or a new verb"));
        }
        Ok(verb)
    }

    /// Parses a noun phrase and returns the index of its head.
    fn np(&mut self) -> Result<usize, ParseError> {
        let t = self.peek().ok_or(ParseError::UnexpectedEnd { expected: "a noun phrase" })?;
        if t.pos == Pos::PRP {
            return Ok(self.bump().index);
        }
        let mut mods: Vec<(&'static str, usize)> = Vec::new();
        let head = if t.pos == Pos::NNP {
            self.bump().index
        } else {
            if self.at(Pos::DT) {
                let d = self.bump();
                mods.push((if d.category == "det:neg" { "neg" } else { "det" }, d.index));
            }
            if self.at(Pos::PRPS) {
                mods.push(("nmod:poss", self.bump().index));
            }
            if self.at(Pos::CD) {
                mods.push(("nummod", self.bump().index));
            }
            while self.at(Pos::JJ) {
                mods.push(("amod", self.bump().index));
            }
            match self.peek() {
                Some(t) if matches!(t.pos, Pos::NN | Pos::NNS | Pos::NNP) => self.bump().index,
                _ => return Err(self.unexpected("a noun")),
            }
        };
        for (rel, dep) in mods {
            self.deps.push(Dependency::new(rel, head, dep));
        }
        // noun phrase coordination, but not clause coordination
        if self.at(Pos::CC) && self.peek_at(1).is_some_and(|t| Self::starts_np(t) && t.pos != Pos::PRP) {
            let cc = self.bump();
            let other = self.np()?;
            self.deps.push(Dependency::new("cc", head, cc.index));
            self.deps.push(Dependency::new("conj", head, other));
        }
        Ok(head)
    }
}

/// Builds the dependency set for already-tokenized input, sorted by dependent index.
pub fn parse_tokens(tokens: Vec<Token>) -> Result<Parse, ParseError> {
    if tokens.is_empty() {
        return Err(ParseError::Empty);
    }
    let mut p = Parser {
        tokens: &tokens,
        pos: 0,
        deps: Vec::new(),
    };
    p.utterance()?;
    let mut deps = p.deps;
    deps.sort_by_key(|d| (d.dependent, d.governor));
    Ok(Parse { tokens, deps })
}
