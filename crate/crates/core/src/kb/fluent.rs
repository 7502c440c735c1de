use std::fmt;

use serde::{Deserialize, Serialize};

/// A ground predicate application, e.g. `isPlaced(coke1,cupboard)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<P, I, S>(pred: P, args: I) -> Self
    where
        P: Into<String>,
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Atom {
            pred: pred.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    pub fn mentions(&self, id: &str) -> bool {
        self.args.iter().any(|a| a == id)
    }

    /// Replaces every argument equal to `from` with `to`.
    pub fn rename(&self, from: &str, to: &str) -> Atom {
        Atom {
            pred: self.pred.clone(),
            args: self
                .args
                .iter()
                .map(|a| if a == from { to.to_string() } else { a.clone() })
                .collect(),
        }
    }

    /// Parses the compact `pred(a,b)` notation used in logs and test fixtures.
    pub fn parse(text: &str) -> Option<Atom> {
        let text = text.trim();
        let open = text.find('(')?;
        if !text.ends_with(')') {
            return None;
        }
        let pred = text[..open].trim();
        if pred.is_empty() {
            return None;
        }
        let inner = &text[open + 1..text.len() - 1];
        let args = if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner.split(',').map(|s| s.trim().to_string()).collect()
        };
        if args.iter().any(|a| a.is_empty()) {
            return None;
        }
        Some(Atom {
            pred: pred.to_string(),
            args,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.pred, self.args.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Epistemic {
    Belief,
    Assumption,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Sensor,
    User,
    Inference,
    Assumed,
}

/// A unit of world knowledge: an atom with polarity, epistemic tag and provenance.
///
/// An assumption always wraps a positive atom; `assume(f)` is represented by
/// `epistemic == Assumption` on `f` rather than by a nested predicate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fluent {
    pub atom: Atom,
    pub negated: bool,
    pub epistemic: Epistemic,
    pub source: Source,
    pub tick: u64,
}

impl Fluent {
    pub fn belief(atom: Atom, source: Source, tick: u64) -> Self {
        Fluent {
            atom,
            negated: false,
            epistemic: Epistemic::Belief,
            source,
            tick,
        }
    }

    pub fn negative(atom: Atom, source: Source, tick: u64) -> Self {
        Fluent {
            atom,
            negated: true,
            epistemic: Epistemic::Belief,
            source,
            tick,
        }
    }

    pub fn assumption(atom: Atom, source: Source, tick: u64) -> Self {
        Fluent {
            atom,
            negated: false,
            epistemic: Epistemic::Assumption,
            source,
            tick,
        }
    }
}

impl fmt::Display for Fluent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.epistemic, self.negated) {
            (Epistemic::Assumption, _) => write!(f, "assume({})", self.atom),
            (Epistemic::Belief, true) => write!(f, "-{}", self.atom),
            (Epistemic::Belief, false) => write!(f, "{}", self.atom),
        }
    }
}

/// Fixed predicate vocabulary with arities. Type-membership predicates
/// (one per hierarchy node, arity 1) are accepted in addition to these.
pub const VOCABULARY: &[(&str, usize)] = &[
    ("inRoom", 2),
    ("isNear", 2),
    ("door", 3),
    ("open", 1),
    ("empty", 1),
    ("graspable", 1),
    ("isPlaced", 2),
    ("isHeld", 2),
    ("inHand", 2),
    ("isPlacement", 1),
    ("human", 1),
    ("object", 1),
];

pub fn vocabulary_arity(pred: &str) -> Option<usize> {
    VOCABULARY
        .iter()
        .find(|(name, _)| *name == pred)
        .map(|(_, arity)| *arity)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atom_display_and_parse_agree() {
        let atom = Atom::new("door", ["d1", "study", "living_room"]);
        assert_eq!(atom.to_string(), "door(d1,study,living_room)");
        assert_eq!(Atom::parse("door(d1, study, living_room)"), Some(atom));
        assert_eq!(Atom::parse("open()"), Some(Atom::new("open", Vec::<String>::new())));
        assert_eq!(Atom::parse("open(d1"), None);
        assert_eq!(Atom::parse("(d1)"), None);
        assert_eq!(Atom::parse("f(a,,b)"), None);
    }

    #[test]
    fn fluent_display_marks_epistemic_state() {
        let atom = Atom::new("isPlaced", ["coke1", "cupboard"]);
        assert_eq!(
            Fluent::assumption(atom.clone(), Source::Assumed, 0).to_string(),
            "assume(isPlaced(coke1,cupboard))"
        );
        assert_eq!(
            Fluent::negative(atom, Source::Sensor, 3).to_string(),
            "-isPlaced(coke1,cupboard)"
        );
    }
}
