//! Symbolic knowledge: type hierarchy, entities and fluents tagged as
//! beliefs or assumptions.

mod fluent;
mod snapshot;
mod types;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fluent::{vocabulary_arity, Atom, Epistemic, Fluent, Source, VOCABULARY};
pub use types::{TypeHierarchy, ROOT_TYPES, TOP};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KbError {
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("type `{0}` already exists with a different parent")]
    DuplicateType(String),
    #[error("invalid hierarchy: {0}")]
    InvalidHierarchy(String),
    #[error("duplicate instance `{0}`")]
    DuplicateInstance(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("predicate `{pred}` takes {expected} argument(s), got {got}")]
    ArityMismatch {
        pred: String,
        expected: usize,
        got: usize,
    },
    #[error("assumptions must wrap a positive fluent: {0}")]
    NegativeAssumption(String),
    #[error("assumption {0} contradicts a held belief")]
    ContradictsBelief(String),
    #[error("snapshot parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid snapshot: {0}")]
    Snapshot(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    #[serde(rename = "type")]
    pub type_name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub properties: BTreeMap<String, String>,
}

impl Entity {
    pub fn new(id: impl Into<String>, type_name: impl Into<String>) -> Self {
        Entity {
            id: id.into(),
            type_name: type_name.into(),
            properties: BTreeMap::new(),
        }
    }

    pub fn with_property(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.properties.insert(key.into(), value.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Record {
    negated: bool,
    source: Source,
    tick: u64,
}

/// Argument constraint inside a [`FluentQuery`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArgPattern {
    Any,
    Is(String),
    /// Any instance whose inferred types include the given type.
    OfType(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FluentQuery {
    pub pred: String,
    pub args: Vec<ArgPattern>,
    pub epistemic: Option<Epistemic>,
}

impl FluentQuery {
    pub fn new(pred: impl Into<String>, args: Vec<ArgPattern>) -> Self {
        FluentQuery {
            pred: pred.into(),
            args,
            epistemic: None,
        }
    }

    pub fn only(mut self, epistemic: Epistemic) -> Self {
        self.epistemic = Some(epistemic);
        self
    }
}

/// The robot's knowledge base.
///
/// Beliefs and assumptions live in separate maps keyed by atom, so a belief
/// can never be stored with both polarities. A single owner mutates it;
/// readers work on clones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeBase {
    hierarchy: TypeHierarchy,
    entities: BTreeMap<String, Entity>,
    beliefs: BTreeMap<Atom, Record>,
    assumptions: BTreeMap<Atom, Record>,
    minted: u64,
}

impl KnowledgeBase {
    pub fn new(hierarchy: TypeHierarchy) -> Self {
        KnowledgeBase {
            hierarchy,
            ..Default::default()
        }
    }

    pub fn hierarchy(&self) -> &TypeHierarchy {
        &self.hierarchy
    }

    pub fn add_type(&mut self, name: &str, parent: &str) -> Result<(), KbError> {
        self.hierarchy.add(name, parent)
    }

    pub fn add_entity(&mut self, entity: Entity) -> Result<(), KbError> {
        if self.entities.contains_key(&entity.id) {
            return Err(KbError::DuplicateInstance(entity.id));
        }
        if !self.hierarchy.contains(&entity.type_name) {
            return Err(KbError::UnknownType(entity.type_name));
        }
        self.entities.insert(entity.id.clone(), entity);
        Ok(())
    }

    /// Removes an instance together with every fluent that mentions it.
    pub fn remove_entity(&mut self, id: &str) -> Option<Entity> {
        let removed = self.entities.remove(id)?;
        self.beliefs.retain(|a, _| !a.mentions(id));
        self.assumptions.retain(|a, _| !a.mentions(id));
        Some(removed)
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn contains_instance(&self, id: &str) -> bool {
        self.entities.contains_key(id)
    }

    /// Direct type plus every ancestor up to `entity`.
    pub fn infer_types(&self, id: &str) -> Result<Vec<String>, KbError> {
        let entity = self
            .entities
            .get(id)
            .ok_or_else(|| KbError::UnknownInstance(id.to_string()))?;
        self.hierarchy.lineage(&entity.type_name)
    }

    pub fn is_instance_of(&self, id: &str, type_name: &str) -> bool {
        self.entities
            .get(id)
            .is_some_and(|e| self.hierarchy.is_a(&e.type_name, type_name))
    }

    pub fn instances_of<'a>(&'a self, type_name: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entities
            .values()
            .filter(move |e| self.hierarchy.is_a(&e.type_name, type_name))
            .map(|e| e.id.as_str())
    }

    pub fn count_instances(&self, type_name: &str) -> Result<usize, KbError> {
        if !self.hierarchy.contains(type_name) {
            return Err(KbError::UnknownType(type_name.to_string()));
        }
        Ok(self.instances_of(type_name).count())
    }

    fn check_atom(&self, atom: &Atom) -> Result<(), KbError> {
        let expected = match vocabulary_arity(&atom.pred) {
            Some(n) => n,
            None if self.hierarchy.contains(&atom.pred) => 1,
            None => return Err(KbError::UnknownPredicate(atom.pred.clone())),
        };
        if atom.args.len() != expected {
            return Err(KbError::ArityMismatch {
                pred: atom.pred.clone(),
                expected,
                got: atom.args.len(),
            });
        }
        for arg in &atom.args {
            // type names are legal arguments for type-level facts such as graspable(drink)
            if !self.entities.contains_key(arg) && !self.hierarchy.contains(arg) {
                return Err(KbError::UnknownInstance(arg.clone()));
            }
        }
        Ok(())
    }

    /// Stores a fluent. Returns whether the knowledge base changed.
    ///
    /// A belief replaces the opposite polarity and discharges a matching
    /// assumption (promotion when positive, refutation when negative).
    pub fn assert_fluent(&mut self, fluent: Fluent) -> Result<bool, KbError> {
        self.check_atom(&fluent.atom)?;
        let record = Record {
            negated: fluent.negated,
            source: fluent.source,
            tick: fluent.tick,
        };
        match fluent.epistemic {
            Epistemic::Belief => {
                let discharged = self.assumptions.remove(&fluent.atom).is_some();
                match self.beliefs.get(&fluent.atom) {
                    Some(old) if old.negated == fluent.negated => Ok(discharged),
                    _ => {
                        self.beliefs.insert(fluent.atom, record);
                        Ok(true)
                    }
                }
            }
            Epistemic::Assumption => {
                if fluent.negated {
                    return Err(KbError::NegativeAssumption(fluent.atom.to_string()));
                }
                match self.beliefs.get(&fluent.atom) {
                    Some(b) if b.negated => Err(KbError::ContradictsBelief(fluent.atom.to_string())),
                    Some(_) => Ok(false),
                    None => Ok(self.assumptions.insert(fluent.atom, record).is_none()),
                }
            }
        }
    }

    /// Forgets a fluent without asserting its negation (closed-world deletion).
    pub fn retract(&mut self, atom: &Atom, epistemic: Epistemic) -> bool {
        match epistemic {
            Epistemic::Belief => self.beliefs.remove(atom).is_some(),
            Epistemic::Assumption => self.assumptions.remove(atom).is_some(),
        }
    }

    pub fn holds(&self, atom: &Atom) -> bool {
        self.beliefs.get(atom).is_some_and(|r| !r.negated)
    }

    pub fn believed_false(&self, atom: &Atom) -> bool {
        self.beliefs.get(atom).is_some_and(|r| r.negated)
    }

    pub fn is_assumed(&self, atom: &Atom) -> bool {
        self.assumptions.contains_key(atom)
    }

    pub fn fluents(&self) -> Vec<Fluent> {
        let beliefs = self.beliefs.iter().map(|(a, r)| Fluent {
            atom: a.clone(),
            negated: r.negated,
            epistemic: Epistemic::Belief,
            source: r.source,
            tick: r.tick,
        });
        let assumptions = self.assumptions.iter().map(|(a, r)| Fluent {
            atom: a.clone(),
            negated: false,
            epistemic: Epistemic::Assumption,
            source: r.source,
            tick: r.tick,
        });
        beliefs.chain(assumptions).collect()
    }

    /// Positive beliefs in atom order.
    pub fn positive_beliefs(&self) -> impl Iterator<Item = &Atom> {
        self.beliefs.iter().filter(|(_, r)| !r.negated).map(|(a, _)| a)
    }

    pub fn assumed_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.assumptions.keys()
    }

    fn arg_matches(&self, pattern: &ArgPattern, arg: &str) -> bool {
        match pattern {
            ArgPattern::Any => true,
            ArgPattern::Is(id) => id == arg,
            ArgPattern::OfType(t) => self.is_instance_of(arg, t),
        }
    }

    fn atom_matches(&self, q: &FluentQuery, atom: &Atom) -> bool {
        atom.pred == q.pred
            && atom.args.len() == q.args.len()
            && q.args
                .iter()
                .zip(&atom.args)
                .all(|(p, a)| self.arg_matches(p, a))
    }

    /// All fluents unifying with the query, ordered by arguments.
    ///
    /// Type-membership predicates are answered from the hierarchy, so every
    /// ancestor membership of every instance is queryable.
    pub fn query(&self, q: &FluentQuery) -> Vec<Fluent> {
        let mut out: Vec<Fluent> = Vec::new();
        if self.hierarchy.contains(&q.pred) && q.args.len() == 1 && q.epistemic != Some(Epistemic::Assumption) {
            for e in self.entities.values() {
                if self.hierarchy.is_a(&e.type_name, &q.pred) && self.arg_matches(&q.args[0], &e.id) {
                    out.push(Fluent::belief(
                        Atom::new(q.pred.clone(), [e.id.clone()]),
                        Source::Inference,
                        0,
                    ));
                }
            }
        }
        if q.epistemic != Some(Epistemic::Assumption) {
            out.extend(
                self.beliefs
                    .iter()
                    .filter(|(a, _)| self.atom_matches(q, a))
                    .map(|(a, r)| Fluent {
                        atom: a.clone(),
                        negated: r.negated,
                        epistemic: Epistemic::Belief,
                        source: r.source,
                        tick: r.tick,
                    }),
            );
        }
        if q.epistemic != Some(Epistemic::Belief) {
            out.extend(
                self.assumptions
                    .iter()
                    .filter(|(a, _)| self.atom_matches(q, a))
                    .map(|(a, r)| Fluent::assumption(a.clone(), r.source, r.tick)),
            );
        }
        out.sort_by(|a, b| {
            (&a.atom.args, a.epistemic, a.negated).cmp(&(&b.atom.args, b.epistemic, b.negated))
        });
        out.dedup_by(|a, b| a.atom == b.atom && a.epistemic == b.epistemic);
        out
    }

    /// Facts implied by static laws: ancestor memberships for every instance
    /// and the symmetric orientation of every door.
    pub fn closure_facts(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        for e in self.entities.values() {
            if let Ok(lineage) = self.hierarchy.lineage(&e.type_name) {
                for t in lineage {
                    out.insert(Atom::new(t, [e.id.clone()]));
                }
            }
        }
        for atom in self.positive_beliefs() {
            if atom.pred == "door" {
                out.insert(Atom::new(
                    "door",
                    [atom.args[0].clone(), atom.args[2].clone(), atom.args[1].clone()],
                ));
            }
        }
        out
    }

    /// Type-level facts inherited by instances of `type_name`, with the
    /// type reference replaced by `instance`. `graspable(drink)` yields
    /// `graspable(pepsi_a1)` for a new pepsi.
    pub fn type_level_facts(&self, type_name: &str, instance: &str) -> Vec<Atom> {
        let Ok(lineage) = self.hierarchy.lineage(type_name) else {
            return Vec::new();
        };
        let mut out = BTreeSet::new();
        for atom in self.positive_beliefs() {
            for t in &lineage {
                if atom.mentions(t) {
                    out.insert(atom.rename(t, instance));
                }
            }
        }
        out.into_iter().collect()
    }

    /// Number of instances minted so far; minted ids are `<type>_a<n>`.
    pub fn minted_count(&self) -> u64 {
        self.minted
    }

    pub fn minted_id(type_name: &str, n: u64) -> String {
        format!("{type_name}_a{n}")
    }

    /// Reserves the next minted id for `type_name`.
    pub fn mint_id(&mut self, type_name: &str) -> String {
        self.minted += 1;
        Self::minted_id(type_name, self.minted)
    }

    pub fn is_minted(id: &str) -> bool {
        id.rsplit_once("_a")
            .is_some_and(|(_, n)| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
    }

    pub fn to_json(&self) -> String {
        snapshot::to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self, KbError> {
        snapshot::from_json(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> KnowledgeBase {
        let mut h = TypeHierarchy::new();
        h.add("drink", "object").unwrap();
        h.add("pepsi", "drink").unwrap();
        h.add("coke", "drink").unwrap();
        h.add("book", "object").unwrap();
        h.add("female", "human").unwrap();
        h.add("table", "furniture").unwrap();
        let mut kb = KnowledgeBase::new(h);
        for (id, t) in [
            ("pepsi1", "pepsi"),
            ("coke1", "coke"),
            ("book1", "book"),
            ("kejia", "robot"),
            ("mary", "female"),
            ("kitchen_table", "table"),
            ("cupboard", "table"),
        ] {
            kb.add_entity(Entity::new(id, t)).unwrap();
        }
        kb
    }

    fn belief(text: &str) -> Fluent {
        Fluent::belief(Atom::parse(text).unwrap(), Source::Sensor, 1)
    }

    #[test]
    fn infer_types_follows_lineage() {
        let kb = sample();
        assert_eq!(kb.infer_types("pepsi1").unwrap(), ["pepsi", "drink", "object", "entity"]);
        assert_eq!(kb.infer_types("kejia").unwrap(), ["robot", "entity"]);
        assert_eq!(kb.infer_types("mary").unwrap(), ["female", "human", "entity"]);
        assert_eq!(
            kb.infer_types("nobody"),
            Err(KbError::UnknownInstance("nobody".into()))
        );
    }

    #[test]
    fn belief_promotes_assumption() {
        let mut kb = sample();
        let atom = Atom::new("isPlaced", ["coke1", "cupboard"]);
        kb.assert_fluent(Fluent::assumption(atom.clone(), Source::Assumed, 0))
            .unwrap();
        assert!(kb.is_assumed(&atom));
        assert!(kb.assert_fluent(belief("isPlaced(coke1,cupboard)")).unwrap());
        assert!(!kb.is_assumed(&atom));
        assert!(kb.holds(&atom));
        let q = FluentQuery::new("isPlaced", vec![ArgPattern::Any, ArgPattern::Any])
            .only(Epistemic::Assumption);
        assert!(kb.query(&q).is_empty());
    }

    #[test]
    fn negative_belief_refutes_assumption() {
        let mut kb = sample();
        let atom = Atom::new("isPlaced", ["coke1", "kitchen_table"]);
        kb.assert_fluent(Fluent::assumption(atom.clone(), Source::Assumed, 0))
            .unwrap();
        kb.assert_fluent(Fluent::negative(atom.clone(), Source::Sensor, 4))
            .unwrap();
        assert!(!kb.is_assumed(&atom));
        assert!(kb.believed_false(&atom));
        assert_eq!(
            kb.assert_fluent(Fluent::assumption(atom.clone(), Source::Assumed, 5)),
            Err(KbError::ContradictsBelief(atom.to_string()))
        );
    }

    #[test]
    fn assert_is_idempotent() {
        let mut kb = sample();
        assert!(kb.assert_fluent(belief("graspable(coke1)")).unwrap());
        let before = kb.clone();
        let mut again = belief("graspable(coke1)");
        again.tick = 9;
        assert!(!kb.assert_fluent(again).unwrap());
        assert_eq!(kb, before);
    }

    #[test]
    fn opposite_polarity_replaces() {
        let mut h = TypeHierarchy::new();
        h.add("door", "furniture").unwrap();
        let mut kb = KnowledgeBase::new(h);
        kb.add_entity(Entity::new("d1", "door")).unwrap();
        kb.assert_fluent(belief("open(d1)")).unwrap();
        kb.assert_fluent(Fluent::negative(Atom::new("open", ["d1"]), Source::Sensor, 2))
            .unwrap();
        let got = kb.query(&FluentQuery::new("open", vec![ArgPattern::Any]));
        assert_eq!(got.len(), 1);
        assert!(got[0].negated);
    }

    #[test]
    fn rejects_bad_atoms() {
        let mut kb = sample();
        assert_eq!(
            kb.assert_fluent(belief("isPlaced(coke1)")),
            Err(KbError::ArityMismatch {
                pred: "isPlaced".into(),
                expected: 2,
                got: 1
            })
        );
        assert_eq!(
            kb.assert_fluent(belief("teleported(coke1)")),
            Err(KbError::UnknownPredicate("teleported".into()))
        );
        assert_eq!(
            kb.assert_fluent(belief("open(d9)")),
            Err(KbError::UnknownInstance("d9".into()))
        );
        assert!(matches!(
            kb.assert_fluent(Fluent {
                negated: true,
                ..Fluent::assumption(Atom::new("open", ["cupboard"]), Source::User, 0)
            }),
            Err(KbError::NegativeAssumption(_))
        ));
    }

    #[test]
    fn query_orders_by_args_and_filters_types() {
        let mut kb = sample();
        kb.add_entity(Entity::new("coke2", "coke")).unwrap();
        for f in [
            "isPlaced(coke2,kitchen_table)",
            "isPlaced(book1,kitchen_table)",
            "isPlaced(coke1,cupboard)",
        ] {
            kb.assert_fluent(belief(f)).unwrap();
        }
        let on_table = kb.query(&FluentQuery::new(
            "isPlaced",
            vec![ArgPattern::Any, ArgPattern::Is("kitchen_table".into())],
        ));
        let shown: Vec<_> = on_table.iter().map(|f| f.to_string()).collect();
        assert_eq!(
            shown,
            ["isPlaced(book1,kitchen_table)", "isPlaced(coke2,kitchen_table)"]
        );
        let cokes = kb.query(&FluentQuery::new(
            "isPlaced",
            vec![ArgPattern::OfType("coke".into()), ArgPattern::Any],
        ));
        assert_eq!(cokes.len(), 2);
        let drinks = kb.query(&FluentQuery::new("drink", vec![ArgPattern::Any]));
        let ids: Vec<_> = drinks.iter().map(|f| f.atom.args[0].as_str()).collect();
        assert_eq!(ids, ["coke1", "coke2", "pepsi1"]);
    }

    #[test]
    fn counts_by_subsumption() {
        let mut kb = sample();
        assert_eq!(kb.count_instances("drink").unwrap(), 2);
        kb.remove_entity("pepsi1");
        assert_eq!(kb.count_instances("pepsi").unwrap(), 0);
        assert_eq!(kb.count_instances(TOP).unwrap(), kb.entities().count());
        assert_eq!(
            kb.count_instances("spaceship"),
            Err(KbError::UnknownType("spaceship".into()))
        );
    }

    #[test]
    fn removing_an_entity_drops_its_fluents() {
        let mut kb = sample();
        kb.assert_fluent(belief("isPlaced(coke1,cupboard)")).unwrap();
        kb.remove_entity("coke1").unwrap();
        assert!(kb.fluents().is_empty());
    }

    #[test]
    fn type_level_facts_are_inherited() {
        let mut kb = sample();
        kb.assert_fluent(belief("graspable(drink)")).unwrap();
        assert_eq!(
            kb.type_level_facts("pepsi", "pepsi_a1"),
            vec![Atom::new("graspable", ["pepsi_a1"])]
        );
        assert!(kb.type_level_facts("book", "book_a1").is_empty());
    }

    #[test]
    fn minted_ids() {
        let mut kb = sample();
        assert_eq!(kb.mint_id("pepsi"), "pepsi_a1");
        assert_eq!(kb.mint_id("coke"), "coke_a2");
        assert!(KnowledgeBase::is_minted("coke_a2"));
        assert!(!KnowledgeBase::is_minted("coke1"));
        assert!(!KnowledgeBase::is_minted("living_area"));
    }
}
