use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Condition, Subject};
use crate::kb::{Atom, KnowledgeBase};

/// Argument categories that decide what a generic `in(X,Y)` means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Robot,
    Person,
    GraspableObject,
    Object,
    Furniture,
    Room,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Robot,
        Category::Person,
        Category::GraspableObject,
        Category::Object,
        Category::Furniture,
        Category::Room,
    ];

    fn is_agent(self) -> bool {
        matches!(self, Category::Robot | Category::Person)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecializeError {
    #[error("cannot tell what `{0}` is")]
    Uncategorized(String),
    #[error("no relation maps in({subject},{target}) for categories {subject_cat:?}/{target_cat:?}")]
    Unmappable {
        subject: String,
        target: String,
        subject_cat: Category,
        target_cat: Category,
    },
}

/// The mapping table for `in(X,Y)`.
pub fn specialize(subject: Category, target: Category) -> Option<&'static str> {
    use Category::*;
    match (subject, target) {
        (GraspableObject, t) if t.is_agent() => Some("isHeld"),
        (GraspableObject | Object, Furniture) => Some("isPlaced"),
        (s, Room) if s.is_agent() => Some("inRoom"),
        (s, Furniture) if s.is_agent() => Some("isNear"),
        (s, Person) if s.is_agent() => Some("isNear"),
        _ => None,
    }
}

fn type_graspable(kb: &KnowledgeBase, type_name: &str) -> bool {
    kb.hierarchy()
        .lineage(type_name)
        .map(|l| l.iter().any(|t| kb.holds(&Atom::new("graspable", [t.as_str()]))))
        .unwrap_or(false)
}

pub fn category_of_type(kb: &KnowledgeBase, type_name: &str) -> Option<Category> {
    Some(match kb.hierarchy().root_of(type_name)? {
        "robot" => Category::Robot,
        "human" => Category::Person,
        "furniture" => Category::Furniture,
        "room" => Category::Room,
        _ if type_graspable(kb, type_name) => Category::GraspableObject,
        _ => Category::Object,
    })
}

/// Category of an instance id, or of a type name when no instance has that id.
pub fn category_of(kb: &KnowledgeBase, id: &str) -> Option<Category> {
    match kb.entity(id) {
        Some(e) => {
            let cat = category_of_type(kb, &e.type_name)?;
            if cat == Category::Object && kb.holds(&Atom::new("graspable", [id])) {
                Some(Category::GraspableObject)
            } else {
                Some(cat)
            }
        }
        None => category_of_type(kb, id),
    }
}

/// Concrete predicate for a condition still phrased with `in`.
pub fn specialize_in(cond: &Condition, kb: &KnowledgeBase) -> Result<&'static str, SpecializeError> {
    let subject = match &cond.subject {
        Subject::Const(c) => c.clone(),
        Subject::Var => cond.guard_type().unwrap_or("X").to_string(),
    };
    let subject_cat = category_of(kb, &subject).ok_or_else(|| SpecializeError::Uncategorized(subject.clone()))?;
    let target_cat =
        category_of(kb, &cond.target).ok_or_else(|| SpecializeError::Uncategorized(cond.target.clone()))?;
    specialize(subject_cat, target_cat).ok_or(SpecializeError::Unmappable {
        subject,
        target: cond.target.clone(),
        subject_cat,
        target_cat,
    })
}
