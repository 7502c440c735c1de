use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::KbError;

/// Implicit top of the hierarchy; every root type hangs off it.
pub const TOP: &str = "entity";

/// The five root types. The set is fixed.
pub const ROOT_TYPES: [&str; 5] = ["robot", "human", "furniture", "room", "object"];

/// Tree of type names. Roots are the five fixed top types; every other node
/// has exactly one parent, which must already exist when the node is added,
/// so the graph is acyclic by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeHierarchy {
    parent: BTreeMap<String, String>,
}

impl Default for TypeHierarchy {
    fn default() -> Self {
        let parent = ROOT_TYPES
            .iter()
            .map(|r| (r.to_string(), TOP.to_string()))
            .collect();
        TypeHierarchy { parent }
    }
}

impl TypeHierarchy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, name: &str) -> bool {
        name == TOP || self.parent.contains_key(name)
    }

    pub fn is_root(&self, name: &str) -> bool {
        ROOT_TYPES.contains(&name)
    }

    pub fn parent(&self, name: &str) -> Option<&str> {
        self.parent.get(name).map(String::as_str)
    }

    pub fn add(&mut self, name: &str, parent: &str) -> Result<(), KbError> {
        if self.contains(name) {
            if self.parent(name) == Some(parent) {
                return Ok(());
            }
            return Err(KbError::DuplicateType(name.to_string()));
        }
        if parent == TOP {
            return Err(KbError::InvalidHierarchy(format!(
                "`{name}` cannot be a new root; roots are fixed"
            )));
        }
        if !self.contains(parent) {
            return Err(KbError::UnknownType(parent.to_string()));
        }
        self.parent.insert(name.to_string(), parent.to_string());
        Ok(())
    }

    /// The type itself followed by its ancestors, ending with `entity`.
    pub fn lineage(&self, name: &str) -> Result<Vec<String>, KbError> {
        if !self.contains(name) {
            return Err(KbError::UnknownType(name.to_string()));
        }
        let mut out = vec![name.to_string()];
        let mut cur = name;
        while let Some(p) = self.parent(cur) {
            out.push(p.to_string());
            cur = p;
        }
        Ok(out)
    }

    pub fn is_a(&self, name: &str, ancestor: &str) -> bool {
        self.lineage(name)
            .map(|l| l.iter().any(|t| t == ancestor))
            .unwrap_or(false)
    }

    /// The root type (one of the five) a node belongs to.
    pub fn root_of(&self, name: &str) -> Option<&'static str> {
        let lineage = self.lineage(name).ok()?;
        ROOT_TYPES
            .iter()
            .copied()
            .find(|r| lineage.iter().any(|t| t == r))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        std::iter::once(TOP).chain(self.parent.keys().map(String::as_str))
    }

    /// `(child, parent)` edges below the roots, in name order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.parent.iter().map(|(c, p)| (c.as_str(), p.as_str()))
    }

    pub fn children<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.parent
            .iter()
            .filter(move |(_, p)| p.as_str() == name)
            .map(|(c, _)| c.as_str())
    }
}
