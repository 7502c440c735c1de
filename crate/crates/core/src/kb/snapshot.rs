//! JSON snapshot format.
//!
//! ```json
//! {
//!   "types": { "drink": "object", "pepsi": "drink" },
//!   "entities": [ { "id": "pepsi1", "type": "pepsi", "properties": { "size": "small" } } ],
//!   "fluents": [ { "pred": "isPlaced", "args": ["pepsi1", "cupboard"], "neg": false,
//!                  "epistemic": "belief", "source": "sensor", "tick": 3 } ],
//!   "counter": 0
//! }
//! ```
//!
//! `types` lists every non-root node with its parent; the five roots are implicit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Atom, Entity, Epistemic, Fluent, KbError, KnowledgeBase, Source, TypeHierarchy};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Doc {
    types: BTreeMap<String, String>,
    entities: Vec<Entity>,
    fluents: Vec<FluentDoc>,
    counter: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FluentDoc {
    pred: String,
    args: Vec<String>,
    neg: bool,
    epistemic: Epistemic,
    source: Source,
    tick: u64,
}

pub(super) fn to_json(kb: &KnowledgeBase) -> String {
    let types = kb
        .hierarchy
        .edges()
        .filter(|(c, _)| !kb.hierarchy.is_root(c))
        .map(|(c, p)| (c.to_string(), p.to_string()))
        .collect();
    let doc = Doc {
        types,
        entities: kb.entities.values().cloned().collect(),
        fluents: kb
            .fluents()
            .into_iter()
            .map(|f| FluentDoc {
                pred: f.atom.pred,
                args: f.atom.args,
                neg: f.negated,
                epistemic: f.epistemic,
                source: f.source,
                tick: f.tick,
            })
            .collect(),
        counter: kb.minted,
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("snapshot serializes");
    out.push('\n');
    out
}

pub(super) fn from_json(text: &str) -> Result<KnowledgeBase, KbError> {
    let doc: Doc = serde_json::from_str(text).map_err(|e| KbError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    // parents may be listed after their children; insert in dependency order
    let mut hierarchy = TypeHierarchy::new();
    let mut pending: Vec<(String, String)> = doc.types.into_iter().collect();
    while !pending.is_empty() {
        let before = pending.len();
        let mut rest = Vec::new();
        for (child, parent) in pending {
            if hierarchy.contains(&parent) {
                hierarchy
                    .add(&child, &parent)
                    .map_err(|e| KbError::Snapshot(format!("types.{child}: {e}")))?;
            } else {
                rest.push((child, parent));
            }
        }
        if rest.len() == before {
            let (child, parent) = &rest[0];
            return Err(KbError::Snapshot(format!(
                "types.{child}: parent `{parent}` is unknown or cyclic"
            )));
        }
        pending = rest;
    }

    let mut kb = KnowledgeBase::new(hierarchy);
    for (i, e) in doc.entities.into_iter().enumerate() {
        kb.add_entity(e)
            .map_err(|err| KbError::Snapshot(format!("entities[{i}]: {err}")))?;
    }
    for (i, f) in doc.fluents.into_iter().enumerate() {
        let fluent = Fluent {
            atom: Atom {
                pred: f.pred,
                args: f.args,
            },
            negated: f.neg,
            epistemic: f.epistemic,
            source: f.source,
            tick: f.tick,
        };
        kb.assert_fluent(fluent)
            .map_err(|err| KbError::Snapshot(format!("fluents[{i}]: {err}")))?;
    }
    kb.minted = doc.counter;
    Ok(kb)
}
