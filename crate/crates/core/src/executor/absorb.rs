use crate::kb::{ArgPattern, Atom, Fluent, FluentQuery, KnowledgeBase, Source};
use crate::sim::{Observation, Sensed, ROBOT};

/// What an observation changed in the knowledge base.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Absorbed {
    pub delta: Vec<Sensed>,
    /// Newly met instances as `id:type`.
    pub entities: Vec<String>,
    /// Known objects dropped because they are no longer anywhere the robot knows of.
    pub forgotten: Vec<String>,
}

/// Does the knowledge base place `id` anywhere (believed or assumed)?
pub fn has_location(kb: &KnowledgeBase, id: &str) -> bool {
    ["isPlaced", "isHeld", "inHand", "isNear"].iter().any(|p| {
        !kb.query(&FluentQuery::new(*p, vec![ArgPattern::Is(id.to_string()), ArgPattern::Any]))
            .iter()
            .all(|f| f.negated)
    })
}

/// An object is at one place and a person near one location, so a
/// positive sighting retracts the alternatives.
fn make_exclusive(kb: &mut KnowledgeBase, atom: &Atom) {
    let preds: &[&str] = match atom.pred.as_str() {
        "isPlaced" => &["isPlaced", "isHeld", "inHand"],
        "isNear" if atom.args[0] != ROBOT => &["isNear"],
        _ => return,
    };
    let subject = atom.args[0].clone();
    for p in preds {
        let q = FluentQuery::new(*p, vec![ArgPattern::Is(subject.clone()), ArgPattern::Any]);
        for f in kb.query(&q) {
            if f.atom != *atom && !f.negated {
                kb.retract(&f.atom, f.epistemic);
            }
        }
    }
}

/// Folds a sensor observation into the knowledge base. Sensed facts
/// override assumptions and earlier beliefs.
pub fn absorb(kb: &mut KnowledgeBase, obs: &Observation, tick: u64) -> Absorbed {
    let mut out = Absorbed::default();
    for e in &obs.entities {
        if !kb.contains_instance(&e.id) && kb.hierarchy().contains(&e.type_name) && kb.add_entity(e.clone()).is_ok() {
            out.entities.push(format!("{}:{}", e.id, e.type_name));
        }
    }
    for s in &obs.facts {
        if !s.atom.args.iter().all(|a| kb.contains_instance(a) || kb.hierarchy().contains(a)) {
            continue;
        }
        let changed = if s.positive {
            let before = kb.holds(&s.atom);
            make_exclusive(kb, &s.atom);
            kb.assert_fluent(Fluent::belief(s.atom.clone(), Source::Sensor, tick)).unwrap_or(false) && !before
        } else {
            let was = kb.holds(&s.atom) || kb.is_assumed(&s.atom);
            let _ = kb.assert_fluent(Fluent::negative(s.atom.clone(), Source::Sensor, tick));
            was
        };
        if changed {
            out.delta.push(s.clone());
        }
    }
    for s in &obs.facts {
        if s.positive || s.atom.pred != "isPlaced" {
            continue;
        }
        let o = &s.atom.args[0];
        if kb.contains_instance(o) && !KnowledgeBase::is_minted(o) && !has_location(kb, o) {
            kb.remove_entity(o);
            out.forgotten.push(o.clone());
        }
    }
    out
}
