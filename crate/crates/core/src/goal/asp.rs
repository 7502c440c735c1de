//! Answer-set program text for inspection or an external solver.

use std::fmt::Write;

use super::{Subject, TaskSpec};
use crate::kb::{Epistemic, KnowledgeBase};
use crate::planner::{AtomTemplate, Domain, LiteralTemplate};

fn lit(l: &LiteralTemplate) -> String {
    let inner = if l.assumed {
        format!("assume({})", tight(&l.atom))
    } else {
        tight(&l.atom)
    };
    if l.negated {
        format!("-{inner}")
    } else {
        inner
    }
}

fn tight(a: &AtomTemplate) -> String {
    a.to_string().replace(", ", ",")
}

fn head(name: &str, vars: &[&str]) -> String {
    format!("{name}({})", vars.join(","))
}

/// Emits, in order: type memberships, hierarchy rules, static laws, current
/// fluents, action models as `action/pre/add/del` facts and the goal. The
/// output is deterministic.
pub fn export_asp(kb: &KnowledgeBase, spec: &TaskSpec, domain: &Domain) -> String {
    let mut out = String::new();
    out.push_str("% instances\n");
    let mut entities: Vec<_> = kb.entities().collect();
    entities.sort_by(|a, b| a.id.cmp(&b.id));
    for e in entities {
        let _ = writeln!(out, "{}({}).", e.type_name, e.id);
    }

    out.push_str("\n% type hierarchy\n");
    let mut edges: Vec<(&str, &str)> = kb.hierarchy().edges().filter(|(_, p)| *p != "entity").collect();
    edges.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
    for (child, parent) in edges {
        let _ = writeln!(out, "{parent}(A) :- {child}(A).");
    }

    out.push_str("\n% static laws\n");
    out.push_str("door(D,R2,R1) :- door(D,R1,R2).\n");
    out.push_str("isNear(A,H) :- isNear(A,L), isNear(H,L), human(H), A != H.\n");

    out.push_str("\n% fluents\n");
    for f in kb.fluents() {
        let a = &f.atom;
        let text = format!("{}({})", a.pred, a.args.join(","));
        let _ = match (f.negated, f.epistemic) {
            (_, Epistemic::Assumption) => writeln!(out, "assume({text})."),
            (true, _) => writeln!(out, "-{text}."),
            (false, _) => writeln!(out, "{text}."),
        };
    }
    for a in &spec.assumptions {
        match &a.site {
            Some(s) if kb.contains_instance(&a.object) => {
                let _ = writeln!(out, "assume(in({},{})).", a.object, s);
            }
            _ => {
                let _ = writeln!(out, "% {a}");
            }
        }
    }

    out.push_str("\n% action models\n");
    for s in &domain.schemas {
        let vars: Vec<&str> = s.params.iter().map(|p| p.var.as_str()).collect();
        let act = head(&s.name, &vars);
        let typing: Vec<String> = s.params.iter().map(|p| format!("{}({})", p.type_name, p.var)).collect();
        let _ = writeln!(out, "action({act}) :- {}.", typing.join(", "));
        for p in &s.pre {
            let _ = writeln!(out, "pre({act},{}) :- action({act}).", lit(p));
        }
        for e in &s.effects {
            let kind = if e.literal.negated { "del" } else { "add" };
            let mut inner = e.literal.clone();
            inner.negated = false;
            let cond = e.condition.as_ref().map(|c| format!(", {}", tight(c))).unwrap_or_default();
            let _ = writeln!(out, "{kind}({act},{}) :- action({act}){cond}.", lit(&inner));
        }
    }

    if !spec.goal.is_empty() {
        out.push_str("\n% goal\n");
        for c in &spec.goal.conditions {
            let _ = match &c.subject {
                Subject::Const(_) => writeln!(out, ":- not {c}."),
                Subject::Var => writeln!(out, "{c}."),
            };
        }
    }
    out
}
