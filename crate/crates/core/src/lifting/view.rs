//! The JSON document the mapping rules iterate over.
//!
//! It is a normalised projection of a validated [`WorkflowSpec`]: defaults
//! filled in, derived fields (`class`, `performer`, `next`, `buttonLabel`)
//! added, and synthesized elements included. Each element remembers the
//! pointer of the source element it came from.

use std::collections::HashMap;

use serde_json::{json, Map, Value};

use crate::ingest::{NodeRole, WorkflowSpec};

/// Fields each iterator exposes. Mapping placeholders are checked against this.
pub const VIEW_FIELDS: &[(&str, &[&str])] = &[
    ("$", &["name", "kind"]),
    (
        "$.nodes[*]",
        &[
            "id",
            "role",
            "label",
            "class",
            "queue",
            "processor",
            "form",
            "performer",
            "next",
        ],
    ),
    (
        "$.transitions[*]",
        &["id", "from", "to", "guard", "trigger", "buttonLabel"],
    ),
    ("$.queues[*]", &["id", "label", "kind"]),
    ("$.forms[*]", &["id", "title"]),
];

pub fn view_fields(iterator: &str) -> Option<&'static [&'static str]> {
    VIEW_FIELDS.iter().find(|(it, _)| *it == iterator).map(|(_, f)| *f)
}

#[derive(Debug, Clone)]
pub struct LiftView {
    pub doc: Value,
    /// View pointer to source-file pointer.
    pub provenance: HashMap<String, String>,
}

impl LiftView {
    pub fn source_pointer<'a>(&'a self, view_pointer: &'a str) -> &'a str {
        self.provenance.get(view_pointer).map_or(view_pointer, String::as_str)
    }
}

fn insert_opt(obj: &mut Map<String, Value>, key: &str, value: Option<&String>) {
    if let Some(v) = value {
        obj.insert(key.to_owned(), Value::String(v.clone()));
    }
}

pub fn build_view(spec: &WorkflowSpec) -> LiftView {
    let mut provenance = HashMap::new();
    provenance.insert(String::new(), String::new());

    let mut button_labels: HashMap<&str, &str> = HashMap::new();
    for n in &spec.nodes {
        for b in &n.buttons {
            button_labels.insert(b.transition.as_str(), b.label.as_str());
        }
    }

    let nodes: Vec<Value> = spec
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            provenance.insert(format!("/nodes/{i}"), n.pointer.clone());
            let class = match n.role {
                NodeRole::Start => "StartNode",
                NodeRole::Action => "ActionNode",
                NodeRole::End => "EndNode",
            };
            let mut obj = Map::new();
            obj.insert("id".into(), json!(n.id));
            obj.insert("role".into(), json!(n.role.as_str()));
            obj.insert("label".into(), json!(n.label));
            obj.insert("class".into(), json!(class));
            insert_opt(&mut obj, "queue", n.queue.as_ref());
            insert_opt(&mut obj, "processor", n.processor.as_ref());
            insert_opt(&mut obj, "form", n.form.as_ref());
            if n.role == NodeRole::Action {
                let performer = if spec.is_human(n) { "human" } else { "system" };
                obj.insert("performer".into(), json!(performer));
            }
            obj.insert("next".into(), json!(spec.successors(&n.id)));
            Value::Object(obj)
        })
        .collect();

    let transitions: Vec<Value> = spec
        .transitions
        .iter()
        .enumerate()
        .map(|(i, t)| {
            provenance.insert(format!("/transitions/{i}"), t.pointer.clone());
            let mut obj = Map::new();
            obj.insert("id".into(), json!(t.id));
            obj.insert("from".into(), json!(t.from));
            obj.insert("to".into(), json!(t.to));
            insert_opt(&mut obj, "guard", t.guard.as_ref());
            obj.insert("trigger".into(), json!(t.trigger.as_str()));
            if let Some(label) = button_labels.get(t.id.as_str()) {
                obj.insert("buttonLabel".into(), json!(label));
            }
            Value::Object(obj)
        })
        .collect();

    let queues: Vec<Value> = spec
        .queues
        .iter()
        .enumerate()
        .map(|(i, q)| {
            provenance.insert(format!("/queues/{i}"), q.pointer.clone());
            json!({"id": q.id, "label": q.label, "kind": q.kind.as_str()})
        })
        .collect();

    let forms: Vec<Value> = spec
        .forms
        .iter()
        .enumerate()
        .map(|(i, f)| {
            provenance.insert(format!("/forms/{i}"), f.pointer.clone());
            json!({"id": f.id, "title": f.title})
        })
        .collect();

    let kind = match spec.kind {
        crate::ingest::SpecKind::Request => "request",
        crate::ingest::SpecKind::Flow => "flow",
    };
    LiftView {
        doc: json!({
            "name": spec.name,
            "kind": kind,
            "nodes": nodes,
            "transitions": transitions,
            "queues": queues,
            "forms": forms,
        }),
        provenance,
    }
}
