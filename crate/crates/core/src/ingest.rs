//! Parsing and structural validation of Smart Flow / Smart Forms JSON
//! specifications.
//!
//! Checks run in four phases so that error precedence is fixed:
//! malformed JSON, then schema violations, then unresolved node references,
//! then unsupported (timer or dynamic) triggers. Every element keeps the JSON
//! pointer it was read from.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

pub const SPEC_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpecKind {
    Request,
    Flow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Start,
    Action,
    End,
}

impl NodeRole {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeRole::Start => "start",
            NodeRole::Action => "action",
            NodeRole::End => "end",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Trigger {
    Auto,
    Button,
    Timer,
    Dynamic,
}

impl Trigger {
    pub fn as_str(self) -> &'static str {
        match self {
            Trigger::Auto => "auto",
            Trigger::Button => "button",
            Trigger::Timer => "timer",
            Trigger::Dynamic => "dynamic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QueueKind {
    Human,
    System,
}

impl QueueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            QueueKind::Human => "human",
            QueueKind::System => "system",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ButtonDef {
    pub label: String,
    pub transition: String,
    pub pointer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeDef {
    pub id: String,
    pub role: NodeRole,
    pub label: String,
    pub queue: Option<String>,
    pub processor: Option<String>,
    pub form: Option<String>,
    pub buttons: Vec<ButtonDef>,
    /// JSON pointer of the source element. Synthesized elements point at the
    /// element they were derived from.
    pub pointer: String,
    pub synthesized: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransitionDef {
    pub id: String,
    pub from: String,
    pub to: String,
    pub guard: Option<String>,
    pub trigger: Trigger,
    pub pointer: String,
    pub synthesized: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueueDef {
    pub id: String,
    pub label: String,
    pub kind: QueueKind,
    pub pointer: String,
    pub synthesized: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FormField {
    pub name: String,
    pub field_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FormDef {
    pub id: String,
    pub title: String,
    pub fields: Vec<FormField>,
    pub pointer: String,
}

/// Validated in-memory form of one source file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WorkflowSpec {
    pub source_path: String,
    pub kind: SpecKind,
    pub name: String,
    pub nodes: Vec<NodeDef>,
    pub transitions: Vec<TransitionDef>,
    pub queues: Vec<QueueDef>,
    pub forms: Vec<FormDef>,
    pub processors: Vec<String>,
}

impl WorkflowSpec {
    pub fn node(&self, id: &str) -> Option<&NodeDef> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn queue(&self, id: &str) -> Option<&QueueDef> {
        self.queues.iter().find(|q| q.id == id)
    }

    pub fn start_node(&self) -> &NodeDef {
        self.nodes
            .iter()
            .find(|n| n.role == NodeRole::Start)
            .expect("validated spec has a start node")
    }

    pub fn action_nodes(&self) -> impl Iterator<Item = &NodeDef> {
        self.nodes.iter().filter(|n| n.role == NodeRole::Action)
    }

    pub fn count_role(&self, role: NodeRole) -> usize {
        self.nodes.iter().filter(|n| n.role == role).count()
    }

    /// True when the node is performed by a person (its queue is human).
    pub fn is_human(&self, node: &NodeDef) -> bool {
        node.queue
            .as_deref()
            .and_then(|q| self.queue(q))
            .is_some_and(|q| q.kind == QueueKind::Human)
    }

    /// Number of outgoing transitions per node id (transitions, not distinct targets).
    pub fn out_degrees(&self) -> HashMap<&str, usize> {
        let mut out = HashMap::new();
        for t in &self.transitions {
            *out.entry(t.from.as_str()).or_insert(0) += 1;
        }
        out
    }

    pub fn in_degrees(&self) -> HashMap<&str, usize> {
        let mut inc = HashMap::new();
        for t in &self.transitions {
            *inc.entry(t.to.as_str()).or_insert(0) += 1;
        }
        inc
    }

    /// Distinct target node ids in transition order.
    pub fn successors(&self, id: &str) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.transitions
            .iter()
            .filter(|t| t.from == id)
            .map(|t| t.to.as_str())
            .filter(|to| seen.insert(*to))
            .collect()
    }

    /// Distinct human queues referenced by action nodes, in declaration order.
    pub fn human_queues_referenced(&self) -> Vec<&QueueDef> {
        let used: BTreeSet<&str> = self.action_nodes().filter_map(|n| n.queue.as_deref()).collect();
        self.queues
            .iter()
            .filter(|q| q.kind == QueueKind::Human && used.contains(q.id.as_str()))
            .collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IngestError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("schema violation at `{pointer}`: {message}")]
    Schema { pointer: String, message: String },
    #[error("unresolved node reference `{node}` at `{pointer}`")]
    UnresolvedNode { pointer: String, node: String },
    #[error("unsupported {trigger} transition at `{pointer}`")]
    TimerUnsupported { pointer: String, trigger: String },
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::MalformedJson(_) => "E_MALFORMED_JSON",
            IngestError::Schema { .. } => "E_SCHEMA",
            IngestError::UnresolvedNode { .. } => "E_UNRESOLVED_NODE",
            IngestError::TimerUnsupported { .. } => "E_TIMER_UNSUPPORTED",
        }
    }

    pub fn pointer(&self) -> Option<&str> {
        match self {
            IngestError::MalformedJson(_) => None,
            IngestError::Schema { pointer, .. }
            | IngestError::UnresolvedNode { pointer, .. }
            | IngestError::TimerUnsupported { pointer, .. } => Some(pointer),
        }
    }
}

fn schema<T>(pointer: impl Into<String>, message: impl Into<String>) -> Result<T, IngestError> {
    Err(IngestError::Schema {
        pointer: pointer.into(),
        message: message.into(),
    })
}

/// Field access on one JSON object with pointer-aware errors.
struct Obj<'a> {
    map: &'a Map<String, Value>,
    pointer: String,
}

impl<'a> Obj<'a> {
    fn new(value: &'a Value, pointer: String, allowed: &[&str]) -> Result<Self, IngestError> {
        let Some(map) = value.as_object() else {
            return schema(pointer, "expected an object");
        };
        if let Some(key) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return schema(
                format!("{pointer}/{}", escape_pointer(key)),
                format!("unknown field `{key}`"),
            );
        }
        Ok(Self { map, pointer })
    }

    fn at(&self, key: &str) -> String {
        format!("{}/{}", self.pointer, escape_pointer(key))
    }

    fn opt_str(&self, key: &str) -> Result<Option<String>, IngestError> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => schema(self.at(key), "expected a string"),
        }
    }

    fn req_str(&self, key: &str) -> Result<String, IngestError> {
        match self.opt_str(key)? {
            Some(s) if !s.is_empty() => Ok(s),
            Some(_) => schema(self.at(key), "must not be empty"),
            None => schema(self.at(key), format!("missing required field `{key}`")),
        }
    }

    fn opt_array(&self, key: &str) -> Result<&'a [Value], IngestError> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(&[]),
            Some(Value::Array(items)) => Ok(items),
            Some(_) => schema(self.at(key), "expected an array"),
        }
    }

    fn enum_field<T: Copy>(&self, key: &str, options: &[(&str, T)], default: Option<T>) -> Result<T, IngestError> {
        match (self.opt_str(key)?, default) {
            (None, Some(d)) => Ok(d),
            (None, None) => schema(self.at(key), format!("missing required field `{key}`")),
            (Some(s), _) => match options.iter().find(|(name, _)| *name == s) {
                Some((_, v)) => Ok(*v),
                None => {
                    let names: Vec<_> = options.iter().map(|(n, _)| *n).collect();
                    schema(self.at(key), format!("`{s}` is not one of {names:?}"))
                }
            },
        }
    }
}

pub fn escape_pointer(segment: &str) -> String {
    segment.replace('~', "~0").replace('/', "~1")
}

const ROLES: &[(&str, NodeRole)] = &[
    ("start", NodeRole::Start),
    ("action", NodeRole::Action),
    ("end", NodeRole::End),
];
const TRIGGERS: &[(&str, Trigger)] = &[
    ("auto", Trigger::Auto),
    ("button", Trigger::Button),
    ("timer", Trigger::Timer),
    ("dynamic", Trigger::Dynamic),
];
const QUEUE_KINDS: &[(&str, QueueKind)] = &[("human", QueueKind::Human), ("system", QueueKind::System)];

/// Parses one source file. Total: every input yields a spec or exactly one
/// error, chosen by the fixed precedence described in the module docs.
pub fn parse_spec(raw: &[u8], source_path: &str) -> Result<WorkflowSpec, IngestError> {
    let root: Value = serde_json::from_slice(raw).map_err(|e| IngestError::MalformedJson(e.to_string()))?;
    let mut spec = read_schema(&root, source_path)?;
    check_node_references(&spec)?;
    check_triggers(&spec)?;
    if spec.kind == SpecKind::Request && spec.transitions.is_empty() {
        synthesize_request_flow(&mut spec);
    }
    Ok(spec)
}

fn read_schema(root: &Value, source_path: &str) -> Result<WorkflowSpec, IngestError> {
    let top = Obj::new(
        root,
        String::new(),
        &[
            "specVersion",
            "kind",
            "name",
            "nodes",
            "transitions",
            "queues",
            "forms",
            "processors",
        ],
    )?;
    match top.map.get("specVersion") {
        Some(v) if v.as_u64() == Some(SPEC_VERSION) => {}
        Some(_) => {
            return schema(
                "/specVersion",
                format!("unsupported specVersion, expected {SPEC_VERSION}"),
            )
        }
        None => return schema("/specVersion", "missing required field `specVersion`"),
    }
    let kind = top.enum_field(
        "kind",
        &[("request", SpecKind::Request), ("flow", SpecKind::Flow)],
        None,
    )?;
    let name = top.req_str("name")?;
    if !top.map.contains_key("nodes") {
        return schema("/nodes", "missing required field `nodes`");
    }

    let mut processors = Vec::new();
    for (i, p) in top.opt_array("processors")?.iter().enumerate() {
        match p.as_str() {
            Some(s) if !s.is_empty() => {
                if processors.iter().any(|x| x == s) {
                    return schema(format!("/processors/{i}"), format!("duplicate processor `{s}`"));
                }
                processors.push(s.to_owned());
            }
            _ => return schema(format!("/processors/{i}"), "expected a non-empty string"),
        }
    }

    let mut queues: Vec<QueueDef> = Vec::new();
    for (i, q) in top.opt_array("queues")?.iter().enumerate() {
        let o = Obj::new(q, format!("/queues/{i}"), &["id", "label", "kind"])?;
        let id = o.req_str("id")?;
        if queues.iter().any(|x| x.id == id) {
            return schema(o.at("id"), format!("duplicate queue id `{id}`"));
        }
        queues.push(QueueDef {
            label: o.opt_str("label")?.unwrap_or_else(|| id.clone()),
            kind: o.enum_field("kind", QUEUE_KINDS, None)?,
            id,
            pointer: o.pointer.clone(),
            synthesized: false,
        });
    }

    let mut forms: Vec<FormDef> = Vec::new();
    for (i, f) in top.opt_array("forms")?.iter().enumerate() {
        let o = Obj::new(f, format!("/forms/{i}"), &["id", "title", "fields"])?;
        let id = o.req_str("id")?;
        if forms.iter().any(|x| x.id == id) {
            return schema(o.at("id"), format!("duplicate form id `{id}`"));
        }
        let mut fields: Vec<FormField> = Vec::new();
        for (j, field) in o.opt_array("fields")?.iter().enumerate() {
            let fo = Obj::new(field, format!("{}/fields/{j}", o.pointer), &["name", "type"])?;
            let name = fo.req_str("name")?;
            if fields.iter().any(|x| x.name == name) {
                return schema(fo.at("name"), format!("duplicate field name `{name}`"));
            }
            fields.push(FormField {
                name,
                field_type: fo.opt_str("type")?.unwrap_or_else(|| "string".into()),
            });
        }
        forms.push(FormDef {
            title: o.opt_str("title")?.unwrap_or_else(|| id.clone()),
            id,
            fields,
            pointer: o.pointer.clone(),
        });
    }

    let mut transitions: Vec<TransitionDef> = Vec::new();
    for (i, t) in top.opt_array("transitions")?.iter().enumerate() {
        let o = Obj::new(
            t,
            format!("/transitions/{i}"),
            &["id", "from", "to", "guard", "trigger"],
        )?;
        let id = o.req_str("id")?;
        if transitions.iter().any(|x| x.id == id) {
            return schema(o.at("id"), format!("duplicate transition id `{id}`"));
        }
        transitions.push(TransitionDef {
            id,
            from: o.req_str("from")?,
            to: o.req_str("to")?,
            guard: o.opt_str("guard")?,
            trigger: o.enum_field("trigger", TRIGGERS, Some(Trigger::Auto))?,
            pointer: o.pointer.clone(),
            synthesized: false,
        });
    }

    let node_items = match top.map.get("nodes") {
        Some(Value::Array(items)) => items,
        _ => return schema("/nodes", "expected an array"),
    };
    let mut nodes: Vec<NodeDef> = Vec::new();
    let mut button_refs: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, n) in node_items.iter().enumerate() {
        let o = Obj::new(
            n,
            format!("/nodes/{i}"),
            &["id", "role", "label", "queue", "processor", "form", "buttons"],
        )?;
        let id = o.req_str("id")?;
        if nodes.iter().any(|x| x.id == id) {
            return schema(o.at("id"), format!("duplicate node id `{id}`"));
        }
        let role = o.enum_field("role", ROLES, None)?;
        let queue = o.opt_str("queue")?;
        let processor = o.opt_str("processor")?;
        let form = o.opt_str("form")?;
        match role {
            NodeRole::Start | NodeRole::End => {
                for (key, v) in [("queue", &queue), ("processor", &processor), ("form", &form)] {
                    if v.is_some() {
                        return schema(o.at(key), format!("{} nodes carry no {key}", role.as_str()));
                    }
                }
            }
            NodeRole::Action => {
                if queue.is_none() && processor.is_none() {
                    return schema(o.pointer.clone(), "action node needs a queue or a processor");
                }
            }
        }
        if let Some(q) = &queue {
            match queues.iter().find(|x| &x.id == q) {
                None => return schema(o.at("queue"), format!("undeclared queue `{q}`")),
                Some(qd) if qd.kind == QueueKind::System && processor.is_none() => {
                    return schema(o.at("queue"), "system-queue node needs a processor");
                }
                Some(_) => {}
            }
        }
        if let Some(p) = &processor {
            if !processors.contains(p) {
                return schema(o.at("processor"), format!("processor `{p}` is not in the catalogue"));
            }
        }
        if let Some(f) = &form {
            if !forms.iter().any(|x| &x.id == f) {
                return schema(o.at("form"), format!("undeclared form `{f}`"));
            }
        }
        let mut buttons = Vec::new();
        for (j, b) in o.opt_array("buttons")?.iter().enumerate() {
            let bo = Obj::new(b, format!("{}/buttons/{j}", o.pointer), &["label", "transition"])?;
            let transition = bo.req_str("transition")?;
            let Some(td) = transitions.iter().find(|t| t.id == transition) else {
                return schema(bo.at("transition"), format!("undeclared transition `{transition}`"));
            };
            *button_refs.entry(td.id.as_str()).or_insert(0) += 1;
            buttons.push(ButtonDef {
                label: bo.opt_str("label")?.unwrap_or_else(|| transition.clone()),
                transition,
                pointer: bo.pointer.clone(),
            });
        }
        nodes.push(NodeDef {
            label: o.opt_str("label")?.unwrap_or_else(|| id.clone()),
            id,
            role,
            queue,
            processor,
            form,
            buttons,
            pointer: o.pointer.clone(),
            synthesized: false,
        });
    }

    for t in &transitions {
        let refs = button_refs.get(t.id.as_str()).copied().unwrap_or(0);
        if t.trigger == Trigger::Button && refs != 1 {
            return schema(
                t.pointer.clone(),
                format!("button transition must be referenced by exactly one button, found {refs}"),
            );
        }
    }

    let starts = nodes.iter().filter(|n| n.role == NodeRole::Start).count();
    if starts != 1 {
        return schema("/nodes", format!("expected exactly one start node, found {starts}"));
    }
    if !nodes.iter().any(|n| n.role == NodeRole::End) {
        return schema("/nodes", "expected at least one end node");
    }

    Ok(WorkflowSpec {
        source_path: source_path.to_owned(),
        kind,
        name,
        nodes,
        transitions,
        queues,
        forms,
        processors,
    })
}

fn check_node_references(spec: &WorkflowSpec) -> Result<(), IngestError> {
    let ids: HashSet<&str> = spec.nodes.iter().map(|n| n.id.as_str()).collect();
    for t in &spec.transitions {
        for (key, node) in [("from", &t.from), ("to", &t.to)] {
            if !ids.contains(node.as_str()) {
                return Err(IngestError::UnresolvedNode {
                    pointer: format!("{}/{key}", t.pointer),
                    node: node.clone(),
                });
            }
        }
    }
    Ok(())
}

fn check_triggers(spec: &WorkflowSpec) -> Result<(), IngestError> {
    match spec
        .transitions
        .iter()
        .find(|t| matches!(t.trigger, Trigger::Timer | Trigger::Dynamic))
    {
        Some(t) => Err(IngestError::TimerUnsupported {
            pointer: format!("{}/trigger", t.pointer),
            trigger: t.trigger.as_str().to_owned(),
        }),
        None => Ok(()),
    }
}

/// Request files without transitions get a linear flow: start, the declared
/// action nodes in order (or a synthesized form-filling step), first end node.
fn synthesize_request_flow(spec: &mut WorkflowSpec) {
    let form_pointer = spec.forms.first().map(|f| f.pointer.clone()).unwrap_or_default();
    if spec.action_nodes().next().is_none() {
        let queue_id = match spec.queues.iter().find(|q| q.kind == QueueKind::Human) {
            Some(q) => q.id.clone(),
            None => {
                let mut id = String::from("requester");
                while spec.queue(&id).is_some() {
                    id.push('_');
                }
                spec.queues.push(QueueDef {
                    id: id.clone(),
                    label: "Requester".into(),
                    kind: QueueKind::Human,
                    pointer: String::new(),
                    synthesized: true,
                });
                id
            }
        };
        let mut id = String::from("fill_form");
        while spec.node(&id).is_some() {
            id.push('_');
        }
        let label = match spec.forms.first() {
            Some(f) => format!("Fill in {}", f.title),
            None => "Fill in request".to_owned(),
        };
        let end_idx = spec
            .nodes
            .iter()
            .position(|n| n.role == NodeRole::End)
            .unwrap_or(spec.nodes.len());
        spec.nodes.insert(
            end_idx,
            NodeDef {
                id,
                role: NodeRole::Action,
                label,
                queue: Some(queue_id),
                processor: None,
                form: spec.forms.first().map(|f| f.id.clone()),
                buttons: Vec::new(),
                pointer: form_pointer,
                synthesized: true,
            },
        );
    }
    let mut chain: Vec<&NodeDef> = vec![spec.start_node()];
    chain.extend(spec.action_nodes());
    chain.extend(spec.nodes.iter().find(|n| n.role == NodeRole::End));
    let transitions = chain
        .windows(2)
        .enumerate()
        .map(|(k, pair)| TransitionDef {
            id: format!("t_auto_{}", k + 1),
            from: pair[0].id.clone(),
            to: pair[1].id.clone(),
            guard: None,
            trigger: Trigger::Auto,
            pointer: pair[0].pointer.clone(),
            synthesized: true,
        })
        .collect();
    spec.transitions = transitions;
}
