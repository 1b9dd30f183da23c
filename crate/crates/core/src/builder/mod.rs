//! Construction of the BPMN model from the validated knowledge base.

mod matrix;
mod model;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use thiserror::Error;

pub use matrix::{matrix_report, BCounts, FCounts, MatrixReport, Verdicts};
pub use model::{
    sanitize, BpmnModel, BpmnProcess, Collaboration, FlowNode, FlowNodeKind, Lane, Participant, SequenceFlow,
};

use crate::ingest::WorkflowSpec;
use crate::kb::{Iri, Term, TripleGraph};
use crate::validator::{flow_nodes, FlowGraph};
use crate::vocab::{bpmn, sf, trace};

pub const SYSTEM_LANE_ID: &str = "lane_system";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
    #[error("build precondition failed for {subject}: {message}")]
    Precondition { subject: String, message: String },
    #[error("id `{0}` is not unique after sanitization")]
    IdCollision(String),
}

impl BuildError {
    pub fn code(&self) -> &'static str {
        match self {
            BuildError::Precondition { .. } => "E_BUILD_PRECONDITION",
            BuildError::IdCollision(_) => "E_ID_COLLISION",
        }
    }
}

fn precondition(subject: &Iri, message: impl Into<String>) -> BuildError {
    BuildError::Precondition {
        subject: subject.to_string(),
        message: message.into(),
    }
}

fn source_path<'g>(g: &'g TripleGraph, x: &Iri) -> Option<&'g str> {
    g.object(x, &trace::source_path())
        .and_then(Term::as_literal)
        .map(|l| l.lexical())
}

fn kind_of(g: &TripleGraph, x: &Iri) -> Result<FlowNodeKind, BuildError> {
    if g.has_type(x, &bpmn::gateway()) {
        return match (
            g.has_type(x, &bpmn::exclusive_gateway()),
            g.has_type(x, &bpmn::parallel_gateway()),
        ) {
            (true, false) => Ok(FlowNodeKind::ExclusiveGateway),
            (false, true) => Ok(FlowNodeKind::ParallelGateway),
            _ => Err(precondition(x, "gateway is not typed exclusive xor parallel")),
        };
    }
    let kinds: Vec<FlowNodeKind> = [
        (bpmn::start_event(), FlowNodeKind::StartEvent),
        (bpmn::end_event(), FlowNodeKind::EndEvent),
        (bpmn::user_task(), FlowNodeKind::UserTask),
        (bpmn::service_task(), FlowNodeKind::ServiceTask),
    ]
    .into_iter()
    .filter(|(c, _)| g.has_type(x, c))
    .map(|(_, k)| k)
    .collect();
    match kinds.as_slice() {
        [k] => Ok(*k),
        [] => Err(precondition(x, "no BPMN flow node type")),
        _ => Err(precondition(x, format!("ambiguous BPMN flow node types {kinds:?}"))),
    }
}

/// (join gateway, node, split gateway) for one spec node.
type NodeSlots = (Option<NodeInfo>, Option<NodeInfo>, Option<NodeInfo>);

struct NodeInfo {
    iri: Iri,
    id: String,
    kind: FlowNodeKind,
    name: String,
    /// Owning node individual for gateways.
    owner: Option<Iri>,
    /// Human queue lane resolved for user tasks.
    lane: Option<String>,
}

/// Builds the single-process, single-pool model for one spec.
pub fn build_model(g: &TripleGraph, spec: &WorkflowSpec) -> Result<BpmnModel, BuildError> {
    let node_by_ptr: HashMap<&str, usize> = spec
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.pointer.as_str(), i))
        .collect();
    let transition_by_ptr: HashMap<&str, usize> = spec
        .transitions
        .iter()
        .enumerate()
        .map(|(i, t)| (t.pointer.as_str(), i))
        .collect();
    let queue_by_ptr: HashMap<&str, usize> = spec
        .queues
        .iter()
        .enumerate()
        .map(|(i, q)| (q.pointer.as_str(), i))
        .collect();

    // Flow nodes, keyed by the spec node they come from (gateways by owner).
    let mut by_spec_node: BTreeMap<usize, NodeSlots> = BTreeMap::new();
    let mut lane_queues: BTreeSet<usize> = BTreeSet::new();
    let mut lane_iris: HashMap<usize, Iri> = HashMap::new();

    for x in flow_nodes(g) {
        let kind = kind_of(g, &x)?;
        if kind.is_gateway() {
            let owner = g
                .object(&x, &sf::gateway_of())
                .and_then(Term::as_iri)
                .ok_or_else(|| precondition(&x, "gateway has no owning node"))?
                .clone();
            let idx = source_path(g, &owner)
                .and_then(|p| node_by_ptr.get(p))
                .copied()
                .ok_or_else(|| precondition(&x, "owning node does not trace to a source node"))?;
            let role = match g.object(&x, &sf::gateway_role()).and_then(Term::as_literal) {
                Some(l) if l.lexical() == "split" => "split",
                Some(l) if l.lexical() == "join" => "join",
                _ => return Err(precondition(&x, "gateway role is neither split nor join")),
            };
            let info = NodeInfo {
                iri: x.clone(),
                id: format!("gw_{}_{role}", sanitize(&spec.nodes[idx].id)),
                kind,
                name: String::new(),
                owner: Some(owner),
                lane: None,
            };
            let slot = by_spec_node.entry(idx).or_default();
            if role == "join" {
                slot.0 = Some(info);
            } else {
                slot.2 = Some(info);
            }
            continue;
        }
        let idx = source_path(g, &x)
            .and_then(|p| node_by_ptr.get(p))
            .copied()
            .ok_or_else(|| precondition(&x, "does not trace to a source node"))?;
        let def = &spec.nodes[idx];
        let mut lane = None;
        if kind == FlowNodeKind::UserTask {
            let lanes: Vec<&Iri> = g
                .objects(&x, &bpmn::has_lane())
                .filter_map(Term::as_iri)
                .filter(|l| g.has_type(l, &bpmn::lane()))
                .collect();
            let [l] = lanes.as_slice() else {
                return Err(precondition(&x, format!("user task has {} lanes", lanes.len())));
            };
            let q = source_path(g, l)
                .and_then(|p| queue_by_ptr.get(p))
                .copied()
                .ok_or_else(|| precondition(l, "lane does not trace to a queue"))?;
            lane_queues.insert(q);
            lane_iris.insert(q, (*l).clone());
            lane = Some(format!("lane_{}", sanitize(&spec.queues[q].id)));
        }
        let slot = by_spec_node.entry(idx).or_default();
        if slot.1.is_some() {
            return Err(precondition(
                &x,
                format!("two individuals trace to source node `{}`", def.id),
            ));
        }
        slot.1 = Some(NodeInfo {
            iri: x.clone(),
            id: format!("n_{}", sanitize(&def.id)),
            kind,
            name: def.label.clone(),
            owner: None,
            lane,
        });
    }

    let mut infos: Vec<NodeInfo> = Vec::new();
    for (_, (join, node, split)) in by_spec_node {
        infos.extend(join);
        infos.extend(node);
        infos.extend(split);
    }
    let id_of: HashMap<&Iri, &str> = infos.iter().map(|n| (&n.iri, n.id.as_str())).collect();

    // Sequence flows: lifted transitions in spec order, then connectors.
    let button_labels: HashMap<&str, &str> = spec
        .nodes
        .iter()
        .flat_map(|n| n.buttons.iter().map(|b| (b.transition.as_str(), b.label.as_str())))
        .collect();
    let fg = FlowGraph::read(g);
    let mut lifted: Vec<(usize, SequenceFlow)> = Vec::new();
    let mut connectors: Vec<SequenceFlow> = Vec::new();
    for (f, (s, t)) in &fg.flows {
        let endpoint = |e: &Option<Iri>, what: &str| -> Result<String, BuildError> {
            e.as_ref()
                .and_then(|x| id_of.get(x))
                .map(|id| (*id).to_owned())
                .ok_or_else(|| precondition(f, format!("flow {what} is not a flow node")))
        };
        let source = endpoint(s, "source")?;
        let target = endpoint(t, "target")?;
        let is_default = s
            .as_ref()
            .is_some_and(|src| g.contains_parts(src, &bpmn::has_default(), &Term::Iri(f.clone())));
        if let Some(gw) = g.object(f, &sf::connector_of()).and_then(Term::as_iri) {
            let gw_id = id_of
                .get(gw)
                .ok_or_else(|| precondition(f, "connector of an unknown gateway"))?;
            let owner = infos
                .iter()
                .find(|n| &n.iri == gw)
                .and_then(|n| n.owner.clone())
                .unwrap_or_else(|| gw.clone());
            connectors.push(SequenceFlow {
                id: format!("f_{gw_id}"),
                source,
                target,
                name: None,
                condition: None,
                is_default,
                trace_iri: owner,
            });
            continue;
        }
        let idx = source_path(g, f)
            .and_then(|p| transition_by_ptr.get(p))
            .copied()
            .ok_or_else(|| precondition(f, "flow does not trace to a source transition"))?;
        let def = &spec.transitions[idx];
        lifted.push((
            idx,
            SequenceFlow {
                id: format!("f_{}", sanitize(&def.id)),
                source,
                target,
                name: button_labels.get(def.id.as_str()).map(|s| (*s).to_owned()),
                condition: def.guard.clone(),
                is_default,
                trace_iri: f.clone(),
            },
        ));
    }
    lifted.sort_by_key(|(i, _)| *i);
    connectors.sort_by(|a, b| a.id.cmp(&b.id));
    let flows: Vec<SequenceFlow> = lifted.into_iter().map(|(_, f)| f).chain(connectors).collect();

    let lanes = assign_lanes(spec, &mut infos, &flows, &lane_queues, &lane_iris);

    let nodes: Vec<FlowNode> = infos
        .into_iter()
        .map(|n| FlowNode {
            trace_iri: n.owner.unwrap_or(n.iri),
            id: n.id,
            kind: n.kind,
            name: n.name,
            lane: n.lane,
        })
        .collect();

    let name = sanitize(&spec.name);
    let process = BpmnProcess {
        id: format!("p_{name}"),
        name: spec.name.clone(),
        nodes,
        flows,
        lanes,
    };
    let model = BpmnModel {
        definitions_id: format!("defs_{name}"),
        collaboration: Some(Collaboration {
            id: format!("collab_{name}"),
            participants: vec![Participant {
                id: format!("pool_{name}"),
                name: spec.name.clone(),
                process_ref: process.id.clone(),
            }],
        }),
        processes: vec![process],
        diagram: None,
    };
    if let Some(dup) = model.duplicate_id() {
        return Err(BuildError::IdCollision(dup));
    }
    Ok(model)
}

/// Human queue lanes in declaration order, plus the system lane when service
/// tasks share the pool with human lanes. Events and gateways join the lane
/// of the nearest task (gateways follow their owner).
fn assign_lanes(
    spec: &WorkflowSpec,
    infos: &mut [NodeInfo],
    flows: &[SequenceFlow],
    lane_queues: &BTreeSet<usize>,
    lane_iris: &HashMap<usize, Iri>,
) -> Vec<Lane> {
    if lane_queues.is_empty() {
        return Vec::new();
    }
    for n in infos.iter_mut() {
        if n.kind == FlowNodeKind::ServiceTask {
            n.lane = Some(SYSTEM_LANE_ID.to_owned());
        }
    }
    let mut adjacency: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for f in flows {
        adjacency.entry(&f.source).or_default().insert(&f.target);
        adjacency.entry(&f.target).or_default().insert(&f.source);
    }
    let task_lane: HashMap<String, String> = infos
        .iter()
        .filter(|n| n.kind.is_task())
        .filter_map(|n| Some((n.id.clone(), n.lane.clone()?)))
        .collect();
    let nearest = |start: &str| -> Option<String> {
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            if let Some(l) = task_lane.get(x) {
                return Some(l.clone());
            }
            for y in adjacency.get(x).into_iter().flatten() {
                if seen.insert(y) {
                    queue.push_back(y);
                }
            }
        }
        None
    };
    let fallback = format!(
        "lane_{}",
        sanitize(&spec.queues[*lane_queues.iter().next().expect("non-empty")].id)
    );
    let resolved: Vec<Option<String>> = infos
        .iter()
        .map(|n| match n.lane {
            Some(_) => None,
            None => Some(nearest(&n.id).unwrap_or_else(|| fallback.clone())),
        })
        .collect();
    for (n, lane) in infos.iter_mut().zip(resolved) {
        if lane.is_some() {
            n.lane = lane;
        }
    }

    let mut lanes: Vec<Lane> = lane_queues
        .iter()
        .map(|&q| Lane {
            id: format!("lane_{}", sanitize(&spec.queues[q].id)),
            name: spec.queues[q].label.clone(),
            members: Vec::new(),
            trace_iri: lane_iris.get(&q).cloned(),
        })
        .collect();
    if infos.iter().any(|n| n.lane.as_deref() == Some(SYSTEM_LANE_ID)) {
        lanes.push(Lane {
            id: SYSTEM_LANE_ID.to_owned(),
            name: "System".to_owned(),
            members: Vec::new(),
            trace_iri: None,
        });
    }
    for n in infos.iter() {
        if let Some(l) = lanes.iter_mut().find(|l| Some(&l.id) == n.lane.as_ref()) {
            l.members.push(n.id.clone());
        }
    }
    lanes
}
