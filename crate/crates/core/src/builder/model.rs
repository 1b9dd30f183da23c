//! In-memory BPMN model.

use serde::Serialize;

use crate::kb::Iri;
use crate::layout::DiPlane;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum FlowNodeKind {
    StartEvent,
    EndEvent,
    UserTask,
    ServiceTask,
    ExclusiveGateway,
    ParallelGateway,
}

impl FlowNodeKind {
    /// Local element name in the BPMN model namespace.
    pub fn tag(self) -> &'static str {
        match self {
            FlowNodeKind::StartEvent => "startEvent",
            FlowNodeKind::EndEvent => "endEvent",
            FlowNodeKind::UserTask => "userTask",
            FlowNodeKind::ServiceTask => "serviceTask",
            FlowNodeKind::ExclusiveGateway => "exclusiveGateway",
            FlowNodeKind::ParallelGateway => "parallelGateway",
        }
    }

    pub fn is_task(self) -> bool {
        matches!(self, FlowNodeKind::UserTask | FlowNodeKind::ServiceTask)
    }

    pub fn is_event(self) -> bool {
        matches!(self, FlowNodeKind::StartEvent | FlowNodeKind::EndEvent)
    }

    pub fn is_gateway(self) -> bool {
        matches!(self, FlowNodeKind::ExclusiveGateway | FlowNodeKind::ParallelGateway)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlowNode {
    pub id: String,
    pub kind: FlowNodeKind,
    pub name: String,
    pub lane: Option<String>,
    /// ABox individual this node was generated from; gateways point at their
    /// owning node.
    pub trace_iri: Iri,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SequenceFlow {
    pub id: String,
    pub source: String,
    pub target: String,
    pub name: Option<String>,
    pub condition: Option<String>,
    pub is_default: bool,
    pub trace_iri: Iri,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Lane {
    pub id: String,
    pub name: String,
    pub members: Vec<String>,
    /// Queue individual the lane derives from; `None` for the synthetic system lane.
    pub trace_iri: Option<Iri>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BpmnProcess {
    pub id: String,
    pub name: String,
    pub nodes: Vec<FlowNode>,
    pub flows: Vec<SequenceFlow>,
    pub lanes: Vec<Lane>,
}

impl BpmnProcess {
    pub fn node(&self, id: &str) -> Option<&FlowNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn count_kind(&self, kind: FlowNodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Participant {
    pub id: String,
    pub name: String,
    pub process_ref: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Collaboration {
    pub id: String,
    pub participants: Vec<Participant>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BpmnModel {
    pub definitions_id: String,
    pub processes: Vec<BpmnProcess>,
    pub collaboration: Option<Collaboration>,
    pub diagram: Option<DiPlane>,
}

impl BpmnModel {
    pub fn process(&self) -> &BpmnProcess {
        &self.processes[0]
    }

    /// Every id in the model, in emission order.
    pub fn all_ids(&self) -> Vec<&str> {
        let mut ids = vec![self.definitions_id.as_str()];
        if let Some(c) = &self.collaboration {
            ids.push(&c.id);
            ids.extend(c.participants.iter().map(|p| p.id.as_str()));
        }
        for p in &self.processes {
            ids.push(&p.id);
            ids.extend(p.lanes.iter().map(|l| l.id.as_str()));
            ids.extend(p.nodes.iter().map(|n| n.id.as_str()));
            ids.extend(p.flows.iter().map(|f| f.id.as_str()));
        }
        ids
    }

    /// First id that occurs twice, if any.
    pub fn duplicate_id(&self) -> Option<String> {
        let mut seen = std::collections::HashSet::new();
        self.all_ids()
            .into_iter()
            .find(|id| !seen.insert(*id))
            .map(str::to_owned)
    }
}

/// Maps an arbitrary source id onto the NCName-safe alphabet `[A-Za-z0-9_]`.
pub fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}
