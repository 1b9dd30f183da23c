//! Source-to-target element count comparison for one converted spec.

use serde::Serialize;

use super::model::{BpmnModel, FlowNodeKind};
use super::SYSTEM_LANE_ID;
use crate::ingest::{NodeRole, WorkflowSpec};

/// Counts taken from the source spec.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FCounts {
    pub action_nodes: usize,
    pub transitions: usize,
    pub queues: usize,
    pub start: usize,
    pub end: usize,
    pub human_queues_referenced: usize,
    pub split_points: usize,
    pub join_points: usize,
}

/// Counts taken from the produced model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BCounts {
    pub user_tasks: usize,
    pub service_tasks: usize,
    pub tasks: usize,
    pub exclusive_gateways: usize,
    pub parallel_gateways: usize,
    pub gateways: usize,
    pub start_events: usize,
    pub end_events: usize,
    pub flows: usize,
    /// Lanes derived from human queues.
    pub lanes: usize,
    pub system_lanes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Verdicts {
    #[serde(rename = "V1")]
    pub v1: bool,
    #[serde(rename = "V2")]
    pub v2: bool,
    #[serde(rename = "V3")]
    pub v3: bool,
    #[serde(rename = "V4")]
    pub v4: bool,
    #[serde(rename = "V5")]
    pub v5: bool,
}

impl Verdicts {
    pub fn all(&self) -> bool {
        self.v1 && self.v2 && self.v3 && self.v4 && self.v5
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatrixReport {
    pub process: String,
    #[serde(rename = "F")]
    pub f: FCounts,
    #[serde(rename = "B")]
    pub b: BCounts,
    pub verdicts: Verdicts,
    /// One entry per failed verdict: `omission` when B is below the expected
    /// count, `inflation` when above.
    pub flags: Vec<String>,
}

pub fn source_counts(spec: &WorkflowSpec) -> FCounts {
    let out = spec.out_degrees();
    let inc = spec.in_degrees();
    FCounts {
        action_nodes: spec.count_role(NodeRole::Action),
        transitions: spec.transitions.len(),
        queues: spec.queues.len(),
        start: spec.count_role(NodeRole::Start),
        end: spec.count_role(NodeRole::End),
        human_queues_referenced: spec
            .action_nodes()
            .filter(|n| spec.is_human(n))
            .filter_map(|n| n.queue.as_deref())
            .collect::<std::collections::BTreeSet<_>>()
            .len(),
        split_points: out.values().filter(|d| **d >= 2).count(),
        join_points: inc.values().filter(|d| **d >= 2).count(),
    }
}

pub fn model_counts(model: &BpmnModel) -> BCounts {
    let p = model.process();
    let user_tasks = p.count_kind(FlowNodeKind::UserTask);
    let service_tasks = p.count_kind(FlowNodeKind::ServiceTask);
    let exclusive_gateways = p.count_kind(FlowNodeKind::ExclusiveGateway);
    let parallel_gateways = p.count_kind(FlowNodeKind::ParallelGateway);
    let system_lanes = p.lanes.iter().filter(|l| l.id == SYSTEM_LANE_ID).count();
    BCounts {
        user_tasks,
        service_tasks,
        tasks: user_tasks + service_tasks,
        exclusive_gateways,
        parallel_gateways,
        gateways: exclusive_gateways + parallel_gateways,
        start_events: p.count_kind(FlowNodeKind::StartEvent),
        end_events: p.count_kind(FlowNodeKind::EndEvent),
        flows: p.flows.len(),
        lanes: p.lanes.len() - system_lanes,
        system_lanes,
    }
}

fn compare(flags: &mut Vec<String>, verdict: &str, what: &str, produced: usize, expected: usize) -> bool {
    if produced == expected {
        return true;
    }
    let kind = if produced < expected { "omission" } else { "inflation" };
    flags.push(format!(
        "{verdict} {kind}: {what} produced {produced}, expected {expected}"
    ));
    false
}

pub fn matrix_report(spec: &WorkflowSpec, model: &BpmnModel) -> MatrixReport {
    let f = source_counts(spec);
    let b = model_counts(model);
    let mut flags = Vec::new();
    let expected_gateways = f.split_points + f.join_points;
    let v1 = compare(&mut flags, "V1", "tasks", b.tasks, f.action_nodes);
    let v2_start = compare(&mut flags, "V2", "start events", b.start_events, 1);
    let v2_end = compare(&mut flags, "V2", "end events", b.end_events, f.end);
    let v3 = compare(&mut flags, "V3", "lanes", b.lanes, f.human_queues_referenced);
    let v4 = compare(&mut flags, "V4", "gateways", b.gateways, expected_gateways);
    let v5 = compare(&mut flags, "V5", "flows", b.flows, f.transitions + expected_gateways);
    MatrixReport {
        process: model.process().id.clone(),
        f,
        b,
        verdicts: Verdicts {
            v1,
            v2: v2_start && v2_end,
            v3,
            v4,
            v5,
        },
        flags,
    }
}
