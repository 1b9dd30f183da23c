//! BPMN 2.0 XML with diagram interchange, and an SVG rendering.

mod svg;
mod xml;

use std::collections::HashSet;

use thiserror::Error;

pub use svg::to_svg;
pub use xml::{escape_attr, escape_text, XmlWriter};

use crate::builder::{BpmnModel, FlowNodeKind};
use crate::layout::{Bounds, DiPlane};

pub const NS_BPMN: &str = "http://www.omg.org/spec/BPMN/20100524/MODEL";
pub const NS_BPMNDI: &str = "http://www.omg.org/spec/BPMN/20100524/DI";
pub const NS_DC: &str = "http://www.omg.org/spec/DD/20100524/DC";
pub const NS_DI: &str = "http://www.omg.org/spec/DD/20100524/DI";
pub const NS_XSI: &str = "http://www.w3.org/2001/XMLSchema-instance";
pub const NS_TRACE: &str = "https://example.org/trace";
pub const TARGET_NAMESPACE: &str = "https://example.org/bpmn";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SerializeError {
    #[error("id `{0}` is emitted twice")]
    IdCollision(String),
    #[error("element `{0}` has no diagram geometry")]
    MissingGeometry(String),
}

impl SerializeError {
    pub fn code(&self) -> &'static str {
        match self {
            SerializeError::IdCollision(_) => "E_ID_COLLISION",
            SerializeError::MissingGeometry(_) => "E_SERIALIZE_INPUT",
        }
    }
}

/// Checks that ids are unique and that the plane covers every node and flow.
pub(crate) fn check_consistency(model: &BpmnModel, plane: &DiPlane) -> Result<(), SerializeError> {
    if let Some(dup) = model.duplicate_id() {
        return Err(SerializeError::IdCollision(dup));
    }
    let shapes: HashSet<&str> = plane.shapes.iter().map(|s| s.element.as_str()).collect();
    let edges: HashSet<&str> = plane.edges.iter().map(|e| e.element.as_str()).collect();
    let p = model.process();
    if let Some(n) = p.nodes.iter().find(|n| !shapes.contains(n.id.as_str())) {
        return Err(SerializeError::MissingGeometry(n.id.clone()));
    }
    if let Some(f) = p.flows.iter().find(|f| !edges.contains(f.id.as_str())) {
        return Err(SerializeError::MissingGeometry(f.id.clone()));
    }
    Ok(())
}

fn bounds_element(w: &mut XmlWriter, b: &Bounds) {
    w.empty(
        "dc:Bounds",
        vec![
            ("height", b.height.to_string()),
            ("width", b.width.to_string()),
            ("x", b.x.to_string()),
            ("y", b.y.to_string()),
        ],
    );
}

fn di_id(element: &str) -> String {
    format!("di_{element}")
}

pub fn to_bpmn_xml(model: &BpmnModel, plane: &DiPlane) -> Result<String, SerializeError> {
    check_consistency(model, plane)?;
    let mut w = XmlWriter::with_declaration();
    w.open(
        "bpmn:definitions",
        vec![
            ("exporter", "flow2bpmn".into()),
            ("exporterVersion", env!("CARGO_PKG_VERSION").into()),
            ("id", model.definitions_id.clone()),
            ("targetNamespace", TARGET_NAMESPACE.into()),
            ("xmlns:bpmn", NS_BPMN.into()),
            ("xmlns:bpmndi", NS_BPMNDI.into()),
            ("xmlns:dc", NS_DC.into()),
            ("xmlns:di", NS_DI.into()),
            ("xmlns:trace", NS_TRACE.into()),
            ("xmlns:xsi", NS_XSI.into()),
        ],
    );
    if let Some(c) = &model.collaboration {
        w.open("bpmn:collaboration", vec![("id", c.id.clone())]);
        for p in &c.participants {
            w.empty(
                "bpmn:participant",
                vec![
                    ("id", p.id.clone()),
                    ("name", p.name.clone()),
                    ("processRef", p.process_ref.clone()),
                ],
            );
        }
        w.close("bpmn:collaboration");
    }

    for p in &model.processes {
        w.open(
            "bpmn:process",
            vec![
                ("id", p.id.clone()),
                ("isExecutable", "false".into()),
                ("name", p.name.clone()),
            ],
        );
        if !p.lanes.is_empty() {
            w.open("bpmn:laneSet", vec![("id", format!("{}_laneset", p.id))]);
            for lane in &p.lanes {
                let mut attrs = vec![("id", lane.id.clone()), ("name", lane.name.clone())];
                if let Some(t) = &lane.trace_iri {
                    attrs.push(("trace:sourceIri", t.to_string()));
                }
                w.open("bpmn:lane", attrs);
                for m in &lane.members {
                    w.text("bpmn:flowNodeRef", vec![], m);
                }
                w.close("bpmn:lane");
            }
            w.close("bpmn:laneSet");
        }
        for n in &p.nodes {
            let tag = format!("bpmn:{}", n.kind.tag());
            let mut attrs = vec![("id", n.id.clone()), ("trace:sourceIri", n.trace_iri.to_string())];
            if !n.name.is_empty() {
                attrs.push(("name", n.name.clone()));
            }
            if n.kind == FlowNodeKind::ExclusiveGateway {
                if let Some(d) = p.flows.iter().find(|f| f.source == n.id && f.is_default) {
                    attrs.push(("default", d.id.clone()));
                }
            }
            let incoming: Vec<&str> = p
                .flows
                .iter()
                .filter(|f| f.target == n.id)
                .map(|f| f.id.as_str())
                .collect();
            let outgoing: Vec<&str> = p
                .flows
                .iter()
                .filter(|f| f.source == n.id)
                .map(|f| f.id.as_str())
                .collect();
            if incoming.is_empty() && outgoing.is_empty() {
                w.empty(&tag, attrs);
                continue;
            }
            w.open(&tag, attrs);
            for f in incoming {
                w.text("bpmn:incoming", vec![], f);
            }
            for f in outgoing {
                w.text("bpmn:outgoing", vec![], f);
            }
            w.close(&tag);
        }
        for f in &p.flows {
            let mut attrs = vec![
                ("id", f.id.clone()),
                ("sourceRef", f.source.clone()),
                ("targetRef", f.target.clone()),
                ("trace:sourceIri", f.trace_iri.to_string()),
            ];
            if let Some(name) = &f.name {
                attrs.push(("name", name.clone()));
            }
            match &f.condition {
                Some(c) => {
                    w.open("bpmn:sequenceFlow", attrs);
                    w.text(
                        "bpmn:conditionExpression",
                        vec![("xsi:type", "bpmn:tFormalExpression".into())],
                        c,
                    );
                    w.close("bpmn:sequenceFlow");
                }
                None => w.empty("bpmn:sequenceFlow", attrs),
            }
        }
        w.close("bpmn:process");
    }

    let plane_element = model
        .collaboration
        .as_ref()
        .map(|c| c.id.clone())
        .unwrap_or_else(|| model.process().id.clone());
    w.open("bpmndi:BPMNDiagram", vec![("id", "di_diagram".into())]);
    w.open(
        "bpmndi:BPMNPlane",
        vec![("bpmnElement", plane_element), ("id", "di_plane".into())],
    );
    if let Some(pool) = &plane.pool {
        w.open(
            "bpmndi:BPMNShape",
            vec![
                ("bpmnElement", pool.element.clone()),
                ("id", di_id(&pool.element)),
                ("isHorizontal", "true".into()),
            ],
        );
        bounds_element(&mut w, &pool.bounds);
        w.close("bpmndi:BPMNShape");
    }
    for lane in &plane.lanes {
        w.open(
            "bpmndi:BPMNShape",
            vec![
                ("bpmnElement", lane.lane.clone()),
                ("id", di_id(&lane.lane)),
                ("isHorizontal", "true".into()),
            ],
        );
        bounds_element(&mut w, &lane.bounds);
        w.close("bpmndi:BPMNShape");
    }
    let p = model.process();
    for n in &p.nodes {
        let shape = plane
            .shape(&n.id)
            .ok_or_else(|| SerializeError::MissingGeometry(n.id.clone()))?;
        let mut attrs = vec![("bpmnElement", n.id.clone()), ("id", di_id(&n.id))];
        if n.kind == FlowNodeKind::ExclusiveGateway {
            attrs.push(("isMarkerVisible", "true".into()));
        }
        w.open("bpmndi:BPMNShape", attrs);
        bounds_element(&mut w, &shape.bounds);
        w.close("bpmndi:BPMNShape");
    }
    for f in &p.flows {
        let edge = plane
            .edge(&f.id)
            .ok_or_else(|| SerializeError::MissingGeometry(f.id.clone()))?;
        w.open(
            "bpmndi:BPMNEdge",
            vec![("bpmnElement", f.id.clone()), ("id", di_id(&f.id))],
        );
        for pt in &edge.waypoints {
            w.empty("di:waypoint", vec![("x", pt.x.to_string()), ("y", pt.y.to_string())]);
        }
        w.close("bpmndi:BPMNEdge");
    }
    w.close("bpmndi:BPMNPlane");
    w.close("bpmndi:BPMNDiagram");
    w.close("bpmn:definitions");
    Ok(w.finish())
}
