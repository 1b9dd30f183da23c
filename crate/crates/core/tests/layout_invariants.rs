use std::collections::HashMap;

use flow2bpmn_core::builder::FlowNodeKind;
use flow2bpmn_core::corpus::{generate, CorpusConfig};
use flow2bpmn_core::layout::{default_params, layout, Bounds, DiPlane, LayoutParams, Point};
use flow2bpmn_core::pipeline::{Conversion, Pipeline};
use proptest::prelude::*;
use serde_json::{json, Value};

fn convert(pipeline: &Pipeline, spec: &Value) -> Conversion {
    pipeline.convert(spec.to_string().as_bytes(), "t.json", false).unwrap()
}

fn chain() -> Value {
    json!({
        "specVersion": 1, "kind": "flow", "name": "chain",
        "queues": [{"id": "q1", "label": "q1", "kind": "human"}],
        "nodes": [
            {"id": "s", "role": "start"},
            {"id": "a", "role": "action", "queue": "q1"},
            {"id": "e", "role": "end"}
        ],
        "transitions": [{"id": "t1", "from": "s", "to": "a"}, {"id": "t2", "from": "a", "to": "e"}]
    })
}

fn diamond() -> Value {
    json!({
        "specVersion": 1, "kind": "flow", "name": "diamond",
        "queues": [{"id": "q1", "label": "q1", "kind": "human"}],
        "nodes": [
            {"id": "s", "role": "start"},
            {"id": "b", "role": "action", "queue": "q1"},
            {"id": "c", "role": "action", "queue": "q1"},
            {"id": "e", "role": "end"}
        ],
        "transitions": [
            {"id": "t1", "from": "s", "to": "b"}, {"id": "t2", "from": "s", "to": "c"},
            {"id": "t3", "from": "b", "to": "e"}, {"id": "t4", "from": "c", "to": "e"}
        ]
    })
}

/// Independent geometry checker. Returns the list of violated invariants.
fn violations(c: &Conversion) -> Vec<String> {
    let plane = c.plane();
    let p = c.model.process();
    let mut out = Vec::new();

    let shapes: Vec<(&str, Bounds)> = plane.shapes.iter().map(|s| (s.element.as_str(), s.bounds)).collect();
    if shapes.len() != p.nodes.len() {
        out.push(format!("{} shapes for {} nodes", shapes.len(), p.nodes.len()));
    }
    for i in 0..shapes.len() {
        for j in i + 1..shapes.len() {
            let (a, b) = (shapes[i].1, shapes[j].1);
            let apart = a.x + a.width <= b.x || b.x + b.width <= a.x || a.y + a.height <= b.y || b.y + b.height <= a.y;
            if !apart {
                out.push(format!("overlap {} {}", shapes[i].0, shapes[j].0));
            }
        }
    }

    let bands: HashMap<&str, Bounds> = plane.lanes.iter().map(|l| (l.lane.as_str(), l.bounds)).collect();
    for n in &p.nodes {
        let Some(lane) = &n.lane else {
            if !p.lanes.is_empty() {
                out.push(format!("{} has no lane", n.id));
            }
            continue;
        };
        let s = plane.shape(&n.id).unwrap().bounds;
        let band = bands[lane.as_str()];
        let inside = s.x >= band.x
            && s.y >= band.y
            && s.x + s.width <= band.x + band.width
            && s.y + s.height <= band.y + band.height;
        if !inside {
            out.push(format!("{} outside lane {lane}", n.id));
        }
    }
    if let Some(pool) = &plane.pool {
        let mut y = pool.bounds.y;
        for l in &plane.lanes {
            if l.bounds.y != y {
                out.push(format!("gap before lane {}", l.lane));
            }
            y = l.bounds.y + l.bounds.height;
        }
        if !plane.lanes.is_empty() && y != pool.bounds.y + pool.bounds.height {
            out.push("lanes do not fill the pool".into());
        }
    }

    let on_boundary = |pt: &Point, b: &Bounds| {
        let within_x = pt.x >= b.x && pt.x <= b.x + b.width;
        let within_y = pt.y >= b.y && pt.y <= b.y + b.height;
        within_x && within_y && (pt.x == b.x || pt.x == b.x + b.width || pt.y == b.y || pt.y == b.y + b.height)
    };
    for f in &p.flows {
        let edge = plane.edge(&f.id).unwrap();
        let w = &edge.waypoints;
        if w.len() < 2 || w.len() > 6 {
            out.push(format!("{} has {} waypoints", f.id, w.len()));
            continue;
        }
        for seg in w.windows(2) {
            if seg[0].x != seg[1].x && seg[0].y != seg[1].y {
                out.push(format!("{} has a diagonal segment", f.id));
            }
        }
        let sb = plane.shape(&f.source).unwrap().bounds;
        let tb = plane.shape(&f.target).unwrap().bounds;
        // Gateway vertices lie on the diamond, which touches its bounding box.
        if !on_boundary(&w[0], &sb) || !on_boundary(w.last().unwrap(), &tb) {
            out.push(format!("{} endpoints off the shape boundary", f.id));
        }
        if !edge.back_edge && tb.center().x < sb.center().x {
            out.push(format!("{} points leftward", f.id));
        }
    }
    out
}

/// Brute-force crossing count over adjacent-rank segments.
fn crossings(order: &[Vec<String>], segments: &[(String, String)]) -> usize {
    let pos: HashMap<&str, (usize, usize)> = order
        .iter()
        .enumerate()
        .flat_map(|(r, l)| l.iter().enumerate().map(move |(i, v)| (v.as_str(), (r, i))))
        .collect();
    let mut count = 0;
    for (i, a) in segments.iter().enumerate() {
        for b in &segments[i + 1..] {
            let (a0, a1) = (pos[a.0.as_str()], pos[a.1.as_str()]);
            let (b0, b1) = (pos[b.0.as_str()], pos[b.1.as_str()]);
            if a0.0 != b0.0 {
                continue;
            }
            if (a0.1 < b0.1 && a1.1 > b1.1) || (a0.1 > b0.1 && a1.1 < b1.1) {
                count += 1;
            }
        }
    }
    count
}

#[test]
fn default_params_are_fixed() {
    let p = default_params();
    assert_eq!((p.cell_width, p.task_width, p.task_height), (180, 100, 80));
    assert_eq!(
        (p.event_size, p.gateway_size, p.lane_padding, p.margin),
        (36, 50, 20, 40)
    );
    assert_eq!(p, default_params());
}

#[test]
fn chain_is_one_straight_row() {
    let c = convert(&Pipeline::bundled(), &chain());
    let plane = c.plane();
    let centers: Vec<Point> = ["n_s", "n_a", "n_e"]
        .iter()
        .map(|id| plane.shape(id).unwrap().bounds.center())
        .collect();
    assert!(centers.iter().all(|pt| pt.y == centers[0].y));
    assert_eq!(centers[1].x - centers[0].x, 180);
    assert_eq!(centers[2].x - centers[1].x, 180);
    for e in &plane.edges {
        assert_eq!(e.waypoints.len(), 2, "{}", e.element);
    }
    assert!(violations(&c).is_empty());
}

#[test]
fn cell_width_override_spaces_ranks() {
    let c = convert(&Pipeline::bundled(), &chain());
    let params = LayoutParams {
        cell_width: 240,
        ..default_params()
    };
    let plane = layout(&c.model, &params).unwrap();
    let x = |id: &str| plane.shape(id).unwrap().bounds.center().x;
    assert_eq!(x("n_a") - x("n_s"), 240);
    assert_eq!(x("n_e") - x("n_a"), 240);
}

#[test]
fn diamond_branches_are_symmetric_about_the_split() {
    let c = convert(&Pipeline::bundled(), &diamond());
    let plane = c.plane();
    let gy = plane.shape("gw_s_split").unwrap().bounds.center().y;
    let by = plane.shape("n_b").unwrap().bounds.center().y;
    let cy = plane.shape("n_c").unwrap().bounds.center().y;
    assert_ne!(by, cy);
    assert_eq!((by - gy).abs(), (cy - gy).abs());
    assert!(violations(&c).is_empty(), "{:?}", violations(&c));
}

#[test]
fn layout_is_deterministic() {
    let c = convert(&Pipeline::bundled(), &diamond());
    assert_eq!(layout(&c.model, &default_params()).unwrap(), *c.plane());
}

#[test]
fn corpus_geometry() {
    let pipeline = Pipeline::bundled();
    let corpus = generate(&CorpusConfig::new(42, 30, 20, 80)).unwrap();
    for s in &corpus.specs {
        let c = pipeline.convert(s.json.as_bytes(), &s.file, false).unwrap();
        let v = violations(&c);
        assert!(v.is_empty(), "{}: {v:?}", s.file);
        let stats = &c.plane().stats;
        assert_eq!(stats.final_crossings, crossings(&stats.final_order, &stats.segments));
        assert_eq!(
            stats.initial_crossings,
            crossings(&stats.initial_order, &stats.segments)
        );
        assert!(stats.final_crossings <= stats.initial_crossings);
    }
}

fn vertical_order_matches(plane: &DiPlane, order: &[Vec<String>], lanes: &HashMap<&str, Option<&str>>) -> bool {
    order.iter().all(|layer| {
        let real: Vec<&String> = layer.iter().filter(|v| !v.starts_with('~')).collect();
        real.windows(2).all(|w| {
            let same_lane = lanes[w[0].as_str()] == lanes[w[1].as_str()];
            let (a, b) = (plane.shape(w[0]).unwrap().bounds, plane.shape(w[1]).unwrap().bounds);
            !same_lane || a.center().y <= b.center().y
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn small_graphs_never_gain_crossings(seed in any::<u64>(), size in 3usize..=15) {
        let corpus = generate(&CorpusConfig::new(seed, 1, size, size)).unwrap();
        let s = &corpus.specs[0];
        let c = Pipeline::bundled().convert(s.json.as_bytes(), &s.file, false).unwrap();
        let plane = c.plane();
        let stats = &plane.stats;
        prop_assert!(violations(&c).is_empty(), "{:?}", violations(&c));
        let initial = crossings(&stats.initial_order, &stats.segments);
        let fin = crossings(&stats.final_order, &stats.segments);
        prop_assert!(fin <= initial);
        let lanes: HashMap<&str, Option<&str>> = c.model.process().nodes.iter().map(|n| (n.id.as_str(), n.lane.as_deref())).collect();
        prop_assert!(vertical_order_matches(plane, &stats.final_order, &lanes));
        let tasks = c.model.process().nodes.iter().filter(|n| n.kind.is_task()).count();
        prop_assert_eq!(tasks, s.truth.actions);
        prop_assert!(c.model.process().nodes.iter().any(|n| n.kind == FlowNodeKind::StartEvent));
    }
}
