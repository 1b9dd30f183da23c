//! Layered left-to-right layout with lane bands and orthogonal edge routing.
//!
//! Ranks come from the longest path over the flow graph with back edges
//! removed. Long edges get dummy nodes so crossing reduction sees a proper
//! layered graph. Nodes are ordered by lane, then by barycenter over a fixed
//! number of alternating sweeps; the order with the fewest crossings wins.
//! Within a lane, the nodes of one rank are centred on the band so that the
//! branches of a split sit symmetrically around it.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::builder::{BpmnModel, FlowNodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LayoutParams {
    pub cell_width: i64,
    pub task_width: i64,
    pub task_height: i64,
    pub event_size: i64,
    pub gateway_size: i64,
    pub lane_padding: i64,
    pub margin: i64,
    /// Width of the pool's name strip on the left edge.
    pub pool_label_width: i64,
    /// Width of each lane's name strip.
    pub lane_label_width: i64,
    pub sweeps: usize,
}

impl Default for LayoutParams {
    fn default() -> Self {
        Self {
            cell_width: 180,
            task_width: 100,
            task_height: 80,
            event_size: 36,
            gateway_size: 50,
            lane_padding: 20,
            margin: 40,
            pool_label_width: 30,
            lane_label_width: 30,
            sweeps: 4,
        }
    }
}

pub fn default_params() -> LayoutParams {
    LayoutParams::default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Point {
    pub x: i64,
    pub y: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Bounds {
    pub x: i64,
    pub y: i64,
    pub width: i64,
    pub height: i64,
}

impl Bounds {
    pub fn right(&self) -> i64 {
        self.x + self.width
    }

    pub fn bottom(&self) -> i64 {
        self.y + self.height
    }

    pub fn center(&self) -> Point {
        Point {
            x: self.x + self.width / 2,
            y: self.y + self.height / 2,
        }
    }

    /// True when the open rectangles intersect.
    pub fn overlaps(&self, other: &Bounds) -> bool {
        self.x < other.right() && other.x < self.right() && self.y < other.bottom() && other.y < self.bottom()
    }

    pub fn contains(&self, other: &Bounds) -> bool {
        other.x >= self.x && other.y >= self.y && other.right() <= self.right() && other.bottom() <= self.bottom()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Shape {
    pub element: String,
    pub bounds: Bounds,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub element: String,
    pub waypoints: Vec<Point>,
    /// Edge closes a cycle; it runs right to left below the lane content.
    pub back_edge: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LaneBand {
    pub lane: String,
    pub bounds: Bounds,
}

/// The layered graph used for crossing reduction, exposed for inspection.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LayoutStats {
    /// Per rank, vertex ids (dummies start with `~`) in the initial order.
    pub initial_order: Vec<Vec<String>>,
    pub final_order: Vec<Vec<String>>,
    /// Edges between consecutive ranks, as (upper-rank vertex, next-rank vertex).
    pub segments: Vec<(String, String)>,
    pub initial_crossings: usize,
    pub final_crossings: usize,
    pub back_edges: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiPlane {
    pub pool: Option<Shape>,
    pub lanes: Vec<LaneBand>,
    pub shapes: Vec<Shape>,
    pub edges: Vec<Edge>,
    pub stats: LayoutStats,
    pub warnings: Vec<String>,
}

impl DiPlane {
    pub fn shape(&self, element: &str) -> Option<&Shape> {
        self.shapes.iter().find(|s| s.element == element)
    }

    pub fn edge(&self, element: &str) -> Option<&Edge> {
        self.edges.iter().find(|e| e.element == element)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LayoutError {
    #[error("cycle through `{0}` could not be broken for ranking")]
    Cycle(String),
    #[error("flow `{flow}` references unknown node `{node}`")]
    UnknownNode { flow: String, node: String },
}

impl LayoutError {
    pub fn code(&self) -> &'static str {
        match self {
            LayoutError::Cycle(_) => "E_LAYOUT_CYCLE",
            LayoutError::UnknownNode { .. } => "E_LAYOUT_INPUT",
        }
    }
}

/// Counts pairwise crossings between consecutive ranks for the given order.
pub fn count_crossings(order: &[Vec<String>], segments: &[(String, String)]) -> usize {
    let pos: HashMap<&str, (usize, usize)> = order
        .iter()
        .enumerate()
        .flat_map(|(r, layer)| layer.iter().enumerate().map(move |(i, v)| (v.as_str(), (r, i))))
        .collect();
    let mut by_rank: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (u, v) in segments {
        let (ru, pu) = pos[u.as_str()];
        let (_, pv) = pos[v.as_str()];
        by_rank.entry(ru).or_default().push((pu, pv));
    }
    let mut total = 0;
    for mut edges in by_rank.into_values() {
        // Sort by upper position, then count inversions in lower positions.
        edges.sort_unstable();
        for i in 0..edges.len() {
            for j in i + 1..edges.len() {
                if edges[i].0 < edges[j].0 && edges[i].1 > edges[j].1 {
                    total += 1;
                }
            }
        }
    }
    total
}

struct Vertex {
    id: String,
    lane: usize,
    rank: usize,
}

/// Splits edges into forward and back edges with a DFS that visits
/// successors in id order, starting from the start events.
fn find_back_edges(ids: &[&str], starts: &[&str], succ: &BTreeMap<&str, Vec<(&str, usize)>>) -> BTreeSet<usize> {
    #[derive(Clone, Copy, PartialEq)]
    enum State {
        New,
        Active,
        Done,
    }
    let mut state: HashMap<&str, State> = ids.iter().map(|i| (*i, State::New)).collect();
    let mut back = BTreeSet::new();
    let roots = starts.iter().chain(ids.iter());
    for root in roots {
        if state[root] != State::New {
            continue;
        }
        let mut stack: Vec<(&str, usize)> = vec![(root, 0)];
        state.insert(root, State::Active);
        while let Some((v, next)) = stack.pop() {
            let out = succ.get(v).map(Vec::as_slice).unwrap_or(&[]);
            if next < out.len() {
                stack.push((v, next + 1));
                let (w, edge) = out[next];
                match state[w] {
                    State::New => {
                        state.insert(w, State::Active);
                        stack.push((w, 0));
                    }
                    State::Active => {
                        back.insert(edge);
                    }
                    State::Done => {}
                }
            } else {
                state.insert(v, State::Done);
            }
        }
    }
    back
}

pub fn layout(model: &BpmnModel, params: &LayoutParams) -> Result<DiPlane, LayoutError> {
    let process = model.process();
    let mut warnings = Vec::new();
    let ids: Vec<&str> = process.nodes.iter().map(|n| n.id.as_str()).collect();
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let lane_index: HashMap<&str, usize> = process
        .lanes
        .iter()
        .enumerate()
        .map(|(i, l)| (l.id.as_str(), i))
        .collect();
    let node_lane: Vec<usize> = process
        .nodes
        .iter()
        .map(|n| n.lane.as_deref().and_then(|l| lane_index.get(l)).copied().unwrap_or(0))
        .collect();

    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(process.flows.len());
    for f in &process.flows {
        let lookup = |node: &str| {
            index.get(node).copied().ok_or_else(|| LayoutError::UnknownNode {
                flow: f.id.clone(),
                node: node.to_owned(),
            })
        };
        edges.push((lookup(&f.source)?, lookup(&f.target)?));
    }

    let mut succ: BTreeMap<&str, Vec<(&str, usize)>> = BTreeMap::new();
    for (e, (s, t)) in edges.iter().enumerate() {
        succ.entry(ids[*s]).or_default().push((ids[*t], e));
    }
    for out in succ.values_mut() {
        out.sort();
    }
    let mut sorted_ids = ids.clone();
    sorted_ids.sort();
    let starts: Vec<&str> = process
        .nodes
        .iter()
        .filter(|n| n.kind == FlowNodeKind::StartEvent)
        .map(|n| n.id.as_str())
        .collect();
    let back = find_back_edges(&sorted_ids, &starts, &succ);
    for e in &back {
        warnings.push(format!("reversed back edge {} for ranking", process.flows[*e].id));
    }

    // Longest-path ranking over forward edges (Kahn order, ids as tie-break).
    let n = ids.len();
    let mut indegree = vec![0usize; n];
    let mut fwd: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, (s, t)) in edges.iter().enumerate() {
        if !back.contains(&e) {
            fwd[*s].push(*t);
            indegree[*t] += 1;
        }
    }
    let mut rank = vec![0usize; n];
    let mut ready: BTreeSet<(&str, usize)> = (0..n).filter(|v| indegree[*v] == 0).map(|v| (ids[v], v)).collect();
    let mut done = 0;
    while let Some(first) = ready.iter().next().copied() {
        ready.remove(&first);
        let v = first.1;
        done += 1;
        for &w in &fwd[v] {
            rank[w] = rank[w].max(rank[v] + 1);
            indegree[w] -= 1;
            if indegree[w] == 0 {
                ready.insert((ids[w], w));
            }
        }
    }
    if done < n {
        let stuck = (0..n).find(|v| indegree[*v] > 0).map(|v| ids[v]).unwrap_or_default();
        return Err(LayoutError::Cycle(stuck.to_owned()));
    }
    let max_rank = rank.iter().copied().max().unwrap_or(0);

    // Layered graph with dummies on long forward edges.
    let mut vertices: Vec<Vertex> = (0..n)
        .map(|v| Vertex {
            id: ids[v].to_owned(),
            lane: node_lane[v],
            rank: rank[v],
        })
        .collect();
    let mut segments: Vec<(usize, usize)> = Vec::new();
    for (e, (s, t)) in edges.iter().enumerate() {
        if back.contains(&e) {
            continue;
        }
        let mut prev = *s;
        for r in rank[*s] + 1..rank[*t] {
            vertices.push(Vertex {
                id: format!("~{}#{r}", process.flows[e].id),
                lane: node_lane[*s],
                rank: r,
            });
            segments.push((prev, vertices.len() - 1));
            prev = vertices.len() - 1;
        }
        segments.push((prev, *t));
    }
    let mut order: Vec<Vec<usize>> = vec![Vec::new(); max_rank + 1];
    for (v, vx) in vertices.iter().enumerate() {
        order[vx.rank].push(v);
    }
    for layer in &mut order {
        layer.sort_by(|a, b| (vertices[*a].lane, &vertices[*a].id).cmp(&(vertices[*b].lane, &vertices[*b].id)));
    }
    let named = |order: &Vec<Vec<usize>>| -> Vec<Vec<String>> {
        order
            .iter()
            .map(|l| l.iter().map(|v| vertices[*v].id.clone()).collect())
            .collect()
    };
    let named_segments: Vec<(String, String)> = segments
        .iter()
        .map(|(a, b)| (vertices[*a].id.clone(), vertices[*b].id.clone()))
        .collect();
    let initial_order = named(&order);
    let initial_crossings = count_crossings(&initial_order, &named_segments);

    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
    for (a, b) in &segments {
        succs[*a].push(*b);
        preds[*b].push(*a);
    }
    let mut best = order.clone();
    let mut best_crossings = initial_crossings;
    for sweep in 0..params.sweeps {
        let down = sweep % 2 == 0;
        let ranks: Vec<usize> = if down {
            (1..=max_rank).collect()
        } else {
            (0..max_rank).rev().collect()
        };
        for r in ranks {
            let neighbor_rank = if down { r - 1 } else { r + 1 };
            let pos: HashMap<usize, usize> = order[neighbor_rank].iter().enumerate().map(|(i, v)| (*v, i)).collect();
            let own: HashMap<usize, usize> = order[r].iter().enumerate().map(|(i, v)| (*v, i)).collect();
            let bary = |v: usize| -> f64 {
                let adj = if down { &preds[v] } else { &succs[v] };
                if adj.is_empty() {
                    own[&v] as f64
                } else {
                    adj.iter().map(|u| pos[u] as f64).sum::<f64>() / adj.len() as f64
                }
            };
            let mut keyed: Vec<(usize, f64, usize)> =
                order[r].iter().map(|v| (vertices[*v].lane, bary(*v), *v)).collect();
            keyed.sort_by(|a, b| {
                a.0.cmp(&b.0)
                    .then(a.1.total_cmp(&b.1))
                    .then_with(|| vertices[a.2].id.cmp(&vertices[b.2].id))
            });
            order[r] = keyed.into_iter().map(|(_, _, v)| v).collect();
        }
        let c = count_crossings(&named(&order), &named_segments);
        if c < best_crossings {
            best_crossings = c;
            best = order.clone();
        }
    }
    let final_order = named(&best);

    // Vertical placement: per lane, rows = widest rank; nodes of a rank are
    // centred on the band's content area.
    let lane_count = process.lanes.len().max(1);
    let mut per_slot: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for layer in &best {
        for &v in layer {
            if v < n {
                per_slot.entry((node_lane[v], rank[v])).or_default().push(v);
            }
        }
    }
    let mut rows = vec![1usize; lane_count];
    for ((lane, _), members) in &per_slot {
        rows[*lane] = rows[*lane].max(members.len());
    }
    let mut loops_in_lane = vec![0usize; lane_count];
    let mut loop_slot: HashMap<usize, (usize, usize)> = HashMap::new();
    for &e in &back {
        let (s, t) = edges[e];
        let lane = node_lane[s].max(node_lane[t]);
        loop_slot.insert(e, (lane, loops_in_lane[lane]));
        loops_in_lane[lane] += 1;
    }
    const LOOP_GAP: i64 = 10;
    let pitch = params.task_height + params.lane_padding;
    let content_height = |lane: usize| params.lane_padding + rows[lane] as i64 * pitch;
    let channel_height = |lane: usize| {
        if loops_in_lane[lane] == 0 {
            0
        } else {
            (loops_in_lane[lane] as i64 + 1) * LOOP_GAP
        }
    };
    let mut band_top = Vec::with_capacity(lane_count);
    let mut y = 0;
    for lane in 0..lane_count {
        band_top.push(y);
        y += content_height(lane) + channel_height(lane);
    }
    let pool_height = y;

    let has_lanes = !process.lanes.is_empty();
    let x0 = params.pool_label_width + if has_lanes { params.lane_label_width } else { 0 };
    let column_left = |r: usize| x0 + params.margin + r as i64 * params.cell_width;
    let size = |kind: FlowNodeKind| match kind {
        k if k.is_task() => (params.task_width, params.task_height),
        k if k.is_event() => (params.event_size, params.event_size),
        _ => (params.gateway_size, params.gateway_size),
    };

    let mut bounds: Vec<Bounds> = vec![
        Bounds {
            x: 0,
            y: 0,
            width: 0,
            height: 0
        };
        n
    ];
    for ((lane, r), members) in &per_slot {
        let mid = band_top[*lane] + content_height(*lane) / 2;
        let k = members.len() as i64;
        for (i, &v) in members.iter().enumerate() {
            let cy = mid + ((2 * i as i64 - (k - 1)) * pitch) / 2;
            let cx = column_left(*r) + params.task_width / 2;
            let (w, h) = size(process.nodes[v].kind);
            bounds[v] = Bounds {
                x: cx - w / 2,
                y: cy - h / 2,
                width: w,
                height: h,
            };
        }
    }

    let pool_width = x0 + 2 * params.margin + max_rank as i64 * params.cell_width + params.task_width;
    let participant = model.collaboration.as_ref().and_then(|c| c.participants.first());
    let pool = participant.map(|p| Shape {
        element: p.id.clone(),
        bounds: Bounds {
            x: 0,
            y: 0,
            width: pool_width,
            height: pool_height,
        },
    });
    let lanes: Vec<LaneBand> = process
        .lanes
        .iter()
        .enumerate()
        .map(|(i, l)| LaneBand {
            lane: l.id.clone(),
            bounds: Bounds {
                x: params.pool_label_width,
                y: band_top[i],
                width: pool_width - params.pool_label_width,
                height: content_height(i) + channel_height(i),
            },
        })
        .collect();

    let out_degree = |v: usize| edges.iter().filter(|(s, _)| *s == v).count();
    let in_degree = |v: usize| edges.iter().filter(|(_, t)| *t == v).count();
    let mut routed = Vec::with_capacity(edges.len());
    for (e, &(s, t)) in edges.iter().enumerate() {
        let (sb, tb) = (bounds[s], bounds[t]);
        let (sc, tc) = (sb.center(), tb.center());
        let p = |x, y| Point { x, y };
        let waypoints = if let Some(&(lane, slot)) = loop_slot.get(&e) {
            let channel = band_top[lane] + content_height(lane) + (slot as i64 + 1) * LOOP_GAP;
            let (sx, tx) = if s == t {
                (sc.x + sb.width / 4, tc.x - tb.width / 4)
            } else {
                (sc.x, tc.x)
            };
            let enter_y = if tb.y > sb.bottom() { tb.y } else { tb.bottom() };
            vec![p(sx, sb.bottom()), p(sx, channel), p(tx, channel), p(tx, enter_y)]
        } else if sc.y == tc.y {
            vec![p(sb.right(), sc.y), p(tb.x, tc.y)]
        } else if process.nodes[s].kind.is_gateway() && out_degree(s) >= 2 {
            let exit_y = if tc.y > sc.y { sb.bottom() } else { sb.y };
            vec![p(sc.x, exit_y), p(sc.x, tc.y), p(tb.x, tc.y)]
        } else if process.nodes[t].kind.is_gateway() && in_degree(t) >= 2 {
            let enter_y = if sc.y > tc.y { tb.bottom() } else { tb.y };
            vec![p(sb.right(), sc.y), p(tc.x, sc.y), p(tc.x, enter_y)]
        } else {
            let xm = column_left(rank[t]) - (params.cell_width - params.task_width) / 2;
            vec![p(sb.right(), sc.y), p(xm, sc.y), p(xm, tc.y), p(tb.x, tc.y)]
        };
        routed.push(Edge {
            element: process.flows[e].id.clone(),
            waypoints,
            back_edge: back.contains(&e),
        });
    }

    let shapes = process
        .nodes
        .iter()
        .zip(&bounds)
        .map(|(node, b)| Shape {
            element: node.id.clone(),
            bounds: *b,
        })
        .collect();
    Ok(DiPlane {
        pool,
        lanes,
        shapes,
        edges: routed,
        stats: LayoutStats {
            initial_order,
            final_order,
            segments: named_segments,
            initial_crossings,
            final_crossings: best_crossings,
            back_edges: back.iter().map(|e| process.flows[*e].id.clone()).collect(),
        },
        warnings,
    })
}
