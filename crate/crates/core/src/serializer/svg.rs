//! SVG rendering of a laid-out model with conventional BPMN glyphs.

use super::xml::XmlWriter;
use super::{check_consistency, SerializeError};
use crate::builder::{BpmnModel, FlowNodeKind};
use crate::layout::{Bounds, DiPlane};

const MARGIN: i64 = 20;

fn rect_path(b: &Bounds) -> String {
    format!("M{},{} h{} v{} h{} Z", b.x, b.y, b.width, b.height, -b.width)
}

fn label(w: &mut XmlWriter, x: i64, y: i64, class: &str, text: &str) {
    if text.is_empty() {
        return;
    }
    w.text(
        "text",
        vec![
            ("class", class.into()),
            ("text-anchor", "middle".into()),
            ("x", x.to_string()),
            ("y", y.to_string()),
        ],
        text,
    );
}

/// Greedy word wrap by character count; long words are cut. At most
/// `max_lines` lines, the last one ending in an ellipsis when text is dropped.
pub(crate) fn wrap(text: &str, width: usize, max_lines: usize) -> Vec<String> {
    let mut lines: Vec<String> = Vec::new();
    let mut current = String::new();
    for word in text.split_whitespace() {
        let mut word: Vec<char> = word.chars().collect();
        while !word.is_empty() {
            let used = current.chars().count();
            let sep = usize::from(used > 0);
            if used + sep + word.len() <= width {
                if sep == 1 {
                    current.push(' ');
                }
                current.extend(word.drain(..));
            } else if used > 0 {
                lines.push(std::mem::take(&mut current));
            } else {
                current.extend(word.drain(..width));
                lines.push(std::mem::take(&mut current));
            }
        }
    }
    if !current.is_empty() {
        lines.push(current);
    }
    if lines.len() > max_lines {
        lines.truncate(max_lines);
        let last = lines.last_mut().expect("max_lines > 0");
        let keep: String = last.chars().take(width.saturating_sub(1)).collect();
        *last = format!("{keep}\u{2026}");
    }
    lines
}

fn block_label(w: &mut XmlWriter, b: &Bounds, text: &str) {
    const LINE: i64 = 14;
    let lines = wrap(text, (b.width as usize / 7).max(1), (b.height / LINE).max(1) as usize);
    if lines.is_empty() {
        return;
    }
    let c = b.center();
    let first = c.y + 4 - (lines.len() as i64 - 1) * LINE / 2;
    w.open(
        "text",
        vec![
            ("class", "node-label".into()),
            ("text-anchor", "middle".into()),
            ("x", c.x.to_string()),
            ("y", first.to_string()),
        ],
    );
    for (i, line) in lines.iter().enumerate() {
        w.text(
            "tspan",
            vec![("x", c.x.to_string()), ("y", (first + i as i64 * LINE).to_string())],
            line,
        );
    }
    w.close("text");
}

fn vertical_label(w: &mut XmlWriter, b: &Bounds, strip: i64, text: &str) {
    let cx = b.x + strip / 2;
    let cy = b.y + b.height / 2;
    w.text(
        "text",
        vec![
            ("class", "band-label".into()),
            ("text-anchor", "middle".into()),
            ("transform", format!("rotate(-90 {cx} {cy})")),
            ("x", cx.to_string()),
            ("y", (cy + 4).to_string()),
        ],
        text,
    );
}

/// Renders the model. Pools and lanes are drawn as paths so that `rect`,
/// `circle` and `polygon` elements correspond one-to-one with tasks, events
/// and gateways.
pub fn to_svg(model: &BpmnModel, plane: &DiPlane) -> Result<String, SerializeError> {
    check_consistency(model, plane)?;
    let p = model.process();
    let mut extent = plane.pool.as_ref().map(|s| s.bounds).unwrap_or(Bounds {
        x: 0,
        y: 0,
        width: 0,
        height: 0,
    });
    for s in &plane.shapes {
        let right = extent.right().max(s.bounds.right());
        let bottom = extent.bottom().max(s.bounds.bottom());
        extent.x = extent.x.min(s.bounds.x);
        extent.y = extent.y.min(s.bounds.y);
        extent.width = right - extent.x;
        extent.height = bottom - extent.y;
    }
    for e in &plane.edges {
        for pt in &e.waypoints {
            let right = extent.right().max(pt.x);
            let bottom = extent.bottom().max(pt.y);
            extent.x = extent.x.min(pt.x);
            extent.y = extent.y.min(pt.y);
            extent.width = right - extent.x;
            extent.height = bottom - extent.y;
        }
    }
    let (vx, vy) = (extent.x - MARGIN, extent.y - MARGIN);
    let (vw, vh) = (extent.width + 2 * MARGIN, extent.height + 2 * MARGIN);

    let mut w = XmlWriter::default();
    w.open(
        "svg",
        vec![
            ("height", vh.to_string()),
            ("viewBox", format!("{vx} {vy} {vw} {vh}")),
            ("width", vw.to_string()),
            ("xmlns", "http://www.w3.org/2000/svg".into()),
        ],
    );
    w.text(
        "style",
        vec![],
        "text{font-family:sans-serif;font-size:12px;fill:#222}\
         .band{fill:none;stroke:#444;stroke-width:1}\
         .task{fill:#fff;stroke:#222;stroke-width:2}\
         .event{fill:#fff;stroke:#222;stroke-width:2}\
         .end{stroke-width:4}\
         .gateway{fill:#fff;stroke:#222;stroke-width:2}\
         .marker{fill:none;stroke:#222;stroke-width:3}\
         .flow{fill:none;stroke:#222;stroke-width:1.5}\
         .flow-label{font-size:10px}",
    );
    w.open("defs", vec![]);
    w.open(
        "marker",
        vec![
            ("id", "arrow".into()),
            ("markerHeight", "10".into()),
            ("markerWidth", "10".into()),
            ("orient", "auto".into()),
            ("refX", "10".into()),
            ("refY", "5".into()),
            ("viewBox", "0 0 10 10".into()),
        ],
    );
    w.empty(
        "path",
        vec![("d", "M0,0 L10,5 L0,10 Z".into()), ("fill", "#222".into())],
    );
    w.close("marker");
    w.close("defs");

    if let Some(pool) = &plane.pool {
        w.empty(
            "path",
            vec![("class", "band pool".into()), ("d", rect_path(&pool.bounds))],
        );
        let name = model
            .collaboration
            .as_ref()
            .and_then(|c| c.participants.iter().find(|x| x.id == pool.element))
            .map(|x| x.name.as_str())
            .unwrap_or_default();
        vertical_label(&mut w, &pool.bounds, 30, name);
    }
    for band in &plane.lanes {
        w.empty(
            "path",
            vec![("class", "band lane".into()), ("d", rect_path(&band.bounds))],
        );
        let name = p
            .lanes
            .iter()
            .find(|l| l.id == band.lane)
            .map(|l| l.name.as_str())
            .unwrap_or_default();
        vertical_label(&mut w, &band.bounds, 30, name);
    }

    for f in &p.flows {
        let edge = plane
            .edge(&f.id)
            .ok_or_else(|| SerializeError::MissingGeometry(f.id.clone()))?;
        let points: Vec<String> = edge.waypoints.iter().map(|pt| format!("{},{}", pt.x, pt.y)).collect();
        w.empty(
            "polyline",
            vec![
                ("class", "flow".into()),
                ("data-id", f.id.clone()),
                ("marker-end", "url(#arrow)".into()),
                ("points", points.join(" ")),
            ],
        );
        let text = f.name.as_deref().or(f.condition.as_deref()).unwrap_or_default();
        let horizontal = edge.waypoints.windows(2).find(|s| s[0].y == s[1].y && s[0].x != s[1].x);
        if let (Some(seg), false) = (horizontal, text.is_empty()) {
            let x = seg[0].x.min(seg[1].x) + 6;
            w.text(
                "text",
                vec![
                    ("class", "flow-label".into()),
                    ("x", x.to_string()),
                    ("y", (seg[0].y - 4).to_string()),
                ],
                text,
            );
        } else if let [a, b, ..] = edge.waypoints.as_slice() {
            label(&mut w, (a.x + b.x) / 2, (a.y + b.y) / 2 - 4, "flow-label", text);
        }
    }

    for n in &p.nodes {
        let b = plane
            .shape(&n.id)
            .ok_or_else(|| SerializeError::MissingGeometry(n.id.clone()))?
            .bounds;
        let c = b.center();
        match n.kind {
            FlowNodeKind::UserTask | FlowNodeKind::ServiceTask => {
                let class = if n.kind == FlowNodeKind::UserTask {
                    "task user"
                } else {
                    "task service"
                };
                w.empty(
                    "rect",
                    vec![
                        ("class", class.into()),
                        ("data-id", n.id.clone()),
                        ("height", b.height.to_string()),
                        ("rx", "10".into()),
                        ("width", b.width.to_string()),
                        ("x", b.x.to_string()),
                        ("y", b.y.to_string()),
                    ],
                );
                block_label(&mut w, &b, &n.name);
            }
            FlowNodeKind::StartEvent | FlowNodeKind::EndEvent => {
                let class = if n.kind == FlowNodeKind::StartEvent {
                    "event start"
                } else {
                    "event end"
                };
                w.empty(
                    "circle",
                    vec![
                        ("class", class.into()),
                        ("cx", c.x.to_string()),
                        ("cy", c.y.to_string()),
                        ("data-id", n.id.clone()),
                        ("r", (b.width / 2).to_string()),
                    ],
                );
                label(&mut w, c.x, b.bottom() + 14, "node-label", &n.name);
            }
            FlowNodeKind::ExclusiveGateway | FlowNodeKind::ParallelGateway => {
                let points = format!(
                    "{},{} {},{} {},{} {},{}",
                    c.x,
                    b.y,
                    b.right(),
                    c.y,
                    c.x,
                    b.bottom(),
                    b.x,
                    c.y
                );
                w.empty(
                    "polygon",
                    vec![
                        ("class", "gateway".into()),
                        ("data-id", n.id.clone()),
                        ("points", points),
                    ],
                );
                let q = b.width / 5;
                let d = if n.kind == FlowNodeKind::ExclusiveGateway {
                    format!(
                        "M{},{} L{},{} M{},{} L{},{}",
                        c.x - q,
                        c.y - q,
                        c.x + q,
                        c.y + q,
                        c.x + q,
                        c.y - q,
                        c.x - q,
                        c.y + q
                    )
                } else {
                    format!(
                        "M{},{} L{},{} M{},{} L{},{}",
                        c.x,
                        c.y - q - 2,
                        c.x,
                        c.y + q + 2,
                        c.x - q - 2,
                        c.y,
                        c.x + q + 2,
                        c.y
                    )
                };
                let class = if n.kind == FlowNodeKind::ExclusiveGateway {
                    "marker exclusive"
                } else {
                    "marker parallel"
                };
                w.empty("path", vec![("class", class.into()), ("d", d)]);
            }
        }
    }
    w.close("svg");
    Ok(w.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_fits_width() {
        assert_eq!(wrap("Review grade sheet", 14, 4), vec!["Review grade", "sheet"]);
        assert_eq!(wrap("Supercalifragilistic", 8, 4), vec!["Supercal", "ifragili", "stic"]);
        assert_eq!(wrap("a b c d", 1, 2), vec!["a", "\u{2026}"]);
        assert!(wrap("  ", 5, 2).is_empty());
    }
}
