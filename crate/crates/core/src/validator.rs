//! Pre-generation checks over the saturated, gateway-synthesized graph.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::kb::{Iri, Term, TripleGraph};
use crate::vocab::{bpmn, owl, sf, trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CheckId {
    Consistency,
    GatewayTyping,
    LaneResolution,
    Traceability,
    Structure,
}

impl CheckId {
    pub const ALL: [CheckId; 5] = [
        CheckId::Consistency,
        CheckId::GatewayTyping,
        CheckId::LaneResolution,
        CheckId::Traceability,
        CheckId::Structure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckId::Consistency => "CONSISTENCY",
            CheckId::GatewayTyping => "GATEWAY_TYPING",
            CheckId::LaneResolution => "LANE_RESOLUTION",
            CheckId::Traceability => "TRACEABILITY",
            CheckId::Structure => "STRUCTURE",
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub subject: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub check: CheckId,
    pub status: CheckStatus,
    pub findings: Vec<Finding>,
}

impl CheckResult {
    fn from_findings(check: CheckId, mut findings: Vec<Finding>) -> Self {
        findings.sort_by(|a, b| (&a.subject, &a.message).cmp(&(&b.subject, &b.message)));
        findings.dedup();
        let status = if findings.is_empty() {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Self {
            check,
            status,
            findings,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

fn finding(subject: &Iri, message: impl Into<String>) -> Finding {
    Finding {
        subject: subject.to_string(),
        message: message.into(),
    }
}

/// BPMN-level flow structure read from the graph.
#[derive(Debug, Default)]
pub(crate) struct FlowGraph {
    /// flow -> (source, target), either may be missing
    pub flows: BTreeMap<Iri, (Option<Iri>, Option<Iri>)>,
    pub out: BTreeMap<Iri, Vec<Iri>>,
    pub inc: BTreeMap<Iri, Vec<Iri>>,
}

impl FlowGraph {
    pub fn read(g: &TripleGraph) -> Self {
        let mut fg = FlowGraph::default();
        for f in g.instances_of(&bpmn::sequence_flow()) {
            let s = g.object(f, &bpmn::has_source_ref()).and_then(Term::as_iri).cloned();
            let t = g.object(f, &bpmn::has_target_ref()).and_then(Term::as_iri).cloned();
            if let Some(s) = &s {
                fg.out.entry(s.clone()).or_default().push(f.clone());
            }
            if let Some(t) = &t {
                fg.inc.entry(t.clone()).or_default().push(f.clone());
            }
            fg.flows.insert(f.clone(), (s, t));
        }
        for v in fg.out.values_mut().chain(fg.inc.values_mut()) {
            v.sort();
        }
        fg
    }

    pub fn successors<'a>(&'a self, n: &Iri) -> impl Iterator<Item = &'a Iri> + 'a {
        self.out
            .get(n)
            .into_iter()
            .flatten()
            .filter_map(|f| self.flows.get(f).and_then(|(_, t)| t.as_ref()))
    }

    pub fn predecessors<'a>(&'a self, n: &Iri) -> impl Iterator<Item = &'a Iri> + 'a {
        self.inc
            .get(n)
            .into_iter()
            .flatten()
            .filter_map(|f| self.flows.get(f).and_then(|(s, _)| s.as_ref()))
    }
}

/// Classes whose instances become BPMN flow nodes.
pub(crate) fn flow_node_classes() -> [Iri; 5] {
    [
        bpmn::start_event(),
        bpmn::end_event(),
        bpmn::user_task(),
        bpmn::service_task(),
        bpmn::gateway(),
    ]
}

pub(crate) fn flow_nodes(g: &TripleGraph) -> BTreeSet<Iri> {
    flow_node_classes()
        .iter()
        .flat_map(|c| g.instances_of(c).cloned().collect::<Vec<_>>())
        .collect()
}

fn check_consistency(g: &TripleGraph) -> Vec<Finding> {
    let mut out = Vec::new();
    for t in g.with_predicate(&owl::disjoint_with()) {
        let Some(y) = t.object.as_iri() else { continue };
        let x = &t.subject;
        for i in g.instances_of(x) {
            if g.has_type(i, y) {
                out.push(finding(i, format!("typed both {x:?} and {y:?}, which are disjoint")));
            }
        }
    }
    out
}

fn check_gateway_typing(g: &TripleGraph, fg: &FlowGraph) -> Vec<Finding> {
    let mut out = Vec::new();
    for (n, flows) in &fg.out {
        if flows.len() >= 2 && !g.has_type(n, &bpmn::gateway()) {
            out.push(finding(
                n,
                format!("fan-out of {} without a split gateway", flows.len()),
            ));
        }
    }
    for (n, flows) in &fg.inc {
        if flows.len() >= 2 && !g.has_type(n, &bpmn::gateway()) {
            out.push(finding(n, format!("fan-in of {} without a join gateway", flows.len())));
        }
    }
    for gw in g.instances_of(&bpmn::gateway()) {
        let ex = g.has_type(gw, &bpmn::exclusive_gateway());
        let par = g.has_type(gw, &bpmn::parallel_gateway());
        if ex == par {
            out.push(finding(gw, "gateway must be exactly one of exclusive or parallel"));
        }
    }
    out
}

fn check_lanes(g: &TripleGraph) -> Vec<Finding> {
    let mut out = Vec::new();
    for u in g.instances_of(&bpmn::user_task()) {
        let lanes: BTreeSet<&Iri> = g
            .objects(u, &bpmn::has_lane())
            .filter_map(Term::as_iri)
            .filter(|l| g.has_type(l, &bpmn::lane()))
            .collect();
        if lanes.len() != 1 {
            out.push(finding(
                u,
                format!("user task resolves to {} lanes, expected exactly 1", lanes.len()),
            ));
        }
    }
    out
}

fn check_traceability(g: &TripleGraph, fg: &FlowGraph) -> Vec<Finding> {
    let mut destined: BTreeSet<&Iri> = BTreeSet::new();
    for c in flow_node_classes() {
        destined.extend(g.instances_of(&c).collect::<Vec<_>>());
    }
    destined.extend(fg.flows.keys());
    let mut lanes = BTreeSet::new();
    for u in g.instances_of(&bpmn::user_task()) {
        lanes.extend(g.objects(u, &bpmn::has_lane()).filter_map(Term::as_iri));
    }
    destined.extend(lanes);
    destined
        .into_iter()
        .filter(|x| g.object(x, &trace::source_path()).is_none())
        .map(|x| finding(x, "missing trace:sourcePath"))
        .collect()
}

fn check_structure(g: &TripleGraph, fg: &FlowGraph) -> Vec<Finding> {
    let mut out = Vec::new();
    let nodes = flow_nodes(g);
    for n in g.instances_of(&sf::action_node()) {
        if !nodes.contains(n) {
            out.push(finding(n, "action node is classified as neither user nor service task"));
        }
    }
    for (f, (s, t)) in &fg.flows {
        for (end, what) in [(s, "source"), (t, "target")] {
            match end {
                None => out.push(finding(f, format!("flow has no {what}"))),
                Some(x) if !nodes.contains(x) => out.push(finding(f, format!("flow {what} {x:?} is not a flow node"))),
                Some(_) => {}
            }
        }
    }
    let starts: Vec<&Iri> = g.instances_of(&bpmn::start_event()).collect();
    if starts.is_empty() {
        out.push(Finding {
            subject: String::new(),
            message: "no start event".into(),
        });
        return out;
    }
    let forward = reach(starts.iter().copied(), |n| fg.successors(n).collect());
    let ends: Vec<&Iri> = g.instances_of(&bpmn::end_event()).collect();
    let backward = reach(ends.iter().copied(), |n| fg.predecessors(n).collect());
    for n in &nodes {
        if !forward.contains(n) {
            out.push(finding(n, "unreachable from the start event"));
        }
        if !backward.contains(n) {
            out.push(finding(n, "cannot reach an end event"));
        }
    }
    out
}

fn reach<'a>(roots: impl Iterator<Item = &'a Iri>, next: impl Fn(&Iri) -> Vec<&'a Iri>) -> BTreeSet<&'a Iri> {
    let mut seen: BTreeSet<&Iri> = BTreeSet::new();
    let mut queue: VecDeque<&Iri> = roots.collect();
    while let Some(n) = queue.pop_front() {
        if seen.insert(n) {
            queue.extend(next(n));
        }
    }
    seen
}

/// Runs the selected checks, in the fixed order, over a read-only graph.
pub fn run_checks(g: &TripleGraph, checks: &[CheckId]) -> Vec<CheckResult> {
    let fg = FlowGraph::read(g);
    CheckId::ALL
        .into_iter()
        .filter(|c| checks.contains(c))
        .map(|c| {
            let findings = match c {
                CheckId::Consistency => check_consistency(g),
                CheckId::GatewayTyping => check_gateway_typing(g, &fg),
                CheckId::LaneResolution => check_lanes(g),
                CheckId::Traceability => check_traceability(g, &fg),
                CheckId::Structure => check_structure(g, &fg),
            };
            CheckResult::from_findings(c, findings)
        })
        .collect()
}

/// All five checks.
pub fn validate_kb(g: &TripleGraph) -> Vec<CheckResult> {
    run_checks(g, &CheckId::ALL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{parse_turtle, Literal, Triple};

    const PREFIX: &str = "@prefix : <http://x/> . @prefix bpmn: <http://example.org/bpmn#> .
        @prefix trace: <https://example.org/trace#> .\n";

    fn graph(body: &str) -> TripleGraph {
        parse_turtle(format!("{PREFIX}{body}").as_bytes()).unwrap()
    }

    const HAPPY: &str = r#"
        :s a bpmn:StartEvent ; trace:sourcePath "/nodes/0" .
        :a a bpmn:UserTask ; bpmn:has_lane :q ; trace:sourcePath "/nodes/1" .
        :e a bpmn:EndEvent ; trace:sourcePath "/nodes/2" .
        :q a bpmn:Lane ; trace:sourcePath "/queues/0" .
        :f1 a bpmn:SequenceFlow ; bpmn:has_sourceRef :s ; bpmn:has_targetRef :a ; trace:sourcePath "/transitions/0" .
        :f2 a bpmn:SequenceFlow ; bpmn:has_sourceRef :a ; bpmn:has_targetRef :e ; trace:sourcePath "/transitions/1" .
    "#;

    fn failing(results: &[CheckResult]) -> Vec<CheckId> {
        results.iter().filter(|r| !r.passed()).map(|r| r.check).collect()
    }

    #[test]
    fn happy_path_passes_all_five() {
        let results = validate_kb(&graph(HAPPY));
        assert_eq!(results.iter().map(|r| r.check).collect::<Vec<_>>(), CheckId::ALL);
        assert!(failing(&results).is_empty(), "{results:?}");
    }

    #[test]
    fn disjoint_types_fail_consistency() {
        let g = graph(&format!(
            "{HAPPY} :a a bpmn:ServiceTask . bpmn:UserTask owl:disjointWith bpmn:ServiceTask ."
        ));
        let results = validate_kb(&g);
        assert_eq!(failing(&results), [CheckId::Consistency]);
        assert_eq!(results[0].findings[0].subject, "http://x/a");
    }

    #[test]
    fn lane_resolution_needs_exactly_one_lane() {
        let mut g = graph(HAPPY);
        let a = Iri::new("http://x/a").unwrap();
        g.remove(&Triple::new(
            a.clone(),
            bpmn::has_lane(),
            Term::Iri(Iri::new("http://x/q").unwrap()),
        ));
        g.insert(Triple::new(
            a.clone(),
            bpmn::has_lane(),
            Term::Iri(Iri::new("http://x/undeclared").unwrap()),
        ));
        let results = validate_kb(&g);
        assert!(failing(&results).contains(&CheckId::LaneResolution));
        assert_eq!(results[2].findings[0].subject, "http://x/a");

        let two = graph(&format!(
            "{HAPPY} :a bpmn:has_lane :q2 . :q2 a bpmn:Lane ; trace:sourcePath \"/queues/1\" ."
        ));
        assert_eq!(failing(&validate_kb(&two)), [CheckId::LaneResolution]);
    }

    #[test]
    fn missing_trace_fails_traceability() {
        let mut g = graph(HAPPY);
        g.remove(&Triple::new(
            Iri::new("http://x/e").unwrap(),
            trace::source_path(),
            Term::Literal(Literal::string("/nodes/2")),
        ));
        assert_eq!(failing(&validate_kb(&g)), [CheckId::Traceability]);
    }

    #[test]
    fn fan_out_without_gateway_fails_typing() {
        let g = graph(&format!(
            "{HAPPY} :f3 a bpmn:SequenceFlow ; bpmn:has_sourceRef :a ; bpmn:has_targetRef :e ; trace:sourcePath \"/t\" ."
        ));
        let failed = failing(&validate_kb(&g));
        assert!(failed.contains(&CheckId::GatewayTyping));
    }

    #[test]
    fn unreachable_node_fails_structure() {
        let g = graph(&format!(
            "{HAPPY} :b a bpmn:ServiceTask ; trace:sourcePath \"/nodes/3\" ."
        ));
        let results = validate_kb(&g);
        assert_eq!(failing(&results), [CheckId::Structure]);
        assert!(results[4].findings.iter().all(|f| f.subject == "http://x/b"));
    }

    #[test]
    fn validation_is_read_only_and_checks_are_independent() {
        let g = graph(&format!(
            "{HAPPY} :b a bpmn:ServiceTask . :a a bpmn:ServiceTask . bpmn:UserTask owl:disjointWith bpmn:ServiceTask ."
        ));
        let before = g.fingerprint();
        let all = validate_kb(&g);
        assert_eq!(g.fingerprint(), before);
        for (i, c) in CheckId::ALL.into_iter().enumerate() {
            let alone = run_checks(&g, &[c]);
            assert_eq!(alone[0], all[i]);
        }
    }
}
