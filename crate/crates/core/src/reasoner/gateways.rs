//! Built-in gateway synthesis over the BPMN-level sequence flows.
//!
//! A node with two or more outgoing flows gets a split gateway `{node}/split`
//! and a node with two or more incoming flows gets a join gateway
//! `{node}/join`. The original flows are rewired through the gateway and a
//! connector flow links the gateway with its owning node.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::kb::{Iri, LayerTag, Literal, Term, Triple, TripleGraph};
use crate::vocab::{bpmn, rdf, sf, trace};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SynthesisReport {
    pub splits: usize,
    pub joins: usize,
    pub exclusive: usize,
    pub parallel: usize,
    pub added: usize,
    pub removed: usize,
    pub warnings: Vec<String>,
}

#[derive(Default)]
struct FlowIndex {
    source: BTreeMap<Iri, Iri>,
    target: BTreeMap<Iri, Iri>,
    out: BTreeMap<Iri, Vec<Iri>>,
    inc: BTreeMap<Iri, Vec<Iri>>,
}

impl FlowIndex {
    fn build(g: &TripleGraph) -> Self {
        let mut idx = FlowIndex::default();
        let mut flows: Vec<&Iri> = g.instances_of(&bpmn::sequence_flow()).collect();
        flows.sort();
        for f in flows {
            let src = g.object(f, &bpmn::has_source_ref()).and_then(Term::as_iri);
            let tgt = g.object(f, &bpmn::has_target_ref()).and_then(Term::as_iri);
            if let Some(s) = src {
                idx.source.insert(f.clone(), s.clone());
                idx.out.entry(s.clone()).or_default().push(f.clone());
            }
            if let Some(t) = tgt {
                idx.target.insert(f.clone(), t.clone());
                idx.inc.entry(t.clone()).or_default().push(f.clone());
            }
        }
        idx
    }
}

struct Edit<'g> {
    g: &'g mut TripleGraph,
    report: &'g mut SynthesisReport,
}

impl Edit<'_> {
    fn add(&mut self, s: &Iri, p: Iri, o: Term) {
        if self.g.insert_tagged(Triple::new(s.clone(), p, o), LayerTag::Inferred) {
            self.report.added += 1;
        }
    }

    fn remove(&mut self, s: &Iri, p: Iri, o: Term) {
        if self.g.remove(&Triple::new(s.clone(), p, o)) {
            self.report.removed += 1;
        }
    }

    fn child_iri(base: &Iri, suffix: &str) -> Iri {
        Iri::new(format!("{}/{suffix}", base.as_str())).expect("suffix keeps the IRI valid")
    }

    fn mint_gateway(&mut self, owner: &Iri, role: &str, kind: Iri) -> Iri {
        let gw = Self::child_iri(owner, role);
        self.add(&gw, rdf::type_(), Term::Iri(bpmn::gateway()));
        self.add(&gw, rdf::type_(), Term::Iri(kind));
        self.add(&gw, sf::gateway_of(), Term::Iri(owner.clone()));
        self.add(&gw, sf::gateway_role(), Term::Literal(Literal::string(role)));
        let path = self.g.object(owner, &trace::source_path()).cloned();
        if let Some(path) = path {
            self.add(&gw, trace::source_path(), path);
        }
        gw
    }

    fn connector(&mut self, gw: &Iri, suffix: &str, from: &Iri, to: &Iri) {
        let c = Self::child_iri(gw, suffix);
        self.add(&c, rdf::type_(), Term::Iri(bpmn::sequence_flow()));
        self.add(&c, bpmn::has_source_ref(), Term::Iri(from.clone()));
        self.add(&c, bpmn::has_target_ref(), Term::Iri(to.clone()));
        self.add(&c, sf::connector_of(), Term::Iri(gw.clone()));
        let path = self.g.object(gw, &trace::source_path()).cloned();
        if let Some(path) = path {
            self.add(&c, trace::source_path(), path);
        }
    }

    fn retarget_transitions_to(&mut self, from: &Iri, old: &Iri, new: &Iri) {
        if self
            .g
            .contains_parts(from, &sf::transitions_to(), &Term::Iri(old.clone()))
        {
            self.remove(from, sf::transitions_to(), Term::Iri(old.clone()));
            self.add(from, sf::transitions_to(), Term::Iri(new.clone()));
        }
    }
}

fn is_gateway(g: &TripleGraph, n: &Iri) -> bool {
    g.has_type(n, &bpmn::gateway())
}

fn is_split(g: &TripleGraph, n: &Iri) -> bool {
    g.contains_parts(n, &sf::gateway_role(), &Term::Literal(Literal::string("split")))
}

/// Flows that close a cycle, found by depth-first search from the source
/// nodes (and then from any node left unvisited) in IRI order.
fn back_edges(idx: &FlowIndex) -> BTreeSet<Iri> {
    let mut nodes: BTreeSet<&Iri> = idx.out.keys().collect();
    nodes.extend(idx.inc.keys());
    let roots = nodes.iter().filter(|n| !idx.inc.contains_key(**n));
    let rest = nodes.iter().filter(|n| idx.inc.contains_key(**n));
    let mut done: BTreeSet<&Iri> = BTreeSet::new();
    let mut on_stack: BTreeSet<&Iri> = BTreeSet::new();
    let mut back = BTreeSet::new();
    for root in roots.chain(rest) {
        if done.contains(*root) {
            continue;
        }
        let mut stack: Vec<(&Iri, usize)> = vec![(root, 0)];
        on_stack.insert(root);
        while let Some((n, i)) = stack.pop() {
            let flows = idx.out.get(n).map(Vec::as_slice).unwrap_or(&[]);
            let Some(f) = flows.get(i) else {
                on_stack.remove(n);
                done.insert(n);
                continue;
            };
            stack.push((n, i + 1));
            let Some(t) = idx.target.get(f) else { continue };
            if on_stack.contains(t) {
                back.insert(f.clone());
            } else if !done.contains(t) {
                on_stack.insert(t);
                stack.push((t, 0));
            }
        }
    }
    back
}

/// Join typing. Each incoming branch is walked backwards, ignoring back
/// edges, to the nearest split that is not closed by a join on the way.
/// Parallel only when every branch ends at parallel splits. A loop merge, an
/// exclusive split, or a branch reaching a source node with no split on the
/// way makes the join exclusive.
fn join_kind(g: &TripleGraph, idx: &FlowIndex, back: &BTreeSet<Iri>, n: &Iri) -> (Iri, bool) {
    let forward = |flows: Option<&Vec<Iri>>| -> Vec<Iri> {
        flows
            .into_iter()
            .flatten()
            .filter(|f| !back.contains(*f))
            .cloned()
            .collect()
    };
    let forward_preds = |x: &Iri| -> Vec<Iri> {
        forward(idx.inc.get(x))
            .iter()
            .filter_map(|f| idx.source.get(f).cloned())
            .collect()
    };
    let incoming = idx.inc.get(n).map(Vec::len).unwrap_or(0);
    if forward(idx.inc.get(n)).len() < incoming {
        return (bpmn::exclusive_gateway(), false);
    }

    let (mut exclusive, mut parallel, mut open) = (false, false, false);
    let mut visited: BTreeSet<(Iri, usize)> = BTreeSet::new();
    let mut stack: Vec<(Iri, usize)> = forward_preds(n).into_iter().map(|p| (p, 0)).collect();
    while let Some((x, depth)) = stack.pop() {
        if !visited.insert((x.clone(), depth)) {
            continue;
        }
        let mut depth = depth;
        if is_split(g, &x) && forward(idx.out.get(&x)).len() >= 2 {
            if depth == 0 {
                if g.has_type(&x, &bpmn::parallel_gateway()) {
                    parallel = true;
                } else {
                    exclusive = true;
                }
                continue;
            }
            depth -= 1;
        } else if !is_gateway(g, &x) && forward(idx.inc.get(&x)).len() >= 2 {
            depth += 1;
        }
        let preds = forward_preds(&x);
        if preds.is_empty() {
            open = true;
        }
        stack.extend(preds.into_iter().map(|p| (p, depth)));
    }
    if parallel && !exclusive && !open {
        (bpmn::parallel_gateway(), false)
    } else {
        (bpmn::exclusive_gateway(), parallel)
    }
}

/// Mints split and join gateways. Idempotent: after one pass no
/// non-gateway node has fan-out or fan-in above one.
pub fn synthesize_gateways(graph: &TripleGraph) -> (TripleGraph, SynthesisReport) {
    let mut g = graph.clone();
    let mut report = SynthesisReport::default();

    let idx = FlowIndex::build(&g);
    let split_nodes: Vec<(Iri, Vec<Iri>)> = idx
        .out
        .iter()
        .filter(|(n, flows)| flows.len() >= 2 && !is_gateway(&g, n))
        .map(|(n, flows)| (n.clone(), flows.clone()))
        .collect();
    for (n, flows) in split_nodes {
        let guarded: Vec<bool> = flows
            .iter()
            .map(|f| g.object(f, &bpmn::has_condition_expression()).is_some())
            .collect();
        let any_guarded = guarded.iter().any(|x| *x);
        let kind = if any_guarded {
            bpmn::exclusive_gateway()
        } else {
            bpmn::parallel_gateway()
        };
        let unguarded: Vec<&Iri> = flows
            .iter()
            .zip(&guarded)
            .filter(|(_, g)| !**g)
            .map(|(f, _)| f)
            .collect();
        let mut e = Edit {
            g: &mut g,
            report: &mut report,
        };
        let gw = e.mint_gateway(&n, "split", kind.clone());
        if any_guarded && !unguarded.is_empty() {
            e.add(&gw, bpmn::has_default(), Term::Iri(unguarded[0].clone()));
            if unguarded.len() > 1 {
                e.report.warnings.push(format!(
                    "{gw}: {} unguarded flows on an exclusive split; {} is the default",
                    unguarded.len(),
                    unguarded[0]
                ));
            }
        }
        for f in &flows {
            e.remove(f, bpmn::has_source_ref(), Term::Iri(n.clone()));
            e.add(f, bpmn::has_source_ref(), Term::Iri(gw.clone()));
            if let Some(t) = idx.target.get(f) {
                e.remove(&n, sf::transitions_to(), Term::Iri(t.clone()));
                e.add(&gw, sf::transitions_to(), Term::Iri(t.clone()));
            }
        }
        e.add(&n, sf::transitions_to(), Term::Iri(gw.clone()));
        e.connector(&gw, "in", &n, &gw);
        report.splits += 1;
        if kind == bpmn::parallel_gateway() {
            report.parallel += 1;
        } else {
            report.exclusive += 1;
        }
    }

    let idx = FlowIndex::build(&g);
    let back = back_edges(&idx);
    let joins: Vec<(Iri, Vec<Iri>, Iri, bool)> = idx
        .inc
        .iter()
        .filter(|(n, flows)| flows.len() >= 2 && !is_gateway(&g, n))
        .map(|(n, flows)| {
            let (kind, conflict) = join_kind(&g, &idx, &back, n);
            (n.clone(), flows.clone(), kind, conflict)
        })
        .collect();
    for (n, flows, kind, conflict) in joins {
        let mut e = Edit {
            g: &mut g,
            report: &mut report,
        };
        let gw = e.mint_gateway(&n, "join", kind.clone());
        if conflict {
            e.report
                .warnings
                .push(format!("{gw}: conflicting upstream split types; typed exclusive"));
        }
        for f in &flows {
            e.remove(f, bpmn::has_target_ref(), Term::Iri(n.clone()));
            e.add(f, bpmn::has_target_ref(), Term::Iri(gw.clone()));
            if let Some(s) = idx.source.get(f) {
                e.retarget_transitions_to(s, &n, &gw);
            }
        }
        e.add(&gw, sf::transitions_to(), Term::Iri(n.clone()));
        e.connector(&gw, "out", &gw, &n);
        report.joins += 1;
        if kind == bpmn::parallel_gateway() {
            report.parallel += 1;
        } else {
            report.exclusive += 1;
        }
    }
    (g, report)
}
