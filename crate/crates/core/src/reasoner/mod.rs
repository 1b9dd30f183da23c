//! Forward-chaining materialisation over the merged knowledge base.
//!
//! Rules R1 (subclass), R2 (class equivalence), R3 (property equivalence and
//! subproperty) and the loaded [`RuleLite`] set are applied in rounds until no
//! round adds a triple. No new terms are ever created, so the fixpoint exists.

mod gateways;
mod rules;

use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

pub use gateways::{synthesize_gateways, SynthesisReport};
pub use rules::{load_rules, rules_from_graph, PatternTerm, RuleError, RuleLite, TriplePattern};

use crate::kb::{Iri, LayerTag, Term, Triple, TripleGraph};
use crate::vocab::{owl, rdf, rdfs};

pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;

pub const SOURCE_SUBCLASS: &str = "R1-subclass";
pub const SOURCE_EQUIVALENCE: &str = "R2-equivalence";
pub const SOURCE_PROPERTY: &str = "R3-property";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReasonError {
    #[error("fixpoint not reached within {0} iterations")]
    FixpointBudget(usize),
}

impl ReasonError {
    pub fn code(&self) -> &'static str {
        match self {
            ReasonError::FixpointBudget(_) => "E_FIXPOINT_BUDGET",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct InferenceReport {
    pub iterations: usize,
    /// Triples added per source: `R1-subclass`, `R2-equivalence`,
    /// `R3-property` or `rule:<name>`.
    pub added: BTreeMap<String, usize>,
    #[serde(rename = "elapsedUs")]
    pub elapsed_us: u64,
}

impl InferenceReport {
    pub fn total_added(&self) -> usize {
        self.added.values().sum()
    }

    pub fn elapsed(&self) -> Duration {
        Duration::from_micros(self.elapsed_us)
    }
}

fn iri_pairs(g: &TripleGraph, p: &Iri) -> Vec<(Iri, Iri)> {
    g.with_predicate(p)
        .filter_map(|t| Some((t.subject.clone(), t.object.as_iri()?.clone())))
        .collect()
}

/// One round of R1-R3 plus the rules, evaluated against `g` as it stood at
/// the start of the round. Each new triple is attributed to the first source
/// that derives it.
fn derive_round(g: &TripleGraph, rules: &[RuleLite]) -> Vec<(Triple, String)> {
    let mut seen: HashSet<Triple> = HashSet::new();
    let mut out = Vec::new();
    let mut emit = |t: Triple, source: &str| {
        if !g.contains(&t) && seen.insert(t.clone()) {
            out.push((t, source.to_owned()));
        }
    };
    let ty = rdf::type_();

    let sub = rdfs::sub_class_of();
    for (a, b) in iri_pairs(g, &sub) {
        for x in g.instances_of(&a) {
            emit(
                Triple::new(x.clone(), ty.clone(), Term::Iri(b.clone())),
                SOURCE_SUBCLASS,
            );
        }
        for c in g.objects(&b, &sub).filter_map(Term::as_iri) {
            if *c != a {
                emit(
                    Triple::new(a.clone(), sub.clone(), Term::Iri(c.clone())),
                    SOURCE_SUBCLASS,
                );
            }
        }
    }

    let eq = owl::equivalent_class();
    for (a, b) in iri_pairs(g, &eq) {
        if a == b {
            continue;
        }
        emit(
            Triple::new(b.clone(), eq.clone(), Term::Iri(a.clone())),
            SOURCE_EQUIVALENCE,
        );
        for c in g.objects(&b, &eq).filter_map(Term::as_iri) {
            if *c != a {
                emit(
                    Triple::new(a.clone(), eq.clone(), Term::Iri(c.clone())),
                    SOURCE_EQUIVALENCE,
                );
            }
        }
        for x in g.instances_of(&a) {
            emit(
                Triple::new(x.clone(), ty.clone(), Term::Iri(b.clone())),
                SOURCE_EQUIVALENCE,
            );
        }
    }

    let eqp = owl::equivalent_property();
    let subp = rdfs::sub_property_of();
    for (p, q) in iri_pairs(g, &eqp) {
        if p == q {
            continue;
        }
        emit(
            Triple::new(q.clone(), eqp.clone(), Term::Iri(p.clone())),
            SOURCE_PROPERTY,
        );
        for r in g.objects(&q, &eqp).filter_map(Term::as_iri) {
            if *r != p {
                emit(
                    Triple::new(p.clone(), eqp.clone(), Term::Iri(r.clone())),
                    SOURCE_PROPERTY,
                );
            }
        }
        for t in g.with_predicate(&p) {
            emit(
                Triple::new(t.subject.clone(), q.clone(), t.object.clone()),
                SOURCE_PROPERTY,
            );
        }
    }
    for (p, q) in iri_pairs(g, &subp) {
        if p == q {
            continue;
        }
        for r in g.objects(&q, &subp).filter_map(Term::as_iri) {
            if *r != p {
                emit(
                    Triple::new(p.clone(), subp.clone(), Term::Iri(r.clone())),
                    SOURCE_PROPERTY,
                );
            }
        }
        for t in g.with_predicate(&p) {
            emit(
                Triple::new(t.subject.clone(), q.clone(), t.object.clone()),
                SOURCE_PROPERTY,
            );
        }
    }

    for rule in rules {
        let source = format!("rule:{}", rule.name);
        for t in rule.fire(g) {
            emit(t, &source);
        }
    }
    out
}

/// Saturates a copy of `graph`. Derived triples carry the `inferred` tag.
pub fn saturate(
    graph: &TripleGraph,
    rules: &[RuleLite],
    max_iterations: usize,
) -> Result<(TripleGraph, InferenceReport), ReasonError> {
    let started = Instant::now();
    let mut g = graph.clone();
    let mut report = InferenceReport::default();
    loop {
        if report.iterations >= max_iterations {
            return Err(ReasonError::FixpointBudget(max_iterations));
        }
        report.iterations += 1;
        let derived = derive_round(&g, rules);
        if derived.is_empty() {
            break;
        }
        for (t, source) in derived {
            if g.insert_tagged(t, LayerTag::Inferred) {
                *report.added.entry(source).or_insert(0) += 1;
            }
        }
    }
    report.elapsed_us = started.elapsed().as_micros() as u64;
    Ok((g, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::parse_turtle;

    fn iri(s: &str) -> Iri {
        Iri::new(s).unwrap()
    }

    fn ttl(s: &str) -> TripleGraph {
        parse_turtle(format!("@prefix : <http://x/> .\n{s}").as_bytes()).unwrap()
    }

    #[test]
    fn subclass_chain() {
        let g = ttl(":A rdfs:subClassOf :B . :B rdfs:subClassOf :C . :x a :A .");
        let (s, report) = saturate(&g, &[], DEFAULT_MAX_ITERATIONS).unwrap();
        let added: Vec<_> = s.iter().filter(|t| !g.contains(t)).cloned().collect();
        let expected = ttl(":A rdfs:subClassOf :C . :x a :B . :x a :C .");
        assert_eq!(added.into_iter().collect::<TripleGraph>(), expected);
        assert_eq!(report.total_added(), 3);
        assert_eq!(report.added[SOURCE_SUBCLASS], 3);
        assert!(s
            .tags(&expected.iter().next().unwrap().clone())
            .unwrap()
            .contains(LayerTag::Inferred));
    }

    #[test]
    fn equivalence_copies_types_both_ways() {
        let g = parse_turtle(
            b"@prefix sf: <http://example.org/smartflow#> . @prefix bpmn: <http://example.org/bpmn#> .
              sf:ActionNode owl:equivalentClass bpmn:UserTask .
              <http://x/n> a sf:ActionNode . <http://x/m> a bpmn:UserTask .",
        )
        .unwrap();
        let (s, _) = saturate(&g, &[], DEFAULT_MAX_ITERATIONS).unwrap();
        assert!(s.has_type(&iri("http://x/n"), &iri("http://example.org/bpmn#UserTask")));
        assert!(s.has_type(&iri("http://x/m"), &iri("http://example.org/smartflow#ActionNode")));
    }

    #[test]
    fn property_propagation() {
        let g = ttl(":p owl:equivalentProperty :q . :q rdfs:subPropertyOf :r . :a :p :b . :c :q \"v\" .");
        let (s, _) = saturate(&g, &[], DEFAULT_MAX_ITERATIONS).unwrap();
        for expected in [":a :q :b .", ":a :r :b .", ":c :p \"v\" .", ":c :r \"v\" ."] {
            let t = ttl(expected).iter().next().unwrap().clone();
            assert!(s.contains(&t), "{expected}");
        }
    }

    #[test]
    fn saturation_is_idempotent_and_monotone() {
        let g = ttl(":A rdfs:subClassOf :B . :B owl:equivalentClass :C . :C rdfs:subClassOf :A . :x a :C .");
        let (once, _) = saturate(&g, &[], DEFAULT_MAX_ITERATIONS).unwrap();
        let (twice, report) = saturate(&once, &[], DEFAULT_MAX_ITERATIONS).unwrap();
        assert_eq!(once, twice);
        assert_eq!(report.total_added(), 0);
        assert!(g.iter().all(|t| once.contains(t)));
    }

    #[test]
    fn budget_is_enforced() {
        let g = ttl(":A rdfs:subClassOf :B . :B rdfs:subClassOf :C . :C rdfs:subClassOf :D . :x a :A .");
        assert_eq!(saturate(&g, &[], 2).unwrap_err().code(), "E_FIXPOINT_BUDGET");
        assert!(saturate(&g, &[], DEFAULT_MAX_ITERATIONS).is_ok());
    }

    #[test]
    fn rules_fire_to_fixpoint() {
        let g = ttl(":q a :Queue ; :kind \"human\" . :n :queue :q .");
        let rules = vec![
            RuleLite::new(
                "human",
                vec![
                    TriplePattern::new(PatternTerm::var("q"), rdf::type_(), iri("http://x/Queue")),
                    TriplePattern::new(
                        PatternTerm::var("q"),
                        iri("http://x/kind"),
                        Term::Literal(crate::kb::Literal::string("human")),
                    ),
                ],
                vec![TriplePattern::new(
                    PatternTerm::var("q"),
                    rdf::type_(),
                    iri("http://x/HumanQueue"),
                )],
            )
            .unwrap(),
            RuleLite::new(
                "task",
                vec![
                    TriplePattern::new(PatternTerm::var("n"), iri("http://x/queue"), PatternTerm::var("q")),
                    TriplePattern::new(PatternTerm::var("q"), rdf::type_(), iri("http://x/HumanQueue")),
                ],
                vec![TriplePattern::new(
                    PatternTerm::var("n"),
                    rdf::type_(),
                    iri("http://x/UserTask"),
                )],
            )
            .unwrap(),
        ];
        let (s, report) = saturate(&g, &rules, DEFAULT_MAX_ITERATIONS).unwrap();
        assert!(s.has_type(&iri("http://x/n"), &iri("http://x/UserTask")));
        assert_eq!(report.added["rule:human"], 1);
        assert_eq!(report.added["rule:task"], 1);
        assert_eq!(report.iterations, 3);
    }
}
