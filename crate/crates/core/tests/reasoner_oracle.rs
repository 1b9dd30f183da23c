#![allow(clippy::needless_range_loop)]

use std::collections::BTreeSet;

use flow2bpmn_core::kb::{Iri, Term, Triple, TripleGraph};
use flow2bpmn_core::reasoner::{saturate, PatternTerm, RuleLite, TriplePattern};
use flow2bpmn_core::vocab::{owl, rdf, rdfs};
use proptest::prelude::*;

const NS: &str = "http://example.org/oracle#";
const PROPS: usize = 4;

fn class(i: usize) -> Iri {
    Iri::new(format!("{NS}C{i}")).unwrap()
}
fn ind(i: usize) -> Iri {
    Iri::new(format!("{NS}i{i}")).unwrap()
}
fn prop(i: usize) -> Iri {
    Iri::new(format!("{NS}p{i}")).unwrap()
}

#[derive(Debug, Clone, Copy)]
enum Axiom {
    Sub(usize, usize),
    Equiv(usize, usize),
}

#[derive(Debug, Clone)]
struct Ontology {
    classes: usize,
    individuals: usize,
    axioms: Vec<Axiom>,
    types: Vec<(usize, usize)>,
    prop_axioms: Vec<Axiom>,
    links: Vec<(usize, usize, usize)>,
    /// `?x a C_a => ?x a C_b`
    rules: Vec<(usize, usize)>,
}

impl Ontology {
    fn graph(&self) -> TripleGraph {
        let mut g = TripleGraph::new();
        for a in &self.axioms {
            g.insert(match *a {
                Axiom::Sub(x, y) => Triple::new(class(x), rdfs::sub_class_of(), class(y)),
                Axiom::Equiv(x, y) => Triple::new(class(x), owl::equivalent_class(), class(y)),
            });
        }
        for a in &self.prop_axioms {
            g.insert(match *a {
                Axiom::Sub(x, y) => Triple::new(prop(x), rdfs::sub_property_of(), prop(y)),
                Axiom::Equiv(x, y) => Triple::new(prop(x), owl::equivalent_property(), prop(y)),
            });
        }
        for &(i, c) in &self.types {
            g.insert(Triple::new(ind(i), rdf::type_(), class(c)));
        }
        for &(s, p, o) in &self.links {
            g.insert(Triple::new(ind(s), prop(p), ind(o)));
        }
        g
    }

    fn rule_set(&self) -> Vec<RuleLite> {
        self.rules
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| {
                let x = || PatternTerm::var("?x");
                RuleLite::new(
                    format!("r{k}"),
                    vec![TriplePattern::new(x(), rdf::type_(), class(a))],
                    vec![TriplePattern::new(x(), rdf::type_(), class(b))],
                )
                .unwrap()
            })
            .collect()
    }
}

fn axioms(n: usize, max: usize) -> impl Strategy<Value = Vec<Axiom>> {
    proptest::collection::vec(
        (any::<bool>(), 0..n, 0..n).prop_map(|(sub, a, b)| if sub { Axiom::Sub(a, b) } else { Axiom::Equiv(a, b) }),
        0..=max,
    )
}

fn ontology() -> impl Strategy<Value = Ontology> {
    (1usize..=20, 1usize..=15).prop_flat_map(|(classes, individuals)| {
        (
            axioms(classes, 30),
            proptest::collection::vec((0..individuals, 0..classes), 0..=30),
            axioms(PROPS, 6),
            proptest::collection::vec((0..individuals, 0..PROPS, 0..individuals), 0..=12),
            proptest::collection::vec((0..classes, 0..classes), 0..=4),
        )
            .prop_map(move |(axioms, types, prop_axioms, links, rules)| Ontology {
                classes,
                individuals,
                axioms,
                types,
                prop_axioms,
                links,
                rules,
            })
    })
}

/// Reflexive-transitive reachability via Warshall.
fn reach(n: usize, axioms: &[Axiom]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = true;
    }
    for a in axioms {
        match *a {
            Axiom::Sub(x, y) => r[x][y] = true,
            Axiom::Equiv(x, y) => {
                r[x][y] = true;
                r[y][x] = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

struct Expected {
    types: BTreeSet<(usize, usize)>,
    links: BTreeSet<(usize, usize, usize)>,
}

fn oracle(o: &Ontology) -> Expected {
    let cr = reach(o.classes, &o.axioms);
    let mut types: BTreeSet<(usize, usize)> = o.types.iter().copied().collect();
    loop {
        let mut next = types.clone();
        for &(i, c) in &types {
            next.extend((0..o.classes).filter(|&d| cr[c][d]).map(|d| (i, d)));
        }
        for &(a, b) in &o.rules {
            next.extend(types.iter().filter(|&&(_, c)| c == a).map(|&(i, _)| (i, b)));
        }
        if next == types {
            break;
        }
        types = next;
    }
    let pr = &reach(PROPS, &o.prop_axioms);
    let links = o
        .links
        .iter()
        .flat_map(|&(s, p, t)| (0..PROPS).filter(move |&q| pr[p][q]).map(move |q| (s, q, t)))
        .collect();
    Expected { types, links }
}

fn index_of(iri: &Iri, prefix: &str) -> Option<usize> {
    iri.as_str().strip_prefix(NS)?.strip_prefix(prefix)?.parse().ok()
}

fn observed_types(g: &TripleGraph, individuals: usize) -> BTreeSet<(usize, usize)> {
    (0..individuals)
        .flat_map(|i| {
            g.types_of(&ind(i))
                .into_iter()
                .filter_map(move |c| Some((i, index_of(&c, "C")?)))
        })
        .collect()
}

fn observed_links(g: &TripleGraph) -> BTreeSet<(usize, usize, usize)> {
    g.iter()
        .filter_map(|t| {
            let s = index_of(&t.subject, "i")?;
            let p = index_of(&t.predicate, "p")?;
            let o = index_of(t.object.as_iri()?, "i")?;
            Some((s, p, o))
        })
        .collect()
}

fn run(o: &Ontology, rules: &[RuleLite]) -> TripleGraph {
    saturate(&o.graph(), rules, 1_000).unwrap().0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn saturation_matches_closure_oracle(o in ontology()) {
        let g = run(&o, &o.rule_set());
        let want = oracle(&o);
        prop_assert_eq!(observed_types(&g, o.individuals), want.types);
        prop_assert_eq!(observed_links(&g), want.links);
    }

    #[test]
    fn subclass_closure_is_materialized(o in ontology()) {
        let g = run(&o, &[]);
        let subs: Vec<Axiom> = o.axioms.iter().copied().filter(|a| matches!(a, Axiom::Sub(..))).collect();
        let r = reach(o.classes, &subs);
        for a in 0..o.classes {
            for b in 0..o.classes {
                let asserted = subs.iter().any(|x| matches!(*x, Axiom::Sub(p, q) if p == a && q == b));
                let derived = g.contains_parts(&class(a), &rdfs::sub_class_of(), &Term::Iri(class(b)));
                // Reflexive links are never invented.
                let want = if a == b { asserted } else { r[a][b] };
                prop_assert_eq!(derived, want, "C{} subClassOf C{}", a, b);
            }
        }
    }

    #[test]
    fn saturation_is_idempotent(o in ontology()) {
        let rules = o.rule_set();
        let once = run(&o, &rules);
        let (twice, report) = saturate(&once, &rules, 1_000).unwrap();
        prop_assert_eq!(report.total_added(), 0);
        prop_assert_eq!(twice.fingerprint(), once.fingerprint());
    }

    #[test]
    fn saturation_is_monotone(o in ontology(), extra in (0usize..15, 0usize..20)) {
        let smaller = run(&o, &o.rule_set());
        let mut bigger = o.clone();
        bigger.types.push((extra.0 % o.individuals, extra.1 % o.classes));
        let bigger_g = run(&bigger, &bigger.rule_set());
        for t in smaller.iter() {
            prop_assert!(bigger_g.contains(t), "{:?} lost", t);
        }
    }

    #[test]
    fn rule_order_is_irrelevant(o in ontology()) {
        let mut rules = o.rule_set();
        let forward = run(&o, &rules);
        rules.reverse();
        let backward = run(&o, &rules);
        prop_assert_eq!(forward.fingerprint(), backward.fingerprint());
    }
}
