use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use super::term::{Iri, Term, Triple};
use crate::vocab::{owl, rdf, rdfs, rl};

/// Knowledge-base layer a triple originates from. `Inferred` marks triples
/// added by saturation or gateway synthesis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerTag {
    Domain,
    Bpmn,
    Mapping,
    Abox,
    Inferred,
}

impl LayerTag {
    const ALL: [LayerTag; 5] = [
        LayerTag::Domain,
        LayerTag::Bpmn,
        LayerTag::Mapping,
        LayerTag::Abox,
        LayerTag::Inferred,
    ];

    fn bit(self) -> u8 {
        1 << (self as u8)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LayerTag::Domain => "domain",
            LayerTag::Bpmn => "bpmn",
            LayerTag::Mapping => "mapping",
            LayerTag::Abox => "abox",
            LayerTag::Inferred => "inferred",
        }
    }
}

impl fmt::Display for LayerTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Set of layers a triple was asserted in.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct LayerTags(u8);

impl LayerTags {
    pub fn contains(self, tag: LayerTag) -> bool {
        self.0 & tag.bit() != 0
    }

    pub fn iter(self) -> impl Iterator<Item = LayerTag> {
        LayerTag::ALL.into_iter().filter(move |t| self.contains(*t))
    }

    fn with(self, tag: LayerTag) -> Self {
        Self(self.0 | tag.bit())
    }
}

impl fmt::Debug for LayerTags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// An indexed set of triples with per-triple layer provenance.
#[derive(Clone, Default)]
pub struct TripleGraph {
    triples: BTreeMap<Triple, LayerTags>,
    by_subject: HashMap<Iri, BTreeSet<Triple>>,
    by_predicate: HashMap<Iri, BTreeSet<Triple>>,
    by_predicate_object: HashMap<(Iri, Term), BTreeSet<Triple>>,
    prefixes: BTreeMap<String, Iri>,
}

impl TripleGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Inserts with the `Abox` tag. Returns true if the triple was new.
    pub fn insert(&mut self, triple: Triple) -> bool {
        self.insert_tagged(triple, LayerTag::Abox)
    }

    pub fn insert_tagged(&mut self, triple: Triple, tag: LayerTag) -> bool {
        if let Some(tags) = self.triples.get_mut(&triple) {
            *tags = tags.with(tag);
            return false;
        }
        self.by_subject
            .entry(triple.subject.clone())
            .or_default()
            .insert(triple.clone());
        self.by_predicate
            .entry(triple.predicate.clone())
            .or_default()
            .insert(triple.clone());
        self.by_predicate_object
            .entry((triple.predicate.clone(), triple.object.clone()))
            .or_default()
            .insert(triple.clone());
        self.triples.insert(triple, LayerTags::default().with(tag));
        true
    }

    pub fn remove(&mut self, triple: &Triple) -> bool {
        if self.triples.remove(triple).is_none() {
            return false;
        }
        fn drop_from<K: std::hash::Hash + Eq>(map: &mut HashMap<K, BTreeSet<Triple>>, key: K, triple: &Triple) {
            if let Some(set) = map.get_mut(&key) {
                set.remove(triple);
                if set.is_empty() {
                    map.remove(&key);
                }
            }
        }
        drop_from(&mut self.by_subject, triple.subject.clone(), triple);
        drop_from(&mut self.by_predicate, triple.predicate.clone(), triple);
        drop_from(
            &mut self.by_predicate_object,
            (triple.predicate.clone(), triple.object.clone()),
            triple,
        );
        true
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.contains_key(triple)
    }

    pub fn contains_parts(&self, s: &Iri, p: &Iri, o: &Term) -> bool {
        self.triples.contains_key(&Triple::new(s.clone(), p.clone(), o.clone()))
    }

    /// Triples in canonical (subject, predicate, object) order.
    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.triples.keys()
    }

    pub fn tags(&self, triple: &Triple) -> Option<LayerTags> {
        self.triples.get(triple).copied()
    }

    pub fn about<'a>(&'a self, subject: &Iri) -> impl Iterator<Item = &'a Triple> + 'a {
        self.by_subject.get(subject).into_iter().flatten()
    }

    pub fn with_predicate<'a>(&'a self, predicate: &Iri) -> impl Iterator<Item = &'a Triple> + 'a {
        self.by_predicate.get(predicate).into_iter().flatten()
    }

    pub fn with_predicate_object<'a>(
        &'a self,
        predicate: &Iri,
        object: &Term,
    ) -> impl Iterator<Item = &'a Triple> + 'a {
        self.by_predicate_object
            .get(&(predicate.clone(), object.clone()))
            .into_iter()
            .flatten()
    }

    pub fn objects<'a>(&'a self, subject: &Iri, predicate: &Iri) -> impl Iterator<Item = &'a Term> + 'a {
        let predicate = predicate.clone();
        self.about(subject)
            .filter(move |t| t.predicate == predicate)
            .map(|t| &t.object)
    }

    pub fn object(&self, subject: &Iri, predicate: &Iri) -> Option<&Term> {
        self.objects(subject, predicate).next()
    }

    pub fn subjects<'a>(&'a self, predicate: &Iri, object: &Term) -> impl Iterator<Item = &'a Iri> + 'a {
        self.with_predicate_object(predicate, object).map(|t| &t.subject)
    }

    /// Individuals typed with `class` (direct assertions only; saturate first
    /// for entailed membership).
    pub fn instances_of<'a>(&'a self, class: &Iri) -> impl Iterator<Item = &'a Iri> + 'a {
        self.subjects(&rdf::type_(), &Term::Iri(class.clone()))
    }

    pub fn types_of(&self, subject: &Iri) -> BTreeSet<Iri> {
        let ty = rdf::type_();
        self.objects(subject, &ty).filter_map(|o| o.as_iri().cloned()).collect()
    }

    pub fn has_type(&self, subject: &Iri, class: &Iri) -> bool {
        self.contains_parts(subject, &rdf::type_(), &Term::Iri(class.clone()))
    }

    pub fn prefixes(&self) -> &BTreeMap<String, Iri> {
        &self.prefixes
    }

    pub fn add_prefix(&mut self, prefix: impl Into<String>, namespace: Iri) {
        self.prefixes.insert(prefix.into(), namespace);
    }

    /// Adds every triple of `other` keeping `other`'s layer tags.
    pub fn extend_from(&mut self, other: &TripleGraph) {
        for (triple, tags) in &other.triples {
            for tag in tags.iter() {
                self.insert_tagged(triple.clone(), tag);
            }
        }
        for (p, ns) in &other.prefixes {
            self.prefixes.entry(p.clone()).or_insert_with(|| ns.clone());
        }
    }

    /// Re-tags every triple with a single layer.
    pub fn retagged(&self, tag: LayerTag) -> TripleGraph {
        let mut out = TripleGraph::new();
        for triple in self.triples.keys() {
            out.insert_tagged(triple.clone(), tag);
        }
        out.prefixes = self.prefixes.clone();
        out
    }

    /// Order-independent fingerprint of the triple set.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        for triple in self.triples.keys() {
            triple.hash(&mut hasher);
        }
        hasher.finish()
    }
}

impl PartialEq for TripleGraph {
    /// Equality of triple sets; layer tags and prefixes are ignored.
    fn eq(&self, other: &Self) -> bool {
        self.triples.len() == other.triples.len() && self.triples.keys().eq(other.triples.keys())
    }
}

impl Eq for TripleGraph {}

impl fmt::Debug for TripleGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.triples.keys()).finish()
    }
}

impl FromIterator<Triple> for TripleGraph {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        let mut graph = TripleGraph::new();
        for t in iter {
            graph.insert(t);
        }
        graph
    }
}

#[derive(Debug, Error)]
#[error("mapping layer may only use bridge vocabulary, found predicate {predicate}")]
pub struct LayerVocabularyError {
    pub predicate: Iri,
}

/// One of the four layers of the knowledge base.
#[derive(Clone, Debug)]
pub struct OntologyLayer {
    tag: LayerTag,
    graph: TripleGraph,
}

impl OntologyLayer {
    /// Builds a layer. The mapping layer is restricted to bridge predicates
    /// and rule-reification triples.
    pub fn new(tag: LayerTag, graph: TripleGraph) -> Result<Self, LayerVocabularyError> {
        if tag == LayerTag::Mapping {
            let allowed = [
                owl::equivalent_class(),
                owl::equivalent_property(),
                rdfs::sub_class_of(),
                rdfs::sub_property_of(),
                owl::disjoint_with(),
            ];
            for t in graph.iter() {
                let is_rule = t.predicate.as_str().starts_with(rl::NS)
                    || (t.predicate == rdf::type_() && t.object == Term::Iri(rl::rule()));
                if !is_rule && !allowed.contains(&t.predicate) {
                    return Err(LayerVocabularyError {
                        predicate: t.predicate.clone(),
                    });
                }
            }
        }
        Ok(Self {
            tag,
            graph: graph.retagged(tag),
        })
    }

    pub fn tag(&self) -> LayerTag {
        self.tag
    }

    pub fn graph(&self) -> &TripleGraph {
        &self.graph
    }
}

/// Set-union of layers; each triple remembers every layer that asserted it.
pub fn merge<'a>(layers: impl IntoIterator<Item = &'a OntologyLayer>) -> TripleGraph {
    let mut out = TripleGraph::new();
    for layer in layers {
        out.extend_from(&layer.graph);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iri(s: &str) -> Iri {
        Iri::new(format!("http://ex.org/{s}")).unwrap()
    }

    fn chain(prefix: &str, n: usize) -> TripleGraph {
        (0..n)
            .map(|i| {
                Triple::new(
                    iri(&format!("{prefix}{i}")),
                    iri("p"),
                    iri(&format!("{prefix}{}", i + 1)),
                )
            })
            .collect()
    }

    #[test]
    fn disjoint_union_sizes_add() {
        let a = OntologyLayer::new(LayerTag::Domain, chain("a", 10)).unwrap();
        let b = OntologyLayer::new(LayerTag::Bpmn, chain("b", 15)).unwrap();
        assert_eq!(merge([&a, &b]).len(), 25);
    }

    #[test]
    fn self_merge_is_identity() {
        let a = OntologyLayer::new(LayerTag::Domain, chain("a", 10)).unwrap();
        let merged = merge([&a, &a]);
        assert_eq!(&merged, a.graph());
    }

    #[test]
    fn shared_triples_keep_both_tags() {
        let a = OntologyLayer::new(LayerTag::Domain, chain("a", 2)).unwrap();
        let b = OntologyLayer::new(LayerTag::Abox, chain("a", 1)).unwrap();
        let merged = merge([&a, &b]);
        let first = merged.iter().next().unwrap().clone();
        let tags: Vec<_> = merged.tags(&first).unwrap().iter().collect();
        assert_eq!(tags, vec![LayerTag::Domain, LayerTag::Abox]);
    }

    #[test]
    fn mapping_layer_rejects_foreign_predicates() {
        let g = chain("a", 1);
        assert!(OntologyLayer::new(LayerTag::Mapping, g).is_err());
        let ok: TripleGraph = [Triple::new(iri("A"), owl::equivalent_class(), iri("B"))]
            .into_iter()
            .collect();
        assert!(OntologyLayer::new(LayerTag::Mapping, ok).is_ok());
    }

    #[test]
    fn remove_keeps_indexes_consistent() {
        let mut g = chain("a", 3);
        let t = Triple::new(iri("a1"), iri("p"), iri("a2"));
        assert!(g.remove(&t));
        assert!(!g.contains(&t));
        assert_eq!(g.about(&iri("a1")).count(), 0);
        assert_eq!(g.with_predicate(&iri("p")).count(), 2);
        assert_eq!(g.subjects(&iri("p"), &Term::Iri(iri("a2"))).count(), 0);
    }

    fn arb_graph() -> impl Strategy<Value = TripleGraph> {
        prop::collection::vec((0..6u8, 0..3u8, 0..6u8), 0..25).prop_map(|edges| {
            edges
                .into_iter()
                .map(|(s, p, o)| Triple::new(iri(&format!("s{s}")), iri(&format!("p{p}")), iri(&format!("s{o}"))))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn merge_is_commutative_associative_idempotent(a in arb_graph(), b in arb_graph(), c in arb_graph()) {
            let la = OntologyLayer::new(LayerTag::Domain, a).unwrap();
            let lb = OntologyLayer::new(LayerTag::Bpmn, b).unwrap();
            let lc = OntologyLayer::new(LayerTag::Abox, c).unwrap();
            let abc = merge([&la, &lb, &lc]);
            prop_assert_eq!(&abc, &merge([&lc, &la, &lb]));
            let ab = OntologyLayer::new(LayerTag::Domain, merge([&la, &lb])).unwrap();
            prop_assert_eq!(&abc, &merge([&ab, &lc]));
            prop_assert_eq!(&abc, &merge([&la, &lb, &lc, &la]));
            prop_assert!(abc.len() <= la.graph().len() + lb.graph().len() + lc.graph().len());
        }

        #[test]
        fn indexes_match_triple_set(g in arb_graph()) {
            let by_subject: usize = g.iter().map(|t| t.subject.clone()).collect::<BTreeSet<_>>()
                .iter().map(|s| g.about(s).count()).sum();
            prop_assert_eq!(by_subject, g.len());
            for t in g.iter() {
                prop_assert!(g.contains_parts(&t.subject, &t.predicate, &t.object));
            }
        }
    }
}
