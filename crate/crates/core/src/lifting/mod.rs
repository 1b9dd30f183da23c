//! Declarative lifting of a validated spec into ABox triples using an
//! RML-subset mapping rule set.

mod jsonpath;
mod view;

use std::collections::HashMap;

use serde_json::Value;
use thiserror::Error;

pub use jsonpath::JsonPath;
pub use view::{build_view, view_fields, LiftView, VIEW_FIELDS};

use crate::ingest::WorkflowSpec;
use crate::kb::{parse_turtle, Iri, LayerTag, Literal, Term, Triple, TripleGraph};
use crate::vocab::{rdf, rml, rr, trace, xsd};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MappingError {
    #[error("mapping syntax: {0}")]
    Syntax(String),
    #[error("mapping reference: {0}")]
    Ref(String),
}

impl MappingError {
    pub fn code(&self) -> &'static str {
        match self {
            MappingError::Syntax(_) => "E_MAPPING_SYNTAX",
            MappingError::Ref(_) => "E_MAPPING_REF",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LiftError {
    #[error("join `{map}` found no partner for `{value}` at `{pointer}`")]
    Join {
        map: String,
        value: String,
        pointer: String,
    },
    #[error("minted IRI is invalid: {0}")]
    InvalidIri(String),
}

impl LiftError {
    pub fn code(&self) -> &'static str {
        match self {
            LiftError::Join { .. } => "E_LIFT_JOIN",
            LiftError::InvalidIri(_) => "E_LIFT_IRI",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Part {
    Text(String),
    Field(String),
}

/// IRI or literal template with `{field}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    source: String,
    parts: Vec<Part>,
}

impl Template {
    pub fn parse(source: &str) -> Result<Self, String> {
        let mut parts = Vec::new();
        let mut rest = source;
        while !rest.is_empty() {
            match rest.find(['{', '}']) {
                None => {
                    parts.push(Part::Text(rest.to_owned()));
                    break;
                }
                Some(i) if rest.as_bytes()[i] == b'}' => {
                    return Err(format!("unbalanced `}}` in template `{source}`"));
                }
                Some(i) => {
                    if i > 0 {
                        parts.push(Part::Text(rest[..i].to_owned()));
                    }
                    let after = &rest[i + 1..];
                    let Some(close) = after.find('}') else {
                        return Err(format!("unclosed `{{` in template `{source}`"));
                    };
                    let field = &after[..close];
                    if field.is_empty() || field.contains('{') {
                        return Err(format!("bad placeholder in template `{source}`"));
                    }
                    parts.push(Part::Field(field.to_owned()));
                    rest = &after[close + 1..];
                }
            }
        }
        Ok(Self {
            source: source.to_owned(),
            parts,
        })
    }

    pub fn fields(&self) -> impl Iterator<Item = &str> {
        self.parts.iter().filter_map(|p| match p {
            Part::Field(f) => Some(f.as_str()),
            Part::Text(_) => None,
        })
    }

    /// True when the template text starts with a URI scheme.
    pub fn is_absolute(&self) -> bool {
        let Some(Part::Text(head)) = self.parts.first() else {
            return false;
        };
        match head.find(':') {
            Some(i) if i > 0 => {
                let scheme = &head[..i];
                scheme.starts_with(|c: char| c.is_ascii_alphabetic())
                    && scheme.chars().all(|c| c.is_ascii_alphanumeric() || "+-.".contains(c))
            }
            _ => false,
        }
    }

    /// All renderings over the element's field values; array-valued fields
    /// fan out, absent fields yield nothing.
    fn render(&self, element: &Value, encode: bool) -> Vec<String> {
        let mut out = vec![String::new()];
        for part in &self.parts {
            match part {
                Part::Text(t) => out.iter_mut().for_each(|s| s.push_str(t)),
                Part::Field(f) => {
                    let values = scalar_strings(element.get(f));
                    if values.is_empty() {
                        return Vec::new();
                    }
                    out = out
                        .iter()
                        .flat_map(|prefix| {
                            values.iter().map(move |v| {
                                let v = if encode { percent_encode(v) } else { v.clone() };
                                format!("{prefix}{v}")
                            })
                        })
                        .collect();
                }
            }
        }
        out
    }
}

fn scalar_strings(value: Option<&Value>) -> Vec<String> {
    match value {
        Some(Value::String(s)) => vec![s.clone()],
        Some(Value::Number(n)) => vec![n.to_string()],
        Some(Value::Bool(b)) => vec![b.to_string()],
        Some(Value::Array(items)) => items.iter().flat_map(|v| scalar_strings(Some(v))).collect(),
        _ => Vec::new(),
    }
}

fn literals(value: Option<&Value>) -> Vec<Literal> {
    match value {
        Some(Value::String(s)) => vec![Literal::string(s.as_str())],
        Some(Value::Bool(b)) => vec![Literal::new(b.to_string(), xsd::boolean())],
        Some(Value::Number(n)) if n.is_i64() || n.is_u64() => vec![Literal::new(n.to_string(), xsd::integer())],
        Some(Value::Number(n)) => vec![Literal::new(n.to_string(), xsd::decimal())],
        Some(Value::Array(items)) => items.iter().flat_map(|v| literals(Some(v))).collect(),
        _ => Vec::new(),
    }
}

/// Percent-encodes every byte outside the RFC 3986 unreserved set.
pub fn percent_encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~') {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ObjectSpec {
    Constant(Term),
    Reference(String),
    Template {
        template: Template,
        literal: bool,
    },
    Join {
        parent: usize,
        child: String,
        parent_field: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateObjectMap {
    pub predicate: Iri,
    pub object: ObjectSpec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriplesMap {
    pub iri: Iri,
    pub iterator: JsonPath,
    pub subject: Template,
    pub classes: Vec<Iri>,
    pub predicate_object_maps: Vec<PredicateObjectMap>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MappingRuleSet {
    pub maps: Vec<TriplesMap>,
}

impl MappingRuleSet {
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }
}

fn iri_of<'g>(g: &'g TripleGraph, s: &Iri, p: &Iri, what: &str) -> Result<&'g Iri, MappingError> {
    match g.object(s, p) {
        Some(Term::Iri(i)) => Ok(i),
        Some(_) => Err(MappingError::Syntax(format!("{what} of {s} must be an IRI"))),
        None => Err(MappingError::Syntax(format!("{s} lacks {what}"))),
    }
}

fn str_of<'g>(g: &'g TripleGraph, s: &Iri, p: &Iri) -> Result<Option<&'g str>, MappingError> {
    match g.object(s, p) {
        Some(Term::Literal(l)) => Ok(Some(l.lexical())),
        Some(_) => Err(MappingError::Syntax(format!("{p} of {s} must be a literal"))),
        None => Ok(None),
    }
}

fn check_field(fields: &[&str], iterator: &JsonPath, field: &str, context: &Iri) -> Result<(), MappingError> {
    if fields.contains(&field) {
        Ok(())
    } else {
        Err(MappingError::Ref(format!(
            "`{{{field}}}` in {context} is not a field under iterator `{iterator}`"
        )))
    }
}

/// Loads and validates a mapping rule set from Turtle-subset bytes.
pub fn load_mappings(raw: &[u8]) -> Result<MappingRuleSet, MappingError> {
    let g = parse_turtle(raw).map_err(|e| MappingError::Syntax(e.to_string()))?;
    let mut map_iris: Vec<Iri> = g.instances_of(&rr::triples_map()).cloned().collect();
    map_iris.sort();
    let index: HashMap<&Iri, usize> = map_iris.iter().enumerate().map(|(i, m)| (m, i)).collect();

    // Iterators first so joins can check parent fields.
    let mut iterators = Vec::with_capacity(map_iris.len());
    for m in &map_iris {
        let source = iri_of(&g, m, &rml::logical_source(), "rml:logicalSource")?;
        let it = str_of(&g, source, &rml::iterator())?
            .ok_or_else(|| MappingError::Syntax(format!("{source} lacks rml:iterator")))?;
        let path = JsonPath::parse(it).map_err(MappingError::Syntax)?;
        let fields = view_fields(path.as_str())
            .ok_or_else(|| MappingError::Ref(format!("iterator `{path}` in {m} selects no known source collection")))?;
        iterators.push((path, fields));
    }

    let mut maps = Vec::with_capacity(map_iris.len());
    for (i, m) in map_iris.iter().enumerate() {
        let (iterator, fields) = iterators[i].clone();
        let sm = iri_of(&g, m, &rr::subject_map(), "rr:subjectMap")?;
        let tpl =
            str_of(&g, sm, &rr::template())?.ok_or_else(|| MappingError::Syntax(format!("{sm} lacks rr:template")))?;
        let subject = Template::parse(tpl).map_err(MappingError::Syntax)?;
        if subject.is_absolute() {
            return Err(MappingError::Ref(format!(
                "subject template `{tpl}` in {m} must be relative to the instance base"
            )));
        }
        for f in subject.fields() {
            check_field(fields, &iterator, f, m)?;
        }
        let mut classes: Vec<Iri> = g
            .objects(sm, &rr::class())
            .map(|t| {
                t.as_iri()
                    .cloned()
                    .ok_or_else(|| MappingError::Syntax(format!("rr:class of {sm} must be an IRI")))
            })
            .collect::<Result<_, _>>()?;
        classes.sort();

        let mut pom_iris: Vec<&Iri> = g
            .objects(m, &rr::predicate_object_map())
            .map(|t| {
                t.as_iri()
                    .ok_or_else(|| MappingError::Syntax(format!("rr:predicateObjectMap of {m} must be an IRI")))
            })
            .collect::<Result<_, _>>()?;
        pom_iris.sort();
        let mut poms = Vec::with_capacity(pom_iris.len());
        for pom in pom_iris {
            let predicate = iri_of(&g, pom, &rr::predicate(), "rr:predicate")?.clone();
            let om = iri_of(&g, pom, &rr::object_map(), "rr:objectMap")?;
            let object = read_object_map(&g, om, &index, &iterators, &iterator, fields)?;
            poms.push(PredicateObjectMap { predicate, object });
        }
        maps.push(TriplesMap {
            iri: m.clone(),
            iterator,
            subject,
            classes,
            predicate_object_maps: poms,
        });
    }
    Ok(MappingRuleSet { maps })
}

fn read_object_map(
    g: &TripleGraph,
    om: &Iri,
    index: &HashMap<&Iri, usize>,
    iterators: &[(JsonPath, &'static [&'static str])],
    iterator: &JsonPath,
    fields: &[&str],
) -> Result<ObjectSpec, MappingError> {
    let constant = g.object(om, &rr::constant()).cloned();
    let reference = str_of(g, om, &rml::reference())?;
    let template = str_of(g, om, &rr::template())?;
    let parent = g.object(om, &rr::parent_triples_map());
    let kinds = [
        constant.is_some(),
        reference.is_some(),
        template.is_some(),
        parent.is_some(),
    ];
    if kinds.iter().filter(|k| **k).count() != 1 {
        return Err(MappingError::Syntax(format!(
            "{om} needs exactly one of rr:constant, rml:reference, rr:template, rr:parentTriplesMap"
        )));
    }
    if let Some(c) = constant {
        return Ok(ObjectSpec::Constant(c));
    }
    if let Some(r) = reference {
        check_field(fields, iterator, r, om)?;
        return Ok(ObjectSpec::Reference(r.to_owned()));
    }
    if let Some(t) = template {
        let template = Template::parse(t).map_err(MappingError::Syntax)?;
        for f in template.fields() {
            check_field(fields, iterator, f, om)?;
        }
        let literal = g.object(om, &rr::term_type()) == Some(&Term::Iri(rr::literal()));
        return Ok(ObjectSpec::Template { template, literal });
    }
    let parent = parent
        .and_then(Term::as_iri)
        .ok_or_else(|| MappingError::Syntax(format!("rr:parentTriplesMap of {om} must be an IRI")))?;
    let &parent_idx = index
        .get(parent)
        .ok_or_else(|| MappingError::Ref(format!("{om} joins undeclared TriplesMap {parent}")))?;
    let jc = iri_of(g, om, &rr::join_condition(), "rr:joinCondition")?;
    let child = str_of(g, jc, &rr::child())?.ok_or_else(|| MappingError::Syntax(format!("{jc} lacks rr:child")))?;
    let parent_field =
        str_of(g, jc, &rr::parent())?.ok_or_else(|| MappingError::Syntax(format!("{jc} lacks rr:parent")))?;
    check_field(fields, iterator, child, jc)?;
    let (parent_iter, parent_fields) = &iterators[parent_idx];
    check_field(parent_fields, parent_iter, parent_field, jc)?;
    Ok(ObjectSpec::Join {
        parent: parent_idx,
        child: child.to_owned(),
        parent_field: parent_field.to_owned(),
    })
}

/// Prefix under which individuals of `spec_name` are minted.
pub fn instance_prefix(base: &str, spec_name: &str) -> String {
    format!("{base}{}/", percent_encode(spec_name))
}

/// Lifts a validated spec into an ABox graph.
pub fn lift(spec: &WorkflowSpec, rules: &MappingRuleSet, base: &str) -> Result<TripleGraph, LiftError> {
    lift_view(&build_view(spec), &spec.name, rules, base)
}

struct Match<'v> {
    element: &'v Value,
    pointer: String,
    subjects: Vec<Iri>,
}

pub fn lift_view(
    view: &LiftView,
    spec_name: &str,
    rules: &MappingRuleSet,
    base: &str,
) -> Result<TripleGraph, LiftError> {
    let prefix = instance_prefix(base, spec_name);
    let mint = |relative: String| -> Result<Iri, LiftError> {
        let s = format!("{prefix}{relative}");
        Iri::new(s.as_str()).map_err(|e| LiftError::InvalidIri(e.to_string()))
    };

    let mut matches: Vec<Vec<Match>> = Vec::with_capacity(rules.maps.len());
    for map in &rules.maps {
        let mut per_map = Vec::new();
        for (element, pointer) in map.iterator.select(&view.doc) {
            let subjects = map
                .subject
                .render(element, true)
                .into_iter()
                .map(&mint)
                .collect::<Result<_, _>>()?;
            per_map.push(Match {
                element,
                pointer,
                subjects,
            });
        }
        matches.push(per_map);
    }

    let mut g = TripleGraph::new();
    let ty = rdf::type_();
    let source_path = trace::source_path();
    let mut add = |s: &Iri, p: &Iri, o: Term| {
        g.insert_tagged(Triple::new(s.clone(), p.clone(), o), LayerTag::Abox);
    };
    for (map, per_map) in rules.maps.iter().zip(&matches) {
        for m in per_map {
            let src = Literal::string(view.source_pointer(&m.pointer));
            for s in &m.subjects {
                add(s, &source_path, Term::Literal(src.clone()));
                for c in &map.classes {
                    add(s, &ty, Term::Iri(c.clone()));
                }
            }
            for pom in &map.predicate_object_maps {
                let objects: Vec<Term> = match &pom.object {
                    ObjectSpec::Constant(t) => vec![t.clone()],
                    ObjectSpec::Reference(f) => literals(m.element.get(f)).into_iter().map(Term::Literal).collect(),
                    ObjectSpec::Template {
                        template,
                        literal: true,
                    } => template
                        .render(m.element, false)
                        .into_iter()
                        .map(|v| Term::Literal(Literal::string(v)))
                        .collect(),
                    ObjectSpec::Template {
                        template,
                        literal: false,
                    } => {
                        let mut out = Vec::new();
                        for v in template.render(m.element, true) {
                            let iri = if template.is_absolute() {
                                Iri::new(v.as_str()).map_err(|e| LiftError::InvalidIri(e.to_string()))?
                            } else {
                                mint(v)?
                            };
                            out.push(Term::Iri(iri));
                        }
                        out
                    }
                    ObjectSpec::Join {
                        parent,
                        child,
                        parent_field,
                    } => {
                        let mut out = Vec::new();
                        for value in scalar_strings(m.element.get(child)) {
                            let partners: Vec<&Match> = matches[*parent]
                                .iter()
                                .filter(|pm| scalar_strings(pm.element.get(parent_field)).contains(&value))
                                .collect();
                            if partners.is_empty() {
                                return Err(LiftError::Join {
                                    map: map.iri.to_string(),
                                    value,
                                    pointer: view.source_pointer(&m.pointer).to_owned(),
                                });
                            }
                            out.extend(
                                partners
                                    .iter()
                                    .flat_map(|pm| pm.subjects.iter().cloned().map(Term::Iri)),
                            );
                        }
                        out
                    }
                };
                for s in &m.subjects {
                    for o in &objects {
                        add(s, &pom.predicate, o.clone());
                    }
                }
            }
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_spec;
    use serde_json::json;

    const BUNDLED: &str = include_str!("../../../../mappings/smartflow.ttl");
    const BASE: &str = "https://example.org/inst/";

    fn minimal_spec() -> WorkflowSpec {
        let v = json!({
            "specVersion": 1, "kind": "flow", "name": "mini",
            "queues": [{"id": "q1", "label": "Clerks", "kind": "human"}],
            "nodes": [
                {"id": "s", "role": "start"},
                {"id": "a", "role": "action", "queue": "q1"},
                {"id": "e", "role": "end"}
            ],
            "transitions": [
                {"id": "t1", "from": "s", "to": "a"},
                {"id": "t2", "from": "a", "to": "e"}
            ]
        });
        parse_spec(v.to_string().as_bytes(), "mini.json").unwrap()
    }

    fn iri(s: &str) -> Iri {
        Iri::new(s).unwrap()
    }

    #[test]
    fn bundled_mapping_has_one_map_per_collection() {
        let rules = load_mappings(BUNDLED.as_bytes()).unwrap();
        let iterators: Vec<_> = rules.maps.iter().map(|m| m.iterator.as_str()).collect();
        assert_eq!(iterators.len(), 4);
        for it in ["$.nodes[*]", "$.transitions[*]", "$.queues[*]", "$.forms[*]"] {
            assert!(iterators.contains(&it), "{it}");
        }
    }

    #[test]
    fn empty_mapping_lifts_nothing() {
        let rules = load_mappings(b"").unwrap();
        assert!(rules.is_empty());
        assert!(lift(&minimal_spec(), &rules, BASE).unwrap().is_empty());
    }

    #[test]
    fn unknown_placeholder_is_a_reference_error() {
        let raw = r#"
            @prefix rr: <http://www.w3.org/ns/r2rml#> .
            @prefix rml: <http://semweb.mmlab.be/ns/rml#> .
            @prefix m: <http://m/> .
            m:N a rr:TriplesMap ; rml:logicalSource m:src ; rr:subjectMap m:sm .
            m:src rml:iterator "$.nodes[*]" .
            m:sm rr:template "nodes/{missing}" .
        "#;
        assert_eq!(load_mappings(raw.as_bytes()).unwrap_err().code(), "E_MAPPING_REF");
        let dangling = raw.replace(
            "m:sm rr:template \"nodes/{missing}\" .",
            "m:sm rr:template \"nodes/{id}\" .",
        ) + "m:N rr:predicateObjectMap m:p . m:p rr:predicate m:q ; rr:objectMap m:o . \
               m:o rr:parentTriplesMap m:Nope ; rr:joinCondition m:j . m:j rr:child \"queue\" ; rr:parent \"id\" .";
        assert_eq!(load_mappings(dangling.as_bytes()).unwrap_err().code(), "E_MAPPING_REF");
        assert_eq!(load_mappings(b"m:N a").unwrap_err().code(), "E_MAPPING_SYNTAX");
    }

    #[test]
    fn minimal_spec_lifts_expected_action_individual() {
        let rules = load_mappings(BUNDLED.as_bytes()).unwrap();
        let g = lift(&minimal_spec(), &rules, BASE).unwrap();
        let a = iri("https://example.org/inst/mini/nodes/a");
        let sf = |l: &str| iri(&format!("http://example.org/smartflow#{l}"));
        assert!(g.has_type(&a, &sf("ActionNode")));
        assert!(g.contains_parts(
            &a,
            &sf("has_queue"),
            &Term::Iri(iri("https://example.org/inst/mini/queues/q1"))
        ));
        assert!(g.contains_parts(
            &a,
            &sf("transitionsTo"),
            &Term::Iri(iri("https://example.org/inst/mini/nodes/e"))
        ));
        assert!(g.contains_parts(&a, &trace::source_path(), &Term::Literal(Literal::string("/nodes/1"))));
        assert!(g.contains_parts(&a, &sf("performer"), &Term::Literal(Literal::string("human"))));
    }

    #[test]
    fn lifted_individuals_are_traceable_and_under_base() {
        let rules = load_mappings(BUNDLED.as_bytes()).unwrap();
        let spec = minimal_spec();
        let g = lift(&spec, &rules, BASE).unwrap();
        let subjects: std::collections::BTreeSet<_> = g.iter().map(|t| t.subject.clone()).collect();
        assert_eq!(
            subjects.len(),
            spec.nodes.len() + spec.transitions.len() + spec.queues.len()
        );
        for s in &subjects {
            assert!(s.as_str().starts_with(BASE));
            assert_eq!(g.objects(s, &trace::source_path()).count(), 1, "{s}");
        }
        for t in g.iter() {
            if let Term::Iri(o) = &t.object {
                if t.predicate != rdf::type_() {
                    assert!(o.as_str().starts_with(BASE), "{o}");
                }
            }
        }
    }

    #[test]
    fn ids_are_percent_encoded() {
        assert_eq!(percent_encode("a b/c~d"), "a%20b%2Fc~d");
        assert_eq!(percent_encode("é"), "%C3%A9");
        assert_eq!(instance_prefix(BASE, "my flow"), "https://example.org/inst/my%20flow/");
    }

    #[test]
    fn templates() {
        let t = Template::parse("nodes/{id}/x").unwrap();
        assert_eq!(t.fields().collect::<Vec<_>>(), ["id"]);
        assert!(!t.is_absolute());
        assert!(Template::parse("http://x/{a}").unwrap().is_absolute());
        assert!(Template::parse("a{b").is_err());
        assert!(Template::parse("a}b").is_err());
        assert_eq!(t.render(&json!({"id": ["p", "q"]}), true), ["nodes/p/x", "nodes/q/x"]);
        assert!(t.render(&json!({}), true).is_empty());
    }
}
