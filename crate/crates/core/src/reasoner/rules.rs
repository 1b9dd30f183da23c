//! RuleLite: range-restricted Horn rules over triple patterns.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::kb::{parse_turtle, Iri, Term, Triple, TripleGraph};
use crate::vocab::rl;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("rule `{rule}` is unsafe: head variable `{var}` does not occur in the body")]
    Unsafe { rule: String, var: String },
    #[error("rule syntax: {0}")]
    Syntax(String),
}

impl RuleError {
    pub fn code(&self) -> &'static str {
        match self {
            RuleError::Unsafe { .. } => "E_RULE_UNSAFE",
            RuleError::Syntax(_) => "E_RULE_SYNTAX",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PatternTerm {
    Var(String),
    Const(Term),
}

impl PatternTerm {
    pub fn var(name: &str) -> Self {
        PatternTerm::Var(name.trim_start_matches('?').to_owned())
    }

    fn from_term(t: &Term) -> Self {
        match t {
            Term::Literal(l) if l.lexical().starts_with('?') && l.lexical().len() > 1 => PatternTerm::var(l.lexical()),
            other => PatternTerm::Const(other.clone()),
        }
    }

    fn resolve(&self, b: &Bindings) -> Option<Term> {
        match self {
            PatternTerm::Const(t) => Some(t.clone()),
            PatternTerm::Var(v) => b.get(v).cloned(),
        }
    }
}

impl From<Iri> for PatternTerm {
    fn from(i: Iri) -> Self {
        PatternTerm::Const(Term::Iri(i))
    }
}

impl fmt::Display for PatternTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternTerm::Var(v) => write!(f, "?{v}"),
            PatternTerm::Const(Term::Iri(i)) => write!(f, "{i:?}"),
            PatternTerm::Const(Term::Literal(l)) => write!(f, "{:?}", l.lexical()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TriplePattern {
    pub subject: PatternTerm,
    pub predicate: PatternTerm,
    pub object: PatternTerm,
}

impl TriplePattern {
    pub fn new(s: impl Into<PatternTerm>, p: impl Into<PatternTerm>, o: impl Into<PatternTerm>) -> Self {
        Self {
            subject: s.into(),
            predicate: p.into(),
            object: o.into(),
        }
    }

    fn vars(&self) -> impl Iterator<Item = &str> {
        [&self.subject, &self.predicate, &self.object]
            .into_iter()
            .filter_map(|t| match t {
                PatternTerm::Var(v) => Some(v.as_str()),
                PatternTerm::Const(_) => None,
            })
    }
}

impl From<Term> for PatternTerm {
    fn from(t: Term) -> Self {
        PatternTerm::Const(t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleLite {
    pub name: String,
    pub body: Vec<TriplePattern>,
    pub head: Vec<TriplePattern>,
}

pub(crate) type Bindings = HashMap<String, Term>;

impl RuleLite {
    /// Builds a rule, rejecting heads that use variables the body never binds.
    pub fn new(name: impl Into<String>, body: Vec<TriplePattern>, head: Vec<TriplePattern>) -> Result<Self, RuleError> {
        let name = name.into();
        let bound: BTreeSet<&str> = body.iter().flat_map(TriplePattern::vars).collect();
        if let Some(var) = head.iter().flat_map(TriplePattern::vars).find(|v| !bound.contains(v)) {
            return Err(RuleError::Unsafe {
                rule: name,
                var: format!("?{var}"),
            });
        }
        Ok(Self { name, body, head })
    }

    /// Head triples for every body match in `g`.
    pub(crate) fn fire(&self, g: &TripleGraph) -> Vec<Triple> {
        let mut matches = Vec::new();
        match_patterns(g, &self.body, &mut Bindings::new(), &mut matches);
        let mut out = Vec::new();
        for b in &matches {
            for h in &self.head {
                let (Some(Term::Iri(s)), Some(Term::Iri(p)), Some(o)) =
                    (h.subject.resolve(b), h.predicate.resolve(b), h.object.resolve(b))
                else {
                    continue;
                };
                out.push(Triple::new(s, p, o));
            }
        }
        out
    }
}

fn bind(slot: &PatternTerm, value: &Term, b: &mut Bindings, fresh: &mut Vec<String>) -> bool {
    match slot {
        PatternTerm::Const(c) => c == value,
        PatternTerm::Var(v) => match b.get(v) {
            Some(existing) => existing == value,
            None => {
                b.insert(v.clone(), value.clone());
                fresh.push(v.clone());
                true
            }
        },
    }
}

fn match_patterns(g: &TripleGraph, patterns: &[TriplePattern], b: &mut Bindings, out: &mut Vec<Bindings>) {
    let Some((first, rest)) = patterns.split_first() else {
        out.push(b.clone());
        return;
    };
    let s = first.subject.resolve(b);
    let p = first.predicate.resolve(b);
    let o = first.object.resolve(b);
    let candidates: Vec<&Triple> = match (&s, &p, &o) {
        (Some(Term::Iri(s)), _, _) => g.about(s).collect(),
        (Some(Term::Literal(_)), _, _) => return,
        (None, Some(Term::Iri(p)), Some(o)) => g.with_predicate_object(p, o).collect(),
        (None, Some(Term::Iri(p)), None) => g.with_predicate(p).collect(),
        (None, Some(Term::Literal(_)), _) => return,
        (None, None, _) => g.iter().collect(),
    };
    for t in candidates {
        let mut fresh = Vec::new();
        let ok = bind(&first.subject, &Term::Iri(t.subject.clone()), b, &mut fresh)
            && bind(&first.predicate, &Term::Iri(t.predicate.clone()), b, &mut fresh)
            && bind(&first.object, &t.object, b, &mut fresh);
        if ok {
            match_patterns(g, rest, b, out);
        }
        for v in fresh {
            b.remove(&v);
        }
    }
}

fn pattern_of(g: &TripleGraph, node: &Iri) -> Result<TriplePattern, RuleError> {
    let part = |p: Iri, what: &str| {
        g.object(node, &p)
            .map(PatternTerm::from_term)
            .ok_or_else(|| RuleError::Syntax(format!("pattern {node} lacks rl:{what}")))
    };
    Ok(TriplePattern {
        subject: part(rl::subject(), "subject")?,
        predicate: part(rl::predicate(), "predicate")?,
        object: part(rl::object(), "object")?,
    })
}

fn patterns(g: &TripleGraph, rule: &Iri, p: &Iri) -> Result<Vec<TriplePattern>, RuleError> {
    let mut nodes: Vec<&Iri> = g
        .objects(rule, p)
        .map(|t| {
            t.as_iri()
                .ok_or_else(|| RuleError::Syntax(format!("{p} of {rule} must be an IRI")))
        })
        .collect::<Result<_, _>>()?;
    nodes.sort();
    nodes.into_iter().map(|n| pattern_of(g, n)).collect()
}

/// Extracts every `rl:Rule` from a graph, sorted by rule name.
pub fn rules_from_graph(g: &TripleGraph) -> Result<Vec<RuleLite>, RuleError> {
    let mut rules = Vec::new();
    for r in g.instances_of(&rl::rule()) {
        let name = match g.object(r, &rl::name()) {
            Some(Term::Literal(l)) => l.lexical().to_owned(),
            _ => r.to_string(),
        };
        let body = patterns(g, r, &rl::body())?;
        let head = patterns(g, r, &rl::head())?;
        if body.is_empty() || head.is_empty() {
            return Err(RuleError::Syntax(format!("rule `{name}` needs a body and a head")));
        }
        rules.push(RuleLite::new(name, body, head)?);
    }
    rules.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(rules)
}

pub fn load_rules(raw: &[u8]) -> Result<Vec<RuleLite>, RuleError> {
    let g = parse_turtle(raw).map_err(|e| RuleError::Syntax(e.to_string()))?;
    rules_from_graph(&g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::Literal;
    use crate::vocab::rdf;

    fn iri(s: &str) -> Iri {
        Iri::new(s).unwrap()
    }

    #[test]
    fn bundled_rules_load() {
        let rules = load_rules(include_bytes!("../../../../ontologies/rules.ttl")).unwrap();
        let names: Vec<_> = rules.iter().map(|r| r.name.as_str()).collect();
        for expected in [
            "human-queue-to-user-task",
            "system-processor-to-service-task",
            "start-role-to-start-event",
            "end-role-to-end-event",
            "queue-to-lane",
        ] {
            assert!(names.contains(&expected), "{expected}");
        }
    }

    #[test]
    fn unsafe_head_is_rejected() {
        let err = RuleLite::new(
            "bad",
            vec![TriplePattern::new(
                PatternTerm::var("?x"),
                rdf::type_(),
                iri("http://x/A"),
            )],
            vec![TriplePattern::new(
                PatternTerm::var("?y"),
                rdf::type_(),
                iri("http://x/B"),
            )],
        )
        .unwrap_err();
        assert_eq!(err.code(), "E_RULE_UNSAFE");
    }

    #[test]
    fn join_over_shared_variable() {
        let mut g = TripleGraph::new();
        let knows = iri("http://x/knows");
        g.insert(Triple::new(
            iri("http://x/a"),
            knows.clone(),
            Term::Iri(iri("http://x/b")),
        ));
        g.insert(Triple::new(
            iri("http://x/b"),
            knows.clone(),
            Term::Iri(iri("http://x/c")),
        ));
        g.insert(Triple::new(
            iri("http://x/c"),
            knows.clone(),
            Term::Literal(Literal::string("z")),
        ));
        let rule = RuleLite::new(
            "two-hop",
            vec![
                TriplePattern::new(PatternTerm::var("x"), knows.clone(), PatternTerm::var("y")),
                TriplePattern::new(PatternTerm::var("y"), knows.clone(), PatternTerm::var("z")),
            ],
            vec![TriplePattern::new(
                PatternTerm::var("z"),
                knows.clone(),
                PatternTerm::var("x"),
            )],
        )
        .unwrap();
        let fired = rule.fire(&g);
        // (a,b,c) fires; (b,c,"z") is skipped because the head subject would be a literal.
        assert_eq!(
            fired,
            vec![Triple::new(iri("http://x/c"), knows, Term::Iri(iri("http://x/a")))]
        );
    }
}
