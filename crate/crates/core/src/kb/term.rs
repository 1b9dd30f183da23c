use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::vocab::xsd;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid IRI `{iri}`: {reason}")]
pub struct InvalidIri {
    pub iri: String,
    pub reason: &'static str,
}

/// An absolute IRI. Cheap to clone.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Iri(Arc<str>);

impl Iri {
    /// Validates absolute-IRI syntax: a scheme followed by `:` and no characters
    /// that are forbidden inside `<...>` in Turtle.
    pub fn new(value: impl AsRef<str>) -> Result<Self, InvalidIri> {
        let value = value.as_ref();
        let fail = |reason| {
            Err(InvalidIri {
                iri: value.to_owned(),
                reason,
            })
        };
        let Some(colon) = value.find(':') else {
            return fail("missing scheme");
        };
        let scheme = &value[..colon];
        let mut chars = scheme.chars();
        match chars.next() {
            Some(c) if c.is_ascii_alphabetic() => {}
            _ => return fail("scheme must start with a letter"),
        }
        if !chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.')) {
            return fail("invalid scheme character");
        }
        if value.chars().any(|c| {
            c.is_whitespace() || c.is_control() || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\')
        }) {
            return fail("forbidden character");
        }
        Ok(Self(Arc::from(value)))
    }

    /// For compile-time vocabulary constants that are known to be valid.
    pub(crate) fn from_static(value: &'static str) -> Self {
        debug_assert!(Self::new(value).is_ok(), "{value}");
        Self(Arc::from(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Appends a raw suffix. The suffix must itself be IRI-safe.
    pub fn join(&self, suffix: &str) -> Result<Self, InvalidIri> {
        Self::new(format!("{}{}", self.0, suffix))
    }
}

impl fmt::Debug for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl serde::Serialize for Iri {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl AsRef<str> for Iri {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    lexical: Arc<str>,
    datatype: Iri,
}

impl Literal {
    pub fn new(lexical: impl AsRef<str>, datatype: Iri) -> Self {
        Self {
            lexical: Arc::from(lexical.as_ref()),
            datatype,
        }
    }

    pub fn string(lexical: impl AsRef<str>) -> Self {
        Self::new(lexical, xsd::string())
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    pub fn datatype(&self) -> &Iri {
        &self.datatype
    }
}

impl fmt::Debug for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.datatype == xsd::string() {
            write!(f, "{:?}", self.lexical)
        } else {
            write!(f, "{:?}^^{:?}", self.lexical, self.datatype)
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Iri(Iri),
    Literal(Literal),
}

impl Term {
    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            Term::Iri(iri) => Some(iri),
            Term::Literal(_) => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Term::Literal(lit) => Some(lit),
            Term::Iri(_) => None,
        }
    }

    pub fn literal(lexical: impl AsRef<str>) -> Self {
        Term::Literal(Literal::string(lexical))
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) => iri.fmt(f),
            Term::Literal(lit) => lit.fmt(f),
        }
    }
}

impl From<Iri> for Term {
    fn from(iri: Iri) -> Self {
        Term::Iri(iri)
    }
}

impl From<Literal> for Term {
    fn from(lit: Literal) -> Self {
        Term::Literal(lit)
    }
}

/// Subjects and predicates are always IRIs; blank nodes are not supported.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: Iri,
    pub predicate: Iri,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Iri, predicate: Iri, object: impl Into<Term>) -> Self {
        Self {
            subject,
            predicate,
            object: object.into(),
        }
    }
}

impl fmt::Debug for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} {:?} {:?} .", self.subject, self.predicate, self.object)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iri_syntax() {
        assert!(Iri::new("http://example.org/a#b").is_ok());
        assert!(Iri::new("urn:x").is_ok());
        assert!(Iri::new("no-scheme").is_err());
        assert!(Iri::new("1http://x").is_err());
        assert!(Iri::new("http://ex ample").is_err());
        assert!(Iri::new("http://ex/{id}").is_err());
    }

    #[test]
    fn terms_order_iris_before_literals() {
        let a = Term::Iri(Iri::new("http://z").unwrap());
        let b = Term::literal("a");
        assert!(a < b);
    }
}
