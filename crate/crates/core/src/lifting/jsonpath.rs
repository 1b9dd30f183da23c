//! JSONPath subset used by logical-source iterators: `$`, `.field`, `[*]`.

use std::fmt;

use serde_json::Value;

use crate::ingest::escape_pointer;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Field(String),
    Wildcard,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JsonPath {
    source: String,
    segments: Vec<Segment>,
}

impl JsonPath {
    pub fn parse(source: &str) -> Result<Self, String> {
        let Some(mut rest) = source.strip_prefix('$') else {
            return Err(format!("iterator `{source}` must start with `$`"));
        };
        let mut segments = Vec::new();
        while !rest.is_empty() {
            if let Some(r) = rest.strip_prefix("[*]") {
                segments.push(Segment::Wildcard);
                rest = r;
            } else if let Some(r) = rest.strip_prefix('.') {
                let end = r
                    .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '-'))
                    .unwrap_or(r.len());
                if end == 0 {
                    return Err(format!("empty field name in iterator `{source}`"));
                }
                segments.push(Segment::Field(r[..end].to_owned()));
                rest = &r[end..];
            } else {
                return Err(format!("unsupported iterator syntax `{rest}` in `{source}`"));
            }
        }
        Ok(Self {
            source: source.to_owned(),
            segments,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }

    /// Matches in document order, each paired with its JSON pointer.
    pub fn select<'v>(&self, root: &'v Value) -> Vec<(&'v Value, String)> {
        let mut current = vec![(root, String::new())];
        for seg in &self.segments {
            let mut next = Vec::new();
            for (value, ptr) in current {
                match seg {
                    Segment::Field(name) => {
                        if let Some(child) = value.get(name) {
                            next.push((child, format!("{ptr}/{}", escape_pointer(name))));
                        }
                    }
                    Segment::Wildcard => {
                        if let Some(items) = value.as_array() {
                            next.extend(items.iter().enumerate().map(|(i, v)| (v, format!("{ptr}/{i}"))));
                        }
                    }
                }
            }
            current = next;
        }
        current
    }
}

impl fmt::Display for JsonPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn selects_array_members_with_pointers() {
        let doc = json!({"nodes": [{"id": "a"}, {"id": "b"}], "x": {"y": 1}});
        let p = JsonPath::parse("$.nodes[*]").unwrap();
        let hits = p.select(&doc);
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[1].1, "/nodes/1");
        assert_eq!(JsonPath::parse("$.x.y").unwrap().select(&doc)[0].0, &json!(1));
        assert_eq!(JsonPath::parse("$").unwrap().select(&doc)[0].1, "");
        assert!(JsonPath::parse("$.missing[*]").unwrap().select(&doc).is_empty());
    }

    #[test]
    fn rejects_unsupported_syntax() {
        for bad in ["nodes", "$..id", "$.nodes[0]", "$.nodes[?(@.id)]", "$."] {
            assert!(JsonPath::parse(bad).is_err(), "{bad}");
        }
    }
}
