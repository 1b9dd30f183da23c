//! Layered knowledge base: RDF terms, the indexed triple graph, and the
//! Turtle-subset carrier syntax.

mod graph;
mod term;
mod turtle;

pub use graph::{merge, LayerTag, LayerTags, LayerVocabularyError, OntologyLayer, TripleGraph};
pub use term::{InvalidIri, Iri, Literal, Term, Triple};
pub use turtle::{parse_turtle, serialize_turtle, TurtleError};

/// Reads the `# layer: <tag>` header comment of an ontology file.
pub fn declared_layer(raw: &[u8]) -> Option<LayerTag> {
    let text = std::str::from_utf8(raw).ok()?;
    text.lines()
        .take_while(|l| l.trim_start().starts_with('#') || l.trim().is_empty())
        .find_map(|l| {
            let rest = l.trim_start().trim_start_matches('#').trim();
            let tag = rest.strip_prefix("layer:")?.trim();
            match tag {
                "domain" => Some(LayerTag::Domain),
                "bpmn" => Some(LayerTag::Bpmn),
                "mapping" => Some(LayerTag::Mapping),
                "abox" => Some(LayerTag::Abox),
                _ => None,
            }
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_header() {
        assert_eq!(
            declared_layer(b"# layer: bpmn\n@prefix x: <http://x/> ."),
            Some(LayerTag::Bpmn)
        );
        assert_eq!(declared_layer(b"@prefix x: <http://x/> .\n# layer: bpmn"), None);
    }
}
