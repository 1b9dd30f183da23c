//! Namespace IRIs and vocabulary terms shared across the pipeline.

macro_rules! terms {
    ($ns:expr; $($name:ident => $local:literal),* $(,)?) => {
        pub const NS: &str = $ns;
        $(
            pub fn $name() -> crate::kb::Iri {
                static CELL: std::sync::OnceLock<crate::kb::Iri> = std::sync::OnceLock::new();
                CELL.get_or_init(|| crate::kb::Iri::from_static(concat!($ns, $local))).clone()
            }
        )*
    };
}

pub mod rdf {
    terms!("http://www.w3.org/1999/02/22-rdf-syntax-ns#"; type_ => "type");
}

pub mod rdfs {
    terms!("http://www.w3.org/2000/01/rdf-schema#";
        sub_class_of => "subClassOf",
        sub_property_of => "subPropertyOf",
        label => "label",
    );
}

pub mod owl {
    terms!("http://www.w3.org/2002/07/owl#";
        class => "Class",
        equivalent_class => "equivalentClass",
        equivalent_property => "equivalentProperty",
        disjoint_with => "disjointWith",
    );
}

pub mod xsd {
    terms!("http://www.w3.org/2001/XMLSchema#";
        string => "string",
        integer => "integer",
        boolean => "boolean",
        decimal => "decimal",
    );
}

/// Smart Flow domain vocabulary.
pub mod sf {
    terms!("http://example.org/smartflow#";
        action_node => "ActionNode",
        transition => "Transition",
        queue => "Queue",
        has_queue => "has_queue",
        transitions_to => "transitionsTo",
        label => "label",
        gateway_of => "gatewayOf",
        gateway_role => "gatewayRole",
        connector_of => "connectorOf",
        button_label => "buttonLabel",
    );
}

pub mod bpmn {
    terms!("http://example.org/bpmn#";
        start_event => "StartEvent",
        end_event => "EndEvent",
        user_task => "UserTask",
        service_task => "ServiceTask",
        gateway => "Gateway",
        exclusive_gateway => "ExclusiveGateway",
        parallel_gateway => "ParallelGateway",
        sequence_flow => "SequenceFlow",
        lane => "Lane",
        has_source_ref => "has_sourceRef",
        has_target_ref => "has_targetRef",
        has_condition_expression => "has_conditionExpression",
        has_lane => "has_lane",
        has_default => "has_default",
        has_name => "has_name",
    );
}

/// Traceability predicates.
pub mod trace {
    terms!("https://example.org/trace#"; source_path => "sourcePath");
}

/// Rule reification vocabulary.
pub mod rl {
    terms!("http://example.org/rules#";
        rule => "Rule",
        name => "name",
        body => "body",
        head => "head",
        subject => "subject",
        predicate => "predicate",
        object => "object",
    );
}

/// R2RML / RML mapping vocabulary.
pub mod rr {
    terms!("http://www.w3.org/ns/r2rml#";
        triples_map => "TriplesMap",
        subject_map => "subjectMap",
        template => "template",
        class => "class",
        predicate_object_map => "predicateObjectMap",
        predicate => "predicate",
        object_map => "objectMap",
        constant => "constant",
        parent_triples_map => "parentTriplesMap",
        join_condition => "joinCondition",
        child => "child",
        parent => "parent",
        term_type => "termType",
        literal => "Literal",
    );
}

pub mod rml {
    terms!("http://semweb.mmlab.be/ns/rml#";
        logical_source => "logicalSource",
        iterator => "iterator",
        reference => "reference",
    );
}

/// Prefixes every Turtle document may use without declaring them.
pub const WELL_KNOWN_PREFIXES: &[(&str, &str)] =
    &[("owl", owl::NS), ("rdf", rdf::NS), ("rdfs", rdfs::NS), ("xsd", xsd::NS)];

/// Default base for minted individuals.
pub const DEFAULT_INSTANCE_BASE: &str = "https://example.org/inst/";
