//! The end-to-end conversion pipeline for one spec, with shared, read-only
//! ontologies, rules and mappings.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::builder::{build_model, matrix_report, BpmnModel, MatrixReport};
use crate::ingest::{parse_spec, WorkflowSpec};
use crate::kb::{declared_layer, merge, parse_turtle, LayerTag, OntologyLayer, TripleGraph};
use crate::layout::{layout, DiPlane, LayoutParams};
use crate::lifting::{lift, load_mappings, MappingRuleSet};
use crate::reasoner::{
    rules_from_graph, saturate, synthesize_gateways, InferenceReport, RuleLite, SynthesisReport, DEFAULT_MAX_ITERATIONS,
};
use crate::serializer::{to_bpmn_xml, to_svg};
use crate::validator::{validate_kb, CheckResult};
use crate::vocab::{rl, DEFAULT_INSTANCE_BASE};

/// Environment variable naming the default ontology directory.
pub const ONTOLOGY_DIR_ENV: &str = "FLOW2BPMN_ONTOLOGY_DIR";

pub mod bundled {
    pub const DOMAIN: &str = include_str!("../../../ontologies/smartflow.ttl");
    pub const BPMN: &str = include_str!("../../../ontologies/bpmn_bbo.ttl");
    pub const BRIDGE: &str = include_str!("../../../ontologies/bridge.ttl");
    pub const RULES: &str = include_str!("../../../ontologies/rules.ttl");
    pub const MAPPINGS: &str = include_str!("../../../mappings/smartflow.ttl");

    /// (file name, contents) of the bundled ontology directory.
    pub const ONTOLOGIES: [(&str, &str); 4] = [
        ("bpmn_bbo.ttl", BPMN),
        ("bridge.ttl", BRIDGE),
        ("rules.ttl", RULES),
        ("smartflow.ttl", DOMAIN),
    ];
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("`{path}`: {message}")]
    Invalid {
        path: String,
        code: &'static str,
        message: String,
    },
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::Io { .. } => "E_CONFIG",
            ConfigError::Invalid { code, .. } => code,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Ontology files or directories of `*.ttl` files. Empty means the
    /// directory named by `FLOW2BPMN_ONTOLOGY_DIR`, else the bundled set.
    pub ontologies: Vec<PathBuf>,
    pub rules: Option<PathBuf>,
    /// Mapping file; `None` selects the bundled mapping.
    pub mappings: Option<PathBuf>,
    pub instance_base: String,
    pub layout: LayoutParams,
    pub max_iterations: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            ontologies: Vec::new(),
            rules: None,
            mappings: None,
            instance_base: DEFAULT_INSTANCE_BASE.to_owned(),
            layout: LayoutParams::default(),
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Parse,
    Lift,
    Reason,
    Validate,
    Build,
    Layout,
    Serialize,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Parse => "parse",
            Stage::Lift => "lift",
            Stage::Reason => "reason",
            Stage::Validate => "validate",
            Stage::Build => "build",
            Stage::Layout => "layout",
            Stage::Serialize => "serialize",
        }
    }
}

/// Per-stage wall-clock durations from a monotonic clock.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StageTimings {
    pub parse: Option<Duration>,
    pub lift: Option<Duration>,
    pub reason: Option<Duration>,
    pub validate: Option<Duration>,
    pub build: Option<Duration>,
    pub layout: Option<Duration>,
    pub serialize: Option<Duration>,
}

impl StageTimings {
    fn slot(&mut self, stage: Stage) -> &mut Option<Duration> {
        match stage {
            Stage::Parse => &mut self.parse,
            Stage::Lift => &mut self.lift,
            Stage::Reason => &mut self.reason,
            Stage::Validate => &mut self.validate,
            Stage::Build => &mut self.build,
            Stage::Layout => &mut self.layout,
            Stage::Serialize => &mut self.serialize,
        }
    }

    pub fn all(&self) -> [(&'static str, Option<Duration>); 7] {
        [
            ("parse", self.parse),
            ("lift", self.lift),
            ("reason", self.reason),
            ("validate", self.validate),
            ("build", self.build),
            ("layout", self.layout),
            ("serialize", self.serialize),
        ]
    }

    pub fn is_complete(&self) -> bool {
        self.all().iter().all(|(_, d)| d.is_some())
    }

    pub fn total(&self) -> Duration {
        self.all().iter().filter_map(|(_, d)| *d).sum()
    }
}

impl Serialize for StageTimings {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(None)?;
        for (name, d) in self.all() {
            if let Some(d) = d {
                map.serialize_entry(name, &(d.as_millis() as u64))?;
            }
        }
        map.serialize_entry("total", &(self.total().as_millis() as u64))?;
        map.serialize_entry("totalUs", &(self.total().as_micros() as u64))?;
        map.end()
    }
}

/// A failed conversion: exactly one error class.
#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub code: &'static str,
    pub stage: Stage,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pointer: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckResult>,
    #[serde(skip)]
    pub timings: StageTimings,
}

/// Result of running the pipeline up to and including validation.
#[derive(Debug, Clone)]
pub struct Validated {
    pub spec: WorkflowSpec,
    pub graph: TripleGraph,
    pub inference: InferenceReport,
    pub synthesis: SynthesisReport,
    pub checks: Vec<CheckResult>,
    pub timings: StageTimings,
}

#[derive(Debug, Clone)]
pub struct Conversion {
    pub spec: WorkflowSpec,
    /// Final graph: saturated and gateway-synthesized.
    pub graph: TripleGraph,
    pub inference: InferenceReport,
    pub synthesis: SynthesisReport,
    pub checks: Vec<CheckResult>,
    /// The model with its diagram filled in.
    pub model: BpmnModel,
    pub matrix: MatrixReport,
    pub bpmn: String,
    pub svg: Option<String>,
    pub timings: StageTimings,
}

impl Conversion {
    pub fn plane(&self) -> &DiPlane {
        self.model
            .diagram
            .as_ref()
            .expect("conversion always lays out the model")
    }
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    tbox: TripleGraph,
    rules: Vec<RuleLite>,
    mappings: MappingRuleSet,
    instance_base: String,
    layout: LayoutParams,
    max_iterations: usize,
}

fn invalid(path: &str, code: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.to_owned(),
        code,
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, ConfigError> {
    std::fs::read(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })
}

fn ttl_files(path: &Path) -> Result<Vec<PathBuf>, ConfigError> {
    if !path.is_dir() {
        return Ok(vec![path.to_owned()]);
    }
    let entries = std::fs::read_dir(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "ttl"))
        .collect();
    files.sort();
    Ok(files)
}

impl Pipeline {
    /// Pipeline over the bundled ontologies, rules and mappings.
    pub fn bundled() -> Self {
        let sources: Vec<(String, Vec<u8>)> = bundled::ONTOLOGIES
            .iter()
            .map(|(name, text)| ((*name).to_owned(), text.as_bytes().to_vec()))
            .collect();
        Self::assemble(
            sources,
            None,
            ("mappings/smartflow.ttl".into(), bundled::MAPPINGS.as_bytes().to_vec()),
            &PipelineConfig::default(),
        )
        .expect("bundled assets are valid")
    }

    pub fn load(config: &PipelineConfig) -> Result<Self, ConfigError> {
        let mut roots = config.ontologies.clone();
        if roots.is_empty() {
            if let Some(dir) = std::env::var_os(ONTOLOGY_DIR_ENV) {
                roots.push(PathBuf::from(dir));
            }
        }
        let sources: Vec<(String, Vec<u8>)> = if roots.is_empty() {
            bundled::ONTOLOGIES
                .iter()
                .map(|(name, text)| ((*name).to_owned(), text.as_bytes().to_vec()))
                .collect()
        } else {
            let mut out = Vec::new();
            for root in &roots {
                for file in ttl_files(root)? {
                    out.push((file.display().to_string(), read(&file)?));
                }
            }
            out
        };
        let rules = match &config.rules {
            Some(p) => Some((p.display().to_string(), read(p)?)),
            None => None,
        };
        let mappings = match &config.mappings {
            Some(p) => (p.display().to_string(), read(p)?),
            None => ("mappings/smartflow.ttl".into(), bundled::MAPPINGS.as_bytes().to_vec()),
        };
        Self::assemble(sources, rules, mappings, config)
    }

    fn assemble(
        ontologies: Vec<(String, Vec<u8>)>,
        rules_file: Option<(String, Vec<u8>)>,
        mappings: (String, Vec<u8>),
        config: &PipelineConfig,
    ) -> Result<Self, ConfigError> {
        let mut layers = Vec::new();
        let mut rules = Vec::new();
        for (name, raw) in ontologies.iter().chain(rules_file.iter()) {
            let g = parse_turtle(raw).map_err(|e| invalid(name, "E_TURTLE_SYNTAX", e.to_string()))?;
            if g.instances_of(&rl::rule()).next().is_some() {
                rules.extend(rules_from_graph(&g).map_err(|e| invalid(name, e.code(), e.to_string()))?);
                continue;
            }
            let tag = declared_layer(raw).unwrap_or(LayerTag::Domain);
            layers.push(OntologyLayer::new(tag, g).map_err(|e| invalid(name, "E_LAYER_VOCABULARY", e.to_string()))?);
        }
        rules.sort_by(|a, b| a.name.cmp(&b.name));
        let mappings = load_mappings(&mappings.1).map_err(|e| invalid(&mappings.0, e.code(), e.to_string()))?;
        crate::kb::Iri::new(config.instance_base.as_str())
            .map_err(|e| invalid("instance base", "E_CONFIG", e.to_string()))?;
        Ok(Self {
            tbox: merge(&layers),
            rules,
            mappings,
            instance_base: config.instance_base.clone(),
            layout: config.layout,
            max_iterations: config.max_iterations,
        })
    }

    pub fn tbox(&self) -> &TripleGraph {
        &self.tbox
    }

    pub fn rules(&self) -> &[RuleLite] {
        &self.rules
    }

    pub fn mappings(&self) -> &MappingRuleSet {
        &self.mappings
    }

    pub fn instance_base(&self) -> &str {
        &self.instance_base
    }

    /// Runs ingest through validation. Failing checks yield `E_VALIDATION`.
    pub fn validate(&self, raw: &[u8], source_path: &str) -> Result<Validated, Box<Failure>> {
        let mut timings = StageTimings::default();
        macro_rules! timed {
            ($stage:expr, $body:expr) => {{
                let started = Instant::now();
                let out = $body;
                *timings.slot($stage) = Some(started.elapsed());
                out
            }};
        }
        let fail = |stage, code, message: String, pointer, timings: &StageTimings| {
            Box::new(Failure {
                code,
                stage,
                message,
                pointer,
                checks: Vec::new(),
                timings: timings.clone(),
            })
        };

        let spec = timed!(Stage::Parse, parse_spec(raw, source_path)).map_err(|e| {
            fail(
                Stage::Parse,
                e.code(),
                e.to_string(),
                e.pointer().map(str::to_owned),
                &timings,
            )
        })?;
        let kb = timed!(Stage::Lift, {
            lift(&spec, &self.mappings, &self.instance_base).map(|abox| {
                let mut g = self.tbox.clone();
                g.extend_from(&abox);
                g
            })
        })
        .map_err(|e| fail(Stage::Lift, e.code(), e.to_string(), None, &timings))?;
        let (graph, inference, synthesis) = timed!(Stage::Reason, {
            saturate(&kb, &self.rules, self.max_iterations).map(|(saturated, inference)| {
                let (graph, synthesis) = synthesize_gateways(&saturated);
                (graph, inference, synthesis)
            })
        })
        .map_err(|e| fail(Stage::Reason, e.code(), e.to_string(), None, &timings))?;
        let checks = timed!(Stage::Validate, validate_kb(&graph));
        if let Some(first) = checks.iter().find(|c| !c.passed()) {
            let detail = first
                .findings
                .first()
                .map(|f| format!(": {} {}", f.subject, f.message))
                .unwrap_or_default();
            let mut failure = fail(
                Stage::Validate,
                "E_VALIDATION",
                format!("{} check failed{detail}", first.check),
                None,
                &timings,
            );
            failure.checks = checks;
            return Err(failure);
        }
        Ok(Validated {
            spec,
            graph,
            inference,
            synthesis,
            checks,
            timings,
        })
    }

    /// Runs the whole pipeline and returns the serialized artifacts.
    pub fn convert(&self, raw: &[u8], source_path: &str, svg: bool) -> Result<Conversion, Box<Failure>> {
        let v = self.validate(raw, source_path)?;
        let mut timings = v.timings;
        let fail = |stage, code: &'static str, message: String, timings: &StageTimings| {
            Box::new(Failure {
                code,
                stage,
                message,
                pointer: None,
                checks: Vec::new(),
                timings: timings.clone(),
            })
        };

        let started = Instant::now();
        let built = build_model(&v.graph, &v.spec);
        timings.build = Some(started.elapsed());
        let mut model = built.map_err(|e| fail(Stage::Build, e.code(), e.to_string(), &timings))?;

        let started = Instant::now();
        let plane = layout(&model, &self.layout);
        timings.layout = Some(started.elapsed());
        let plane = plane.map_err(|e| fail(Stage::Layout, e.code(), e.to_string(), &timings))?;

        let started = Instant::now();
        let artifacts = to_bpmn_xml(&model, &plane).and_then(|xml| {
            let svg = if svg { Some(to_svg(&model, &plane)?) } else { None };
            Ok((xml, svg))
        });
        timings.serialize = Some(started.elapsed());
        let (bpmn, svg) = artifacts.map_err(|e| fail(Stage::Serialize, e.code(), e.to_string(), &timings))?;

        model.diagram = Some(plane);
        let matrix = matrix_report(&v.spec, &model);
        Ok(Conversion {
            spec: v.spec,
            graph: v.graph,
            inference: v.inference,
            synthesis: v.synthesis,
            checks: v.checks,
            model,
            matrix,
            bpmn,
            svg,
            timings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::FlowNodeKind;
    use serde_json::{json, Value};

    fn minimal() -> Value {
        json!({
            "specVersion": 1, "kind": "flow", "name": "mini",
            "queues": [{"id": "q1", "label": "Clerks", "kind": "human"}],
            "nodes": [
                {"id": "s", "role": "start"},
                {"id": "a", "role": "action", "queue": "q1", "label": "Review"},
                {"id": "e", "role": "end"}
            ],
            "transitions": [
                {"id": "t1", "from": "s", "to": "a"},
                {"id": "t2", "from": "a", "to": "e"}
            ]
        })
    }

    fn diamond() -> Value {
        json!({
            "specVersion": 1, "kind": "flow", "name": "diamond",
            "queues": [{"id": "q1", "label": "q1", "kind": "human"}],
            "nodes": [
                {"id": "s", "role": "start"},
                {"id": "b", "role": "action", "queue": "q1"},
                {"id": "c", "role": "action", "queue": "q1"},
                {"id": "e", "role": "end"}
            ],
            "transitions": [
                {"id": "t1", "from": "s", "to": "b"},
                {"id": "t2", "from": "s", "to": "c"},
                {"id": "t3", "from": "b", "to": "e"},
                {"id": "t4", "from": "c", "to": "e"}
            ]
        })
    }

    fn convert(v: &Value) -> Result<Conversion, Box<Failure>> {
        Pipeline::bundled().convert(v.to_string().as_bytes(), "t.json", true)
    }

    #[test]
    fn three_node_happy_path() {
        let c = convert(&minimal()).unwrap();
        let p = &c.model.processes[0];
        assert_eq!(p.nodes.len(), 3);
        assert_eq!(p.flows.len(), 2);
        assert_eq!(p.count_kind(FlowNodeKind::UserTask), 1);
        assert!(c.matrix.verdicts.all(), "{:?}", c.matrix);
        assert!(c.timings.is_complete());
        assert!(c.bpmn.contains("<bpmn:userTask"));
        assert!(c.svg.as_deref().unwrap().starts_with("<svg"));
    }

    #[test]
    fn diamond_gets_parallel_split_and_join() {
        let c = convert(&diamond()).unwrap();
        let p = &c.model.processes[0];
        assert_eq!(p.count_kind(FlowNodeKind::ParallelGateway), 2);
        assert_eq!(p.count_kind(FlowNodeKind::ExclusiveGateway), 0);
        assert_eq!(p.flows.len(), 6);
        assert!(c.matrix.verdicts.all(), "{:?}", c.matrix);
    }

    #[test]
    fn guarded_split_is_exclusive() {
        let mut v = diamond();
        v["transitions"][0]["guard"] = json!("amount > 10");
        v["transitions"][1]["guard"] = json!("amount <= 10");
        let c = convert(&v).unwrap();
        let p = &c.model.processes[0];
        assert_eq!(p.count_kind(FlowNodeKind::ExclusiveGateway), 2);
        assert!(c.bpmn.contains("conditionExpression"));
    }

    #[test]
    fn start_to_end_has_no_lanes() {
        let v = json!({
            "specVersion": 1, "kind": "flow", "name": "empty",
            "nodes": [{"id": "s", "role": "start"}, {"id": "e", "role": "end"}],
            "transitions": [{"id": "t1", "from": "s", "to": "e"}]
        });
        let c = convert(&v).unwrap();
        assert!(c.model.processes[0].lanes.is_empty());
        assert_eq!(c.model.processes[0].flows.len(), 1);
    }

    #[test]
    fn failures_carry_one_code() {
        let p = Pipeline::bundled();
        let f = p.convert(b"{", "x.json", false).unwrap_err();
        assert_eq!((f.code, f.stage), ("E_MALFORMED_JSON", Stage::Parse));

        let mut v = minimal();
        v["transitions"][1]["to"] = json!("n99");
        let f = p.convert(v.to_string().as_bytes(), "x.json", false).unwrap_err();
        assert_eq!(f.code, "E_UNRESOLVED_NODE");
    }

    #[test]
    fn disconnected_node_fails_validation() {
        let mut v = minimal();
        v["nodes"]
            .as_array_mut()
            .unwrap()
            .push(json!({"id": "z", "role": "action", "queue": "q1"}));
        let f = convert(&v).unwrap_err();
        assert_eq!((f.code, f.stage), ("E_VALIDATION", Stage::Validate));
        assert!(f.checks.iter().any(|c| !c.passed()));
    }

    #[test]
    fn load_from_directory_matches_bundled() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../ontologies");
        let config = PipelineConfig {
            ontologies: vec![root],
            ..Default::default()
        };
        let loaded = Pipeline::load(&config).unwrap();
        let bundled = Pipeline::bundled();
        assert_eq!(loaded.tbox().fingerprint(), bundled.tbox().fingerprint());
        assert_eq!(loaded.rules().len(), bundled.rules().len());
    }

    #[test]
    fn missing_ontology_is_config_error() {
        let config = PipelineConfig {
            ontologies: vec![PathBuf::from("/nonexistent/x.ttl")],
            ..Default::default()
        };
        assert_eq!(Pipeline::load(&config).unwrap_err().code(), "E_CONFIG");
    }
}
