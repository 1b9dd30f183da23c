//! Deterministic synthetic corpus of workflow specifications.
//!
//! Every generated flow is block-structured: sequences, exclusive choices,
//! parallel blocks and rework loops nested to fill the requested node count.
//! The manifest records the generator's own counts so tests can compare them
//! against what the pipeline reports.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

/// Node counts (start and end included) a generated spec may have.
pub const MIN_SIZE: usize = 3;
pub const MAX_SIZE: usize = 120;

pub const MANIFEST_FILE: &str = "_manifest.json";

/// Target of the injected dangling reference.
pub const DANGLING_TARGET: &str = "n99_undeclared";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("size range {min}..={max} is not within {MIN_SIZE}..={MAX_SIZE}")]
    Range { min: usize, max: usize },
    #[error("unknown defect class `{0}` (expected timer or dangling)")]
    UnknownDefect(String),
    #[error("cannot write `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    pub fn code(&self) -> &'static str {
        match self {
            CorpusError::Range { .. } => "E_RANGE",
            CorpusError::UnknownDefect(_) => "E_CONFIG",
            CorpusError::Io { .. } => "E_IO",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Defect {
    Timer,
    Dangling,
}

impl Defect {
    pub fn as_str(self) -> &'static str {
        match self {
            Defect::Timer => "timer",
            Defect::Dangling => "dangling",
        }
    }

    pub fn expected_error(self) -> &'static str {
        match self {
            Defect::Timer => "E_TIMER_UNSUPPORTED",
            Defect::Dangling => "E_UNRESOLVED_NODE",
        }
    }
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Defect {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "timer" => Ok(Defect::Timer),
            "dangling" => Ok(Defect::Dangling),
            other => Err(CorpusError::UnknownDefect(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusConfig {
    pub seed: u64,
    pub count: usize,
    pub min_size: usize,
    pub max_size: usize,
    /// Defect classes, assigned round-robin to the defective files.
    pub defects: Vec<Defect>,
    /// Number of defective files; ignored when `defects` is empty.
    pub defect_count: usize,
}

impl CorpusConfig {
    pub fn new(seed: u64, count: usize, min_size: usize, max_size: usize) -> Self {
        Self {
            seed,
            count,
            min_size,
            max_size,
            defects: Vec::new(),
            defect_count: 0,
        }
    }

    pub fn with_defects(mut self, defects: Vec<Defect>, defect_count: usize) -> Self {
        self.defects = defects;
        self.defect_count = defect_count;
        self
    }

    fn check(&self) -> Result<(), CorpusError> {
        if self.min_size < MIN_SIZE || self.max_size > MAX_SIZE || self.min_size > self.max_size {
            return Err(CorpusError::Range {
                min: self.min_size,
                max: self.max_size,
            });
        }
        Ok(())
    }
}

/// Ground truth for one generated file, counted from the generator's own
/// node and edge lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpecTruth {
    pub file: String,
    pub name: String,
    pub nodes: usize,
    pub actions: usize,
    pub human_actions: usize,
    pub system_actions: usize,
    pub transitions: usize,
    pub guarded: usize,
    pub buttons: usize,
    pub queues: usize,
    pub human_queues_referenced: usize,
    pub forms: usize,
    pub start: usize,
    pub end: usize,
    pub split_points: usize,
    pub join_points: usize,
    pub back_edges: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub defect: Option<Defect>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_error: Option<&'static str>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ManifestTotals {
    pub files: usize,
    pub nodes: usize,
    pub actions: usize,
    pub transitions: usize,
    pub split_points: usize,
    pub join_points: usize,
    pub defective: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub count: usize,
    pub min_size: usize,
    pub max_size: usize,
    pub files: Vec<SpecTruth>,
    pub totals: ManifestTotals,
}

impl Manifest {
    pub fn truth(&self, file: &str) -> Option<&SpecTruth> {
        self.files.iter().find(|t| t.file == file)
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedSpec {
    pub file: String,
    pub json: String,
    pub truth: SpecTruth,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub specs: Vec<GeneratedSpec>,
    pub manifest: Manifest,
}

const QUEUE_LABELS: &[&str] = &[
    "Front Office",
    "Academic Services",
    "Finance",
    "Department Board",
    "Registry",
    "Legal Office",
];
const PROCESSORS: &[&str] = &[
    "MailNotifier",
    "PdfRenderer",
    "ArchiveWriter",
    "LdapLookup",
    "ErpExport",
];
const VERBS: &[&str] = &[
    "Review", "Approve", "Check", "Register", "Assess", "Sign", "Verify", "Prepare", "Complete",
];
const OBJECTS: &[&str] = &[
    "request",
    "application",
    "invoice",
    "contract",
    "enrolment",
    "grade sheet",
    "travel claim",
];
const SYSTEM_VERBS: &[&str] = &["Send", "Render", "Archive", "Export", "Sync"];
const DECISIONS: &[&str] = &["decision", "amount", "priority", "outcome"];

#[derive(Debug, Clone)]
enum Performer {
    Human { queue: usize, form: Option<usize> },
    System { processor: usize, queued: bool },
}

#[derive(Debug, Clone)]
struct GenNode {
    label: String,
    performer: Option<Performer>,
    buttons: Vec<(String, usize)>,
}

#[derive(Debug, Clone)]
struct GenEdge {
    from: usize,
    to: usize,
    guard: Option<String>,
    button: bool,
    back: bool,
}

struct Generator {
    rng: ChaCha8Rng,
    nodes: Vec<GenNode>,
    edges: Vec<GenEdge>,
    human_queues: usize,
    forms: usize,
    decisions: usize,
}

impl Generator {
    fn task(&mut self) -> usize {
        let performer = if self.rng.gen_bool(0.75) {
            let queue = self.rng.gen_range(0..self.human_queues);
            let form = (self.rng.gen_bool(0.3)).then(|| self.rng.gen_range(0..self.forms));
            Performer::Human { queue, form }
        } else {
            Performer::System {
                processor: self.rng.gen_range(0..PROCESSORS.len()),
                queued: self.rng.gen_bool(0.5),
            }
        };
        let label = match performer {
            Performer::Human { .. } => format!(
                "{} {}",
                VERBS.choose(&mut self.rng).unwrap(),
                OBJECTS.choose(&mut self.rng).unwrap()
            ),
            Performer::System { .. } => format!(
                "{} {}",
                SYSTEM_VERBS.choose(&mut self.rng).unwrap(),
                OBJECTS.choose(&mut self.rng).unwrap()
            ),
        };
        self.nodes.push(GenNode {
            label,
            performer: Some(performer),
            buttons: Vec::new(),
        });
        self.nodes.len() - 1
    }

    fn edge(&mut self, from: usize, to: usize, guard: Option<String>, back: bool) -> usize {
        self.edges.push(GenEdge {
            from,
            to,
            guard,
            button: false,
            back,
        });
        self.edges.len() - 1
    }

    /// Splits `total` into `k` positive parts.
    fn partition(&mut self, total: usize, k: usize) -> Vec<usize> {
        let mut parts = vec![1; k];
        for _ in 0..total - k {
            let i = self.rng.gen_range(0..k);
            parts[i] += 1;
        }
        parts
    }

    /// Emits a block of exactly `budget` action nodes; returns (entry, exit).
    fn block(&mut self, budget: usize) -> (usize, usize) {
        debug_assert!(budget >= 1);
        if budget == 1 {
            let t = self.task();
            return (t, t);
        }
        let pick = self.rng.gen_range(0..100);
        if budget >= 4 && pick < 25 {
            return self.choice(budget, true);
        }
        if budget >= 4 && pick < 45 {
            return self.choice(budget, false);
        }
        if (45..50).contains(&pick) {
            return self.rework_loop(budget);
        }
        let first = self.rng.gen_range(1..budget);
        let (a_in, a_out) = self.block(first);
        let (b_in, b_out) = self.block(budget - first);
        self.edge(a_out, b_in, None, false);
        (a_in, b_out)
    }

    fn choice(&mut self, budget: usize, exclusive: bool) -> (usize, usize) {
        let inner = budget - 2;
        let k = self.rng.gen_range(2..=inner.min(3));
        let parts = self.partition(inner, k);
        let split = self.task();
        let decision = DECISIONS[self.decisions % DECISIONS.len()];
        self.decisions += 1;
        let with_default = exclusive && self.rng.gen_bool(0.3);
        let mut out_edges = Vec::new();
        let mut exits = Vec::new();
        for (i, part) in parts.into_iter().enumerate() {
            let (entry, exit) = self.block(part);
            let guard =
                (exclusive && !(with_default && i == k - 1)).then(|| format!("{decision} == 'option{}'", i + 1));
            out_edges.push(self.edge(split, entry, guard, false));
            exits.push(exit);
        }
        let join = self.task();
        for exit in exits {
            self.edge(exit, join, None, false);
        }
        let human = matches!(self.nodes[split].performer, Some(Performer::Human { .. }));
        if exclusive && human && self.rng.gen_bool(0.5) {
            for (i, e) in out_edges.into_iter().enumerate() {
                self.edges[e].button = true;
                self.nodes[split].buttons.push((format!("Option {}", i + 1), e));
            }
        }
        (split, join)
    }

    fn rework_loop(&mut self, budget: usize) -> (usize, usize) {
        let (entry, exit) = self.block(budget - 1);
        let check = self.task();
        self.edge(exit, check, None, false);
        let decision = DECISIONS[self.decisions % DECISIONS.len()];
        self.decisions += 1;
        self.edge(check, entry, Some(format!("{decision} == 'rework'")), true);
        (entry, check)
    }
}

fn generate_one(seed: u64, index: usize, min: usize, max: usize) -> (Value, SpecTruth) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let size = rng.gen_range(min..=max);
    let actions = size - 2;
    let human_queues = rng.gen_range(1..=actions.clamp(1, 4));
    let forms = rng.gen_range(1..=3);
    let mut gen = Generator {
        rng,
        nodes: Vec::new(),
        edges: Vec::new(),
        human_queues,
        forms,
        decisions: 0,
    };
    gen.nodes.push(GenNode {
        label: "Start".into(),
        performer: None,
        buttons: Vec::new(),
    });
    let (entry, exit) = gen.block(actions);
    gen.nodes.push(GenNode {
        label: "End".into(),
        performer: None,
        buttons: Vec::new(),
    });
    let end = gen.nodes.len() - 1;
    gen.edge(0, entry, None, false);
    gen.edge(exit, end, None, false);

    let node_id = |i: usize| format!("n{i:02}");
    let edge_id = |i: usize| format!("t{:03}", i + 1);
    let uses_system_queue = gen
        .nodes
        .iter()
        .any(|n| matches!(n.performer, Some(Performer::System { queued: true, .. })));

    let mut queues: Vec<Value> = (0..human_queues)
        .map(|q| json!({"id": format!("q{}", q + 1), "label": QUEUE_LABELS[q % QUEUE_LABELS.len()], "kind": "human"}))
        .collect();
    if uses_system_queue {
        queues.push(json!({"id": "sys", "label": "Automation", "kind": "system"}));
    }
    let form_values: Vec<Value> = (0..forms)
        .map(|f| {
            json!({
                "id": format!("form{}", f + 1),
                "title": format!("{} form", OBJECTS[f % OBJECTS.len()]),
                "fields": [{"name": "reference", "type": "string"}, {"name": "notes", "type": "text"}]
            })
        })
        .collect();

    let nodes: Vec<Value> = gen
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let mut v = json!({"id": node_id(i), "label": n.label});
            let role = match (&n.performer, i) {
                (None, 0) => "start",
                (None, _) => "end",
                (Some(_), _) => "action",
            };
            v["role"] = json!(role);
            match &n.performer {
                Some(Performer::Human { queue, form }) => {
                    v["queue"] = json!(format!("q{}", queue + 1));
                    if let Some(f) = form {
                        v["form"] = json!(format!("form{}", f + 1));
                    }
                }
                Some(Performer::System { processor, queued }) => {
                    v["processor"] = json!(PROCESSORS[*processor]);
                    if *queued {
                        v["queue"] = json!("sys");
                    }
                }
                None => {}
            }
            if !n.buttons.is_empty() {
                v["buttons"] = n
                    .buttons
                    .iter()
                    .map(|(label, e)| json!({"label": label, "transition": edge_id(*e)}))
                    .collect();
            }
            v
        })
        .collect();
    let transitions: Vec<Value> = gen
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut v = json!({"id": edge_id(i), "from": node_id(e.from), "to": node_id(e.to)});
            if let Some(g) = &e.guard {
                v["guard"] = json!(g);
            }
            if e.button {
                v["trigger"] = json!("button");
            }
            v
        })
        .collect();

    let name = format!("wf_{index:03}");
    let doc = json!({
        "specVersion": 1,
        "kind": "flow",
        "name": name,
        "processors": PROCESSORS,
        "queues": queues,
        "forms": form_values,
        "nodes": nodes,
        "transitions": transitions,
    });

    let mut out_deg = vec![0usize; gen.nodes.len()];
    let mut in_deg = vec![0usize; gen.nodes.len()];
    for e in &gen.edges {
        out_deg[e.from] += 1;
        in_deg[e.to] += 1;
    }
    let mut human_used: Vec<usize> = gen
        .nodes
        .iter()
        .filter_map(|n| match n.performer {
            Some(Performer::Human { queue, .. }) => Some(queue),
            _ => None,
        })
        .collect();
    human_used.sort_unstable();
    human_used.dedup();
    let human_actions = gen
        .nodes
        .iter()
        .filter(|n| matches!(n.performer, Some(Performer::Human { .. })))
        .count();
    let truth = SpecTruth {
        file: format!("{name}.json"),
        name,
        nodes: gen.nodes.len(),
        actions,
        human_actions,
        system_actions: actions - human_actions,
        transitions: gen.edges.len(),
        guarded: gen.edges.iter().filter(|e| e.guard.is_some()).count(),
        buttons: gen.edges.iter().filter(|e| e.button).count(),
        queues: human_queues + usize::from(uses_system_queue),
        human_queues_referenced: human_used.len(),
        forms,
        start: 1,
        end: 1,
        split_points: out_deg.iter().filter(|d| **d >= 2).count(),
        join_points: in_deg.iter().filter(|d| **d >= 2).count(),
        back_edges: gen.edges.iter().filter(|e| e.back).count(),
        defect: None,
        expected_error: None,
    };
    (doc, truth)
}

fn inject(doc: &mut Value, defect: Defect, rng: &mut ChaCha8Rng) {
    let transitions = doc["transitions"].as_array_mut().expect("generated transitions");
    let i = rng.gen_range(0..transitions.len());
    match defect {
        Defect::Timer => transitions[i]["trigger"] = json!("timer"),
        Defect::Dangling => transitions[i]["to"] = json!(DANGLING_TARGET),
    }
}

/// Generates the corpus in memory.
pub fn generate(config: &CorpusConfig) -> Result<Corpus, CorpusError> {
    config.check()?;
    let mut defective: BTreeMap<usize, Defect> = BTreeMap::new();
    if !config.defects.is_empty() && config.count > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(u64::MAX);
        let mut picked = sample(&mut rng, config.count, config.defect_count.min(config.count)).into_vec();
        picked.sort_unstable();
        for (j, i) in picked.into_iter().enumerate() {
            defective.insert(i, config.defects[j % config.defects.len()]);
        }
    }

    let mut specs = Vec::with_capacity(config.count);
    let mut totals = ManifestTotals::default();
    for index in 0..config.count {
        let (mut doc, mut truth) = generate_one(config.seed, index, config.min_size, config.max_size);
        if let Some(defect) = defective.get(&index) {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
            rng.set_stream(index as u64);
            inject(&mut doc, *defect, &mut rng);
            truth.defect = Some(*defect);
            truth.expected_error = Some(defect.expected_error());
            totals.defective += 1;
        }
        totals.files += 1;
        totals.nodes += truth.nodes;
        totals.actions += truth.actions;
        totals.transitions += truth.transitions;
        totals.split_points += truth.split_points;
        totals.join_points += truth.join_points;
        let mut json = serde_json::to_string_pretty(&doc).expect("JSON values serialize");
        json.push('\n');
        specs.push(GeneratedSpec {
            file: truth.file.clone(),
            json,
            truth,
        });
    }
    let manifest = Manifest {
        seed: config.seed,
        count: config.count,
        min_size: config.min_size,
        max_size: config.max_size,
        files: specs.iter().map(|s| s.truth.clone()).collect(),
        totals,
    };
    Ok(Corpus { specs, manifest })
}

/// Generates the corpus and writes it, plus `_manifest.json`, into `dir`.
pub fn write_corpus(dir: &Path, config: &CorpusConfig) -> Result<Manifest, CorpusError> {
    let corpus = generate(config)?;
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source| CorpusError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    for spec in &corpus.specs {
        let path = dir.join(&spec.file);
        std::fs::write(&path, &spec.json).map_err(io(&path))?;
    }
    let path = dir.join(MANIFEST_FILE);
    let mut manifest = serde_json::to_string_pretty(&corpus.manifest).expect("manifest serializes");
    manifest.push('\n');
    std::fs::write(&path, manifest).map_err(io(&path))?;
    Ok(corpus.manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_spec;

    #[test]
    fn sizes_outside_range_are_rejected() {
        for (min, max) in [(2, 10), (10, 121), (30, 20)] {
            let err = generate(&CorpusConfig::new(1, 1, min, max)).unwrap_err();
            assert_eq!(err.code(), "E_RANGE");
        }
    }

    #[test]
    fn generated_specs_parse_with_the_recorded_counts() {
        let corpus = generate(&CorpusConfig::new(42, 30, 3, 80)).unwrap();
        for s in &corpus.specs {
            let spec = parse_spec(s.json.as_bytes(), &s.file).unwrap();
            assert_eq!(spec.nodes.len(), s.truth.nodes, "{}", s.file);
            assert_eq!(spec.transitions.len(), s.truth.transitions, "{}", s.file);
            assert!((3..=80).contains(&s.truth.nodes));
        }
    }

    #[test]
    fn manifest_totals_equal_per_file_sums() {
        let m = generate(&CorpusConfig::new(42, 30, 20, 80)).unwrap().manifest;
        assert_eq!(m.files.len(), 30);
        assert_eq!(m.totals.nodes, m.files.iter().map(|f| f.nodes).sum::<usize>());
        assert_eq!(
            m.totals.transitions,
            m.files.iter().map(|f| f.transitions).sum::<usize>()
        );
        assert_eq!(
            m.totals.split_points,
            m.files.iter().map(|f| f.split_points).sum::<usize>()
        );
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate(&CorpusConfig::new(7, 10, 5, 60)).unwrap();
        let b = generate(&CorpusConfig::new(7, 10, 5, 60)).unwrap();
        let c = generate(&CorpusConfig::new(8, 10, 5, 60)).unwrap();
        let bytes = |c: &Corpus| c.specs.iter().map(|s| s.json.clone()).collect::<Vec<_>>();
        assert_eq!(bytes(&a), bytes(&b));
        assert_ne!(bytes(&a), bytes(&c));
    }

    #[test]
    fn defects_fail_with_their_error_class() {
        let config = CorpusConfig::new(3, 20, 10, 30).with_defects(vec![Defect::Timer, Defect::Dangling], 4);
        let corpus = generate(&config).unwrap();
        assert_eq!(corpus.manifest.totals.defective, 4);
        let mut classes = BTreeMap::new();
        for s in &corpus.specs {
            let result = parse_spec(s.json.as_bytes(), &s.file);
            match s.truth.expected_error {
                Some(code) => {
                    assert_eq!(result.unwrap_err().code(), code);
                    *classes.entry(code).or_insert(0) += 1;
                }
                None => assert!(result.is_ok()),
            }
        }
        assert_eq!(classes.values().copied().collect::<Vec<_>>(), vec![2, 2]);
    }

    #[test]
    fn zero_count_gives_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_corpus(dir.path(), &CorpusConfig::new(1, 0, 3, 10)).unwrap();
        assert!(m.files.is_empty());
        let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(entries.len(), 1);
    }
}
