//! Directory-level batch conversion with per-file failure isolation,
//! JSON-lines logs and a corpus summary.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;
use walkdir::WalkDir;

use crate::builder::Verdicts;
use crate::pipeline::{Conversion, Failure, Pipeline, Stage, StageTimings};
use crate::validator::{CheckId, CheckStatus};

pub const DEFAULT_LOG_NAME: &str = "conversion.log.jsonl";
pub const SUMMARY_NAME: &str = "summary.json";

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("input `{0}` does not exist")]
    MissingInput(PathBuf),
    #[error("cannot write `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

impl BatchError {
    pub fn code(&self) -> &'static str {
        match self {
            BatchError::MissingInput(_) | BatchError::Pool(_) => "E_CONFIG",
            BatchError::Io { .. } => "E_IO",
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> BatchError {
    let path = path.to_owned();
    move |source| BatchError::Io { path, source }
}

#[derive(Debug, Clone)]
pub struct BatchConfig {
    pub out_dir: PathBuf,
    pub svg: bool,
    /// Write `<stem>.matrix.json` next to each diagram.
    pub report: bool,
    /// Worker count; `None` uses one per available processor.
    pub workers: Option<usize>,
    /// JSON-lines log; defaults to `<out_dir>/conversion.log.jsonl`.
    pub log: Option<PathBuf>,
}

impl BatchConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            svg: true,
            report: true,
            workers: None,
            log: None,
        }
    }

    pub fn log_path(&self) -> PathBuf {
        self.log.clone().unwrap_or_else(|| self.out_dir.join(DEFAULT_LOG_NAME))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FileStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorRecord {
    pub code: &'static str,
    pub stage: Stage,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pointer: Option<String>,
}

/// One validator finding, flattened for the log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FindingRecord {
    pub file: String,
    pub check: CheckId,
    pub subject: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ElementCounts {
    pub source_nodes: usize,
    pub source_transitions: usize,
    pub flow_nodes: usize,
    pub sequence_flows: usize,
    pub lanes: usize,
    pub triples: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckOutcome {
    pub check: CheckId,
    pub status: CheckStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReasoningRecord {
    pub iterations: usize,
    pub inferred: usize,
    pub gateways: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileResult {
    pub input: String,
    pub status: FileStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRecord>,
    pub outputs: Vec<String>,
    pub timings: StageTimings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elements: Option<ElementCounts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<ReasoningRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub validation: Vec<CheckOutcome>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub findings: Vec<FindingRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdicts: Option<Verdicts>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl FileResult {
    pub fn is_ok(&self) -> bool {
        self.status == FileStatus::Ok
    }

    pub fn error_code(&self) -> Option<&'static str> {
        self.error.as_ref().map(|e| e.code)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TimingStats {
    pub mean_ms: f64,
    pub median_ms: f64,
    pub max_ms: f64,
}

impl TimingStats {
    /// Statistics over per-file totals given in microseconds.
    pub fn from_micros(values: &[u64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut v: Vec<f64> = values.iter().map(|us| *us as f64 / 1000.0).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        };
        Self {
            mean_ms: v.iter().sum::<f64>() / n as f64,
            median_ms: median,
            max_ms: v[n - 1],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BatchSummary {
    pub discovered: usize,
    pub attempted: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub success_rate: f64,
    pub diagrams: usize,
    /// Over succeeded files.
    pub timing: TimingStats,
    pub wall_ms: u64,
    pub failures_by_class: BTreeMap<String, Vec<String>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl BatchSummary {
    pub fn from_results(results: &[FileResult]) -> Self {
        let mut s = BatchSummary {
            discovered: results.len(),
            attempted: results.len(),
            ..Default::default()
        };
        let mut totals = Vec::new();
        for r in results {
            if r.is_ok() {
                s.succeeded += 1;
                s.diagrams += 1;
                totals.push(r.timings.total().as_micros() as u64);
            } else {
                s.failed += 1;
                let code = r.error_code().unwrap_or("E_UNKNOWN");
                s.failures_by_class
                    .entry(code.to_owned())
                    .or_default()
                    .push(r.input.clone());
            }
        }
        s.success_rate = if s.attempted == 0 {
            s.warnings
                .push("no input files found; success rate defined as 1.0".into());
            1.0
        } else {
            s.succeeded as f64 / s.attempted as f64
        };
        s.timing = TimingStats::from_micros(&totals);
        s
    }

    /// 0 when every file converted, else 1.
    pub fn exit_code(&self) -> i32 {
        i32::from(self.failed > 0)
    }
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub summary: BatchSummary,
    pub results: Vec<FileResult>,
    pub log_path: PathBuf,
    pub summary_path: PathBuf,
}

/// An input file and its path relative to the input root, which decides
/// where its outputs go.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct InputFile {
    pub relative: PathBuf,
    pub path: PathBuf,
}

/// Finds `*.json` files below `input`, sorted by relative path. Files whose
/// name starts with `_` (manifests, fixtures) and anything under `skip` are
/// ignored. A file input yields itself.
pub fn discover(input: &Path, skip: Option<&Path>) -> Result<Vec<InputFile>, BatchError> {
    if !input.exists() {
        return Err(BatchError::MissingInput(input.to_owned()));
    }
    if input.is_file() {
        let name = input.file_name().map(PathBuf::from).unwrap_or_default();
        return Ok(vec![InputFile {
            relative: name,
            path: input.to_owned(),
        }]);
    }
    let skip = skip.and_then(|p| p.canonicalize().ok());
    let mut files = Vec::new();
    let walker = WalkDir::new(input).follow_links(false).into_iter().filter_entry(|e| {
        let own_output = skip
            .as_ref()
            .is_some_and(|s| e.file_type().is_dir() && e.path().canonicalize().is_ok_and(|p| &p == s));
        !own_output
    });
    for entry in walker.filter_map(Result::ok) {
        let name = entry.file_name().to_string_lossy();
        if !entry.file_type().is_file() || name.starts_with('_') || !name.ends_with(".json") {
            continue;
        }
        let relative = entry.path().strip_prefix(input).unwrap_or(entry.path()).to_owned();
        files.push(InputFile {
            relative,
            path: entry.path().to_owned(),
        });
    }
    files.sort();
    Ok(files)
}

/// Writes `bytes` to a temporary file beside `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), BatchError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_error(dir))?;
    tmp.write_all(bytes).map_err(io_error(path))?;
    tmp.persist(path).map_err(|e| BatchError::Io {
        path: path.to_owned(),
        source: e.error,
    })?;
    Ok(())
}

fn output_paths(config: &BatchConfig, relative: &Path) -> [PathBuf; 3] {
    let stem = relative
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let dir = config.out_dir.join(relative.parent().unwrap_or(Path::new("")));
    [
        dir.join(format!("{stem}.bpmn")),
        dir.join(format!("{stem}.svg")),
        dir.join(format!("{stem}.matrix.json")),
    ]
}

fn display(path: &Path) -> String {
    path.to_string_lossy().replace('\\', "/")
}

fn failed(input: String, failure: &Failure, findings: Vec<FindingRecord>) -> FileResult {
    let validation = failure
        .checks
        .iter()
        .map(|c| CheckOutcome {
            check: c.check,
            status: c.status,
        })
        .collect();
    FileResult {
        input,
        status: FileStatus::Failed,
        error: Some(ErrorRecord {
            code: failure.code,
            stage: failure.stage,
            message: failure.message.clone(),
            pointer: failure.pointer.clone(),
        }),
        outputs: Vec::new(),
        timings: failure.timings.clone(),
        elements: None,
        reasoning: None,
        validation,
        findings,
        verdicts: None,
        warnings: Vec::new(),
    }
}

fn io_failure(input: String, stage: Stage, err: &BatchError, timings: StageTimings) -> FileResult {
    let failure = Failure {
        code: err.code(),
        stage,
        message: err.to_string(),
        pointer: None,
        checks: Vec::new(),
        timings,
    };
    failed(input, &failure, Vec::new())
}

fn succeeded(input: String, c: &Conversion, outputs: Vec<String>) -> FileResult {
    let process = &c.model.processes[0];
    let plane = c.plane();
    let mut warnings = c.synthesis.warnings.clone();
    warnings.extend(plane.warnings.iter().cloned());
    FileResult {
        input,
        status: FileStatus::Ok,
        error: None,
        outputs,
        timings: c.timings.clone(),
        elements: Some(ElementCounts {
            source_nodes: c.spec.nodes.len(),
            source_transitions: c.spec.transitions.len(),
            flow_nodes: c.model.processes.iter().map(|p| p.nodes.len()).sum(),
            sequence_flows: c.model.processes.iter().map(|p| p.flows.len()).sum(),
            lanes: process.lanes.len(),
            triples: c.graph.len(),
        }),
        reasoning: Some(ReasoningRecord {
            iterations: c.inference.iterations,
            inferred: c.inference.total_added(),
            gateways: c.synthesis.splits + c.synthesis.joins,
        }),
        validation: c
            .checks
            .iter()
            .map(|r| CheckOutcome {
                check: r.check,
                status: r.status,
            })
            .collect(),
        findings: Vec::new(),
        verdicts: Some(c.matrix.verdicts),
        warnings,
    }
}

/// Converts one file. Never panics on bad input and never leaves a partial
/// diagram behind: on failure any earlier outputs for the same stem are removed.
pub fn convert_one(pipeline: &Pipeline, file: &InputFile, config: &BatchConfig) -> FileResult {
    let input = display(&file.relative);
    let [bpmn_path, svg_path, matrix_path] = output_paths(config, &file.relative);
    let raw = match std::fs::read(&file.path) {
        Ok(raw) => raw,
        Err(source) => {
            let err = BatchError::Io {
                path: file.path.clone(),
                source,
            };
            return io_failure(input, Stage::Parse, &err, StageTimings::default());
        }
    };

    let conversion = match pipeline.convert(&raw, &input, config.svg) {
        Ok(c) => c,
        Err(failure) => {
            for stale in [&bpmn_path, &svg_path, &matrix_path] {
                let _ = std::fs::remove_file(stale);
            }
            let findings = failure
                .checks
                .iter()
                .flat_map(|c| {
                    c.findings.iter().map(|f| FindingRecord {
                        file: input.clone(),
                        check: c.check,
                        subject: f.subject.clone(),
                        message: f.message.clone(),
                    })
                })
                .collect();
            return failed(input, &failure, findings);
        }
    };

    let mut timings = conversion.timings.clone();
    let started = Instant::now();
    let mut writes: Vec<(&PathBuf, Vec<u8>)> = vec![(&bpmn_path, conversion.bpmn.clone().into_bytes())];
    if let Some(svg) = &conversion.svg {
        writes.push((&svg_path, svg.clone().into_bytes()));
    }
    if config.report {
        let mut json = serde_json::to_string_pretty(&conversion.matrix).expect("matrix serializes");
        json.push('\n');
        writes.push((&matrix_path, json.into_bytes()));
    }
    let mut outputs = Vec::new();
    for (path, bytes) in writes {
        if let Err(err) = write_atomic(path, &bytes) {
            timings.serialize = timings.serialize.map(|d| d + started.elapsed());
            return io_failure(input, Stage::Serialize, &err, timings);
        }
        outputs.push(display(path));
    }
    timings.serialize = timings.serialize.map(|d| d + started.elapsed());
    let mut result = succeeded(input, &conversion, outputs);
    result.timings = timings;
    result
}

/// Converts every file below `input` with a pool of workers and writes the
/// log and `summary.json`. Results are in discovery order regardless of the
/// worker count.
pub fn convert_dir(pipeline: &Pipeline, input: &Path, config: &BatchConfig) -> Result<BatchOutcome, BatchError> {
    let files = discover(input, Some(&config.out_dir))?;
    std::fs::create_dir_all(&config.out_dir).map_err(io_error(&config.out_dir))?;
    let started = Instant::now();
    let workers = config
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| BatchError::Pool(e.to_string()))?;
    let results: Vec<FileResult> =
        pool.install(|| files.par_iter().map(|f| convert_one(pipeline, f, config)).collect());

    let mut summary = BatchSummary::from_results(&results);
    summary.wall_ms = started.elapsed().as_millis() as u64;

    let log_path = config.log_path();
    let mut log = String::new();
    for r in &results {
        log.push_str(&serde_json::to_string(r).expect("file results serialize"));
        log.push('\n');
    }
    write_atomic(&log_path, log.as_bytes())?;
    let summary_path = config.out_dir.join(SUMMARY_NAME);
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    write_atomic(&summary_path, json.as_bytes())?;
    Ok(BatchOutcome {
        summary,
        results,
        log_path,
        summary_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{write_corpus, CorpusConfig, Defect};

    fn corpus(dir: &Path, count: usize, defects: usize) {
        let config = CorpusConfig::new(11, count, 5, 25).with_defects(vec![Defect::Timer, Defect::Dangling], defects);
        write_corpus(dir, &config).unwrap();
    }

    #[test]
    fn ten_valid_two_invalid() {
        let input = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        corpus(input.path(), 12, 2);
        let mut config = BatchConfig::new(out.path());
        config.workers = Some(2);
        let outcome = convert_dir(&Pipeline::bundled(), input.path(), &config).unwrap();
        let s = &outcome.summary;
        assert_eq!((s.attempted, s.succeeded, s.failed), (12, 10, 2));
        assert!((s.success_rate - 10.0 / 12.0).abs() < 1e-12);
        assert_eq!(s.exit_code(), 1);
        assert_eq!(s.failures_by_class.len(), 2);

        let log = std::fs::read_to_string(&outcome.log_path).unwrap();
        assert_eq!(log.lines().count(), 12);
        for r in &outcome.results {
            if r.is_ok() {
                assert!(r.timings.is_complete());
                assert_eq!(r.outputs.len(), 3);
                assert!(r.outputs.iter().all(|p| Path::new(p).exists()));
            } else {
                assert!(r.outputs.is_empty());
                let stem = r.input.trim_end_matches(".json");
                assert!(!out.path().join(format!("{stem}.bpmn")).exists());
            }
        }
        assert!(outcome.summary_path.exists());
    }

    #[test]
    fn empty_directory_is_vacuous_success() {
        let input = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        let outcome = convert_dir(&Pipeline::bundled(), input.path(), &BatchConfig::new(out.path())).unwrap();
        assert_eq!(outcome.summary.attempted, 0);
        assert_eq!(outcome.summary.success_rate, 1.0);
        assert_eq!(outcome.summary.exit_code(), 0);
        assert_eq!(outcome.summary.warnings.len(), 1);
    }

    #[test]
    fn discovery_is_sorted_recursive_and_skips_underscore_files() {
        let dir = tempfile::tempdir().unwrap();
        for p in ["b.json", "a/z.json", "a/_x.json", "c.txt", "_manifest.json"] {
            let path = dir.path().join(p);
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(path, "{}").unwrap();
        }
        let found: Vec<String> = discover(dir.path(), None)
            .unwrap()
            .iter()
            .map(|f| display(&f.relative))
            .collect();
        assert_eq!(found, vec!["a/z.json", "b.json"]);
    }

    #[test]
    fn missing_input_is_config_error() {
        let err = discover(Path::new("/nonexistent/dir"), None).unwrap_err();
        assert_eq!(err.code(), "E_CONFIG");
    }

    #[test]
    fn failure_removes_stale_outputs() {
        let input = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        std::fs::write(input.path().join("w.json"), "{").unwrap();
        std::fs::write(out.path().join("w.bpmn"), "stale").unwrap();
        let files = discover(input.path(), None).unwrap();
        let r = convert_one(&Pipeline::bundled(), &files[0], &BatchConfig::new(out.path()));
        assert_eq!(r.error_code(), Some("E_MALFORMED_JSON"));
        assert!(!out.path().join("w.bpmn").exists());
    }

    #[test]
    fn timing_stats() {
        let t = TimingStats::from_micros(&[1000, 3000, 2000, 10000]);
        assert_eq!(t.median_ms, 2.5);
        assert_eq!(t.max_ms, 10.0);
        assert_eq!(t.mean_ms, 4.0);
    }
}
