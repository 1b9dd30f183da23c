use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flow2bpmn_core::batch::{convert_dir, discover, BatchConfig};
use flow2bpmn_core::corpus::{write_corpus, CorpusConfig, Defect};
use flow2bpmn_core::pipeline::{Pipeline, PipelineConfig, ONTOLOGY_DIR_ENV};
use flow2bpmn_core::reasoner::DEFAULT_MAX_ITERATIONS;
use flow2bpmn_core::vocab::DEFAULT_INSTANCE_BASE;

const EXIT_FAILURES: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "flow2bpmn",
    version,
    about = "Convert Smart Flow JSON workflow specifications into BPMN 2.0"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a spec file or a directory of specs.
    Convert(ConvertArgs),
    /// Run the pipeline up to validation without writing diagrams.
    Validate(ValidateArgs),
    /// Generate a deterministic synthetic corpus with a ground-truth manifest.
    GenCorpus(GenCorpusArgs),
}

#[derive(Args)]
struct KbArgs {
    /// Ontology file or directory of .ttl files (repeatable).
    #[arg(long = "ontology", value_name = "PATH")]
    ontologies: Vec<PathBuf>,
    /// Extra rule file.
    #[arg(long, value_name = "FILE")]
    rules: Option<PathBuf>,
    /// Mapping rule file; the bundled mapping is used when omitted.
    #[arg(long, value_name = "FILE")]
    mappings: Option<PathBuf>,
    /// Base IRI for minted instance IRIs.
    #[arg(long, default_value = DEFAULT_INSTANCE_BASE)]
    instance_base: String,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    max_iterations: usize,
}

impl KbArgs {
    fn load(&self) -> Result<Pipeline, u8> {
        let config = PipelineConfig {
            ontologies: self.ontologies.clone(),
            rules: self.rules.clone(),
            mappings: self.mappings.clone(),
            instance_base: self.instance_base.clone(),
            max_iterations: self.max_iterations,
            ..Default::default()
        };
        Pipeline::load(&config).map_err(|e| {
            eprintln!("error[{}]: {e}", e.code());
            if self.ontologies.is_empty() && std::env::var_os(ONTOLOGY_DIR_ENV).is_some() {
                eprintln!("note: ontologies were read from ${ONTOLOGY_DIR_ENV}");
            }
            EXIT_CONFIG
        })
    }
}

#[derive(Args)]
struct ConvertArgs {
    /// Spec file or directory (searched recursively for *.json).
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    kb: KbArgs,
    /// Also render an SVG per diagram.
    #[arg(long)]
    svg: bool,
    /// Also write a matrix report per diagram.
    #[arg(long)]
    report: bool,
    /// Worker threads; defaults to the number of processors.
    #[arg(long)]
    workers: Option<usize>,
    /// JSON-lines log path; defaults to <out>/conversion.log.jsonl.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    input: PathBuf,
    #[command(flatten)]
    kb: KbArgs,
    /// Print one JSON object per file instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GenCorpusArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 20)]
    min_size: usize,
    #[arg(long, default_value_t = 80)]
    max_size: usize,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated defect classes: timer, dangling.
    #[arg(long, value_delimiter = ',')]
    inject_defects: Vec<Defect>,
    /// Number of defective files; defaults to one per listed class.
    #[arg(long)]
    defect_count: Option<usize>,
}

fn convert(args: ConvertArgs) -> Result<u8, u8> {
    let pipeline = args.kb.load()?;
    let config = BatchConfig {
        out_dir: args.out,
        svg: args.svg,
        report: args.report,
        workers: args.workers,
        log: args.log,
    };
    let outcome = convert_dir(&pipeline, &args.input, &config).map_err(|e| {
        eprintln!("error[{}]: {e}", e.code());
        EXIT_CONFIG
    })?;
    for r in outcome.results.iter().filter(|r| !r.is_ok()) {
        if let Some(e) = &r.error {
            let at = e.pointer.as_deref().map(|p| format!(" at {p}")).unwrap_or_default();
            eprintln!("{}: {} in {}{at}: {}", r.input, e.code, e.stage.as_str(), e.message);
        }
    }
    for w in &outcome.summary.warnings {
        eprintln!("warning: {w}");
    }
    let s = &outcome.summary;
    println!(
        "converted {}/{} files ({:.1}%), mean {:.1} ms, median {:.1} ms, max {:.1} ms; log {}",
        s.succeeded,
        s.attempted,
        s.success_rate * 100.0,
        s.timing.mean_ms,
        s.timing.median_ms,
        s.timing.max_ms,
        outcome.log_path.display()
    );
    Ok(if s.exit_code() == 0 { 0 } else { EXIT_FAILURES })
}

fn validate(args: ValidateArgs) -> Result<u8, u8> {
    let pipeline = args.kb.load()?;
    let files = discover(&args.input, None).map_err(|e| {
        eprintln!("error[{}]: {e}", e.code());
        EXIT_CONFIG
    })?;
    let mut failures = 0;
    for file in &files {
        let name = file.relative.to_string_lossy().replace('\\', "/");
        let result = match std::fs::read(&file.path) {
            Ok(raw) => pipeline.validate(&raw, &name),
            Err(e) => {
                failures += 1;
                eprintln!("{name}: E_IO: {e}");
                continue;
            }
        };
        match result {
            Ok(v) => {
                if args.json {
                    let record = serde_json::json!({"input": name, "status": "ok", "checks": v.checks});
                    println!("{record}");
                } else {
                    println!("{name}: ok ({} checks passed)", v.checks.len());
                }
            }
            Err(f) => {
                failures += 1;
                if args.json {
                    println!(
                        "{}",
                        serde_json::json!({"input": name, "status": "failed", "error": *f})
                    );
                } else {
                    println!("{name}: {} {}", f.code, f.message);
                    for c in f.checks.iter().filter(|c| !c.passed()) {
                        for finding in &c.findings {
                            println!("  {} {}: {}", c.check, finding.subject, finding.message);
                        }
                    }
                }
            }
        }
    }
    Ok(if failures == 0 { 0 } else { EXIT_FAILURES })
}

fn gen_corpus(args: GenCorpusArgs) -> Result<u8, u8> {
    let mut defects = args.inject_defects;
    defects.dedup();
    let defect_count = args.defect_count.unwrap_or(defects.len());
    let config =
        CorpusConfig::new(args.seed, args.count, args.min_size, args.max_size).with_defects(defects, defect_count);
    let manifest = write_corpus(&args.out, &config).map_err(|e| {
        eprintln!("error[{}]: {e}", e.code());
        EXIT_CONFIG
    })?;
    println!(
        "wrote {} specs ({} nodes, {} transitions, {} defective) to {}",
        manifest.totals.files,
        manifest.totals.nodes,
        manifest.totals.transitions,
        manifest.totals.defective,
        args.out.display()
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Convert(args) => convert(args),
        Command::Validate(args) => validate(args),
        Command::GenCorpus(args) => gen_corpus(args),
    };
    ExitCode::from(code.unwrap_or_else(|c| c))
}
