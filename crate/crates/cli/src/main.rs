//! `relgraph` command-line tool.
//!
//! Exit codes: 0 success, 1 configuration or validation error, 2 conversion
//! aborted under the `fail` error policy.

mod specs;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use relgraph::bench::{run_bench, BenchParams};
use relgraph::convert::{run, ConvertError, OnError, RunConfig, DEFAULT_BATCH_SIZE};
use relgraph::schema::{missing_columns, ConversionPlan};
use relgraph::sink::{CommitSink, CypherSink, HttpConfig, HttpSink, JsonSink};
use relgraph::{link_plan, parse_schema, presets, LinkedPlan, WrapperRegistry};

use specs::{open_sources, SinkSpec, SourceSpec};

#[derive(Parser)]
#[command(name = "relgraph", version, about = "Convert relational data into a property graph")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and link a schema; with sources, also check referenced columns.
    Validate {
        schema: PathBuf,
        /// sqlite:<path>, csv:<dir> or jsonl:<path>@<type>; repeatable.
        #[arg(long = "source")]
        sources: Vec<SourceSpec>,
    },
    /// Convert sources into a graph and write it to a sink.
    Convert(ConvertArgs),
    /// Generate a synthetic commit history and time its conversion.
    Bench(BenchArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    /// fail or skip.
    #[arg(long, default_value = "fail")]
    on_error: OnError,
    /// Print progress to stderr.
    #[arg(long)]
    progress: bool,
}

impl RunArgs {
    fn config(&self) -> RunConfig {
        let mut config = RunConfig::default()
            .with_batch_size(self.batch_size)
            .with_on_error(self.on_error);
        if let Some(w) = self.workers {
            config = config.with_workers(w);
        }
        if self.progress {
            config = config.with_progress(|p| match p.total {
                Some(total) => eprintln!("{}: {}/{total}", p.phase, p.done),
                None => eprintln!("{}: {}", p.phase, p.done),
            });
        }
        config
    }
}

#[derive(Args)]
struct ConvertArgs {
    schema: PathBuf,
    /// sqlite:<path>, csv:<dir> or jsonl:<path>@<type>; repeatable, chained in order.
    #[arg(long = "source", required = true)]
    sources: Vec<SourceSpec>,
    /// json:<path>, cypher:<path> or http:<url>.
    #[arg(long)]
    sink: SinkSpec,
    /// Database name for the http sink.
    #[arg(long, default_value = "neo4j")]
    db: String,
    /// User for the http sink.
    #[arg(long)]
    user: Option<String>,
    /// Environment variable holding the http sink password.
    #[arg(long)]
    password_env: Option<String>,
    /// Statements per http request.
    #[arg(long, default_value_t = 1000)]
    http_batch: usize,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 100_000)]
    edits: u64,
    /// Defaults to a fifth of the edits.
    #[arg(long)]
    commits: Option<u64>,
    /// Fraction of edits that rename a file.
    #[arg(long, default_value_t = 0.1)]
    renames: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Where to write the generated database; a temporary file by default.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

enum Failure {
    Config(anyhow::Error),
    Aborted(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

fn registry() -> WrapperRegistry {
    let mut r = WrapperRegistry::with_builtins();
    for name in presets::BUNDLES {
        presets::register(name, &mut r).expect("bundles do not overlap");
    }
    r
}

/// Reads, parses and links a schema, printing warnings.
fn load_schema(path: &Path, registry: &WrapperRegistry) -> anyhow::Result<(ConversionPlan, LinkedPlan)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let file = path.display().to_string();
    let plan = parse_schema(&text).map_err(|e| anyhow!(e.render(&file)))?;
    for w in &plan.warnings {
        eprintln!("{}", w.render(&file));
    }
    let linked = link_plan(&plan, registry).map_err(|e| anyhow!(e.render(&file)))?;
    Ok((plan, linked))
}

fn validate(schema: &Path, sources: &[SourceSpec]) -> Result<(), Failure> {
    let registry = registry();
    let (plan, linked) = load_schema(schema, &registry)?;
    if !sources.is_empty() {
        let source = open_sources(sources).map_err(anyhow::Error::from)?;
        let issues = missing_columns(&plan, &registry, &source.columns());
        for issue in &issues {
            eprintln!("{}", issue.render(&schema.display().to_string()));
        }
        let errors = issues.iter().filter(|i| i.is_error()).count();
        if errors > 0 {
            return Err(Failure::Config(anyhow!("{errors} missing column(s)")));
        }
    }
    let (nodes, relationships) = linked.template_totals();
    println!(
        "ok: {} entities, {nodes} node templates, {relationships} relationship templates",
        plan.entities.len()
    );
    Ok(())
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn aborted(e: ConvertError) -> Failure {
    match e {
        ConvertError::Config(_) => Failure::Config(e.into()),
        e => Failure::Aborted(anyhow::Error::from(e).context("conversion aborted")),
    }
}

fn convert(args: &ConvertArgs) -> Result<(), Failure> {
    let registry = registry();
    let (_, plan) = load_schema(&args.schema, &registry)?;
    let mut source = open_sources(&args.sources).map_err(anyhow::Error::from)?;
    let mut sink: Box<dyn CommitSink> = match &args.sink {
        SinkSpec::Json(path) => Box::new(JsonSink::new(create(path)?)),
        SinkSpec::Cypher(path) => Box::new(CypherSink::new(create(path)?)),
        SinkSpec::Http(url) => {
            let mut cfg = HttpConfig::new(url.clone(), args.db.clone());
            cfg.user = args.user.clone();
            cfg.batch_size = args.http_batch;
            if let Some(var) = &args.password_env {
                let password = std::env::var(var).with_context(|| format!("environment variable {var} is not set"))?;
                cfg.password = Some(password);
            }
            Box::new(HttpSink::new(cfg))
        }
    };
    let output = run(&plan, &mut source, &mut *sink, &args.run.config()).map_err(aborted)?;
    print_json(&output.report)?;
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<(), Failure> {
    let mut params = BenchParams::for_edits(args.edits, args.seed);
    params.rename_fraction = args.renames;
    if let Some(c) = args.commits {
        params.commits = c;
    }
    let tmp;
    let path = match &args.out {
        Some(p) => p.clone(),
        None => {
            tmp = tempfile::tempdir().context("cannot create a temporary directory")?;
            tmp.path().join("bench.db")
        }
    };
    let report = run_bench(&path, &params, &args.run.config()).map_err(|e| match e {
        relgraph::bench::BenchError::Convert(c) => aborted(c),
        e => Failure::Config(e.into()),
    })?;
    eprintln!(
        "{} rows in {:.2} s ({:.0} rows/s; nodes {:.2} s, relationships {:.2} s)",
        report.rows,
        report.total_seconds,
        report.rows_per_second,
        report.run.timing.phase1_seconds,
        report.run.timing.phase2_seconds
    );
    print_json(&report)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are configuration errors; exit 2 means an aborted run.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Validate { schema, sources } => validate(schema, sources),
        Command::Convert(args) => convert(args),
        Command::Bench(args) => bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Aborted(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
