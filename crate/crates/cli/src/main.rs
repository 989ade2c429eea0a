//! `fd-eval` command-line interface.
//!
//! Exit codes: 0 success, 1 parse/validation/usage failure, 2 numerical
//! failure, 3 I/O failure. Errors are written to stderr as one JSON object.

use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fd_eval::pipeline::{
    bootstrap_fd, bootstrap_metric, evaluate_system, sparsify_qrels_with, SparsifyConfig,
    DEFAULT_MAX_MISSING_RATE,
};
use fd_eval::{
    compare_systems, load_store, parse_qrels, parse_run, BootstrapConfig, CompareConfig,
    EmbeddingStore, EvalReport, FdOptions, Gain, MetricKind, Qrels, RunFile,
};
use serde_json::json;

const THREADS_ENV: &str = "FD_EVAL_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fd-eval", version, about = "Embedding-distribution evaluation of retrieval runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score one run: MRR@k, nDCG@k, FD@k and optionally FD-URR@k.
    Eval(EvalArgs),
    /// Score several runs and correlate the system orderings of every metric pair.
    Compare(EvalArgs),
    /// Percentile bootstrap intervals over queries for one run.
    Bootstrap(BootstrapArgs),
    /// Keep at most N relevant judgments per query.
    Sparsify(SparsifyArgs),
    /// Load an embedding store and report its metadata.
    ValidateStore(StoreArgs),
}

#[derive(Debug, Args)]
struct StoreArgs {
    #[arg(long, value_name = "DIR")]
    store: PathBuf,
}

#[derive(Debug, Args)]
struct ScoringArgs {
    #[arg(long, value_name = "PATH")]
    qrels: PathBuf,
    #[arg(long = "run", value_name = "PATH", required = true)]
    runs: Vec<PathBuf>,
    #[arg(long, value_name = "DIR")]
    store: PathBuf,
    /// Comma-separated cutoffs.
    #[arg(long = "k", value_name = "LIST", value_delimiter = ',', default_value = "10")]
    cutoffs: Vec<usize>,
    /// Lowest grade counted as relevant.
    #[arg(long, value_name = "N", default_value_t = 1)]
    threshold: u32,
    #[arg(long, value_name = "linear|exp", default_value = "linear")]
    gain: Gain,
    /// Abort when more than this fraction of pool rows lack an embedding.
    #[arg(long, value_name = "F", default_value_t = DEFAULT_MAX_MISSING_RATE)]
    max_missing_rate: f64,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    scoring: ScoringArgs,
    /// Also report FD-URR@k.
    #[arg(long)]
    urr: bool,
    /// Recorded in the report settings; scoring itself is not random.
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct BootstrapArgs {
    #[command(flatten)]
    scoring: ScoringArgs,
    #[arg(long, value_name = "N", default_value_t = 1000)]
    resamples: usize,
    #[arg(long, value_name = "F", default_value_t = 0.95)]
    confidence: f64,
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SparsifyArgs {
    #[arg(long, value_name = "PATH")]
    qrels: PathBuf,
    #[arg(long, value_name = "N")]
    max_per_query: usize,
    #[arg(long, value_name = "N", default_value_t = 1)]
    threshold: u32,
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

/// A failure with its exit code and a short machine-readable kind.
#[derive(Debug)]
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
    path: Option<PathBuf>,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, kind: "usage", message: message.into(), path: None }
    }

    fn io(path: &Path, err: io::Error) -> Self {
        Self { code: 3, kind: "io", message: err.to_string(), path: Some(path.to_owned()) }
    }

    fn at(mut self, path: &Path) -> Self {
        self.path.get_or_insert_with(|| path.to_owned());
        self
    }

    fn to_json(&self) -> String {
        let mut err = json!({
            "code": self.code,
            "kind": self.kind,
            "message": self.message,
        });
        if let Some(p) = &self.path {
            err["path"] = json!(p.display().to_string());
        }
        json!({ "error": err }).to_string()
    }
}

impl From<fd_eval::Error> for Failure {
    fn from(e: fd_eval::Error) -> Self {
        use fd_eval::Error as E;
        let (code, kind) = match &e {
            E::Parse(fd_eval::trec::ParseError::Io(_)) => (3, "io"),
            E::Parse(_) => (1, "parse"),
            E::Store(s) if s.is_io() => (3, "io"),
            E::Store(_) => (1, "store"),
            E::MissingEmbeddings { .. } => (1, "missing_embeddings"),
            E::InvalidInput(_) => (1, "invalid_input"),
            E::Numeric(_) => (2, "numeric"),
            E::PoolTooSmall { .. } => (2, "pool_too_small"),
            E::Insufficient(_) => (2, "insufficient"),
            E::Degenerate(_) => (2, "degenerate"),
        };
        Self { code, kind, message: e.to_string(), path: None }
    }
}

impl From<fd_eval::store::StoreError> for Failure {
    fn from(e: fd_eval::store::StoreError) -> Self {
        fd_eval::Error::from(e).into()
    }
}

type CliResult<T> = Result<T, Failure>;

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::io(path, e))
}

fn read_qrels(path: &Path) -> CliResult<Qrels> {
    parse_qrels(open(path)?).map_err(|e| Failure::from(fd_eval::Error::from(e)).at(path))
}

fn read_run(path: &Path) -> CliResult<RunFile> {
    let mut run = parse_run(open(path)?).map_err(|e| Failure::from(fd_eval::Error::from(e)).at(path))?;
    if run.tag.is_empty() {
        run.tag = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    }
    Ok(run)
}

fn read_store(path: &Path) -> CliResult<EmbeddingStore> {
    load_store(path).map_err(|e| Failure::from(e).at(path))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::io(&path, e))
}

fn print_stdout(contents: &str) -> CliResult<()> {
    io::stdout()
        .lock()
        .write_all(contents.as_bytes())
        .map_err(|e| Failure::io(Path::new("<stdout>"), e))
}

struct Inputs {
    qrels: Qrels,
    runs: Vec<RunFile>,
    store: EmbeddingStore,
}

impl ScoringArgs {
    fn load(&self) -> CliResult<Inputs> {
        if self.cutoffs.is_empty() {
            return Err(Failure::usage("--k needs at least one cutoff"));
        }
        let store = read_store(&self.store)?;
        let qrels = read_qrels(&self.qrels)?;
        let runs = self.runs.iter().map(|p| read_run(p)).collect::<CliResult<Vec<_>>>()?;
        Ok(Inputs { qrels, runs, store })
    }

    fn config(&self, kinds: Vec<MetricKind>) -> CompareConfig {
        CompareConfig {
            cutoffs: self.cutoffs.clone(),
            kinds,
            relevance_threshold: self.threshold,
            gain: self.gain,
            max_missing_rate: self.max_missing_rate,
            ..Default::default()
        }
    }
}

fn metric_kinds(urr: bool) -> Vec<MetricKind> {
    let mut kinds = vec![MetricKind::Mrr, MetricKind::Ndcg, MetricKind::Fd];
    if urr {
        kinds.push(MetricKind::FdUrr);
    }
    kinds
}

fn emit_report(report: &EvalReport, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(dir) => {
            write_file(dir, "report.json", &report.to_json())?;
            write_file(dir, "report.txt", &report.render_table())?;
            print_stdout(&report.render_table())
        }
        None => print_stdout(&report.to_json()),
    }
}

fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    if args.scoring.runs.len() != 1 {
        return Err(Failure::usage(format!(
            "eval takes exactly one --run, got {}",
            args.scoring.runs.len()
        )));
    }
    let inputs = args.scoring.load()?;
    let cfg = args.scoring.config(metric_kinds(args.urr));
    let eval = evaluate_system(&inputs.runs[0], &inputs.qrels, &inputs.store, &cfg)?;
    let mut report = EvalReport::new(vec![eval], &cfg, &inputs.store);
    report.settings.seed = Some(args.seed);
    emit_report(&report, args.scoring.out.as_deref())
}

fn cmd_compare(args: &EvalArgs) -> CliResult<()> {
    if args.scoring.runs.len() < 2 {
        return Err(Failure::usage(format!(
            "compare needs at least 2 --run files, got {}",
            args.scoring.runs.len()
        )));
    }
    let inputs = args.scoring.load()?;
    let cfg = args.scoring.config(metric_kinds(args.urr));
    let mut report = compare_systems(&inputs.runs, &inputs.qrels, &inputs.store, &cfg)?;
    report.settings.seed = Some(args.seed);
    emit_report(&report, args.scoring.out.as_deref())
}

fn cmd_bootstrap(args: &BootstrapArgs) -> CliResult<()> {
    if args.scoring.runs.len() != 1 {
        return Err(Failure::usage(format!(
            "bootstrap takes exactly one --run, got {}",
            args.scoring.runs.len()
        )));
    }
    let inputs = args.scoring.load()?;
    let run = &inputs.runs[0];
    let cfg = args.scoring.config(vec![MetricKind::Mrr, MetricKind::Ndcg]);
    let boot = BootstrapConfig {
        n_resamples: args.resamples,
        confidence: args.confidence,
        seed: args.seed,
        ..Default::default()
    };
    let eval = evaluate_system(run, &inputs.qrels, &inputs.store, &cfg)?;
    let mut results = Vec::new();
    for (id, per_query) in &eval.per_query {
        results.push(bootstrap_metric(&id.to_string(), per_query, &boot)?);
    }
    for &k in &args.scoring.cutoffs {
        let opts = FdOptions {
            k,
            relevance_threshold: args.scoring.threshold,
            max_missing_rate: args.scoring.max_missing_rate,
        };
        results.push(bootstrap_fd(run, &inputs.qrels, &inputs.store, &opts, &boot)?);
    }
    let mut doc = json!({
        "system": run.tag,
        "intervals": results,
        "settings": {
            "n_resamples": boot.n_resamples,
            "confidence": boot.confidence,
            "seed": boot.seed,
            "cutoffs": args.scoring.cutoffs,
            "relevance_threshold": args.scoring.threshold,
            "gain": args.scoring.gain,
            "max_missing_rate": args.scoring.max_missing_rate,
        },
    });
    fd_eval::report::round_floats(&mut doc);
    let mut text = serde_json::to_string_pretty(&doc).expect("json value serializes");
    text.push('\n');
    match &args.scoring.out {
        Some(dir) => write_file(dir, "bootstrap.json", &text),
        None => print_stdout(&text),
    }
}

fn cmd_sparsify(args: &SparsifyArgs) -> CliResult<()> {
    let qrels = read_qrels(&args.qrels)?;
    let outcome = sparsify_qrels_with(
        &qrels,
        &SparsifyConfig {
            max_per_query: args.max_per_query,
            seed: args.seed,
            relevance_threshold: args.threshold,
        },
    )?;
    let text = outcome.qrels.to_trec_string();
    match &args.out {
        Some(dir) => {
            write_file(dir, "qrels.sparsified.txt", &text)?;
            let summary = json!({
                "max_per_query": args.max_per_query,
                "seed": args.seed,
                "relevance_threshold": args.threshold,
                "queries": outcome.qrels.n_queries(),
                "judgments": outcome.qrels.n_judgments(),
                "sampled_queries": outcome.sampled_queries,
                "tier_usage": outcome.tier_usage,
            });
            let mut s = serde_json::to_string_pretty(&summary).expect("json value serializes");
            s.push('\n');
            write_file(dir, "sparsify.json", &s)
        }
        None => print_stdout(&text),
    }
}

fn cmd_validate_store(args: &StoreArgs) -> CliResult<()> {
    let store = read_store(&args.store)?;
    let summary = json!({
        "valid": true,
        "encoder": store.encoder(),
        "dim": store.dim(),
        "count": store.count(),
    });
    print_stdout(&format!("{summary}\n"))
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Bootstrap(a) => cmd_bootstrap(a),
        Command::Sparsify(a) => cmd_sparsify(a),
        Command::ValidateStore(a) => cmd_validate_store(a),
    }
}

fn thread_count() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) | Err(_) => Err(Failure::usage(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
            Ok(n) => Ok(Some(n)),
        },
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    match thread_count()? {
        None => dispatch(cli),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure::usage(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(cli))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let f = Failure::usage(e.render().to_string().trim_end());
            eprintln!("{}", f.to_json());
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            log::debug!("exiting with code {}", f.code);
            eprintln!("{}", f.to_json());
            ExitCode::from(f.code)
        }
    }
}
