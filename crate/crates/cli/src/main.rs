use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use goalrec_core::bench::{self, BenchConfig, BenchError, Recognizer};
use goalrec_core::dataset::{build_dataset, Dataset, DatasetConfig, DatasetError};
use goalrec_core::domains::DomainKind;
use goalrec_core::neural::{train_on_dataset, CheckpointError, LstmModel, ModelConfig, NeuralError, TrainConfig};
use goalrec_core::oracle::{self, Fault, OracleConfig, Suite};
use goalrec_core::planner::SearchConfig;
use goalrec_core::traces::Rounding;

#[derive(Parser)]
#[command(name = "goalrec", version, about = "Goal recognition over STRIPS puzzles: datasets, recognizers, benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset (JSON Lines records plus manifest).
    Gen(GenArgs),
    /// Train the LSTM goal classifier on a dataset.
    Train(TrainArgs),
    /// Run recognizers over the test problems of one or more datasets.
    Bench(BenchArgs),
    /// Evaluate a checkpoint on problems whose goals never occur in training.
    Unknown(UnknownArgs),
    /// Compare components against their reference oracles.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Table,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoundingArg {
    Round,
    Ceil,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    domain: DomainKind,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory [default: data/<domain>]
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    problems: Option<usize>,
    #[arg(long)]
    candidates: Option<usize>,
    #[arg(long)]
    unknown_problems: Option<usize>,
    #[arg(long)]
    traces_per_goal: Option<usize>,
    #[arg(long)]
    extra_goals: Option<usize>,
    #[arg(long)]
    validation_fraction: Option<f64>,
    /// Observability levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<u32>>,
    #[arg(long, value_enum)]
    rounding: Option<RoundingArg>,
    #[arg(long)]
    min_distance: Option<usize>,
    #[arg(long)]
    max_distance: Option<usize>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint path [default: <data>/model.json]
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Embedding 1000, hidden 512 instead of the desk-sized 64 and 128.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long, conflicts_with = "paper_scale")]
    embed: Option<usize>,
    #[arg(long, conflicts_with = "paper_scale")]
    hidden: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Feed only the observed states, without the initial state.
    #[arg(long)]
    no_init: bool,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct BenchArgs {
    /// Dataset directory; repeat for several domains.
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    /// Checkpoint; repeat for several domains. Needed only for lstm.
    #[arg(long)]
    model: Vec<PathBuf>,
    /// Comma separated [default: pom_gc,pom_uniq,rg, plus lstm with --model]
    #[arg(long, value_delimiter = ',')]
    recognizers: Option<Vec<Recognizer>>,
    #[arg(long, value_delimiter = ',', default_value = "0,10")]
    theta: Vec<f64>,
    /// Levels to run [default: all in the dataset]
    #[arg(long, value_delimiter = ',')]
    levels: Vec<u32>,
    /// Expansion limit per search of the cost-difference recognizer.
    #[arg(long)]
    node_limit: Option<usize>,
    /// Directory for bench.csv and problems.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct UnknownArgs {
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    #[arg(long, required = true)]
    model: Vec<PathBuf>,
    /// File to write the report to, in the chosen format.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct OracleArgs {
    /// Suites to run, comma separated [default: all]
    #[arg(long, value_delimiter = ',')]
    suite: Vec<Suite>,
    /// Plant a known bug to confirm the matching suite catches it.
    #[arg(long)]
    inject_fault: Option<Fault>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    planner_cases: Option<usize>,
    #[arg(long)]
    landmark_cases: Option<usize>,
    #[arg(long)]
    gradient_seeds: Option<usize>,
    #[arg(long)]
    codec_samples: Option<usize>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

/// An oracle suite reported failures.
#[derive(Debug)]
struct OracleFailed(usize);

impl std::fmt::Display for OracleFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} oracle suite(s) failed", self.0)
    }
}

impl std::error::Error for OracleFailed {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Unknown(a) => cmd_unknown(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dataset_invariant(e: &DatasetError) -> bool {
    matches!(e, DatasetError::Invariant(_) | DatasetError::Checksum { .. } | DatasetError::Parse { .. } | DatasetError::Codec(_))
}

/// 2 for broken data or failed oracles, 1 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    let invariant = e.chain().any(|c| {
        if c.is::<OracleFailed>() {
            return true;
        }
        if let Some(d) = c.downcast_ref::<DatasetError>() {
            return dataset_invariant(d);
        }
        if let Some(CheckpointError::Invalid(_)) = c.downcast_ref::<CheckpointError>() {
            return true;
        }
        match c.downcast_ref::<BenchError>() {
            Some(BenchError::Dataset(d)) => return dataset_invariant(d),
            Some(BenchError::Codec(_)) => return true,
            _ => {}
        }
        matches!(c.downcast_ref::<NeuralError>(), Some(NeuralError::Dataset(d)) if dataset_invariant(d))
    });
    if invariant {
        2
    } else {
        1
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let mut cfg = DatasetConfig::for_domain(a.domain);
    cfg.seed = a.seed;
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = a.$f { cfg.$f = v; })* };
    }
    set!(problems, candidates, unknown_problems, traces_per_goal, extra_goals, validation_fraction, levels, min_distance, max_distance);
    if let Some(r) = a.rounding {
        cfg.rounding = match r {
            RoundingArg::Round => Rounding::Round,
            RoundingArg::Ceil => Rounding::Ceil,
        };
    }
    let out = a.out.unwrap_or_else(|| PathBuf::from("data").join(a.domain.name()));
    let ds = build_dataset(&cfg)?;
    let manifest = ds.write(&out)?;
    match a.format {
        Format::Json => print!("{}", json(&manifest)),
        Format::Csv => {
            println!("split,traces,records,goals");
            for (split, traces) in &manifest.counts.traces {
                println!("{},{},{},{}", split, traces, manifest.counts.records[split], manifest.counts.goals[split]);
            }
        }
        Format::Table => {
            println!("wrote {} ({})", out.display(), cfg.domain);
            println!("{:<18} {:>7} {:>8} {:>6}", "split", "traces", "records", "goals");
            for (split, traces) in &manifest.counts.traces {
                println!("{:<18} {:>7} {:>8} {:>6}", split, traces, manifest.counts.records[split], manifest.counts.goals[split]);
            }
            println!("sha256 {}", manifest.records_sha256);
        }
    }
    Ok(())
}

fn read_dataset(p: &Path) -> Result<Dataset> {
    Dataset::read(p).with_context(|| format!("reading dataset {}", p.display()))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let ds = read_dataset(&a.data)?;
    let mut model = if a.paper_scale { ModelConfig::paper_scale() } else { ModelConfig::desk() };
    if let Some(e) = a.embed {
        model.embed = e;
    }
    if let Some(h) = a.hidden {
        model.hidden = h;
    }
    let mut cfg = TrainConfig { seed: a.seed, include_init: !a.no_init, ..TrainConfig::default() };
    if let Some(v) = a.max_epochs {
        cfg.max_epochs = v;
    }
    if let Some(v) = a.patience {
        cfg.patience = v;
    }
    if let Some(v) = a.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    let (m, report) = train_on_dataset(&ds, &model, &cfg)?;
    let out = a.out.unwrap_or_else(|| a.data.join("model.json"));
    m.save(&out)?;
    match a.format {
        Format::Json => print!("{}", json(&report)),
        Format::Csv => {
            println!("epoch,train_loss,validation_loss");
            for (i, (t, v)) in report.train_loss.iter().zip(&report.validation_loss).enumerate() {
                println!("{},{t:.6},{v:.6}", i + 1);
            }
        }
        Format::Table => {
            println!("wrote {} ({}, embed {}, hidden {}, vocabulary {})", out.display(), m.domain, m.model.embed, m.model.hidden, m.vocab.len());
            println!("epochs run        {}{}", report.stopped_epoch, if report.early_stopped { " (early stop)" } else { "" });
            println!("best epoch        {}", report.best_epoch);
            println!("validation loss   {:.4} (untrained {:.4})", report.best_validation_loss(), report.initial_validation_loss);
            println!("training time     {:.1} s", report.elapsed_secs);
            println!("checksum          {}", report.checksum);
        }
    }
    Ok(())
}

fn load_models(paths: &[PathBuf]) -> Result<Vec<LstmModel>> {
    paths.iter().map(|p| LstmModel::load(p).with_context(|| format!("loading checkpoint {}", p.display()))).collect()
}

fn model_for(models: &[LstmModel], domain: DomainKind) -> Option<&LstmModel> {
    models.iter().find(|m| m.domain == domain)
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let models = load_models(&a.model)?;
    let recognizers = a.recognizers.unwrap_or_else(|| {
        let mut r = vec![Recognizer::PomGc, Recognizer::PomUniq, Recognizer::Rg];
        if !models.is_empty() {
            r.push(Recognizer::Lstm);
        }
        r
    });
    let mut search = SearchConfig::optimal();
    if let Some(n) = a.node_limit {
        if n == 0 {
            bail!("--node-limit must be positive");
        }
        search = search.with_node_limit(n);
    }
    let cfg = BenchConfig { recognizers, thetas: a.theta, levels: a.levels, search };
    let mut all = bench::BenchOutput::default();
    for path in &a.data {
        let ds = read_dataset(path)?;
        let out = bench::run_bench(&ds, model_for(&models, ds.config.domain), &cfg).with_context(|| format!("benchmarking {}", path.display()))?;
        all.rows.extend(out.rows);
        all.problems.extend(out.problems);
    }
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        emit(&bench::rows_csv(&all.rows), Some(&dir.join("bench.csv")))?;
        emit(&bench::problems_csv(&all.problems), Some(&dir.join("problems.csv")))?;
    }
    let text = match a.format {
        Format::Csv => bench::rows_csv(&all.rows),
        Format::Table => bench::rows_table(&all.rows),
        Format::Json => json(&all),
    };
    emit(&text, None)
}

fn cmd_unknown(a: UnknownArgs) -> Result<()> {
    let models = load_models(&a.model)?;
    let mut rows = Vec::new();
    for path in &a.data {
        let ds = read_dataset(path)?;
        let m = model_for(&models, ds.config.domain).with_context(|| format!("no checkpoint for {}", ds.config.domain))?;
        rows.extend(bench::run_unknown(&ds, m).with_context(|| format!("evaluating {}", path.display()))?);
    }
    let text = match a.format {
        Format::Csv => bench::unknown_csv(&rows),
        Format::Table => bench::unknown_table(&rows),
        Format::Json => json(&rows),
    };
    emit(&text, a.out.as_deref())
}

fn cmd_oracle(a: OracleArgs) -> Result<()> {
    let mut cfg = OracleConfig { seed: a.seed, fault: a.inject_fault, ..OracleConfig::default() };
    if let Some(v) = a.planner_cases {
        cfg.planner_cases = v;
    }
    if let Some(v) = a.landmark_cases {
        cfg.landmark_cases = v;
    }
    if let Some(v) = a.gradient_seeds {
        cfg.gradient_seeds = v;
    }
    if let Some(v) = a.codec_samples {
        cfg.codec_samples = v;
    }
    let suites = if a.suite.is_empty() { Suite::ALL.to_vec() } else { a.suite };
    let reports = oracle::run_all(&suites, &cfg);
    match a.format {
        Format::Json => print!("{}", json(&reports)),
        Format::Csv => {
            println!("suite,cases,failures,worst");
            for r in &reports {
                println!("{},{},{},{}", r.suite, r.cases, r.failures.len(), r.worst.map_or(String::new(), |w| format!("{w:e}")));
            }
        }
        Format::Table => {
            for r in &reports {
                let worst = r.worst.map_or(String::new(), |w| format!(", max relative error {w:.3e}"));
                println!("{} {:<10} {} cases{worst}", if r.passed() { "PASS" } else { "FAIL" }, r.suite.name(), r.cases);
                for f in &r.failures {
                    println!("     - {f}");
                }
            }
        }
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        return Err(OracleFailed(failed).into());
    }
    Ok(())
}
