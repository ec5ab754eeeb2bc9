use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "sentibucket", version, about = "Sentiment-aware response selection for a multi-bot chat system")]
struct Cli {
    /// Log verbosity for diagnostics on stderr (e.g. `info`, `debug`).
    #[arg(long, global = true, env = "SENTIBUCKET_LOG", default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn raw annotations or an existing corpus into a training corpus, or
    /// sample candidate utterances for annotation.
    Prepare(PrepareArgs),
    /// Cohen's kappa over annotator overlaps.
    Kappa(KappaArgs),
    /// Train a model (or configure a lexicon scorer) and write the artifact.
    Train(TrainArgs),
    /// Score a model artifact against an annotated corpus.
    Evaluate(EvaluateArgs),
    /// Run the experiment matrix and print the comparison tables.
    Matrix(MatrixArgs),
    /// Label text with a model artifact.
    Predict(PredictArgs),
    /// Start the chat HTTP service.
    Serve(ServeArgs),
    /// Summarize A/B survey results.
    AbReport(AbReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Tsv,
    Jsonl,
    /// TSV annotations where `skip` is allowed; skipped rows are dropped.
    Annotations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Tsv,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Input corpus or annotation file.
    #[arg(long, required_unless_present = "pool")]
    pub input: Option<PathBuf>,
    /// Input layout; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    pub input_format: Option<InputFormat>,
    /// Append one single-word sample per discretizable Vader lexicon entry.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Drop records flagged ambiguous.
    #[arg(long)]
    pub exclude_ambiguous: bool,
    /// Merge strong and weak polarities into three classes.
    #[arg(long)]
    pub collapse: bool,
    /// Candidate sampling: one utterance per line to sample from.
    #[arg(long, conflicts_with_all = ["input", "lexicon", "exclude_ambiguous", "collapse"], requires = "opinion_words")]
    pub pool: Option<PathBuf>,
    /// Opinion word list, one word per line.
    #[arg(long)]
    pub opinion_words: Option<PathBuf>,
    /// Utterances containing an opinion word.
    #[arg(long, default_value_t = 600)]
    pub lexical: usize,
    /// Additional utterances drawn uniformly.
    #[arg(long, default_value_t = 600)]
    pub random: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output layout; guessed from `--out` when omitted.
    #[arg(long, value_enum)]
    pub out_format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KappaModeArg {
    IgnoreSkips,
    StrictSkips,
}

#[derive(Debug, Args)]
pub struct KappaArgs {
    /// `text<TAB>label_a<TAB>label_b[<TAB>pair]` rows.
    #[arg(long)]
    pub overlap: PathBuf,
    #[arg(long, value_enum, default_value = "ignore-skips")]
    pub mode: KappaModeArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Forest,
    NaiveBayes,
    Afinn,
    Vader,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value = "forest")]
    pub model: ModelArg,
    /// Annotated training corpus (forest and naive-bayes).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Vader lexicon whose word samples join the training set (forest and
    /// naive-bayes), or the scoring lexicon (afinn and vader).
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = 25)]
    pub trees: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Naive Bayes smoothing.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Largest vocabulary kept, by frequency.
    #[arg(long)]
    pub max_vocab: Option<usize>,
    /// Drop common function words before vectorizing.
    #[arg(long)]
    pub stop_words: bool,
    /// Lexicon scorer cut-points `t1,t2,t3,t4`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Annotated test corpus.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Score on three collapsed classes.
    #[arg(long)]
    pub collapse: bool,
    #[arg(long, value_enum, default_value = "table")]
    pub format: ReportFormat,
    /// Decimals in percentages.
    #[arg(long, default_value_t = 0)]
    pub decimals: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixFormat {
    /// Precision/recall/F per row.
    Table,
    /// Accuracy per row.
    Accuracy,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    /// Annotated corpus; JSONL keeps ambiguity flags.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Matrix TOML; the built-in comparison when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub afinn: Option<PathBuf>,
    /// Vader lexicon, for lexicon-sample rows and the Vader baseline.
    #[arg(long)]
    pub vader: Option<PathBuf>,
    /// Second corpus for cross-corpus rows.
    #[arg(long)]
    pub cross_corpus: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: MatrixFormat,
    /// Write the resolved config instead of running it.
    #[arg(long)]
    pub print_config: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Text to label; repeatable. Reads lines from stdin when omitted.
    #[arg(long)]
    pub text: Vec<String>,
    /// One JSON object per input.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Server TOML.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub bots_dir: Option<PathBuf>,
    #[arg(long)]
    pub gating: Option<PathBuf>,
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AbReportArgs {
    /// Survey results or a session export, as JSON lines.
    #[arg(long)]
    pub surveys: PathBuf,
    #[arg(long)]
    pub json: bool,
}

/// Write to `out` or stdout.
pub fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    use anyhow::Context;
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_new(&cli.log).unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let result = match cli.command {
        Command::Prepare(a) => commands::prepare(&a),
        Command::Kappa(a) => commands::kappa(&a),
        Command::Train(a) => commands::train(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Matrix(a) => commands::matrix(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Serve(a) => commands::serve(&a),
        Command::AbReport(a) => commands::ab_report(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
