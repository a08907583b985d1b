//! `plurvec`: command-line front end for the pluralization toolkit.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error.

mod commands;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use plurvec::Metric;

#[derive(Parser)]
#[command(name = "plurvec", version, about = "Vector-space models of English noun pluralization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embedding tables
    #[command(subcommand)]
    Embed(EmbedCmd),
    /// Shift vectors and their statistics
    #[command(subcommand)]
    Shifts(ShiftsCmd),
    /// Analogy-based pluralizers
    #[command(subcommand)]
    Analogy(AnalogyCmd),
    /// Linear singular/plural maps
    #[command(subcommand)]
    Fracss(FracssCmd),
    /// Class-label prediction from vectors
    #[command(subcommand)]
    Classify(ClassifyCmd),
    /// Triphone-to-meaning comprehension
    #[command(subcommand)]
    Dl(DlCmd),
    /// Nonparametric tests (JSON output)
    #[command(subcommand)]
    Stats(StatsCmd),
    /// Synthetic data
    #[command(subcommand)]
    Synth(SynthCmd),
}

#[derive(Args, Clone)]
struct TableArgs {
    /// Embeddings in word2vec text format
    #[arg(long)]
    embeddings: PathBuf,
    /// Reject tables whose dimension differs
    #[arg(long)]
    dim: Option<usize>,
    /// Scale every vector to unit length after loading
    #[arg(long)]
    normalize: bool,
}

#[derive(Args, Clone)]
struct PairArgs {
    #[command(flatten)]
    table: TableArgs,
    /// Pairs TSV: singular, plural, optional class
    #[arg(long)]
    pairs: PathBuf,
    /// Drop pairs with words missing from the table instead of failing
    #[arg(long)]
    skip_missing: bool,
}

#[derive(Args, Clone)]
struct EvalArgs {
    #[arg(long, value_enum, default_value = "cosine")]
    metric: MetricArg,
    /// Top-n cut-offs
    #[arg(long, value_delimiter = ',', default_value = "2,3,10,20")]
    topn: Vec<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Cosine,
    Euclidean,
    Pearson,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Cosine => Metric::Cosine,
            MetricArg::Euclidean => Metric::Euclidean,
            MetricArg::Pearson => Metric::Pearson,
        }
    }
}

#[derive(Subcommand)]
enum EmbedCmd {
    /// Validate a table and print a summary; optionally re-save it
    Load {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportArg {
    Shift,
    Singular,
    Plural,
}

#[derive(Subcommand)]
enum ShiftsCmd {
    /// Per-pair lengths and angles, group summaries and tests
    Stats {
        #[command(flatten)]
        pairs: PairArgs,
        /// Axis for shift angles (0-based; default last)
        #[arg(long)]
        axis: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average shift vector per class
    Classavg {
        #[command(flatten)]
        pairs: PairArgs,
        #[arg(long, default_value_t = 5)]
        min_class_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// `word<TAB>class<TAB>v1..vd` rows for external projection
    ExportTsneInput {
        #[command(flatten)]
        pairs: PairArgs,
        #[arg(long, value_enum, default_value = "shift")]
        kind: ExportArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    #[value(name = "only-b")]
    OnlyB,
    #[value(name = "3cosadd")]
    ThreeCosAdd,
    #[value(name = "3cosavg")]
    ThreeCosAvg,
    #[value(name = "cosclassavg")]
    CosClassAvg,
    All,
}

#[derive(Subcommand)]
enum AnalogyCmd {
    /// Rank each gold plural among the dataset words
    Evaluate {
        #[command(flatten)]
        pairs: PairArgs,
        #[arg(long, value_enum, default_value = "all")]
        method: MethodArg,
        /// Prime pair for 3CosAdd as `singular,plural`
        #[arg(long, value_name = "SG,PL")]
        prime: Option<String>,
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, default_value_t = 5)]
        min_class_size: usize,
        /// Remove singulars from the candidate pool
        #[arg(long)]
        filter_singulars: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum FracssCmd {
    /// Fit a singular→plural map on all pairs
    Fit {
        #[command(flatten)]
        pairs: PairArgs,
        #[arg(long, default_value_t = 0.0)]
        ridge: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the plural→singular map on all pairs
    Invert {
        #[command(flatten)]
        pairs: PairArgs,
        #[arg(long, default_value_t = 0.0)]
        ridge: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Map word vectors through a saved map
    Apply {
        #[arg(long)]
        map: PathBuf,
        #[command(flatten)]
        table: TableArgs,
        /// Words to map (default: every word)
        #[arg(long, value_delimiter = ',')]
        words: Vec<String>,
        /// Mapped vectors in word2vec text format
        #[arg(long)]
        out: PathBuf,
        /// Also write the k nearest table words of each mapped vector
        #[arg(long)]
        neighbors: Option<usize>,
        #[arg(long, value_enum, default_value = "cosine")]
        metric: MetricArg,
    },
    /// Diagonal profile of a saved map (JSON)
    Profile {
        #[arg(long)]
        map: PathBuf,
    },
    /// Split, fit both directions, profile and evaluate
    Evaluate {
        #[command(flatten)]
        pairs: PairArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        ridge: f64,
        #[arg(long, default_value_t = 0.1)]
        test_fraction: f64,
        #[arg(long, value_enum, default_value = "cosine")]
        metric: MetricArg,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,10,20")]
        topn: Vec<usize>,
        /// Remove source-side words from the candidate pool
        #[arg(long)]
        filter_sources: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SmallClassArg {
    Strict,
    Drop,
}

#[derive(Subcommand)]
enum ClassifyCmd {
    /// Linear discriminant analysis with cross-validation
    Lda {
        /// TSV: id, then label and feature columns
        #[arg(long)]
        vectors: PathBuf,
        /// 1-based column holding the label
        #[arg(long, default_value_t = 2)]
        labels: usize,
        #[arg(long, default_value_t = 1e-3)]
        shrinkage: f64,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Plain (unstratified) folds
        #[arg(long)]
        unstratified: bool,
        /// Classes smaller than the fold count
        #[arg(long, value_enum, default_value = "strict")]
        small_classes: SmallClassArg,
        /// Fit and score on the full data instead of cross-validating
        #[arg(long)]
        train_eval: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
struct DlInputs {
    /// `WORD<TAB>PHONES` pronunciation lexicon
    #[arg(long)]
    lexicon: PathBuf,
    /// `word<TAB>singular|plural<TAB>partner-or-dash`
    #[arg(long)]
    pair_info: PathBuf,
    #[command(flatten)]
    table: TableArgs,
    /// Labelled pairs for class-average or map-based targets
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SourceArg {
    Raw,
    Cosclassavg,
    Fracss,
    All,
}

#[derive(Subcommand)]
enum DlCmd {
    /// Write the seeded train/test split
    Split {
        #[command(flatten)]
        inputs: DlInputs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the form-to-meaning map on the training tokens
    Fit {
        #[command(flatten)]
        inputs: DlInputs,
        #[arg(long, value_enum, default_value = "raw")]
        source: SourceArg,
        #[arg(long, default_value_t = 0.0)]
        ridge: f64,
        #[arg(long, default_value_t = 5)]
        min_class_size: usize,
        /// Output directory for the map and triphone list
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit and evaluate for one or all semantic sources
    Evaluate {
        #[command(flatten)]
        inputs: DlInputs,
        #[arg(long, value_enum, default_value = "all")]
        source: SourceArg,
        #[arg(long, default_value_t = 0.0)]
        ridge: f64,
        #[arg(long, default_value_t = 5)]
        min_class_size: usize,
        #[arg(long, value_enum, default_value = "pearson")]
        metric: MetricArg,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        topn: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AltArg {
    TwoSided,
    Greater,
    Less,
}

#[derive(Subcommand)]
enum StatsCmd {
    /// Signed-rank test on one column of differences or two paired columns
    Wilcoxon {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "two-sided")]
        alternative: AltArg,
    },
    /// Rank test over blocks (rows) and conditions (columns)
    Friedman {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Classes,
    Linear,
    Lexicon,
}

#[derive(Subcommand)]
enum SynthCmd {
    /// Generate a synthetic dataset into a directory
    Gen {
        #[arg(long, value_enum, default_value = "classes")]
        kind: SynthKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        classes: usize,
        #[arg(long, default_value_t = 50)]
        lexemes: usize,
        #[arg(long, default_value_t = 50)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        shift_scale: f64,
        #[arg(long, default_value_t = 0.05)]
        sigma_lexeme: f64,
        #[arg(long, default_value_t = 0.01)]
        sigma: f64,
        /// Rows for `--kind linear`
        #[arg(long, default_value_t = 2000)]
        rows: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// A failure with its exit code.
pub enum Failure {
    Usage(String),
    Data(String),
}

impl From<plurvec::Error> for Failure {
    fn from(e: plurvec::Error) -> Self {
        match e {
            plurvec::Error::InvalidArgument(_) | plurvec::Error::Empty(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
