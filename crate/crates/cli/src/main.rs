mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lexpalo::corpus_io::Format;
use lexpalo::genre_graph::Linkage;

use crate::output::CliError;

#[derive(Parser)]
#[command(name = "lexpalo", version, about = "Lexical statistics and palo classification for flamenco lyric corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Corpus loading, preprocessing and output options shared by every
/// corpus-driven command.
#[derive(Args, Debug, Clone)]
pub struct CorpusArgs {
    /// Corpus file (JSONL or CSV with id, palo and text fields).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Corpus format; guessed from the file extension when omitted.
    #[arg(long)]
    pub format: Option<Format>,
    /// Keep only palos with at least this many lyrics.
    #[arg(long, default_value_t = 100)]
    pub min_lyrics: usize,
    /// Capitalized forms are lowered when their share is below this value.
    #[arg(long, default_value_t = lexpalo::preprocess::DEFAULT_GAMMA)]
    pub gamma: f64,
    /// Stop-word list replacing the bundled one.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Multiword-name map replacing the bundled one.
    #[arg(long)]
    pub concat_map: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 0.85)]
    pub train_fraction: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Token and type counts, sTTR, palo hapax, Zipf and Heaps fits.
    Stats {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Windows drawn per palo for sTTR.
        #[arg(long, default_value_t = 50)]
        windows: usize,
    },
    /// Repeated trainings: accuracy, confusion matrices and a full-corpus model.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, default_value_t = 0.11)]
        alpha: f64,
        #[arg(long, default_value_t = 100)]
        runs: usize,
    },
    /// Mean validation accuracy over a grid of smoothing values.
    SweepAlpha {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, default_value_t = 0.005)]
        step: f64,
        #[arg(long, default_value_t = 200)]
        runs: usize,
    },
    /// Essential words per palo.
    Essential {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, default_value_t = 0.11)]
        alpha: f64,
        #[arg(long, default_value_t = 500)]
        runs: usize,
        /// Relative tolerance for sitting at a run's minimum probability.
        #[arg(long, default_value_t = lexpalo::experiments::DEFAULT_EPSILON)]
        epsilon: f64,
    },
    /// Cosine distances between palos, dendrogram, network and centrality.
    Distances {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value = "average")]
        linkage: Linkage,
    },
    /// Minimum spanning tree of the palo distance network.
    Mst {
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Predict the palo of a text with a saved model.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        text: String,
        /// Also print every class score.
        #[arg(long)]
        scores: bool,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("LEXPALO_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("LEXPALO_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<String, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Stats { corpus, windows } => commands::stats(&corpus, windows),
        Command::Train {
            corpus,
            split,
            alpha,
            runs,
        } => commands::train(&corpus, &split, alpha, runs),
        Command::SweepAlpha {
            corpus,
            split,
            step,
            runs,
        } => commands::sweep_alpha(&corpus, &split, step, runs),
        Command::Essential {
            corpus,
            split,
            alpha,
            runs,
            epsilon,
        } => commands::essential(&corpus, &split, alpha, runs, epsilon),
        Command::Distances { corpus, linkage } => commands::distances(&corpus, linkage),
        Command::Mst { corpus } => commands::mst(&corpus),
        Command::Classify { model, text, scores } => commands::classify(&model, &text, scores),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("lexpalo: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
