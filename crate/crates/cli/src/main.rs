//! `wordmap`: compare text corpora through word vectors and export a 2D map.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;
use wordmap::pipeline::{self, PipelineConfig};
use wordmap::{
    parse_map, EmbeddingError, EmbeddingModel, ModelFormat, PipelineError, SimilarityHit,
    TsneConfig,
};

/// Input or output file could not be read or written (sysexits EX_IOERR).
const EXIT_IO: u8 = 74;
/// Input data was malformed (sysexits EX_DATAERR).
const EXIT_DATA: u8 = 65;

#[derive(Parser)]
#[command(
    name = "wordmap",
    version,
    about = "Compare text corpora on a word-vector map"
)]
struct Cli {
    /// More diagnostics on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Map the vocabulary of two texts, labelling words by the source(s) they occur in.
    Compare {
        /// First source text (UTF-8).
        source_a: PathBuf,
        /// Second source text (UTF-8).
        source_b: PathBuf,
        #[command(flatten)]
        map: MapArgs,
        /// Display name of source A in the map [default: file name].
        #[arg(long)]
        name_a: Option<String>,
        /// Display name of source B in the map [default: file name].
        #[arg(long)]
        name_b: Option<String>,
    },
    /// Map the vocabulary of a single text.
    Single {
        /// Source text (UTF-8).
        source: PathBuf,
        #[command(flatten)]
        map: MapArgs,
        /// Display name of the source in the map [default: file name].
        #[arg(long)]
        name: Option<String>,
    },
    /// Solve a word analogy with 3CosAdd: sum of positives minus sum of negatives.
    Analogy {
        #[command(flatten)]
        model: ModelArgs,
        /// Words added to the query, e.g. `king woman`.
        #[arg(short, long, num_args = 1.., required = true)]
        positive: Vec<String>,
        /// Words subtracted from the query, e.g. `man`.
        #[arg(short, long, num_args = 1..)]
        negative: Vec<String>,
        /// Number of results.
        #[arg(short, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        k: u64,
    },
    /// List the words closest to WORD by cosine similarity.
    Nearest {
        #[command(flatten)]
        model: ModelArgs,
        word: String,
        /// Number of results.
        #[arg(short, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        k: u64,
    },
    /// Check a map file against the schema and print its set sizes.
    ValidateMap { path: PathBuf },
}

#[derive(Args)]
struct ModelArgs {
    /// word2vec model file.
    #[arg(short, long)]
    model: PathBuf,
    /// Model file format: binary or text.
    #[arg(long, default_value = "binary")]
    format: ModelFormat,
}

#[derive(Args)]
struct MapArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Where to write the map JSON.
    #[arg(short, long)]
    output: PathBuf,
    /// Stoplist file, one word per line [default: bundled 3000-word English list].
    #[arg(long)]
    stoplist: Option<PathBuf>,
    /// Keep tokens that contain no letters (numbers, punctuation).
    #[arg(long)]
    keep_non_alpha: bool,
    /// Write the KL divergence trace as `iteration,kl` CSV.
    #[arg(long)]
    kl_history: Option<PathBuf>,
    /// Fix `meta.generated_at` (RFC 3339) for reproducible output.
    #[arg(long)]
    generated_at: Option<String>,
    #[command(flatten)]
    tsne: TsneArgs,
}

#[derive(Args)]
struct TsneArgs {
    /// Effective number of neighbours per point.
    #[arg(long, default_value_t = 30.0)]
    perplexity: f64,
    #[arg(long, default_value_t = 200.0)]
    learning_rate: f64,
    /// Gradient-descent iterations.
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    /// Seed for the initial layout.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Early exaggeration factor.
    #[arg(long, default_value_t = 12.0)]
    exaggeration: f64,
    /// Iterations of early exaggeration (and of initial momentum).
    #[arg(long, default_value_t = 250)]
    exaggeration_iters: usize,
    /// Use plain momentum steps without per-coordinate gains.
    #[arg(long)]
    no_gains: bool,
}

impl TsneArgs {
    fn config(&self) -> TsneConfig {
        TsneConfig {
            perplexity: self.perplexity,
            learning_rate: self.learning_rate,
            n_iter: self.iterations,
            seed: self.seed,
            early_exaggeration_factor: self.exaggeration,
            early_exaggeration_iters: self.exaggeration_iters,
            momentum_switch_iter: self.exaggeration_iters,
            adaptive_gains: !self.no_gains,
            ..TsneConfig::default()
        }
    }
}

impl MapArgs {
    fn pipeline_config(self, source_a: PathBuf) -> PipelineConfig {
        let mut config = PipelineConfig::new(source_a, self.model.model, self.output);
        config.model_format = self.model.format;
        config.stoplist = self.stoplist;
        config.keep_non_alpha = self.keep_non_alpha;
        config.kl_history = self.kl_history;
        config.generated_at = self.generated_at;
        config.tsne = self.tsne.config();
        config
    }
}

fn run_pipeline(config: PipelineConfig) -> Result<(), ExitCode> {
    match pipeline::run(&config) {
        Ok(summary) => {
            println!("{}", summary);
            Ok(())
        }
        Err(e) => {
            error!("{}", e);
            Err(pipeline_exit(&e))
        }
    }
}

fn pipeline_exit(e: &PipelineError) -> ExitCode {
    if e.is_io() {
        ExitCode::from(EXIT_IO)
    } else {
        match e {
            PipelineError::Encoding { .. }
            | PipelineError::Model(_)
            | PipelineError::Stoplist(_) => ExitCode::from(EXIT_DATA),
            _ => ExitCode::FAILURE,
        }
    }
}

fn load_model(args: &ModelArgs) -> Result<EmbeddingModel, ExitCode> {
    pipeline::load_model(&args.model, args.format).map_err(|e| {
        error!("{}", e);
        pipeline_exit(&e)
    })
}

fn print_hits(result: Result<Vec<SimilarityHit>, EmbeddingError>) -> Result<(), ExitCode> {
    match result {
        Ok(hits) => {
            for h in hits {
                println!("{}\t{:.6}", h.word, h.score);
            }
            Ok(())
        }
        Err(e) => {
            error!("{}", e);
            Err(ExitCode::FAILURE)
        }
    }
}

fn run(cli: Cli) -> Result<(), ExitCode> {
    match cli.command {
        Command::Compare {
            source_a,
            source_b,
            map,
            name_a,
            name_b,
        } => {
            let mut config = map.pipeline_config(source_a);
            config.source_b = Some(source_b);
            config.source_a_name = name_a;
            config.source_b_name = name_b;
            run_pipeline(config)
        }
        Command::Single { source, map, name } => {
            let mut config = map.pipeline_config(source);
            config.source_a_name = name;
            run_pipeline(config)
        }
        Command::Analogy {
            model,
            positive,
            negative,
            k,
        } => {
            let m = load_model(&model)?;
            let pos: Vec<&str> = positive.iter().map(String::as_str).collect();
            let neg: Vec<&str> = negative.iter().map(String::as_str).collect();
            print_hits(m.analogy(&pos, &neg, k as usize))
        }
        Command::Nearest { model, word, k } => {
            let m = load_model(&model)?;
            print_hits(m.nearest(&word, k as usize))
        }
        Command::ValidateMap { path } => {
            let bytes = std::fs::read(&path).map_err(|e| {
                error!("{}: {}", path.display(), e);
                ExitCode::from(EXIT_IO)
            })?;
            match parse_map(&bytes) {
                Ok(map) => {
                    let (a, b, both) = map.set_counts();
                    println!(
                        "{}: valid, {} points (a {}, b {}, both {})",
                        path.display(),
                        map.points.len(),
                        a,
                        b,
                        both
                    );
                    Ok(())
                }
                Err(e) => {
                    error!("{}: {}", path.display(), e);
                    Err(ExitCode::from(EXIT_DATA))
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .format_target(false)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
