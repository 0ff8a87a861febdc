//! End-to-end map construction: read sources, tokenize, filter, diff,
//! restrict to the model vocabulary, project with t-SNE and export.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::DateTime;
use log::{info, warn};
use ndarray::Array2;
use thiserror::Error;

use crate::diff::{diff, restrict_to_model, DiffResult};
use crate::embedding::{EmbeddingError, EmbeddingModel, ModelFormat};
use crate::map::{build_map, serialize_map, MapError, MapMeta, WordMap};
use crate::tokenizer::{count_and_filter, tokenize, Stoplist, StoplistError, TokenCounts};
use crate::tsne::{run_tsne, TsneConfig, TsneError};

/// Pipeline stage, used to name the failing step in errors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    ReadSource,
    LoadModel,
    LoadStoplist,
    Project,
    Export,
    WriteOutput,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::ReadSource => "reading source",
            Stage::LoadModel => "loading model",
            Stage::LoadStoplist => "loading stoplist",
            Stage::Project => "t-SNE projection",
            Stage::Export => "map export",
            Stage::WriteOutput => "writing output",
        })
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{stage}: {}: {source}", path.display())]
    Io {
        stage: Stage,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage}: {} is not valid UTF-8 text", path.display())]
    Encoding { stage: Stage, path: PathBuf },

    #[error("loading model: {0}")]
    Model(#[from] EmbeddingError),

    #[error("loading stoplist: {0}")]
    Stoplist(#[from] StoplistError),

    #[error("t-SNE projection: {0}")]
    Tsne(#[from] TsneError),

    #[error("map export: {0}")]
    Map(#[from] MapError),
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        match self {
            PipelineError::Io { stage, .. } | PipelineError::Encoding { stage, .. } => *stage,
            PipelineError::Model(_) => Stage::LoadModel,
            PipelineError::Stoplist(_) => Stage::LoadStoplist,
            PipelineError::Tsne(_) => Stage::Project,
            PipelineError::Map(_) => Stage::Export,
        }
    }

    /// True when the failure came from the filesystem.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            PipelineError::Io { .. } | PipelineError::Model(EmbeddingError::Io(_))
        )
    }
}

/// Inputs and settings for one map build.
#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub source_a: PathBuf,
    /// `None` builds a single-source map.
    pub source_b: Option<PathBuf>,
    pub model: PathBuf,
    pub model_format: ModelFormat,
    /// `None` uses the bundled 3000-word list.
    pub stoplist: Option<PathBuf>,
    pub output: PathBuf,
    pub tsne: TsneConfig,
    /// Keep tokens without any alphabetic character.
    pub keep_non_alpha: bool,
    /// Optional CSV dump of the KL trace.
    pub kl_history: Option<PathBuf>,
    /// Fixed `meta.generated_at`; the current time when `None`.
    pub generated_at: Option<String>,
    pub source_a_name: Option<String>,
    pub source_b_name: Option<String>,
}

impl PipelineConfig {
    pub fn new(
        source_a: impl Into<PathBuf>,
        model: impl Into<PathBuf>,
        output: impl Into<PathBuf>,
    ) -> Self {
        PipelineConfig {
            source_a: source_a.into(),
            source_b: None,
            model: model.into(),
            model_format: ModelFormat::Binary,
            stoplist: None,
            output: output.into(),
            tsne: TsneConfig::default(),
            keep_non_alpha: false,
            kl_history: None,
            generated_at: None,
            source_a_name: None,
            source_b_name: None,
        }
    }
}

/// What a run did, for the command-line report.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub tokens_a: usize,
    pub tokens_b: Option<usize>,
    pub vocab_a: usize,
    pub vocab_b: Option<usize>,
    /// `(a, b, both)` after restriction to the model vocabulary.
    pub set_sizes: (usize, usize, usize),
    pub dropped: usize,
    pub final_kl: Option<f64>,
    pub output: PathBuf,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.tokens_b, self.vocab_b) {
            (Some(tb), Some(vb)) => {
                writeln!(f, "tokens read:      A {} / B {}", self.tokens_a, tb)?;
                writeln!(f, "vocabulary:       A {} / B {}", self.vocab_a, vb)?;
                writeln!(
                    f,
                    "sets:             A-only {} / B-only {} / both {}",
                    self.set_sizes.0, self.set_sizes.1, self.set_sizes.2
                )?;
            }
            _ => {
                writeln!(f, "tokens read:      {}", self.tokens_a)?;
                writeln!(f, "vocabulary:       {}", self.vocab_a)?;
                writeln!(f, "mapped words:     {}", self.set_sizes.0)?;
            }
        }
        writeln!(f, "not in model:     {}", self.dropped)?;
        match self.final_kl {
            Some(kl) => writeln!(f, "final KL:         {:.6}", kl)?,
            None => writeln!(f, "final KL:         n/a (no points)")?,
        }
        write!(f, "map written to:   {}", self.output.display())
    }
}

pub fn load_model(path: &Path, format: ModelFormat) -> Result<EmbeddingModel, PipelineError> {
    let bytes = fs::read(path).map_err(|source| PipelineError::Io {
        stage: Stage::LoadModel,
        path: path.to_owned(),
        source,
    })?;
    Ok(EmbeddingModel::parse(&bytes, format)?)
}

fn load_stoplist(path: Option<&Path>) -> Result<Stoplist, PipelineError> {
    match path {
        None => Ok(Stoplist::bundled()),
        Some(path) => {
            let bytes = fs::read(path).map_err(|source| PipelineError::Io {
                stage: Stage::LoadStoplist,
                path: path.to_owned(),
                source,
            })?;
            Ok(Stoplist::parse(&bytes)?)
        }
    }
}

fn read_source(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(|source| PipelineError::Io {
        stage: Stage::ReadSource,
        path: path.to_owned(),
        source,
    })?;
    String::from_utf8(bytes).map_err(|_| PipelineError::Encoding {
        stage: Stage::ReadSource,
        path: path.to_owned(),
    })
}

fn display_name(path: &Path, name: Option<&String>) -> String {
    name.cloned().unwrap_or_else(|| {
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string())
    })
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let io_err = |source| PipelineError::Io {
        stage: Stage::WriteOutput,
        path: path.to_owned(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// In-memory result of [`build`], before anything is written.
#[derive(Clone, Debug)]
pub struct Built {
    pub map: WordMap,
    pub summary: Summary,
    pub kl_history_csv: Option<String>,
}

/// Runs every stage but leaves writing to the caller.
pub fn build(config: &PipelineConfig) -> Result<Built, PipelineError> {
    config.tsne.validate()?;
    if let Some(at) = &config.generated_at {
        check_timestamp(at)?;
    }
    let stoplist = load_stoplist(config.stoplist.as_deref())?;
    let drop_non_alpha = !config.keep_non_alpha;

    let text_a = read_source(&config.source_a)?;
    let text_b = config.source_b.as_deref().map(read_source).transpose()?;
    let model = load_model(&config.model, config.model_format)?;
    info!(
        "model: {} words, {} dimensions",
        model.vocab_size(),
        model.dim()
    );

    let tokens_a = tokenize(&text_a);
    let counts_a = count_and_filter(&tokens_a, &stoplist, drop_non_alpha);
    let counts_b: Option<TokenCounts> = text_b.as_deref().map(|t| {
        let tokens = tokenize(t);
        count_and_filter(&tokens, &stoplist, drop_non_alpha)
    });

    let full = diff(
        &counts_a,
        counts_b.as_ref().unwrap_or(&TokenCounts::default()),
    );
    let (restricted, dropped) = restrict_to_model(&full, &model);
    if !dropped.is_empty() {
        info!("{} words have no vector and were dropped", dropped.len());
    }
    if restricted.is_empty() {
        warn!("no words left to map after filtering");
    }

    let words: Vec<String> = restricted.words().into_iter().map(str::to_owned).collect();
    let (coords, final_kl, kl_csv) = project(&model, &words, &config.tsne)?;

    let meta = MapMeta::new(
        display_name(&config.source_a, config.source_a_name.as_ref()),
        config
            .source_b
            .as_deref()
            .map(|p| display_name(p, config.source_b_name.as_ref())),
        model.dim(),
        config.tsne.perplexity,
    );
    let meta = match &config.generated_at {
        Some(at) => meta.with_generated_at(at.clone()),
        None => meta,
    };
    let map = build_map(&restricted, coords.view(), &words, meta)?;

    let summary = Summary {
        tokens_a: counts_a.total_tokens(),
        tokens_b: counts_b.as_ref().map(TokenCounts::total_tokens),
        vocab_a: counts_a.len(),
        vocab_b: counts_b.as_ref().map(TokenCounts::len),
        set_sizes: restricted.set_sizes(),
        dropped: dropped.len(),
        final_kl,
        output: config.output.clone(),
    };
    Ok(Built {
        map,
        summary,
        kl_history_csv: kl_csv,
    })
}

/// Rejects a pinned timestamp up front rather than after the projection.
fn check_timestamp(at: &str) -> Result<(), MapError> {
    DateTime::parse_from_rfc3339(at)
        .map(drop)
        .map_err(|_| MapError::Validation {
            path: "meta.generated_at".into(),
            reason: format!("{:?} is not an RFC 3339 timestamp", at),
        })
}

/// Layout rows, final KL and KL trace CSV; the last two are absent for an
/// empty word list.
type Projection = (Array2<f64>, Option<f64>, Option<String>);

fn project(
    model: &EmbeddingModel,
    words: &[String],
    config: &TsneConfig,
) -> Result<Projection, PipelineError> {
    if words.is_empty() {
        return Ok((Array2::zeros((0, config.out_dims)), None, None));
    }
    let dim = model.dim();
    let mut x = Array2::<f64>::zeros((words.len(), dim));
    for (mut row, word) in x.rows_mut().into_iter().zip(words) {
        let v = model.lookup(word).expect("restricted to model vocabulary");
        row.iter_mut().zip(v).for_each(|(r, &v)| *r = v as f64);
    }
    let result = run_tsne(x.view(), config)?;
    let csv = result.kl_history_csv();
    Ok((result.coords, Some(result.final_kl), Some(csv)))
}

/// Builds the map and writes it (and the optional KL trace) atomically.
/// Nothing is written if any stage fails.
pub fn run(config: &PipelineConfig) -> Result<Summary, PipelineError> {
    let built = build(config)?;
    let bytes = serialize_map(&built.map)?;
    if let (Some(path), Some(csv)) = (&config.kl_history, &built.kl_history_csv) {
        write_atomic(path, csv.as_bytes())?;
    }
    write_atomic(&config.output, &bytes)?;
    Ok(built.summary)
}

/// Labels and counts of a comparison before any model lookup; exposed for
/// callers that want the raw partition.
pub fn compare_texts(a: &str, b: &str, stoplist: &Stoplist, drop_non_alpha: bool) -> DiffResult {
    let ca = count_and_filter(&tokenize(a), stoplist, drop_non_alpha);
    let cb = count_and_filter(&tokenize(b), stoplist, drop_non_alpha);
    diff(&ca, &cb)
}
