//! Word vector table with similarity and analogy queries.
//!
//! Vectors are kept twice: as loaded (for bit-exact re-serialization) and
//! unit-normalized (for cosine ranking). Words whose vector is all zeros are
//! stored but never returned as query candidates.

mod format;

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use rayon::prelude::*;
use thiserror::Error;

pub use format::ModelFormat;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("malformed model at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },

    #[error("model data truncated while reading entry {index}")]
    Truncated { index: usize },

    #[error("duplicate word {word:?} at entry {index}")]
    DuplicateWord { word: String, index: usize },

    #[error("invalid entry {index}: {reason}")]
    InvalidEntry { index: usize, reason: String },

    #[error("word {0:?} is not in the model")]
    MissingWord(String),

    #[error("vector has zero norm")]
    DegenerateVector,

    #[error("vector dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A single ranked query result.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityHit {
    pub word: String,
    /// Cosine similarity in `[-1, 1]`.
    pub score: f64,
}

/// Vocabulary-to-vector table.
#[derive(Clone, Debug)]
pub struct EmbeddingModel {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f32>,
    unit: Vec<f32>,
    unit_norms: Vec<f64>,
}

impl PartialEq for EmbeddingModel {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.words == other.words
            && self.vectors.len() == other.vectors.len()
            && self
                .vectors
                .iter()
                .zip(&other.vectors)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl EmbeddingModel {
    /// Builds a model from `(word, vector)` pairs, keeping their order.
    ///
    /// Words must be non-empty and free of spaces and newlines, vectors must
    /// have `dim` finite components, and words must be unique.
    pub fn from_entries<I, S>(dim: usize, entries: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: Into<String>,
    {
        if dim == 0 {
            return Err(EmbeddingError::InvalidEntry {
                index: 0,
                reason: "dimension must be positive".into(),
            });
        }
        let mut builder = ModelBuilder::new(dim, 0);
        for (idx, (word, vector)) in entries.into_iter().enumerate() {
            let word = word.into();
            if let Err(reason) = check_word(&word) {
                return Err(EmbeddingError::InvalidEntry { index: idx, reason });
            }
            if vector.len() != dim {
                return Err(EmbeddingError::InvalidEntry {
                    index: idx,
                    reason: format!("expected {} components, got {}", dim, vector.len()),
                });
            }
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(EmbeddingError::InvalidEntry {
                    index: idx,
                    reason: "non-finite component".into(),
                });
            }
            builder.push(word, &vector)?;
        }
        Ok(builder.finish())
    }

    /// Parses a model from an in-memory byte stream.
    pub fn parse(bytes: &[u8], format: ModelFormat) -> Result<Self, EmbeddingError> {
        match format {
            ModelFormat::Binary => format::parse_binary(bytes),
            ModelFormat::Text => format::parse_text(bytes),
        }
    }

    pub fn read_from<R: Read>(mut reader: R, format: ModelFormat) -> Result<Self, EmbeddingError> {
        let mut buf = Vec::new();
        reader.read_to_end(&mut buf)?;
        Self::parse(&buf, format)
    }

    pub fn write_to<W: Write>(&self, writer: W, format: ModelFormat) -> Result<(), EmbeddingError> {
        match format {
            ModelFormat::Binary => format::write_binary(self, writer),
            ModelFormat::Text => format::write_text(self, writer),
        }
    }

    /// Serializes to the binary format. Every vector is followed by `\n`.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.vectors.len() * 4 + self.words.len() * 8);
        format::write_binary(self, &mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Returns the stored vector for `word`, if any.
    pub fn lookup(&self, word: &str) -> Option<&[f32]> {
        self.index.get(word).map(|&i| self.row(i))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &[f32])> + '_ {
        self.words
            .iter()
            .enumerate()
            .map(move |(i, w)| (w.as_str(), self.row(i)))
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    fn unit_row(&self, i: usize) -> &[f32] {
        &self.unit[i * self.dim..(i + 1) * self.dim]
    }

    fn word_index(&self, word: &str) -> Result<usize, EmbeddingError> {
        self.index
            .get(word)
            .copied()
            .ok_or_else(|| EmbeddingError::MissingWord(word.to_owned()))
    }

    /// The `k` words closest to `word` by cosine, excluding `word` itself.
    pub fn nearest(&self, word: &str, k: usize) -> Result<Vec<SimilarityHit>, EmbeddingError> {
        self.analogy(&[word], &[], k)
    }

    /// 3CosAdd analogy query.
    ///
    /// The query direction is the sum of the unit vectors of `positive` minus
    /// the sum of the unit vectors of `negative`. Candidates are ranked by
    /// cosine to that direction; input words and zero vectors are skipped.
    /// Returns at most `k` hits, best first, ties broken by word.
    pub fn analogy(
        &self,
        positive: &[&str],
        negative: &[&str],
        k: usize,
    ) -> Result<Vec<SimilarityHit>, EmbeddingError> {
        let mut query = vec![0f64; self.dim];
        let mut excluded = HashSet::new();
        for (words, sign) in [(positive, 1.0), (negative, -1.0)] {
            for word in words {
                let idx = self.word_index(word)?;
                excluded.insert(idx);
                for (q, &u) in query.iter_mut().zip(self.unit_row(idx)) {
                    *q += sign * u as f64;
                }
            }
        }
        let query_norm = query.iter().map(|q| q * q).sum::<f64>().sqrt();
        if query_norm == 0.0 {
            return Err(EmbeddingError::DegenerateVector);
        }
        if k == 0 {
            return Ok(Vec::new());
        }

        let mut scored: Vec<(f64, usize)> = (0..self.words.len())
            .into_par_iter()
            .filter(|i| self.unit_norms[*i] > 0.0 && !excluded.contains(i))
            .map(|i| {
                let dot: f64 = query
                    .iter()
                    .zip(self.unit_row(i))
                    .map(|(q, &u)| q * u as f64)
                    .sum();
                let score = (dot / (query_norm * self.unit_norms[i])).clamp(-1.0, 1.0);
                (score, i)
            })
            .collect();

        let rank = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
            b.0.total_cmp(&a.0)
                .then_with(|| self.words[a.1].cmp(&self.words[b.1]))
        };
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, rank);
            scored.truncate(k);
        }
        scored.sort_unstable_by(rank);

        Ok(scored
            .into_iter()
            .map(|(score, i)| SimilarityHit {
                word: self.words[i].clone(),
                score,
            })
            .collect())
    }
}

/// Cosine similarity, clamped to `[-1, 1]`.
///
/// Uses `dot / sqrt(|u|² |v|²)`, which is symmetric in its arguments and
/// yields exactly 1 for `cosine(u, u)`.
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() {
        return Err(EmbeddingError::DimensionMismatch(u.len(), v.len()));
    }
    let mut dot = 0f64;
    let mut uu = 0f64;
    let mut vv = 0f64;
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a as f64, b as f64);
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(EmbeddingError::DegenerateVector);
    }
    Ok((dot / (uu * vv).sqrt()).clamp(-1.0, 1.0))
}

fn check_word(word: &str) -> Result<(), String> {
    if word.is_empty() {
        return Err("empty word".into());
    }
    if word.contains([' ', '\n']) {
        return Err(format!("word {:?} contains a space or newline", word));
    }
    Ok(())
}

/// Incremental construction shared by the constructors and parsers.
struct ModelBuilder {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f32>,
}

impl ModelBuilder {
    fn new(dim: usize, capacity: usize) -> Self {
        // Header counts are untrusted; cap the preallocation.
        let capacity = capacity.min(1 << 20);
        ModelBuilder {
            dim,
            words: Vec::with_capacity(capacity),
            index: HashMap::with_capacity(capacity),
            vectors: Vec::with_capacity(capacity.saturating_mul(dim).min(1 << 26)),
        }
    }

    fn push(&mut self, word: String, vector: &[f32]) -> Result<(), EmbeddingError> {
        debug_assert_eq!(vector.len(), self.dim);
        let index = self.words.len();
        if self.index.contains_key(&word) {
            return Err(EmbeddingError::DuplicateWord { word, index });
        }
        self.index.insert(word.clone(), index);
        self.words.push(word);
        self.vectors.extend_from_slice(vector);
        Ok(())
    }

    fn finish(self) -> EmbeddingModel {
        let dim = self.dim;
        let mut unit = Vec::with_capacity(self.vectors.len());
        let mut unit_norms = Vec::with_capacity(self.words.len());
        for row in self.vectors.chunks_exact(dim) {
            let norm = row
                .iter()
                .map(|&v| (v as f64) * (v as f64))
                .sum::<f64>()
                .sqrt();
            if norm > 0.0 {
                unit.extend(row.iter().map(|&v| (v as f64 / norm) as f32));
                let n = unit[unit.len() - dim..]
                    .iter()
                    .map(|&v| (v as f64) * (v as f64))
                    .sum::<f64>()
                    .sqrt();
                unit_norms.push(n);
            } else {
                unit.extend(std::iter::repeat_n(0f32, dim));
                unit_norms.push(0.0);
            }
        }
        EmbeddingModel {
            dim,
            words: self.words,
            index: self.index,
            vectors: self.vectors,
            unit,
            unit_norms,
        }
    }
}
