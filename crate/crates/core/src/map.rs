//! The word map document handed to the viewer.
//!
//! Canonical form: a single JSON object `{"meta": ..., "points": [...]}`
//! with keys in declaration order, points sorted by word, floats in their
//! shortest round-trip representation, two-space indentation and a trailing
//! newline. `docs/wordmap-schema.md` describes the fields.

use std::collections::HashSet;

use chrono::{DateTime, SecondsFormat, Utc};
use ndarray::ArrayView2;
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::diff::{DiffResult, SetLabel};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum MapError {
    /// Schema or invariant violation, located by a JSON path such as
    /// `points[3].x`.
    #[error("{path}: {reason}")]
    Validation { path: String, reason: String },

    #[error("inconsistent map inputs: {0}")]
    Consistency(String),

    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> MapError {
    MapError::Validation {
        path: path.into(),
        reason: reason.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MapMeta {
    pub schema_version: u64,
    pub source_a_name: String,
    /// Absent for single-source maps.
    pub source_b_name: Option<String>,
    /// Dimensionality of the word vectors that were projected.
    pub dim: u64,
    pub perplexity: f64,
    /// RFC 3339 UTC timestamp.
    pub generated_at: String,
}

impl MapMeta {
    pub fn new(
        source_a_name: impl Into<String>,
        source_b_name: Option<String>,
        dim: usize,
        perplexity: f64,
    ) -> Self {
        MapMeta {
            schema_version: SCHEMA_VERSION,
            source_a_name: source_a_name.into(),
            source_b_name,
            dim: dim as u64,
            perplexity,
            generated_at: timestamp(Utc::now()),
        }
    }

    pub fn with_generated_at(mut self, generated_at: impl Into<String>) -> Self {
        self.generated_at = generated_at.into();
        self
    }
}

/// Formats a timestamp the way `generated_at` stores it.
pub fn timestamp(at: DateTime<Utc>) -> String {
    at.to_rfc3339_opts(SecondsFormat::Secs, true)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MapPoint {
    pub word: String,
    pub x: f64,
    pub y: f64,
    #[serde(serialize_with = "serialize_label")]
    pub set: SetLabel,
    pub count_a: u64,
    pub count_b: u64,
}

fn serialize_label<S: serde::Serializer>(label: &SetLabel, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(label.as_str())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WordMap {
    pub meta: MapMeta,
    pub points: Vec<MapPoint>,
}

impl WordMap {
    /// `(a, b, both)` point counts.
    pub fn set_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for p in &self.points {
            match p.set {
                SetLabel::AOnly => counts.0 += 1,
                SetLabel::BOnly => counts.1 += 1,
                SetLabel::Both => counts.2 += 1,
            }
        }
        counts
    }

    /// Checks the document invariants, reporting the first violation.
    pub fn validate(&self) -> Result<(), MapError> {
        if self.meta.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "meta.schema_version",
                format!("unsupported schema version {}", self.meta.schema_version),
            ));
        }
        if !self.meta.perplexity.is_finite() {
            return Err(invalid("meta.perplexity", "must be finite"));
        }
        if DateTime::parse_from_rfc3339(&self.meta.generated_at).is_err() {
            return Err(invalid("meta.generated_at", "not an RFC 3339 timestamp"));
        }
        let mut seen = HashSet::with_capacity(self.points.len());
        for (i, p) in self.points.iter().enumerate() {
            let at = |field: &str| format!("points[{}].{}", i, field);
            if !seen.insert(p.word.as_str()) {
                return Err(invalid(at("word"), format!("duplicate word {:?}", p.word)));
            }
            if !p.x.is_finite() {
                return Err(invalid(at("x"), "must be finite"));
            }
            if !p.y.is_finite() {
                return Err(invalid(at("y"), "must be finite"));
            }
            match p.set {
                SetLabel::AOnly if p.count_b != 0 => {
                    return Err(invalid(at("count_b"), "must be 0 for set \"a\""));
                }
                SetLabel::BOnly if p.count_a != 0 => {
                    return Err(invalid(at("count_a"), "must be 0 for set \"b\""));
                }
                SetLabel::Both if p.count_a == 0 || p.count_b == 0 => {
                    let field = if p.count_a == 0 { "count_a" } else { "count_b" };
                    return Err(invalid(at(field), "must be at least 1 for set \"both\""));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Pairs `word_order[i]` with row `i` of `coords` and attaches the label and
/// counts from `diff`. Points come out sorted by word.
pub fn build_map(
    diff: &DiffResult,
    coords: ArrayView2<'_, f64>,
    word_order: &[String],
    meta: MapMeta,
) -> Result<WordMap, MapError> {
    if coords.nrows() != word_order.len() {
        return Err(MapError::Consistency(format!(
            "{} words but {} coordinate rows",
            word_order.len(),
            coords.nrows()
        )));
    }
    if !word_order.is_empty() && coords.ncols() != 2 {
        return Err(MapError::Consistency(format!(
            "coordinates have {} columns, maps are 2D",
            coords.ncols()
        )));
    }
    let mut points = Vec::with_capacity(word_order.len());
    for (i, word) in word_order.iter().enumerate() {
        let (label, (count_a, count_b)) =
            diff.label(word).zip(diff.counts(word)).ok_or_else(|| {
                MapError::Consistency(format!("word {:?} is not in the comparison", word))
            })?;
        points.push(MapPoint {
            word: word.clone(),
            x: coords[[i, 0]],
            y: coords[[i, 1]],
            set: label,
            count_a,
            count_b,
        });
    }
    points.sort_by(|a, b| a.word.cmp(&b.word));
    let map = WordMap { meta, points };
    map.validate()?;
    Ok(map)
}

/// Canonical bytes for `map`. Refuses maps that fail validation.
pub fn serialize_map(map: &WordMap) -> Result<Vec<u8>, MapError> {
    map.validate()?;
    let mut sorted: Vec<&MapPoint> = map.points.iter().collect();
    sorted.sort_by(|a, b| a.word.cmp(&b.word));

    #[derive(Serialize)]
    struct Doc<'a> {
        meta: &'a MapMeta,
        points: Vec<&'a MapPoint>,
    }
    let mut out = serde_json::to_vec_pretty(&Doc {
        meta: &map.meta,
        points: sorted,
    })?;
    out.push(b'\n');
    Ok(out)
}

/// Parses and validates a map document.
pub fn parse_map(bytes: &[u8]) -> Result<WordMap, MapError> {
    let root: Value = serde_json::from_slice(bytes)?;
    let root = as_object(&root, "$")?;
    only_keys(root, "$", &["meta", "points"])?;

    let meta = parse_meta(field(root, "$", "meta")?)?;
    let points_value = field(root, "$", "points")?;
    let points_array = points_value
        .as_array()
        .ok_or_else(|| invalid("points", "expected an array"))?;
    let mut points = Vec::with_capacity(points_array.len());
    for (i, v) in points_array.iter().enumerate() {
        points.push(parse_point(v, &format!("points[{}]", i))?);
    }

    let map = WordMap { meta, points };
    map.validate()?;
    let mut map = map;
    map.points.sort_by(|a, b| a.word.cmp(&b.word));
    Ok(map)
}

fn parse_meta(v: &Value) -> Result<MapMeta, MapError> {
    let obj = as_object(v, "meta")?;
    // Version gate first so newer documents get a clear message.
    let version = as_u64(field(obj, "meta", "schema_version")?, "meta.schema_version")?;
    if version != SCHEMA_VERSION {
        return Err(invalid(
            "meta.schema_version",
            format!("unsupported schema version {}", version),
        ));
    }
    only_keys(
        obj,
        "meta",
        &[
            "schema_version",
            "source_a_name",
            "source_b_name",
            "dim",
            "perplexity",
            "generated_at",
        ],
    )?;
    let source_b = field(obj, "meta", "source_b_name")?;
    Ok(MapMeta {
        schema_version: version,
        source_a_name: as_str(field(obj, "meta", "source_a_name")?, "meta.source_a_name")?
            .to_owned(),
        source_b_name: match source_b {
            Value::Null => None,
            other => Some(as_str(other, "meta.source_b_name")?.to_owned()),
        },
        dim: as_u64(field(obj, "meta", "dim")?, "meta.dim")?,
        perplexity: as_f64(field(obj, "meta", "perplexity")?, "meta.perplexity")?,
        generated_at: as_str(field(obj, "meta", "generated_at")?, "meta.generated_at")?.to_owned(),
    })
}

fn parse_point(v: &Value, path: &str) -> Result<MapPoint, MapError> {
    let obj = as_object(v, path)?;
    only_keys(obj, path, &["word", "x", "y", "set", "count_a", "count_b"])?;
    let sub = |key: &str| format!("{}.{}", path, key);
    let set = match as_str(field(obj, path, "set")?, &sub("set"))? {
        "a" => SetLabel::AOnly,
        "b" => SetLabel::BOnly,
        "both" => SetLabel::Both,
        other => return Err(invalid(sub("set"), format!("unknown set {:?}", other))),
    };
    Ok(MapPoint {
        word: as_str(field(obj, path, "word")?, &sub("word"))?.to_owned(),
        x: as_f64(field(obj, path, "x")?, &sub("x"))?,
        y: as_f64(field(obj, path, "y")?, &sub("y"))?,
        set,
        count_a: as_u64(field(obj, path, "count_a")?, &sub("count_a"))?,
        count_b: as_u64(field(obj, path, "count_b")?, &sub("count_b"))?,
    })
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, MapError> {
    v.as_object()
        .ok_or_else(|| invalid(path, "expected an object"))
}

fn field<'a>(obj: &'a Map<String, Value>, path: &str, key: &str) -> Result<&'a Value, MapError> {
    let full = if path == "$" {
        key.to_owned()
    } else {
        format!("{}.{}", path, key)
    };
    obj.get(key).ok_or_else(|| invalid(full, "missing field"))
}

fn only_keys(obj: &Map<String, Value>, path: &str, allowed: &[&str]) -> Result<(), MapError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(extra) => {
            let full = if path == "$" {
                extra.clone()
            } else {
                format!("{}.{}", path, extra)
            };
            Err(invalid(full, "unknown field"))
        }
        None => Ok(()),
    }
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str, MapError> {
    v.as_str().ok_or_else(|| invalid(path, "expected a string"))
}

fn as_u64(v: &Value, path: &str) -> Result<u64, MapError> {
    v.as_u64()
        .ok_or_else(|| invalid(path, "expected a non-negative integer"))
}

fn as_f64(v: &Value, path: &str) -> Result<f64, MapError> {
    v.as_f64().ok_or_else(|| invalid(path, "expected a number"))
}
