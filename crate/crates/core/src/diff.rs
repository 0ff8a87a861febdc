//! Three-way partition of two vocabularies.

use std::collections::BTreeMap;
use std::fmt;

use crate::embedding::EmbeddingModel;
use crate::tokenizer::TokenCounts;

/// Which side(s) of the comparison a word occurs in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SetLabel {
    AOnly,
    BOnly,
    Both,
}

impl SetLabel {
    /// Name used in exported maps.
    pub fn as_str(self) -> &'static str {
        match self {
            SetLabel::AOnly => "a",
            SetLabel::BOnly => "b",
            SetLabel::Both => "both",
        }
    }
}

impl fmt::Display for SetLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DiffResult {
    pub only_a: BTreeMap<String, u64>,
    pub only_b: BTreeMap<String, u64>,
    pub both: BTreeMap<String, (u64, u64)>,
}

/// A word removed by [`restrict_to_model`], with the label it had.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DroppedWord {
    pub word: String,
    pub label: SetLabel,
}

impl DiffResult {
    pub fn label(&self, word: &str) -> Option<SetLabel> {
        if self.both.contains_key(word) {
            Some(SetLabel::Both)
        } else if self.only_a.contains_key(word) {
            Some(SetLabel::AOnly)
        } else if self.only_b.contains_key(word) {
            Some(SetLabel::BOnly)
        } else {
            None
        }
    }

    /// `(count_a, count_b)` for a word in any of the three sets.
    pub fn counts(&self, word: &str) -> Option<(u64, u64)> {
        if let Some(&c) = self.both.get(word) {
            return Some(c);
        }
        if let Some(&a) = self.only_a.get(word) {
            return Some((a, 0));
        }
        self.only_b.get(word).map(|&b| (0, b))
    }

    pub fn len(&self) -> usize {
        self.only_a.len() + self.only_b.len() + self.both.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every word of the union vocabulary, in lexicographic order.
    pub fn words(&self) -> Vec<&str> {
        let mut words: Vec<&str> = self
            .only_a
            .keys()
            .chain(self.only_b.keys())
            .chain(self.both.keys())
            .map(String::as_str)
            .collect();
        words.sort_unstable();
        words
    }

    /// `(|only_a|, |only_b|, |both|)`.
    pub fn set_sizes(&self) -> (usize, usize, usize) {
        (self.only_a.len(), self.only_b.len(), self.both.len())
    }
}

pub fn diff(a: &TokenCounts, b: &TokenCounts) -> DiffResult {
    let mut result = DiffResult::default();
    for (word, &ca) in a.counts() {
        match b.get(word) {
            Some(cb) => {
                result.both.insert(word.clone(), (ca, cb));
            }
            None => {
                result.only_a.insert(word.clone(), ca);
            }
        }
    }
    for (word, &cb) in b.counts() {
        if a.get(word).is_none() {
            result.only_b.insert(word.clone(), cb);
        }
    }
    result
}

/// Keeps only words the model has a vector for. Dropped words are returned
/// sorted.
pub fn restrict_to_model(d: &DiffResult, model: &EmbeddingModel) -> (DiffResult, Vec<DroppedWord>) {
    let mut dropped = Vec::new();
    let mut keep = |word: &String, label: SetLabel| {
        if model.contains(word) {
            true
        } else {
            dropped.push(DroppedWord {
                word: word.clone(),
                label,
            });
            false
        }
    };
    let restricted = DiffResult {
        only_a: d
            .only_a
            .iter()
            .filter(|(w, _)| keep(w, SetLabel::AOnly))
            .map(|(w, &c)| (w.clone(), c))
            .collect(),
        only_b: d
            .only_b
            .iter()
            .filter(|(w, _)| keep(w, SetLabel::BOnly))
            .map(|(w, &c)| (w.clone(), c))
            .collect(),
        both: d
            .both
            .iter()
            .filter(|(w, _)| keep(w, SetLabel::Both))
            .map(|(w, &c)| (w.clone(), c))
            .collect(),
    };
    dropped.sort_by(|x, y| x.word.cmp(&y.word));
    (restricted, dropped)
}
