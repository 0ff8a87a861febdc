//! Rule-based tokenization, counting and stoplist filtering.

use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

/// Tokens longer than this many characters are discarded during counting.
pub const MAX_TOKEN_CHARS: usize = 100;

const BUNDLED_STOPLIST: &str = include_str!("../data/stoplist-en-3000.txt");

#[derive(Debug, Error)]
pub enum StoplistError {
    #[error("stoplist is not valid UTF-8 (byte {0})")]
    InvalidUtf8(usize),
}

/// Splits `text` into tokens.
///
/// Text is split on whitespace; leading and trailing non-alphanumeric
/// characters of each chunk become single-character tokens of their own.
/// Everything between the first and last alphanumeric character, including
/// apostrophes and hyphens, stays in one token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let first = chunk.char_indices().find(|(_, c)| c.is_alphanumeric());
        let Some((start, _)) = first else {
            tokens.extend(chunk.chars().map(String::from));
            continue;
        };
        let (last, last_char) = chunk
            .char_indices()
            .rev()
            .find(|(_, c)| c.is_alphanumeric())
            .expect("chunk has an alphanumeric character");
        let end = last + last_char.len_utf8();

        tokens.extend(chunk[..start].chars().map(String::from));
        tokens.push(chunk[start..end].to_owned());
        tokens.extend(chunk[end..].chars().map(String::from));
    }
    tokens
}

/// Lowercased word set used to drop very frequent words.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stoplist {
    words: HashSet<String>,
}

impl Stoplist {
    /// Parses a newline-delimited list. Blank lines and lines starting with
    /// `#` are skipped; entries are trimmed and lowercased.
    pub fn parse(bytes: &[u8]) -> Result<Self, StoplistError> {
        let text =
            std::str::from_utf8(bytes).map_err(|e| StoplistError::InvalidUtf8(e.valid_up_to()))?;
        Ok(Self::from_text(text))
    }

    fn from_text(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Stoplist { words }
    }

    /// The bundled list of the 3000 most frequent English words.
    pub fn bundled() -> Self {
        Self::from_text(BUNDLED_STOPLIST)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Stoplist {
            words: words
                .into_iter()
                .map(|w| w.as_ref().to_lowercase())
                .collect(),
        }
    }

    /// Case-insensitive on the query side.
    pub fn contains(&self, word: &str) -> bool {
        if self.words.contains(word) {
            return true;
        }
        let lower = word.to_lowercase();
        lower != word && self.words.contains(&lower)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

/// Case-sensitive token counts after filtering.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TokenCounts {
    counts: BTreeMap<String, u64>,
    total_tokens: usize,
}

impl TokenCounts {
    /// Counts as a sorted map; every count is at least 1.
    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    /// Number of tokens seen before any filtering.
    pub fn total_tokens(&self) -> usize {
        self.total_tokens
    }

    pub fn get(&self, word: &str) -> Option<u64> {
        self.counts.get(word).copied()
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Re-applies a stoplist, keeping `total_tokens`.
    pub fn filtered(&self, stoplist: &Stoplist) -> TokenCounts {
        TokenCounts {
            counts: self
                .counts
                .iter()
                .filter(|(w, _)| !stoplist.contains(w))
                .map(|(w, &c)| (w.clone(), c))
                .collect(),
            total_tokens: self.total_tokens,
        }
    }
}

impl<S: Into<String>> FromIterator<(S, u64)> for TokenCounts {
    /// Builds counts directly; zero counts are skipped and `total_tokens` is
    /// the sum of the counts.
    fn from_iter<I: IntoIterator<Item = (S, u64)>>(iter: I) -> Self {
        let mut counts = BTreeMap::new();
        for (w, c) in iter {
            if c > 0 {
                *counts.entry(w.into()).or_insert(0) += c;
            }
        }
        let total_tokens = counts.values().sum::<u64>() as usize;
        TokenCounts {
            counts,
            total_tokens,
        }
    }
}

/// Counts `tokens`, dropping stoplist members, over-long tokens and, when
/// `drop_non_alpha` is set, tokens without any alphabetic character.
pub fn count_and_filter<S: AsRef<str>>(
    tokens: &[S],
    stoplist: &Stoplist,
    drop_non_alpha: bool,
) -> TokenCounts {
    // Count first so the per-word checks (which lowercase) run once per type.
    let mut raw: HashMap<&str, u64> = HashMap::new();
    for token in tokens {
        *raw.entry(token.as_ref()).or_insert(0) += 1;
    }
    let counts = raw
        .into_iter()
        .filter(|(token, _)| {
            token.chars().count() <= MAX_TOKEN_CHARS
                && !(drop_non_alpha && !token.chars().any(char::is_alphabetic))
                && !stoplist.contains(token)
        })
        .map(|(token, c)| (token.to_owned(), c))
        .collect();
    TokenCounts {
        counts,
        total_tokens: tokens.len(),
    }
}
