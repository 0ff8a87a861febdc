//! Readers and writers for the word2vec binary and text formats.
//!
//! Binary layout: an ASCII header `"<vocab_size> <dim>\n"`, then for each
//! entry the word bytes, a single space, `dim` little-endian IEEE-754 f32
//! values and an optional `\n`.

use std::io::Write;
use std::str::FromStr;

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};

use super::{EmbeddingError, EmbeddingModel, ModelBuilder};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ModelFormat {
    #[default]
    Binary,
    Text,
}

impl FromStr for ModelFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" | "bin" => Ok(ModelFormat::Binary),
            "text" | "txt" => Ok(ModelFormat::Text),
            other => Err(format!(
                "unknown model format {:?} (expected binary or text)",
                other
            )),
        }
    }
}

fn format_err(offset: usize, reason: impl Into<String>) -> EmbeddingError {
    EmbeddingError::Format {
        offset,
        reason: reason.into(),
    }
}

/// Parses `"<count> <dim>"` (no surrounding whitespace, fields separated by
/// one or more spaces).
fn parse_header_line(line: &[u8]) -> Result<(usize, usize), EmbeddingError> {
    let text = std::str::from_utf8(line).map_err(|_| format_err(0, "header is not ASCII"))?;
    if text.starts_with(' ') || text.ends_with(' ') {
        return Err(format_err(0, "header has leading or trailing whitespace"));
    }
    let fields: Vec<(usize, &str)> = text
        .split(' ')
        .scan(0usize, |pos, field| {
            let start = *pos;
            *pos += field.len() + 1;
            Some((start, field))
        })
        .filter(|(_, f)| !f.is_empty())
        .collect();
    if fields.len() != 2 {
        return Err(format_err(
            0,
            format!("expected 2 header fields, found {}", fields.len()),
        ));
    }
    let number = |(offset, field): (usize, &str)| -> Result<usize, EmbeddingError> {
        if !field.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format_err(
                offset,
                format!("header field {:?} is not an integer", field),
            ));
        }
        field
            .parse()
            .map_err(|_| format_err(offset, format!("header field {:?} out of range", field)))
    };
    let count = number(fields[0])?;
    let dim = number(fields[1])?;
    if dim == 0 {
        return Err(format_err(fields[1].0, "dimension must be positive"));
    }
    Ok((count, dim))
}

fn split_header(bytes: &[u8]) -> Result<(usize, usize, usize), EmbeddingError> {
    let end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| format_err(bytes.len(), "header line is not terminated"))?;
    let (count, dim) = parse_header_line(&bytes[..end])?;
    Ok((count, dim, end + 1))
}

pub(super) fn parse_binary(bytes: &[u8]) -> Result<EmbeddingModel, EmbeddingError> {
    let (count, dim, mut pos) = split_header(bytes)?;
    let mut builder = ModelBuilder::new(dim, count);
    let mut vector = vec![0f32; dim];
    let vector_bytes = dim
        .checked_mul(4)
        .ok_or_else(|| format_err(0, "dimension too large"))?;

    for index in 0..count {
        let word_start = pos;
        let space = bytes[pos..]
            .iter()
            .position(|&b| b == b' ')
            .ok_or(EmbeddingError::Truncated { index })?;
        let raw_word = &bytes[word_start..word_start + space];
        pos += space + 1;
        if raw_word.is_empty() {
            return Err(format_err(
                word_start,
                format!("entry {} has an empty word", index),
            ));
        }
        if raw_word.contains(&b'\n') {
            return Err(format_err(
                word_start,
                format!("entry {} word contains a newline", index),
            ));
        }
        let word = std::str::from_utf8(raw_word)
            .map_err(|e| format_err(word_start + e.valid_up_to(), "word is not valid UTF-8"))?;

        if bytes.len() - pos < vector_bytes {
            return Err(EmbeddingError::Truncated { index });
        }
        LittleEndian::read_f32_into(&bytes[pos..pos + vector_bytes], &mut vector);
        if let Some(bad) = vector.iter().position(|v| !v.is_finite()) {
            return Err(format_err(
                pos + 4 * bad,
                format!("entry {} has a non-finite component", index),
            ));
        }
        pos += vector_bytes;
        if bytes.get(pos) == Some(&b'\n') {
            pos += 1;
        }
        builder.push(word.to_owned(), &vector)?;
    }

    if pos != bytes.len() {
        return Err(format_err(
            pos,
            "trailing data after the last declared entry",
        ));
    }
    Ok(builder.finish())
}

pub(super) fn write_binary<W: Write>(
    model: &EmbeddingModel,
    mut w: W,
) -> Result<(), EmbeddingError> {
    writeln!(w, "{} {}", model.vocab_size(), model.dim())?;
    for (word, vector) in model.entries() {
        w.write_all(word.as_bytes())?;
        w.write_all(b" ")?;
        for &v in vector {
            w.write_f32::<LittleEndian>(v)?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Text variant: header line, then `word v1 ... vdim` per line.
pub(super) fn parse_text(bytes: &[u8]) -> Result<EmbeddingModel, EmbeddingError> {
    let (count, dim, mut pos) = split_header(bytes)?;
    let mut builder = ModelBuilder::new(dim, count);
    let mut vector = Vec::with_capacity(dim);

    for index in 0..count {
        if pos >= bytes.len() {
            return Err(EmbeddingError::Truncated { index });
        }
        let line_start = pos;
        let line_end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map_or(bytes.len(), |p| pos + p);
        pos = (line_end + 1).min(bytes.len());

        let line = std::str::from_utf8(&bytes[line_start..line_end])
            .map_err(|e| format_err(line_start + e.valid_up_to(), "line is not valid UTF-8"))?;
        let mut fields = line.split_ascii_whitespace();
        let word = fields
            .next()
            .ok_or_else(|| format_err(line_start, format!("entry {} is blank", index)))?;
        vector.clear();
        for field in fields {
            let v: f32 = field.parse().map_err(|_| {
                format_err(
                    line_start,
                    format!("entry {}: {:?} is not a number", index, field),
                )
            })?;
            if !v.is_finite() {
                return Err(format_err(
                    line_start,
                    format!("entry {} has a non-finite component", index),
                ));
            }
            vector.push(v);
        }
        if vector.len() != dim {
            return Err(format_err(
                line_start,
                format!(
                    "entry {} has {} components, expected {}",
                    index,
                    vector.len(),
                    dim
                ),
            ));
        }
        builder.push(word.to_owned(), &vector)?;
    }

    if bytes[pos..].iter().any(|b| !b.is_ascii_whitespace()) {
        return Err(format_err(
            pos,
            "trailing data after the last declared entry",
        ));
    }
    Ok(builder.finish())
}

pub(super) fn write_text<W: Write>(model: &EmbeddingModel, mut w: W) -> Result<(), EmbeddingError> {
    writeln!(w, "{} {}", model.vocab_size(), model.dim())?;
    for (index, (word, vector)) in model.entries().enumerate() {
        if word.chars().any(char::is_whitespace) {
            return Err(EmbeddingError::InvalidEntry {
                index,
                reason: format!("word {:?} cannot be written in text format", word),
            });
        }
        w.write_all(word.as_bytes())?;
        for v in vector {
            write!(w, " {}", v)?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
