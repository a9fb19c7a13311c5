//! Frozen pre-trained word embeddings.
//!
//! Two on-disk formats are understood: the plain-text interchange format
//! (a `count dim` header followed by one `token v1 .. vd` row per word) and
//! the word2vec binary layout (same header, then each token followed by a
//! single space and `dim` little-endian `f32` values).
//!
//! The matrix is immutable once built. Every column is stored contiguously,
//! so [`EmbeddingMatrix::column`] hands out a borrowed slice without copying.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingFormat {
    Text,
    Binary,
}

impl FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" | "txt" => Ok(EmbeddingFormat::Text),
            "binary" | "bin" => Ok(EmbeddingFormat::Binary),
            other => Err(Error::invalid(format!("unknown embedding format `{other}`"))),
        }
    }
}

/// A token that appeared more than once in an embedding file. Only the
/// first occurrence is kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicateToken {
    pub token: String,
    pub line: usize,
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub duplicates: Vec<DuplicateToken>,
}

/// Dense `dim x |V|` matrix with a token index.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    // column-major: values[i * dim .. (i + 1) * dim] is the vector of vocab[i]
    values: Vec<f64>,
}

/// How many lexicon words have an embedding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    pub total_lexicon_words: usize,
    pub covered: usize,
    pub missing: Vec<String>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from `(token, vector)` rows. Duplicate tokens keep their
    /// first vector.
    pub fn from_rows<I, S>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut builder = Builder::new(dim)?;
        for (line, (token, vector)) in rows.into_iter().enumerate() {
            let token = token.into();
            if vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: vector.len(),
                });
            }
            if let Some(pos) = vector.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "non-finite value at component {pos} of `{token}`"
                )));
            }
            builder.push(token, &vector, line + 1);
        }
        Ok(builder.finish().0)
    }

    pub fn load(path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let name = path.display().to_string();
        let (matrix, report) = match format {
            EmbeddingFormat::Text => Self::read_text(BufReader::new(file), &name)?,
            EmbeddingFormat::Binary => Self::read_binary(BufReader::new(file), &name)?,
        };
        for dup in &report.duplicates {
            log::warn!(
                "{name}: line {}: duplicate token `{}` ignored, keeping first vector",
                dup.line,
                dup.token
            );
        }
        Ok(matrix)
    }

    /// Parses the text format. `source_name` is only used in error messages.
    pub fn read_text<R: BufRead>(reader: R, source_name: &str) -> Result<(Self, LoadReport)> {
        let mut lines = reader.lines().enumerate();
        let (count, dim) = loop {
            match lines.next() {
                None => return Err(Error::parse(source_name, 1, "missing header")),
                Some((i, line)) => {
                    let line = line.map_err(|e| Error::io(source_name, e))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    break parse_header(&line).ok_or_else(|| {
                        Error::parse(source_name, i + 1, format!("malformed header `{}`", line.trim()))
                    })?;
                }
            }
        };

        let mut builder = Builder::new(dim).map_err(|_| Error::parse(source_name, 1, "dimension must be positive"))?;
        let mut rows = 0usize;
        let mut scratch = Vec::with_capacity(dim);
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::io(source_name, e))?;
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else {
                continue;
            };
            scratch.clear();
            for field in fields {
                let value: f64 = field.parse().map_err(|_| {
                    Error::parse(source_name, line_no, format!("invalid number `{field}`"))
                })?;
                if !value.is_finite() {
                    return Err(Error::parse(source_name, line_no, format!("non-finite value `{field}`")));
                }
                scratch.push(value);
            }
            if scratch.len() != dim {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("expected {dim} values for `{token}`, found {}", scratch.len()),
                ));
            }
            rows += 1;
            if rows > count {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("more rows than the {count} declared in the header"),
                ));
            }
            builder.push(token.to_owned(), &scratch, line_no);
        }
        if rows != count {
            return Err(Error::parse(
                source_name,
                rows + 1,
                format!("header declares {count} rows, found {rows}"),
            ));
        }
        Ok(builder.finish())
    }

    /// Parses the word2vec binary layout. Line numbers in errors and
    /// duplicate reports count the header as line 1 and each record as one line.
    pub fn read_binary<R: BufRead>(mut reader: R, source_name: &str) -> Result<(Self, LoadReport)> {
        let mut header = String::new();
        reader
            .read_line(&mut header)
            .map_err(|e| Error::io(source_name, e))?;
        let (count, dim) = parse_header(&header)
            .ok_or_else(|| Error::parse(source_name, 1, format!("malformed header `{}`", header.trim())))?;
        let mut builder = Builder::new(dim).map_err(|_| Error::parse(source_name, 1, "dimension must be positive"))?;
        let mut raw = vec![0u8; dim * 4];
        let mut vector = vec![0f64; dim];
        let mut token_buf = Vec::new();
        for row in 0..count {
            let line_no = row + 2;
            token_buf.clear();
            reader
                .read_until(b' ', &mut token_buf)
                .map_err(|e| Error::io(source_name, e))?;
            if token_buf.last() != Some(&b' ') {
                return Err(Error::parse(source_name, line_no, "unexpected end of file"));
            }
            token_buf.pop();
            let token = std::str::from_utf8(&token_buf)
                .map_err(|_| Error::parse(source_name, line_no, "token is not valid UTF-8"))?
                .trim()
                .to_owned();
            if token.is_empty() {
                return Err(Error::parse(source_name, line_no, "empty token"));
            }
            reader
                .read_exact(&mut raw)
                .map_err(|_| Error::parse(source_name, line_no, "truncated vector"))?;
            for (slot, chunk) in vector.iter_mut().zip(raw.chunks_exact(4)) {
                let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
                if !v.is_finite() {
                    return Err(Error::parse(source_name, line_no, format!("non-finite value in `{token}`")));
                }
                *slot = f64::from(v);
            }
            builder.push(token, &vector, line_no);
            // some writers terminate each record with a newline
            if let Ok(buf) = reader.fill_buf() {
                if buf.first() == Some(&b'\n') {
                    reader.consume(1);
                }
            }
        }
        Ok(builder.finish())
    }

    pub fn write_text<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(writer);
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (token, column) in self.iter() {
            write!(w, "{token}")?;
            for v in column {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    }

    pub fn write_binary<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(writer);
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (token, column) in self.iter() {
            write!(w, "{token} ")?;
            for &v in column {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
            writeln!(w)?;
        }
        w.flush()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Column `i` of the matrix. Panics when `i >= len()`.
    pub fn column(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn lookup(&self, token: &str) -> Option<&[f64]> {
        self.index_of(token).map(|i| self.column(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> + '_ {
        self.vocab
            .iter()
            .map(String::as_str)
            .zip(self.values.chunks_exact(self.dim))
    }

    pub fn coverage<'a, I>(&self, tokens: I) -> CoverageReport
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut total = 0;
        let mut missing = Vec::new();
        for token in tokens {
            total += 1;
            if !self.index.contains_key(token) {
                missing.push(token.to_owned());
            }
        }
        CoverageReport {
            total_lexicon_words: total,
            covered: total - missing.len(),
            missing,
        }
    }

    /// SHA-256 over dimensions, vocabulary and the exact bit patterns of all
    /// values, as lowercase hex.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.dim as u64).to_le_bytes());
        hasher.update((self.vocab.len() as u64).to_le_bytes());
        for token in &self.vocab {
            hasher.update((token.len() as u64).to_le_bytes());
            hasher.update(token.as_bytes());
        }
        for v in &self.values {
            hasher.update(v.to_bits().to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut fields = line.split_whitespace();
    let count = fields.next()?.parse().ok()?;
    let dim = fields.next()?.parse().ok()?;
    if fields.next().is_some() {
        return None;
    }
    Some((count, dim))
}

struct Builder {
    dim: usize,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    values: Vec<f64>,
    report: LoadReport,
}

impl Builder {
    fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        Ok(Builder {
            dim,
            vocab: Vec::new(),
            index: HashMap::new(),
            values: Vec::new(),
            report: LoadReport::default(),
        })
    }

    fn push(&mut self, token: String, vector: &[f64], line: usize) {
        debug_assert_eq!(vector.len(), self.dim);
        if self.index.contains_key(&token) {
            self.report.duplicates.push(DuplicateToken { token, line });
            return;
        }
        self.index.insert(token.clone(), self.vocab.len());
        self.vocab.push(token);
        self.values.extend_from_slice(vector);
    }

    fn finish(self) -> (EmbeddingMatrix, LoadReport) {
        (
            EmbeddingMatrix {
                dim: self.dim,
                vocab: self.vocab,
                index: self.index,
                values: self.values,
            },
            self.report,
        )
    }
}
