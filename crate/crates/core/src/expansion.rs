//! Scoring the whole embedding vocabulary with a trained model to produce
//! an expanded lexicon.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::snapshot::{ModelSnapshot, WordPrediction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExpandedEntry {
    Class { class: usize, confidence: f64 },
    Score(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model_id: String,
    pub model_kind: String,
    pub source_lexicon: Option<String>,
    pub embeddings_checksum: String,
    pub vocabulary_size: usize,
    pub entries: usize,
    pub min_confidence: Option<f64>,
    pub clamp: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedLexicon {
    /// Class names for categorical expansions.
    pub classes: Option<Vec<String>>,
    /// Entries in embedding vocabulary order.
    pub entries: Vec<(String, ExpandedEntry)>,
    pub provenance: Provenance,
}

type TokenFilter<'a> = &'a (dyn Fn(&str) -> bool + Sync);

#[derive(Default, Clone, Copy)]
pub struct ExpandOptions<'a> {
    /// Drop categorical entries whose top probability is below this value.
    pub min_confidence: Option<f64>,
    /// Only tokens for which this returns true are scored.
    pub vocab_filter: Option<TokenFilter<'a>>,
    /// Clamp continuous scores into this range, e.g. `(-1, 1)` when the
    /// training lexicon was normalized.
    pub clamp: Option<(f64, f64)>,
    pub source_lexicon: Option<&'a str>,
}

/// Applies `model` to every vocabulary word of `embeddings`.
pub fn expand(model: &ModelSnapshot, embeddings: &EmbeddingMatrix, options: &ExpandOptions) -> Result<ExpandedLexicon> {
    if model.input_dim() != embeddings.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: embeddings.dim(),
        });
    }
    if let Some(c) = options.min_confidence {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::invalid(format!("min confidence {c} must lie in [0, 1]")));
        }
        if model.classes().is_none() {
            log::warn!("min confidence ignored for a continuous model");
        }
    }
    if let Some((lo, hi)) = options.clamp {
        if !(lo <= hi) {
            return Err(Error::invalid(format!("invalid clamp range ({lo}, {hi})")));
        }
    }
    let scored: Vec<Option<(String, ExpandedEntry)>> = (0..embeddings.len())
        .into_par_iter()
        .map(|i| {
            let token = &embeddings.vocab()[i];
            if let Some(filter) = options.vocab_filter {
                if !filter(token) {
                    return Ok(None);
                }
            }
            let entry = match model.predict_word(embeddings, i)? {
                WordPrediction::Class { class, confidence } => {
                    if options.min_confidence.is_some_and(|m| confidence < m) {
                        return Ok(None);
                    }
                    ExpandedEntry::Class { class, confidence }
                }
                WordPrediction::Value(v) => {
                    let v = match options.clamp {
                        Some((lo, hi)) => v.clamp(lo, hi),
                        None => v,
                    };
                    ExpandedEntry::Score(v)
                }
            };
            Ok(Some((token.clone(), entry)))
        })
        .collect::<Result<_>>()?;
    let entries: Vec<_> = scored.into_iter().flatten().collect();
    Ok(ExpandedLexicon {
        classes: model.classes().map(<[String]>::to_vec),
        provenance: Provenance {
            model_id: model.id(),
            model_kind: model.kind_name().to_owned(),
            source_lexicon: options.source_lexicon.map(str::to_owned),
            embeddings_checksum: embeddings.checksum(),
            vocabulary_size: embeddings.len(),
            entries: entries.len(),
            min_confidence: options.min_confidence,
            clamp: options.clamp,
        },
        entries,
    })
}

impl ExpandedLexicon {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// TSV rows: `token<TAB>score` for continuous expansions,
    /// `token<TAB>class<TAB>confidence` for categorical ones. Numbers carry
    /// six decimals.
    pub fn write_tsv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(writer);
        for (token, entry) in &self.entries {
            match *entry {
                ExpandedEntry::Score(v) => writeln!(w, "{token}\t{v:.6}")?,
                ExpandedEntry::Class { class, confidence } => {
                    let name = self
                        .classes
                        .as_ref()
                        .and_then(|c| c.get(class))
                        .map(String::as_str)
                        .unwrap_or("?");
                    writeln!(w, "{token}\t{name}\t{confidence:.6}")?
                }
            }
        }
        w.flush()
    }

    pub fn write_lexicon(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_tsv(file).map_err(|e| Error::io(path, e))
    }

    pub fn write_provenance(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.provenance)? + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
