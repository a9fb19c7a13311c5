//! Versioned on-disk container for trained models.
//!
//! A snapshot is one JSON document: a format tag, a version number and the
//! model under a `kind` tag. Parameter blocks are row-major arrays; floats
//! are written in shortest round-trip form, so loading a snapshot restores
//! bit-identical parameters.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{DenseFeatures, LinearHead, LinearModel, PcaTransform};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::subspace::{argmax, snapshot_id, softmax, SubspaceClassifier, SubspaceModel, SubspaceRegressor};

pub const SNAPSHOT_FORMAT: &str = "lexsub-model";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSnapshot {
    NlseClassifier(SubspaceClassifier),
    NlseRegressor(SubspaceRegressor),
    Linear(LinearModel),
    PcaLinear { pca: PcaTransform, linear: LinearModel },
}

/// Prediction for a single word.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WordPrediction {
    Class { class: usize, confidence: f64 },
    Value(f64),
}

/// Predictions for a batch of words.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    Classes(Vec<usize>),
    Values(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    model: ModelSnapshot,
}

impl ModelSnapshot {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelSnapshot::NlseClassifier(_) => "nlse_classifier",
            ModelSnapshot::NlseRegressor(_) => "nlse_regressor",
            ModelSnapshot::Linear(_) => "linear",
            ModelSnapshot::PcaLinear { .. } => "pca_linear",
        }
    }

    /// Class names for categorical models, `None` for regressors.
    pub fn classes(&self) -> Option<&[String]> {
        fn linear_classes(m: &LinearModel) -> Option<&[String]> {
            match &m.head {
                LinearHead::Classifier { classes } => Some(classes.as_slice()),
                LinearHead::Regressor => None,
            }
        }
        match self {
            ModelSnapshot::NlseClassifier(m) => Some(m.classes()),
            ModelSnapshot::NlseRegressor(_) => None,
            ModelSnapshot::Linear(m) => linear_classes(m),
            ModelSnapshot::PcaLinear { linear, .. } => linear_classes(linear),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ModelSnapshot::NlseClassifier(m) => m.projection().dim(),
            ModelSnapshot::NlseRegressor(m) => m.projection().dim(),
            ModelSnapshot::Linear(m) => m.dim,
            ModelSnapshot::PcaLinear { pca, .. } => pca.dim(),
        }
    }

    pub fn id(&self) -> String {
        snapshot_id(self)
    }

    fn check(&self, embeddings: &EmbeddingMatrix) -> Result<()> {
        if embeddings.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: embeddings.dim(),
            });
        }
        Ok(())
    }

    /// Raw scores: class probabilities, or a single regression output.
    fn outputs(&self, embeddings: &EmbeddingMatrix, index: usize) -> Result<Vec<f64>> {
        self.check(embeddings)?;
        match self {
            ModelSnapshot::NlseClassifier(m) => m.classify_proba(embeddings, index),
            ModelSnapshot::NlseRegressor(m) => Ok(vec![m.predict_value(embeddings, index)?]),
            ModelSnapshot::Linear(m) => m.decision(embeddings.column(index)),
            ModelSnapshot::PcaLinear { pca, linear } => linear.decision(&pca.apply(embeddings.column(index))?),
        }
    }

    pub fn predict_word(&self, embeddings: &EmbeddingMatrix, index: usize) -> Result<WordPrediction> {
        let out = self.outputs(embeddings, index)?;
        Ok(match self {
            ModelSnapshot::NlseClassifier(_) => {
                let class = argmax(&out);
                WordPrediction::Class {
                    class,
                    confidence: out[class],
                }
            }
            _ if self.classes().is_some() => {
                let p = softmax(&out);
                let class = argmax(&p);
                WordPrediction::Class {
                    class,
                    confidence: p[class],
                }
            }
            _ => WordPrediction::Value(out[0]),
        })
    }

    pub fn predict(&self, embeddings: &EmbeddingMatrix, indices: &[usize]) -> Result<Predictions> {
        self.check(embeddings)?;
        if let ModelSnapshot::PcaLinear { pca, linear } = self {
            let features: DenseFeatures = pca.transform(embeddings, indices)?;
            return Ok(match linear.head {
                LinearHead::Classifier { .. } => Predictions::Classes(linear.predict_classes(&features)?),
                LinearHead::Regressor => Predictions::Values(linear.predict_values(&features)?),
            });
        }
        let preds = indices
            .iter()
            .map(|&i| self.predict_word(embeddings, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(if self.classes().is_some() {
            Predictions::Classes(
                preds
                    .into_iter()
                    .map(|p| match p {
                        WordPrediction::Class { class, .. } => class,
                        WordPrediction::Value(_) => unreachable!("classifier yields classes"),
                    })
                    .collect(),
            )
        } else {
            Predictions::Values(
                preds
                    .into_iter()
                    .map(|p| match p {
                        WordPrediction::Value(v) => v,
                        WordPrediction::Class { .. } => unreachable!("regressor yields values"),
                    })
                    .collect(),
            )
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let envelope = Envelope {
            format: SNAPSHOT_FORMAT.to_owned(),
            version: SNAPSHOT_VERSION,
            model: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&envelope)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let envelope: Envelope = serde_json::from_str(text)?;
        if envelope.format != SNAPSHOT_FORMAT {
            return Err(Error::invalid(format!("not a model snapshot (format `{}`)", envelope.format)));
        }
        if envelope.version != SNAPSHOT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported snapshot version {} (expected {SNAPSHOT_VERSION})",
                envelope.version
            )));
        }
        Ok(envelope.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
