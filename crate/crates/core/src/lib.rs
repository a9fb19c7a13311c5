//! Subjective lexicon expansion from frozen word embeddings.
//!
//! A small projection `S` maps generic embeddings into a task-specific
//! subspace; a softmax or linear head on top of `sigmoid(S x)` predicts
//! lexicon labels or scores, which can then be extended to every word of
//! the embedding vocabulary. Linear, sparse and PCA baselines, a grid-search
//! harness and a lexicon-based message classifier complete the toolkit.

pub mod baselines;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod expansion;
pub mod lexicon;
pub mod metrics;
pub mod sentiment;
pub mod snapshot;
pub mod subspace;
pub mod synthetic;

pub use embedding::{EmbeddingFormat, EmbeddingMatrix};
pub use error::{Error, Result};
pub use evaluation::{grid_search, learning_curve, EvalOptions, EvalReport, HyperGrid, ModelKind, Task};
pub use lexicon::{CategoricalLexicon, ContinuousLexicon, Lexicon, LexiconKind};
pub use snapshot::ModelSnapshot;
pub use subspace::{SubspaceClassifier, SubspaceModel, SubspaceRegressor, TrainConfig};
