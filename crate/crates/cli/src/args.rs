//! Command-line and config-file arguments.
//!
//! Every field can come from a flag or from the `--config` file (TOML or
//! JSON, flat keys named like the long flags with `_` for `-`). Flags win.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "lexsub", version, about = "Expand subjective lexicons with learned embedding subspaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one subspace model and write its snapshot and training trace.
    Train(TrainArgs),
    /// Grid-search models on a lexicon split, or sweep a learning curve.
    Eval(EvalArgs),
    /// Apply a model snapshot to every word of an embedding file.
    Expand(ExpandArgs),
    /// Label messages with a lexicon and a threshold.
    Classify(ClassifyArgs),
    /// Export the subspace representation of chosen words.
    Project(ProjectArgs),
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Lexicon input shared by `train` and `eval`.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct LexiconInput {
    /// Embedding file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    /// `text` or `binary`; inferred from a `.bin` extension when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_format: Option<String>,
    /// Seed lexicon TSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    /// `categorical` or `continuous`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    /// Annotation scale of a continuous lexicon, as `lo,hi`.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<String>,
    /// Map continuous scores onto [-1, 1] using `--scale`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub normalize: bool,
    /// Drop continuous entries with |score| <= band (after normalization).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neutral_band: Option<f64>,
    /// Share of the lexicon held out for testing.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_frac: Option<f64>,
    /// Share of the remainder used for model selection.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev_frac: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: LexiconInput,
    /// Subspace size s.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subspace: Option<usize>,
    /// SGD learning rate.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: LexiconInput,
    /// Comma-separated models out of nlse, linear, l1, pca.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub models: Option<String>,
    /// Grid overrides such as `s=3,5;alpha=0.01`; each model takes the
    /// parameters it knows.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    /// Comma-separated training fractions; switches to a learning curve.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fractions: Option<String>,
    /// Trials per learning-curve point.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    /// Score the selected cell without refitting on train + dev.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub no_refit: bool,
    /// Also write the selected model of each kind as a snapshot.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub save_models: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ExpandArgs {
    /// Model snapshot JSON.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_format: Option<String>,
    /// Drop categorical predictions below this probability.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_confidence: Option<f64>,
    /// Clamp continuous predictions into `lo,hi`.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp: Option<String>,
    /// Only expand the tokens listed in this file, one per line.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vocab: Option<PathBuf>,
    /// Name of the seed lexicon, recorded in the provenance.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_lexicon: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ClassifyArgs {
    /// Continuous lexicon TSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<String>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub normalize: bool,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neutral_band: Option<f64>,
    /// Messages, one per line as `label<TAB>text` or bare text; `-` reads
    /// standard input.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub messages: Option<PathBuf>,
    /// Fixed decision threshold; skips estimation.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Corpus whose mean message score sets the threshold. Defaults to the
    /// classified messages.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ProjectArgs {
    /// Subspace model snapshot JSON.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_format: Option<String>,
    /// Tokens to project, one per line.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tokens: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

/// Settings every command shares.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct RunArgs {
    /// TOML or JSON file with default values for any flag.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Source of all randomness.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

pub trait CommandArgs: Serialize + DeserializeOwned + Sized {
    /// Keys accepted in a config file.
    const KEYS: &'static [&'static str];

    fn run_args(&self) -> &RunArgs;
    fn run_args_mut(&mut self) -> &mut RunArgs;

    /// Overlays explicitly given flags on the config file, if any.
    fn resolve(self) -> CliResult<Self> {
        let Some(path) = self.run_args().config.clone() else {
            return Ok(self);
        };
        let mut merged = match read_config(&path)? {
            Value::Object(map) => map,
            _ => return Err(CliError::usage(format!("{}: config must be a table of settings", path.display()))),
        };
        if let Some(key) = merged.keys().find(|k| !Self::KEYS.contains(&k.as_str())) {
            return Err(CliError::usage(format!("{}: unknown setting `{key}`", path.display())));
        }
        let flags = serde_json::to_value(&self).map_err(CliError::runtime)?;
        if let Value::Object(flags) = flags {
            merged.extend(flags);
        }
        let mut resolved: Self = serde_json::from_value(Value::Object(merged))
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        resolved.run_args_mut().config = Some(path);
        Ok(resolved)
    }
}

fn read_config(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

#[cfg(test)]
const INPUT_KEYS: [&str; 9] = [
    "embeddings",
    "embedding_format",
    "lexicon",
    "kind",
    "scale",
    "normalize",
    "neutral_band",
    "test_frac",
    "dev_frac",
];

macro_rules! command_args {
    ($ty:ty, [$($key:literal),* $(,)?]) => {
        impl CommandArgs for $ty {
            const KEYS: &'static [&'static str] = &["seed", "out", "workers", $($key),*];

            fn run_args(&self) -> &RunArgs {
                &self.run
            }

            fn run_args_mut(&mut self) -> &mut RunArgs {
                &mut self.run
            }
        }
    };
}

command_args!(
    TrainArgs,
    [
        "embeddings", "embedding_format", "lexicon", "kind", "scale", "normalize", "neutral_band", "test_frac",
        "dev_frac", "subspace", "alpha", "max_epochs", "patience"
    ]
);
command_args!(
    EvalArgs,
    [
        "embeddings", "embedding_format", "lexicon", "kind", "scale", "normalize", "neutral_band", "test_frac",
        "dev_frac", "models", "grid", "fractions", "trials", "max_epochs", "patience", "no_refit", "save_models"
    ]
);
command_args!(
    ExpandArgs,
    ["model", "embeddings", "embedding_format", "min_confidence", "clamp", "vocab", "source_lexicon"]
);
command_args!(
    ClassifyArgs,
    ["lexicon", "scale", "normalize", "neutral_band", "messages", "threshold", "calibration"]
);
command_args!(ProjectArgs, ["model", "embeddings", "embedding_format", "tokens"]);
