use std::fs;
use std::path::{Path, PathBuf};

use lexsub_core::embedding::{EmbeddingFormat, EmbeddingMatrix};
use lexsub_core::evaluation::Task;
use lexsub_core::lexicon::{parse_lexicon, ContinuousLexicon, Lexicon, LexiconKind, SplitConfig};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{LexiconInput, RunArgs};
use crate::error::{CliError, CliResult};

pub fn required<'a, T>(value: &'a Option<T>, flag: &str) -> CliResult<&'a T> {
    value.as_ref().ok_or_else(|| CliError::usage(format!("missing required setting --{flag}")))
}

pub fn existing<'a>(value: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    let path = required(value, flag)?;
    if path.as_os_str() != "-" && !path.exists() {
        return Err(CliError::usage(format!("--{flag}: {} does not exist", path.display())));
    }
    Ok(path)
}

/// Parses `lo,hi`.
pub fn parse_pair(text: &str, flag: &str) -> CliResult<(f64, f64)> {
    let bad = || CliError::usage(format!("--{flag} expects `lo,hi`, got `{text}`"));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    let lo: f64 = a.trim().parse().map_err(|_| bad())?;
    let hi: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}

pub fn parse_list<T: std::str::FromStr>(text: &str, flag: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| CliError::usage(format!("--{flag}: cannot parse `{s}`"))))
        .collect()
}

pub fn seed(run: &RunArgs) -> u64 {
    run.seed.unwrap_or(0)
}

pub fn embedding_format(path: &Path, explicit: &Option<String>) -> CliResult<EmbeddingFormat> {
    match explicit {
        Some(name) => name.parse().map_err(CliError::input),
        None if path.extension().is_some_and(|e| e == "bin") => Ok(EmbeddingFormat::Binary),
        None => Ok(EmbeddingFormat::Text),
    }
}

pub fn load_embeddings(path: &Option<PathBuf>, format: &Option<String>) -> CliResult<EmbeddingMatrix> {
    let path = existing(path, "embeddings")?;
    let format = embedding_format(path, format)?;
    let e = EmbeddingMatrix::load(path, format).map_err(CliError::input)?;
    log::info!("loaded {} embeddings of dimension {} from {}", e.len(), e.dim(), path.display());
    Ok(e)
}

/// Applies optional normalization and the neutral band to a continuous
/// lexicon.
pub fn prepare_continuous(
    lex: ContinuousLexicon,
    normalize: bool,
    neutral_band: Option<f64>,
) -> CliResult<ContinuousLexicon> {
    let lex = if normalize {
        lex.normalize_to_unit_range().map_err(CliError::input)?
    } else {
        lex
    };
    match neutral_band {
        Some(band) => lex.filter_neutral(band).map_err(CliError::input),
        None => Ok(lex),
    }
}

pub fn load_lexicon(input: &LexiconInput) -> CliResult<Lexicon> {
    let path = existing(&input.lexicon, "lexicon")?;
    let kind: LexiconKind = required(&input.kind, "kind")?.parse().map_err(CliError::input)?;
    let scale = input.scale.as_deref().map(|s| parse_pair(s, "scale")).transpose()?;
    let lexicon = parse_lexicon(path, kind, scale).map_err(CliError::input)?;
    match lexicon {
        Lexicon::Continuous(lex) => Ok(Lexicon::Continuous(prepare_continuous(lex, input.normalize, input.neutral_band)?)),
        Lexicon::Categorical(_) if input.normalize || input.neutral_band.is_some() || scale.is_some() => Err(
            CliError::usage("--scale, --normalize and --neutral-band only apply to continuous lexicons"),
        ),
        categorical => Ok(categorical),
    }
}

pub fn split_config(input: &LexiconInput) -> SplitConfig {
    let d = SplitConfig::default();
    SplitConfig {
        test_frac: input.test_frac.unwrap_or(d.test_frac),
        dev_frac: input.dev_frac.unwrap_or(d.dev_frac),
    }
}

pub fn task_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "task".to_owned())
}

/// Loads embeddings and lexicon and builds the split task.
pub fn load_task(input: &LexiconInput, seed: u64) -> CliResult<(EmbeddingMatrix, Task)> {
    let lexicon = load_lexicon(input)?;
    let embeddings = load_embeddings(&input.embeddings, &input.embedding_format)?;
    let name = task_name(existing(&input.lexicon, "lexicon")?);
    let task = Task::from_lexicon(name, &embeddings, &lexicon, &split_config(input), seed).map_err(CliError::compute)?;
    Ok((embeddings, task))
}

pub fn output_dir(run: &RunArgs) -> CliResult<PathBuf> {
    let out = required(&run.out, "out")?.clone();
    fs::create_dir_all(&out).map_err(|e| CliError::usage(format!("cannot create {}: {e}", out.display())))?;
    Ok(out)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::write(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::write(path, e))
}

/// Record of one command invocation: resolved settings, seed, versions,
/// input fingerprints and the files written.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub snapshot_version: u32,
    pub command: &'static str,
    pub seed: u64,
    pub settings: Value,
    pub inputs: Value,
    pub details: Value,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new<A: Serialize>(command: &'static str, args: &A, seed: u64) -> CliResult<Self> {
        Ok(Manifest {
            tool: "lexsub",
            version: env!("CARGO_PKG_VERSION"),
            snapshot_version: lexsub_core::snapshot::SNAPSHOT_VERSION,
            command,
            seed,
            settings: serde_json::to_value(args).map_err(CliError::runtime)?,
            inputs: json!({}),
            details: json!({}),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, name: &str, value: Value) {
        self.inputs[name] = value;
    }

    pub fn detail(&mut self, name: &str, value: Value) {
        self.details[name] = value;
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        write_json(&dir.join("manifest.json"), self)
    }
}

pub fn embeddings_fingerprint(path: &Option<PathBuf>, e: &EmbeddingMatrix) -> Value {
    json!({ "path": path, "words": e.len(), "dim": e.dim(), "checksum": e.checksum() })
}
