//! Experiment protocol: hyperparameter grids, grid search with dev-based
//! selection, learning curves, and CSV/JSON reports.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_pca, DenseFeatures, LinearConfig, LinearModel, Regularizer};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, SplitConfig};
use crate::metrics::{accuracy, kendall_tau, macro_avg_f1};
use crate::snapshot::{ModelSnapshot, Predictions};
use crate::subspace::{resolve, train_classifier, train_regressor, TrainConfig};

/// Misclassification costs for the linear baselines (`lambda = 1 / C`).
pub const COST_GRID: [f64; 7] = [1e-2, 1e-1, 1.0, 10.0, 50.0, 100.0, 150.0];
/// RBF kernel widths. Kept for configuration parity; no kernel baseline uses it.
pub const GAMMA_GRID: [f64; 5] = [1e-3, 1e-2, 1e-1, 1.0, 10.0];
/// Regularization strengths for the l1 baseline.
pub const LAMBDA_GRID: [f64; 6] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0];
/// PCA components retained.
pub const PCA_COMPONENTS: [f64; 5] = [3.0, 5.0, 10.0, 15.0, 20.0];
/// Subspace sizes for the subspace model.
pub const SUBSPACE_SIZES: [f64; 5] = [3.0, 5.0, 10.0, 15.0, 20.0];
/// SGD learning rates for the subspace model.
pub const LEARNING_RATES: [f64; 5] = [1e-3, 1e-2, 5e-2, 1e-1, 5e-1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Nlse,
    Linear,
    L1,
    Pca,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Nlse, ModelKind::Linear, ModelKind::L1, ModelKind::Pca];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Nlse => "nlse",
            ModelKind::Linear => "linear",
            ModelKind::L1 => "l1",
            ModelKind::Pca => "pca",
        }
    }

    pub fn default_grid(self) -> HyperGrid {
        let grid = match self {
            ModelKind::Nlse => vec![("s", SUBSPACE_SIZES.to_vec()), ("alpha", LEARNING_RATES.to_vec())],
            ModelKind::Linear => vec![("C", COST_GRID.to_vec())],
            ModelKind::L1 => vec![("lambda", LAMBDA_GRID.to_vec())],
            ModelKind::Pca => vec![("k", PCA_COMPONENTS.to_vec()), ("C", COST_GRID.to_vec())],
        };
        HyperGrid::new(grid.into_iter().map(|(n, v)| (n.to_owned(), v)).collect()).expect("default grids are valid")
    }

    fn param_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Nlse => &["s", "alpha"],
            ModelKind::Linear => &["C"],
            ModelKind::L1 => &["lambda"],
            ModelKind::Pca => &["k", "C"],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model `{s}` (expected nlse, linear, l1 or pca)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MacroF1,
    KendallTau,
    Accuracy,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::MacroF1 => "macro_f1",
            Metric::KendallTau => "kendall_tau",
            Metric::Accuracy => "accuracy",
        }
    }
}

/// Named candidate values per hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    params: Vec<(String, Vec<f64>)>,
}

/// One point of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell(pub Vec<(String, f64)>);

impl Cell {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    fn require(&self, name: &str) -> Result<f64> {
        self.get(name)
            .ok_or_else(|| Error::invalid(format!("grid cell {self} lacks `{name}`")))
    }

    fn require_count(&self, name: &str) -> Result<usize> {
        let v = self.require(name)?;
        if v < 1.0 || v.fract() != 0.0 {
            return Err(Error::invalid(format!("`{name}` must be a positive integer, got {v}")));
        }
        Ok(v as usize)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (name, value)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{name}={value}")?;
        }
        Ok(())
    }
}

impl HyperGrid {
    pub fn new(params: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::invalid("a grid needs at least one hyperparameter"));
        }
        for (name, values) in &params {
            if values.is_empty() {
                return Err(Error::invalid(format!("no candidate values for `{name}`")));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("non-finite candidate for `{name}`")));
            }
        }
        Ok(HyperGrid { params })
    }

    /// Parses `name=v1,v2;name2=v3`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut params = Vec::new();
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, values) = part
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("expected `name=values` in `{part}`")))?;
            let values = values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid(format!("invalid value `{v}` for `{name}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            params.push((name.trim().to_owned(), values));
        }
        Self::new(params)
    }

    pub fn params(&self) -> &[(String, Vec<f64>)] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.iter().map(|(_, v)| v.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cartesian product in declared order; the last parameter varies fastest.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = vec![Cell(Vec::new())];
        for (name, values) in &self.params {
            cells = cells
                .into_iter()
                .flat_map(|cell| {
                    values.iter().map(move |&v| {
                        let mut next = cell.0.clone();
                        next.push((name.clone(), v));
                        Cell(next)
                    })
                })
                .collect();
        }
        cells
    }

    /// Replaces the candidates of parameters present in `overrides`.
    pub fn with_overrides(&self, overrides: &HyperGrid) -> HyperGrid {
        let mut params = self.params.clone();
        for (name, values) in &overrides.params {
            match params.iter_mut().find(|(n, _)| n == name) {
                Some(slot) => slot.1 = values.clone(),
                None => params.push((name.clone(), values.clone())),
            }
        }
        HyperGrid { params }
    }

    fn check_for(&self, kind: ModelKind) -> Result<()> {
        for name in kind.param_names() {
            if !self.params.iter().any(|(n, _)| n == name) {
                return Err(Error::invalid(format!("grid for {kind} lacks `{name}`")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSplit<T> {
    pub train: Vec<(usize, T)>,
    pub dev: Vec<(usize, T)>,
    pub test: Vec<(usize, T)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskData {
    Classification {
        classes: Vec<String>,
        split: ResolvedSplit<usize>,
    },
    Regression {
        split: ResolvedSplit<f64>,
    },
}

/// A lexicon split into train/dev/test and resolved against an embedding
/// matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: String,
    pub data: TaskData,
}

impl Task {
    /// Drops lexicon words without embeddings, splits with `seed` and maps
    /// tokens to embedding columns.
    pub fn from_lexicon(
        id: impl Into<String>,
        embeddings: &EmbeddingMatrix,
        lexicon: &Lexicon,
        split_cfg: &SplitConfig,
        seed: u64,
    ) -> Result<Self> {
        let mut lexicon = lexicon.clone();
        lexicon.drop_unembedded(embeddings);
        let data = match &lexicon {
            Lexicon::Categorical(lex) => {
                let split = lex.split(split_cfg, seed)?;
                TaskData::Classification {
                    classes: lex.classes().to_vec(),
                    split: ResolvedSplit {
                        train: resolve(embeddings, &split.train)?,
                        dev: resolve(embeddings, &split.dev)?,
                        test: resolve(embeddings, &split.test)?,
                    },
                }
            }
            Lexicon::Continuous(lex) => {
                let split = lex.split(split_cfg, seed)?;
                TaskData::Regression {
                    split: ResolvedSplit {
                        train: resolve(embeddings, &split.train)?,
                        dev: resolve(embeddings, &split.dev)?,
                        test: resolve(embeddings, &split.test)?,
                    },
                }
            }
        };
        Ok(Task { id: id.into(), data })
    }

    pub fn metric(&self) -> Metric {
        match self.data {
            TaskData::Classification { .. } => Metric::MacroF1,
            TaskData::Regression { .. } => Metric::KendallTau,
        }
    }

    pub fn train_len(&self) -> usize {
        match &self.data {
            TaskData::Classification { split, .. } => split.train.len(),
            TaskData::Regression { split } => split.train.len(),
        }
    }

    /// Copy of the task whose training part keeps only positions `keep`.
    pub fn with_train_subset(&self, keep: &[usize]) -> Task {
        fn pick<T: Copy>(split: &ResolvedSplit<T>, keep: &[usize]) -> ResolvedSplit<T> {
            ResolvedSplit {
                train: keep.iter().map(|&k| split.train[k]).collect(),
                dev: split.dev.clone(),
                test: split.test.clone(),
            }
        }
        let data = match &self.data {
            TaskData::Classification { classes, split } => TaskData::Classification {
                classes: classes.clone(),
                split: pick(split, keep),
            },
            TaskData::Regression { split } => TaskData::Regression { split: pick(split, keep) },
        };
        Task {
            id: self.id.clone(),
            data,
        }
    }
}

/// Which part of a split to fit on and which to score.
#[derive(Clone, Copy)]
enum Stage {
    Select,
    Refit { epochs: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Base configuration for the subspace model; `s`, `alpha` and `seed`
    /// are overwritten per cell.
    pub nlse: TrainConfig,
    /// Base configuration for linear baselines; regularizer and strength
    /// are overwritten per cell.
    pub linear: LinearConfig,
    /// Retrain the selected cell on train + dev before testing.
    pub refit_on_dev: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            nlse: TrainConfig::default(),
            linear: LinearConfig::default(),
            refit_on_dev: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub index: usize,
    pub params: Cell,
    pub dev_score: Option<f64>,
    /// Best epoch of the subspace model; `None` for baselines.
    pub epochs: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    /// Model kind name, or `lexicon` for lexicon-based message classification.
    pub model: String,
    pub metric: Metric,
    pub params: Cell,
    pub dev_score: Option<f64>,
    pub test_score: Option<f64>,
    pub seed: u64,
    pub refit_on_dev: bool,
    pub train_size: usize,
    pub test_size: usize,
    /// Share of unscorable items, for lexicon-based message classification.
    pub abstention_rate: Option<f64>,
    pub elapsed_ms: u64,
    pub cells: Vec<CellResult>,
}

/// Scores predictions with the task metric. Undefined values (e.g. tau of
/// a constant prediction) come back as `None`.
pub fn score(metric: Metric, gold: &Predictions, pred: &Predictions, n_classes: usize) -> Result<Option<f64>> {
    match (gold, pred) {
        (Predictions::Classes(g), Predictions::Classes(p)) => Ok(Some(match metric {
            Metric::MacroF1 => macro_avg_f1(g, p, n_classes)?,
            Metric::Accuracy => accuracy(g, p)?,
            Metric::KendallTau => return Err(Error::invalid("kendall tau needs real-valued predictions")),
        })),
        (Predictions::Values(g), Predictions::Values(p)) => match kendall_tau(p, g) {
            Ok(t) => Ok(Some(t)),
            Err(Error::Undefined(_)) => Ok(None),
            Err(e) => Err(e),
        },
        _ => Err(Error::invalid("gold labels and predictions have different types")),
    }
}

fn better(candidate: Option<f64>, best: Option<f64>) -> bool {
    match (candidate, best) {
        (Some(c), Some(b)) => c > b,
        (Some(_), None) => true,
        _ => false,
    }
}

/// Fits one grid cell. During selection the subspace model early-stops on
/// dev; a refit trains on train + dev for the selected epoch count.
fn fit_cell(
    kind: ModelKind,
    cell: &Cell,
    embeddings: &EmbeddingMatrix,
    task: &Task,
    opts: &EvalOptions,
    seed: u64,
    stage: Stage,
) -> Result<(ModelSnapshot, Option<usize>)> {
    fn parts<T: Copy>(split: &ResolvedSplit<T>, stage: Stage) -> (Vec<(usize, T)>, &[(usize, T)]) {
        match stage {
            Stage::Select => (split.train.clone(), &split.dev),
            Stage::Refit { .. } => {
                let mut all = split.train.clone();
                all.extend_from_slice(&split.dev);
                (all, &[])
            }
        }
    }

    let linear_cfg = |regularizer, lambda| LinearConfig {
        regularizer,
        lambda,
        ..opts.linear
    };
    let cost_lambda = |cell: &Cell| -> Result<f64> {
        let c = cell.require("C")?;
        if c <= 0.0 {
            return Err(Error::invalid(format!("cost C must be positive, got {c}")));
        }
        Ok(1.0 / c)
    };

    match kind {
        ModelKind::Nlse => {
            let mut cfg = TrainConfig {
                subspace_size: cell.require_count("s")?,
                learning_rate: cell.require("alpha")?,
                seed,
                ..opts.nlse.clone()
            };
            if let Stage::Refit { epochs: Some(e) } = stage {
                cfg.max_epochs = e;
            }
            match &task.data {
                TaskData::Classification { classes, split } => {
                    let (train, dev) = parts(split, stage);
                    let (model, trace) = train_classifier(embeddings, &train, dev, classes, &cfg)?;
                    Ok((ModelSnapshot::NlseClassifier(model), Some(trace.best_epoch)))
                }
                TaskData::Regression { split } => {
                    let (train, dev) = parts(split, stage);
                    let (model, trace) = train_regressor(embeddings, &train, dev, &cfg)?;
                    Ok((ModelSnapshot::NlseRegressor(model), Some(trace.best_epoch)))
                }
            }
        }
        ModelKind::Linear | ModelKind::L1 | ModelKind::Pca => {
            let cfg = match kind {
                ModelKind::L1 => linear_cfg(Regularizer::L1, cell.require("lambda")?),
                _ => linear_cfg(Regularizer::L2, cost_lambda(cell)?),
            };
            let (indices, targets) = match &task.data {
                TaskData::Classification { split, .. } => {
                    let (train, _) = parts(split, stage);
                    let idx: Vec<usize> = train.iter().map(|p| p.0).collect();
                    (idx, Predictions::Classes(train.iter().map(|p| p.1).collect()))
                }
                TaskData::Regression { split } => {
                    let (train, _) = parts(split, stage);
                    let idx: Vec<usize> = train.iter().map(|p| p.0).collect();
                    (idx, Predictions::Values(train.iter().map(|p| p.1).collect()))
                }
            };
            let fit_on = |features: &DenseFeatures| -> Result<LinearModel> {
                match (&task.data, &targets) {
                    (TaskData::Classification { classes, .. }, Predictions::Classes(labels)) => {
                        LinearModel::fit_classifier(features, labels, classes, &cfg)
                    }
                    (_, Predictions::Values(values)) => LinearModel::fit_regressor(features, values, &cfg),
                    _ => unreachable!("targets follow the task type"),
                }
            };
            if kind == ModelKind::Pca {
                let pca = fit_pca(embeddings, &indices, cell.require_count("k")?)?;
                let features = pca.transform(embeddings, &indices)?;
                let linear = fit_on(&features)?;
                Ok((ModelSnapshot::PcaLinear { pca, linear }, None))
            } else {
                let features = DenseFeatures::from_embeddings(embeddings, &indices);
                Ok((ModelSnapshot::Linear(fit_on(&features)?), None))
            }
        }
    }
}

fn evaluate_on<T: Copy>(
    model: &ModelSnapshot,
    embeddings: &EmbeddingMatrix,
    items: &[(usize, T)],
    wrap: impl Fn(Vec<T>) -> Predictions,
    metric: Metric,
    n_classes: usize,
) -> Result<Option<f64>> {
    if items.is_empty() {
        return Ok(None);
    }
    let indices: Vec<usize> = items.iter().map(|p| p.0).collect();
    let gold = wrap(items.iter().map(|p| p.1).collect());
    let pred = model.predict(embeddings, &indices)?;
    score(metric, &gold, &pred, n_classes)
}

fn dev_and_test_scores(model: &ModelSnapshot, embeddings: &EmbeddingMatrix, task: &Task, dev: bool) -> Result<Option<f64>> {
    let metric = task.metric();
    match &task.data {
        TaskData::Classification { classes, split } => {
            let items = if dev { &split.dev } else { &split.test };
            evaluate_on(model, embeddings, items, Predictions::Classes, metric, classes.len())
        }
        TaskData::Regression { split } => {
            let items = if dev { &split.dev } else { &split.test };
            evaluate_on(model, embeddings, items, Predictions::Values, metric, 0)
        }
    }
}

/// Result of a grid search: the report plus the final model.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub report: EvalReport,
    pub model: ModelSnapshot,
}

/// Trains one model per grid cell on train, scores on dev, keeps the best
/// cell (ties go to the earliest cell), optionally refits it on train + dev
/// and scores the test part. Cells run in parallel on the current rayon pool;
/// results do not depend on the number of threads.
pub fn grid_search(
    task: &Task,
    kind: ModelKind,
    grid: &HyperGrid,
    embeddings: &EmbeddingMatrix,
    seed: u64,
    opts: &EvalOptions,
) -> Result<SearchOutcome> {
    grid.check_for(kind)?;
    let started = Instant::now();
    let cells = grid.cells();
    let fitted: Vec<(CellResult, Option<ModelSnapshot>)> = cells
        .par_iter()
        .enumerate()
        .map(|(index, cell)| {
            let outcome = fit_cell(kind, cell, embeddings, task, opts, seed, Stage::Select)
                .and_then(|(model, epochs)| {
                    let dev = dev_and_test_scores(&model, embeddings, task, true)?;
                    Ok((model, epochs, dev))
                });
            match outcome {
                Ok((model, epochs, dev_score)) => (
                    CellResult {
                        index,
                        params: cell.clone(),
                        dev_score,
                        epochs,
                        error: None,
                    },
                    Some(model),
                ),
                Err(e) => {
                    log::error!("{} {kind} cell {cell} failed: {e}", task.id);
                    (
                        CellResult {
                            index,
                            params: cell.clone(),
                            dev_score: None,
                            epochs: None,
                            error: Some(e.to_string()),
                        },
                        None,
                    )
                }
            }
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, (result, model)) in fitted.iter().enumerate() {
        if model.is_none() {
            continue;
        }
        match best {
            None => best = Some(i),
            Some(b) if better(result.dev_score, fitted[b].0.dev_score) => best = Some(i),
            _ => {}
        }
    }
    let best = best.ok_or_else(|| Error::Training(format!("every {kind} grid cell failed on {}", task.id)))?;
    let (chosen, selected_model) = &fitted[best];
    let model = if opts.refit_on_dev {
        fit_cell(
            kind,
            &chosen.params,
            embeddings,
            task,
            opts,
            seed,
            Stage::Refit { epochs: chosen.epochs },
        )?
        .0
    } else {
        selected_model.clone().expect("best cell has a model")
    };
    let test_score = dev_and_test_scores(&model, embeddings, task, false)?;
    let (train_size, test_size) = match &task.data {
        TaskData::Classification { split, .. } => (split.train.len(), split.test.len()),
        TaskData::Regression { split } => (split.train.len(), split.test.len()),
    };
    let report = EvalReport {
        task: task.id.clone(),
        model: kind.name().to_owned(),
        metric: task.metric(),
        params: chosen.params.clone(),
        dev_score: chosen.dev_score,
        test_score,
        seed,
        refit_on_dev: opts.refit_on_dev,
        train_size,
        test_size,
        abstention_rate: None,
        elapsed_ms: started.elapsed().as_millis() as u64,
        cells: fitted.into_iter().map(|(r, _)| r).collect(),
    };
    Ok(SearchOutcome { report, model })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub model: ModelKind,
    pub fraction: f64,
    pub train_size: usize,
    /// Mean test score over trials with a defined score.
    pub mean: Option<f64>,
    /// Sample standard deviation; zero for a single trial.
    pub std: Option<f64>,
    pub trials: usize,
}

/// Test score as a function of training-set size.
///
/// Each trial draws one seeded permutation of the training part; the sample
/// for fraction `f` is its first `round(f * n)` positions, kept in original
/// order, so smaller samples are subsets of larger ones and `f = 1` is the
/// full training part. Trial `t` uses seed `seed + t` for both sampling and
/// training. Dev and test parts are never subsampled.
pub fn learning_curve(
    task: &Task,
    models: &[(ModelKind, HyperGrid)],
    fractions: &[f64],
    trials: usize,
    embeddings: &EmbeddingMatrix,
    seed: u64,
    opts: &EvalOptions,
) -> Result<Vec<CurveRow>> {
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    if fractions.is_empty() {
        return Err(Error::invalid("no fractions given"));
    }
    if fractions.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("fractions must be sorted ascending"));
    }
    let n = task.train_len();
    let sizes: Vec<usize> = fractions
        .iter()
        .map(|&f| {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::invalid(format!("fraction {f} must lie in (0, 1]")));
            }
            let m = (f * n as f64).round() as usize;
            if m < 2 {
                return Err(Error::invalid(format!("fraction {f} leaves {m} training items")));
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;

    // scores[model][fraction][trial]
    let mut scores = vec![vec![Vec::with_capacity(trials); fractions.len()]; models.len()];
    for t in 0..trials {
        let trial_seed = seed.wrapping_add(t as u64);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(trial_seed));
        for (fi, &m) in sizes.iter().enumerate() {
            let mut keep = perm[..m].to_vec();
            keep.sort_unstable();
            let sub = task.with_train_subset(&keep);
            for (mi, (kind, grid)) in models.iter().enumerate() {
                let outcome = grid_search(&sub, *kind, grid, embeddings, trial_seed, opts)?;
                scores[mi][fi].push(outcome.report.test_score);
            }
        }
    }

    let mut rows = Vec::with_capacity(models.len() * fractions.len());
    for (mi, (kind, _)) in models.iter().enumerate() {
        for (fi, &fraction) in fractions.iter().enumerate() {
            let defined: Vec<f64> = scores[mi][fi].iter().flatten().copied().collect();
            let (mean, std) = if defined.is_empty() {
                (None, None)
            } else {
                let k = defined.len() as f64;
                let mean = defined.iter().sum::<f64>() / k;
                let std = if defined.len() > 1 {
                    (defined.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
                } else {
                    0.0
                };
                (Some(mean), Some(std))
            };
            rows.push(CurveRow {
                model: *kind,
                fraction,
                train_size: sizes[fi],
                mean,
                std,
                trials: defined.len(),
            });
        }
    }
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One summary row per report followed by its grid cells. Timing is left
/// out so that identical runs produce identical files.
pub fn write_reports_csv<W: Write>(reports: &[EvalReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::invalid(format!("CSV write failed: {e}"));
    w.write_record([
        "task",
        "model",
        "row",
        "cell",
        "params",
        "metric",
        "dev_score",
        "test_score",
        "abstention_rate",
        "seed",
        "status",
    ])
    .map_err(io)?;
    for r in reports {
        w.write_record([
            r.task.clone(),
            r.model.to_string(),
            "summary".into(),
            String::new(),
            r.params.to_string(),
            r.metric.name().into(),
            opt(r.dev_score),
            opt(r.test_score),
            opt(r.abstention_rate),
            r.seed.to_string(),
            "ok".into(),
        ])
        .map_err(io)?;
        for c in &r.cells {
            w.write_record([
                r.task.clone(),
                r.model.to_string(),
                "cell".into(),
                c.index.to_string(),
                c.params.to_string(),
                r.metric.name().into(),
                opt(c.dev_score),
                String::new(),
                String::new(),
                r.seed.to_string(),
                c.error.clone().map_or_else(|| "ok".into(), |e| format!("error: {e}")),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::invalid(format!("CSV write failed: {e}")))
}

pub fn write_curve_csv<W: Write>(rows: &[CurveRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::invalid(format!("CSV write failed: {e}"));
    w.write_record(["model", "fraction", "train_size", "mean", "std", "trials"])
        .map_err(io)?;
    for r in rows {
        w.write_record([
            r.model.to_string(),
            r.fraction.to_string(),
            r.train_size.to_string(),
            opt(r.mean),
            opt(r.std),
            r.trials.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::invalid(format!("CSV write failed: {e}")))
}
