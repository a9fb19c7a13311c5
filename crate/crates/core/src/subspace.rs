//! Non-linear subspace embedding models.
//!
//! A word vector `x` (a column of the frozen embedding matrix) is projected to
//! a small subspace and squashed, `h = sigmoid(S x)`. A softmax head turns `h`
//! into class probabilities, a linear head into a real score. Only `S` and
//! the head are trained; the embedding matrix is borrowed immutably
//! everywhere in this module.

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::metrics::{kendall_tau, macro_avg_f1};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Softmax with max-logit subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits.iter().map(|&a| (a - max).exp()).collect();
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }
    p
}

/// `log(sum(exp(logits)))`, stable for large logits.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&a| (a - max).exp()).sum::<f64>().ln()
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The learned `s x d` projection, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    subspace: usize,
    dim: usize,
    weights: Vec<f64>,
}

impl Projection {
    pub fn zeros(subspace: usize, dim: usize) -> Result<Self> {
        if subspace == 0 || subspace > dim {
            return Err(Error::invalid(format!(
                "subspace size {subspace} must lie in [1, {dim}]"
            )));
        }
        Ok(Projection {
            subspace,
            dim,
            weights: vec![0.0; subspace * dim],
        })
    }

    pub fn from_rows(subspace: usize, dim: usize, weights: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(subspace, dim)?;
        if weights.len() != subspace * dim {
            return Err(Error::DimensionMismatch {
                expected: subspace * dim,
                got: weights.len(),
            });
        }
        p.weights = weights;
        Ok(p)
    }

    /// Uniform in `+-sqrt(6 / (d + s))`.
    fn glorot(subspace: usize, dim: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut p = Self::zeros(subspace, dim)?;
        let bound = (6.0 / (dim + subspace) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        for w in &mut p.weights {
            *w = dist.sample(rng);
        }
        Ok(p)
    }

    pub fn subspace(&self) -> usize {
        self.subspace
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.dim..(r + 1) * self.dim]
    }

    fn check(&self, embeddings: &EmbeddingMatrix) -> Result<()> {
        if embeddings.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: embeddings.dim(),
            });
        }
        Ok(())
    }

    /// `sigmoid(S x)` written into `out`.
    fn hidden_into(&self, x: &[f64], out: &mut [f64]) {
        for (r, h) in out.iter_mut().enumerate() {
            *h = sigmoid(dot(self.row(r), x));
        }
    }

    pub fn hidden(&self, x: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.subspace];
        self.hidden_into(x, &mut h);
        h
    }

    /// Adds `-rate * outer(delta_z, x)`.
    fn step(&mut self, delta_z: &[f64], x: &[f64], rate: f64) {
        for (r, &dz) in delta_z.iter().enumerate() {
            if dz == 0.0 {
                continue;
            }
            let row = &mut self.weights[r * self.dim..(r + 1) * self.dim];
            let scale = rate * dz;
            for (w, &xi) in row.iter_mut().zip(x) {
                *w -= scale * xi;
            }
        }
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }
}

/// Shared behaviour of both heads.
pub trait SubspaceModel {
    fn projection(&self) -> &Projection;

    /// The adapted representation `h` of column `index`.
    fn forward_hidden(&self, embeddings: &EmbeddingMatrix, index: usize) -> Result<Vec<f64>> {
        let p = self.projection();
        p.check(embeddings)?;
        if index >= embeddings.len() {
            return Err(Error::invalid(format!(
                "column {index} out of range for {} words",
                embeddings.len()
            )));
        }
        Ok(p.hidden(embeddings.column(index)))
    }

    fn project_word(&self, embeddings: &EmbeddingMatrix, token: &str) -> Result<Vec<f64>> {
        let index = embeddings
            .index_of(token)
            .ok_or_else(|| Error::UnknownToken(token.to_owned()))?;
        self.forward_hidden(embeddings, index)
    }
}

/// Softmax classifier over the projected subspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceClassifier {
    projection: Projection,
    /// `|Y| x s`, row-major.
    head: Vec<f64>,
    classes: Vec<String>,
}

/// Linear regressor over the projected subspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceRegressor {
    projection: Projection,
    weights: Vec<f64>,
    bias: f64,
}

impl SubspaceModel for SubspaceClassifier {
    fn projection(&self) -> &Projection {
        &self.projection
    }
}

impl SubspaceModel for SubspaceRegressor {
    fn projection(&self) -> &Projection {
        &self.projection
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierGradients {
    pub projection: Vec<f64>,
    pub head: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressorGradients {
    pub projection: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl SubspaceClassifier {
    pub fn new(projection: Projection, head: Vec<f64>, classes: Vec<String>) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::invalid("a classifier needs at least two classes"));
        }
        let expected = classes.len() * projection.subspace;
        if head.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: head.len(),
            });
        }
        Ok(SubspaceClassifier {
            projection,
            head,
            classes,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn head(&self) -> &[f64] {
        &self.head
    }

    fn logits_from_hidden(&self, h: &[f64]) -> Vec<f64> {
        self.head.chunks_exact(self.projection.subspace).map(|row| dot(row, h)).collect()
    }

    pub fn logits(&self, embeddings: &EmbeddingMatrix, index: usize) -> Result<Vec<f64>> {
        let h = self.forward_hidden(embeddings, index)?;
        Ok(self.logits_from_hidden(&h))
    }

    pub fn classify_proba(&self, embeddings: &EmbeddingMatrix, index: usize) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(embeddings, index)?))
    }

    pub fn predict_class(&self, embeddings: &EmbeddingMatrix, index: usize) -> Result<usize> {
        Ok(argmax(&self.logits(embeddings, index)?))
    }

    fn check_batch(&self, embeddings: &EmbeddingMatrix, batch: &[(usize, usize)]) -> Result<()> {
        self.projection.check(embeddings)?;
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        for &(i, y) in batch {
            if y >= self.classes.len() {
                return Err(Error::UnknownClass(format!("class index {y}")));
            }
            if i >= embeddings.len() {
                return Err(Error::invalid(format!("column {i} out of range")));
            }
        }
        Ok(())
    }

    /// Negative log-likelihood summed over the batch (natural log).
    pub fn nll_loss(&self, embeddings: &EmbeddingMatrix, batch: &[(usize, usize)]) -> Result<f64> {
        self.check_batch(embeddings, batch)?;
        let mut h = vec![0.0; self.projection.subspace];
        Ok(batch
            .iter()
            .map(|&(i, y)| {
                self.projection.hidden_into(embeddings.column(i), &mut h);
                let logits = self.logits_from_hidden(&h);
                log_sum_exp(&logits) - logits[y]
            })
            .sum())
    }

    pub fn gradients(&self, embeddings: &EmbeddingMatrix, batch: &[(usize, usize)]) -> Result<ClassifierGradients> {
        self.check_batch(embeddings, batch)?;
        let (s, d) = (self.projection.subspace, self.projection.dim);
        let mut grads = ClassifierGradients {
            projection: vec![0.0; s * d],
            head: vec![0.0; self.head.len()],
        };
        let mut scratch = Scratch::new(s);
        for &(i, y) in batch {
            let x = embeddings.column(i);
            self.backprop(x, y, &mut scratch);
            for (k, &dk) in scratch.delta_out.iter().enumerate() {
                for (g, &hj) in grads.head[k * s..(k + 1) * s].iter_mut().zip(&scratch.h) {
                    *g += dk * hj;
                }
            }
            for (r, &dz) in scratch.delta_z.iter().enumerate() {
                for (g, &xi) in grads.projection[r * d..(r + 1) * d].iter_mut().zip(x) {
                    *g += dz * xi;
                }
            }
        }
        Ok(grads)
    }

    /// Fills `scratch` with `h`, `dL/dlogits` and `dL/dz` for one example.
    fn backprop(&self, x: &[f64], y: usize, scratch: &mut Scratch) {
        let s = self.projection.subspace;
        self.projection.hidden_into(x, &mut scratch.h);
        let logits = self.logits_from_hidden(&scratch.h);
        scratch.delta_out = softmax(&logits);
        scratch.delta_out[y] -= 1.0;
        for (j, dz) in scratch.delta_z.iter_mut().enumerate() {
            let dh: f64 = scratch
                .delta_out
                .iter()
                .enumerate()
                .map(|(k, &dk)| dk * self.head[k * s + j])
                .sum();
            let hj = scratch.h[j];
            *dz = dh * hj * (1.0 - hj);
        }
    }

    fn sgd_step(&mut self, x: &[f64], y: usize, rate: f64, scratch: &mut Scratch) {
        let s = self.projection.subspace;
        self.backprop(x, y, scratch);
        for (k, &dk) in scratch.delta_out.iter().enumerate() {
            for (w, &hj) in self.head[k * s..(k + 1) * s].iter_mut().zip(&scratch.h) {
                *w -= rate * dk * hj;
            }
        }
        self.projection.step(&scratch.delta_z, x, rate);
    }

    fn is_finite(&self) -> bool {
        self.projection.is_finite() && self.head.iter().all(|w| w.is_finite())
    }
}

impl SubspaceRegressor {
    pub fn new(projection: Projection, weights: Vec<f64>, bias: f64) -> Result<Self> {
        if weights.len() != projection.subspace {
            return Err(Error::DimensionMismatch {
                expected: projection.subspace,
                got: weights.len(),
            });
        }
        Ok(SubspaceRegressor {
            projection,
            weights,
            bias,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn predict_value(&self, embeddings: &EmbeddingMatrix, index: usize) -> Result<f64> {
        let h = self.forward_hidden(embeddings, index)?;
        Ok(dot(&self.weights, &h) + self.bias)
    }

    fn check_batch(&self, embeddings: &EmbeddingMatrix, batch: &[(usize, f64)]) -> Result<()> {
        self.projection.check(embeddings)?;
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        if let Some(&(i, _)) = batch.iter().find(|(i, _)| *i >= embeddings.len()) {
            return Err(Error::invalid(format!("column {i} out of range")));
        }
        Ok(())
    }

    /// Sum of squared errors over the batch.
    pub fn mse_loss(&self, embeddings: &EmbeddingMatrix, batch: &[(usize, f64)]) -> Result<f64> {
        self.check_batch(embeddings, batch)?;
        let mut h = vec![0.0; self.projection.subspace];
        Ok(batch
            .iter()
            .map(|&(i, y)| {
                self.projection.hidden_into(embeddings.column(i), &mut h);
                let r = y - (dot(&self.weights, &h) + self.bias);
                r * r
            })
            .sum())
    }

    pub fn gradients(&self, embeddings: &EmbeddingMatrix, batch: &[(usize, f64)]) -> Result<RegressorGradients> {
        self.check_batch(embeddings, batch)?;
        let (s, d) = (self.projection.subspace, self.projection.dim);
        let mut grads = RegressorGradients {
            projection: vec![0.0; s * d],
            weights: vec![0.0; s],
            bias: 0.0,
        };
        let mut scratch = Scratch::new(s);
        for &(i, y) in batch {
            let x = embeddings.column(i);
            let residual = self.backprop(x, y, &mut scratch);
            grads.bias += residual;
            for (g, &hj) in grads.weights.iter_mut().zip(&scratch.h) {
                *g += residual * hj;
            }
            for (r, &dz) in scratch.delta_z.iter().enumerate() {
                for (g, &xi) in grads.projection[r * d..(r + 1) * d].iter_mut().zip(x) {
                    *g += dz * xi;
                }
            }
        }
        Ok(grads)
    }

    /// Returns `dL/dyhat = 2 (yhat - y)` and fills `h`, `dL/dz`.
    fn backprop(&self, x: &[f64], y: f64, scratch: &mut Scratch) -> f64 {
        self.projection.hidden_into(x, &mut scratch.h);
        let residual = 2.0 * (dot(&self.weights, &scratch.h) + self.bias - y);
        for ((dz, &w), &hj) in scratch.delta_z.iter_mut().zip(&self.weights).zip(&scratch.h) {
            *dz = residual * w * hj * (1.0 - hj);
        }
        residual
    }

    fn sgd_step(&mut self, x: &[f64], y: f64, rate: f64, scratch: &mut Scratch) {
        let residual = self.backprop(x, y, scratch);
        self.bias -= rate * residual;
        for (w, &hj) in self.weights.iter_mut().zip(&scratch.h) {
            *w -= rate * residual * hj;
        }
        self.projection.step(&scratch.delta_z, x, rate);
    }

    fn is_finite(&self) -> bool {
        self.projection.is_finite() && self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }
}

struct Scratch {
    h: Vec<f64>,
    delta_z: Vec<f64>,
    delta_out: Vec<f64>,
}

impl Scratch {
    fn new(s: usize) -> Self {
        Scratch {
            h: vec![0.0; s],
            delta_z: vec![0.0; s],
            delta_out: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "scale")]
pub enum InitPolicy {
    /// Uniform in `+-sqrt(6 / (d + s))`.
    Glorot,
    /// Uniform in `+-scale`.
    Uniform(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub subspace_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub init: InitPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            subspace_size: 10,
            learning_rate: 0.05,
            max_epochs: 200,
            patience: 10,
            seed: 0,
            init: InitPolicy::Glorot,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.subspace_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::invalid("subspace size, max epochs and patience must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if let InitPolicy::Uniform(scale) = self.init {
            if !(scale >= 0.0 && scale.is_finite()) {
                return Err(Error::invalid(format!("init scale {scale} must be non-negative")));
            }
        }
        Ok(())
    }

    fn init_projection(&self, dim: usize, rng: &mut ChaCha8Rng) -> Result<Projection> {
        match self.init {
            InitPolicy::Glorot => Projection::glorot(self.subspace_size, dim, rng),
            InitPolicy::Uniform(scale) => {
                let mut p = Projection::zeros(self.subspace_size, dim)?;
                if scale > 0.0 {
                    let dist = Uniform::new_inclusive(-scale, scale);
                    for w in &mut p.weights {
                        *w = dist.sample(rng);
                    }
                }
                Ok(p)
            }
        }
    }
}

/// Per-epoch record of a training run. Losses are per-example means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub initial_train_loss: f64,
    pub train_loss: Vec<f64>,
    /// `None` where the metric was undefined (e.g. constant predictions).
    pub dev_metric: Vec<Option<f64>>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub snapshot_id: String,
}

impl TrainTrace {
    pub fn best_train_loss(&self) -> f64 {
        self.train_loss[self.best_epoch - 1]
    }

    pub fn best_dev_metric(&self) -> Option<f64> {
        self.dev_metric[self.best_epoch - 1]
    }
}

/// Content hash of a serializable parameter set, 16 hex characters.
pub fn snapshot_id<T: Serialize>(model: &T) -> String {
    let bytes = serde_json::to_vec(model).expect("model parameters serialize");
    hex::encode(&Sha256::digest(&bytes)[..8])
}

fn is_better(candidate: Option<f64>, best: Option<f64>) -> bool {
    match (candidate, best) {
        (Some(c), Some(b)) => c > b,
        (Some(_), None) => true,
        _ => false,
    }
}

/// Runs seeded per-example SGD with early stopping on the dev metric.
///
/// When `dev` is empty the model trains for exactly `max_epochs` and the last
/// epoch is returned.
fn run_sgd<M, L>(
    model: &mut M,
    train: &[(usize, L)],
    dev_is_empty: bool,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    mut step: impl FnMut(&mut M, usize, L),
    loss: impl Fn(&M) -> Result<f64>,
    dev_metric: impl Fn(&M) -> Option<f64>,
    finite: impl Fn(&M) -> bool,
) -> Result<TrainTrace>
where
    M: Clone + Serialize,
    L: Copy,
{
    let n = train.len() as f64;
    let initial_train_loss = loss(model)? / n;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut trace = TrainTrace {
        initial_train_loss,
        train_loss: Vec::new(),
        dev_metric: Vec::new(),
        best_epoch: 0,
        snapshot_id: String::new(),
    };
    let mut best: Option<(Option<f64>, M)> = None;
    let mut stale = 0;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(rng);
        for &k in &order {
            let (i, y) = train[k];
            step(model, i, y);
        }
        if !finite(model) {
            return Err(Error::Training(format!("parameters diverged in epoch {epoch}")));
        }
        let epoch_loss = loss(model)? / n;
        if !epoch_loss.is_finite() {
            return Err(Error::Training(format!("loss diverged in epoch {epoch}")));
        }
        trace.train_loss.push(epoch_loss);
        if dev_is_empty {
            trace.dev_metric.push(None);
            continue;
        }
        let metric = dev_metric(model);
        trace.dev_metric.push(metric);
        let improved = match &best {
            None => true,
            Some((b, _)) => is_better(metric, *b),
        };
        if improved {
            best = Some((metric, model.clone()));
            trace.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    match best {
        Some((_, snapshot)) => *model = snapshot,
        None => trace.best_epoch = trace.train_loss.len(),
    }
    trace.snapshot_id = snapshot_id(model);
    Ok(trace)
}

/// Trains a softmax subspace classifier. `train` and `dev` hold
/// `(column index, class index)` pairs.
pub fn train_classifier(
    embeddings: &EmbeddingMatrix,
    train: &[(usize, usize)],
    dev: &[(usize, usize)],
    classes: &[String],
    cfg: &TrainConfig,
) -> Result<(SubspaceClassifier, TrainTrace)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    if classes.len() < 2 {
        return Err(Error::Training("a classifier needs at least two classes".into()));
    }
    if train.iter().all(|&(_, y)| y == train[0].1) {
        return Err(Error::Training("training set contains a single class".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let projection = cfg.init_projection(embeddings.dim(), &mut rng)?;
    let head = vec![0.0; classes.len() * projection.subspace];
    let mut model = SubspaceClassifier::new(projection, head, classes.to_vec())?;
    model.check_batch(embeddings, train)?;
    if !dev.is_empty() {
        model.check_batch(embeddings, dev)?;
    }
    let mut scratch = Scratch::new(cfg.subspace_size);
    let dev_gold: Vec<usize> = dev.iter().map(|&(_, y)| y).collect();
    let trace = run_sgd(
        &mut model,
        train,
        dev.is_empty(),
        cfg,
        &mut rng,
        |m, i, y| m.sgd_step(embeddings.column(i), y, cfg.learning_rate, &mut scratch),
        |m| m.nll_loss(embeddings, train),
        |m| {
            let pred: Vec<usize> = dev
                .iter()
                .map(|&(i, _)| argmax(&m.logits_from_hidden(&m.projection.hidden(embeddings.column(i)))))
                .collect();
            macro_avg_f1(&dev_gold, &pred, classes.len()).ok()
        },
        SubspaceClassifier::is_finite,
    )?;
    Ok((model, trace))
}

/// Trains a subspace regressor. `train` and `dev` hold
/// `(column index, target)` pairs; the dev metric is Kendall's tau.
pub fn train_regressor(
    embeddings: &EmbeddingMatrix,
    train: &[(usize, f64)],
    dev: &[(usize, f64)],
    cfg: &TrainConfig,
) -> Result<(SubspaceRegressor, TrainTrace)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let projection = cfg.init_projection(embeddings.dim(), &mut rng)?;
    let weights = vec![0.0; projection.subspace];
    let mut model = SubspaceRegressor::new(projection, weights, 0.0)?;
    model.check_batch(embeddings, train)?;
    if !dev.is_empty() {
        model.check_batch(embeddings, dev)?;
    }
    let mut scratch = Scratch::new(cfg.subspace_size);
    let dev_gold: Vec<f64> = dev.iter().map(|&(_, y)| y).collect();
    let trace = run_sgd(
        &mut model,
        train,
        dev.is_empty(),
        cfg,
        &mut rng,
        |m, i, y| m.sgd_step(embeddings.column(i), y, cfg.learning_rate, &mut scratch),
        |m| m.mse_loss(embeddings, train),
        |m| {
            let pred: Vec<f64> = dev
                .iter()
                .map(|&(i, _)| dot(&m.weights, &m.projection.hidden(embeddings.column(i))) + m.bias)
                .collect();
            kendall_tau(&pred, &dev_gold).ok()
        },
        SubspaceRegressor::is_finite,
    )?;
    Ok((model, trace))
}

/// Maps `(token, label)` pairs to `(column, label)`, failing on the first
/// token without an embedding.
pub fn resolve<T: Copy>(embeddings: &EmbeddingMatrix, pairs: &[(String, T)]) -> Result<Vec<(usize, T)>> {
    pairs
        .iter()
        .map(|(t, y)| {
            embeddings
                .index_of(t)
                .map(|i| (i, *y))
                .ok_or_else(|| Error::UnknownToken(t.clone()))
        })
        .collect()
}
