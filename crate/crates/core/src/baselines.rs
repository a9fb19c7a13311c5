//! Embedding-feature baselines: regularized linear models on raw
//! embeddings, and the same models on PCA-reduced features.
//!
//! Linear models minimize a summed data loss (softmax cross-entropy or
//! squared error) plus `lambda * penalty(weights)` with accelerated
//! proximal gradient steps. Biases are never penalized.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::subspace::{argmax, softmax};

/// Row-oriented design matrix.
pub trait Features: Sync {
    fn rows(&self) -> usize;
    fn dim(&self) -> usize;
    fn dot(&self, row: usize, w: &[f64]) -> f64;
    /// `out += scale * x_row`
    fn add_scaled(&self, row: usize, scale: f64, out: &mut [f64]);
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseFeatures {
    dim: usize,
    data: Vec<f64>,
}

impl DenseFeatures {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: data.len(),
            });
        }
        Ok(DenseFeatures { dim, data })
    }

    /// Embedding columns for the given vocabulary indices.
    pub fn from_embeddings(embeddings: &EmbeddingMatrix, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * embeddings.dim());
        for &i in indices {
            data.extend_from_slice(embeddings.column(i));
        }
        DenseFeatures {
            dim: embeddings.dim(),
            data,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

impl Features for DenseFeatures {
    fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn dot(&self, row: usize, w: &[f64]) -> f64 {
        self.row(row).iter().zip(w).map(|(a, b)| a * b).sum()
    }

    fn add_scaled(&self, row: usize, scale: f64, out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(self.row(row)) {
            *o += scale * x;
        }
    }
}

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseFeatures {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseFeatures {
    pub fn new(dim: usize) -> Self {
        SparseFeatures {
            dim,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends a row given as `(column, value)` pairs.
    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<()> {
        let entries: Vec<(usize, f64)> = entries.into_iter().collect();
        if let Some(&(j, _)) = entries.iter().find(|(j, _)| *j >= self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: j + 1,
            });
        }
        for (j, v) in entries {
            self.indices.push(j);
            self.values.push(v);
        }
        self.indptr.push(self.indices.len());
        Ok(())
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }
}

impl Features for SparseFeatures {
    fn rows(&self) -> usize {
        self.indptr.len() - 1
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn dot(&self, row: usize, w: &[f64]) -> f64 {
        self.row(row).map(|(j, v)| v * w[j]).sum()
    }

    fn add_scaled(&self, row: usize, scale: f64, out: &mut [f64]) {
        for (j, v) in self.row(row) {
            out[j] += scale * v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    /// `lambda / 2 * ||w||^2`
    L2,
    /// `lambda * ||w||_1`
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearConfig {
    pub regularizer: Regularizer,
    pub lambda: f64,
    pub max_iter: usize,
    /// Relative change of the parameters below which iteration stops.
    pub tol: f64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            regularizer: Regularizer::L2,
            lambda: 1.0,
            max_iter: 3000,
            tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LinearHead {
    Classifier { classes: Vec<String> },
    Regressor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub head: LinearHead,
    pub dim: usize,
    /// One row of `dim` weights per output (classes, or a single row).
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub regularizer: Regularizer,
    pub lambda: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy)]
enum Loss<'a> {
    Softmax(&'a [usize]),
    Squared(&'a [f64]),
}

impl LinearModel {
    pub fn fit_classifier<F: Features>(
        features: &F,
        labels: &[usize],
        classes: &[String],
        cfg: &LinearConfig,
    ) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::Training("a classifier needs at least two classes".into()));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= classes.len()) {
            return Err(Error::UnknownClass(format!("class index {y}")));
        }
        if !labels.is_empty() && labels.iter().all(|&y| y == labels[0]) {
            return Err(Error::Training("training set contains a single class".into()));
        }
        let head = LinearHead::Classifier {
            classes: classes.to_vec(),
        };
        fit(features, Loss::Softmax(labels), head, classes.len(), cfg)
    }

    pub fn fit_regressor<F: Features>(features: &F, targets: &[f64], cfg: &LinearConfig) -> Result<Self> {
        if targets.iter().any(|y| !y.is_finite()) {
            return Err(Error::invalid("non-finite regression target"));
        }
        fit(features, Loss::Squared(targets), LinearHead::Regressor, 1, cfg)
    }

    pub fn outputs(&self) -> usize {
        self.biases.len()
    }

    fn scores<F: Features>(&self, features: &F, row: usize) -> Vec<f64> {
        self.weights
            .chunks_exact(self.dim)
            .zip(&self.biases)
            .map(|(w, b)| features.dot(row, w) + b)
            .collect()
    }

    pub fn decision(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self
            .weights
            .chunks_exact(self.dim)
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + b)
            .collect())
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.decision(x)?))
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.decision(x)?))
    }

    pub fn predict_value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.decision(x)?[0])
    }

    pub fn predict_classes<F: Features>(&self, features: &F) -> Result<Vec<usize>> {
        self.check_dim(features)?;
        Ok((0..features.rows()).map(|i| argmax(&self.scores(features, i))).collect())
    }

    pub fn predict_values<F: Features>(&self, features: &F) -> Result<Vec<f64>> {
        self.check_dim(features)?;
        Ok((0..features.rows()).map(|i| self.scores(features, i)[0]).collect())
    }

    fn check_dim<F: Features>(&self, features: &F) -> Result<()> {
        if features.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: features.dim(),
            });
        }
        Ok(())
    }

    pub fn nonzero_weights(&self) -> usize {
        self.weights.iter().filter(|&&w| w != 0.0).count()
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

/// Squared spectral norm of `[X 1]` by power iteration.
fn spectral_norm_sq<F: Features>(features: &F) -> f64 {
    let (n, p) = (features.rows(), features.dim());
    let mut v = vec![1.0; p + 1];
    let mut estimate = 0.0;
    for _ in 0..100 {
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        for a in &mut v {
            *a /= norm;
        }
        let mut next = vec![0.0; p + 1];
        for i in 0..n {
            let u = features.dot(i, &v[..p]) + v[p];
            features.add_scaled(i, u, &mut next[..p]);
            next[p] += u;
        }
        let new_estimate: f64 = next.iter().zip(&v).map(|(a, b)| a * b).sum();
        v = next;
        if (new_estimate - estimate).abs() <= 1e-10 * new_estimate {
            estimate = new_estimate;
            break;
        }
        estimate = new_estimate;
    }
    estimate
}

/// Gradient of the summed data loss at `theta = [W | b]`.
fn data_gradient<F: Features>(features: &F, loss: Loss, outputs: usize, theta: &[f64], grad: &mut [f64]) {
    let p = features.dim();
    let (w, b) = theta.split_at(outputs * p);
    grad.iter_mut().for_each(|g| *g = 0.0);
    let (gw, gb) = grad.split_at_mut(outputs * p);
    let mut scores = vec![0.0; outputs];
    for i in 0..features.rows() {
        for (k, s) in scores.iter_mut().enumerate() {
            *s = features.dot(i, &w[k * p..(k + 1) * p]) + b[k];
        }
        let residual = match loss {
            Loss::Softmax(labels) => {
                let mut r = softmax(&scores);
                r[labels[i]] -= 1.0;
                r
            }
            Loss::Squared(targets) => vec![2.0 * (scores[0] - targets[i])],
        };
        for (k, &r) in residual.iter().enumerate() {
            if r != 0.0 {
                features.add_scaled(i, r, &mut gw[k * p..(k + 1) * p]);
                gb[k] += r;
            }
        }
    }
}

fn fit<F: Features>(features: &F, loss: Loss, head: LinearHead, outputs: usize, cfg: &LinearConfig) -> Result<LinearModel> {
    if !(cfg.lambda >= 0.0) || !cfg.lambda.is_finite() {
        return Err(Error::invalid(format!("regularization strength {} must be >= 0", cfg.lambda)));
    }
    let n = features.rows();
    if n == 0 {
        return Err(Error::Training("empty training set".into()));
    }
    let targets_len = match loss {
        Loss::Softmax(l) => l.len(),
        Loss::Squared(t) => t.len(),
    };
    if targets_len != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: targets_len,
        });
    }
    let p = features.dim();
    let n_weights = outputs * p;
    let curvature = match loss {
        Loss::Softmax(_) => 0.5,
        Loss::Squared(_) => 2.0,
    };
    // margin over the power-iteration estimate, which approaches from below
    let lipschitz = (1.05 * curvature * spectral_norm_sq(features)).max(1e-12);
    let step = 1.0 / lipschitz;
    let shrink = cfg.lambda * step;

    let prox = |theta: &mut [f64]| {
        let weights = &mut theta[..n_weights];
        match cfg.regularizer {
            Regularizer::L2 => {
                let factor = 1.0 / (1.0 + shrink);
                weights.iter_mut().for_each(|w| *w *= factor);
            }
            Regularizer::L1 => {
                for w in weights.iter_mut() {
                    *w = w.signum() * (w.abs() - shrink).max(0.0);
                }
            }
        }
    };

    let size = n_weights + outputs;
    let mut x = vec![0.0; size];
    let mut y = x.clone();
    let mut grad = vec![0.0; size];
    let mut t = 1.0f64;
    let mut iterations = 0;
    for it in 1..=cfg.max_iter {
        iterations = it;
        data_gradient(features, loss, outputs, &y, &mut grad);
        let mut next: Vec<f64> = y.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
        prox(&mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Training("proximal gradient diverged".into()));
        }
        // restart momentum when it points uphill
        let uphill: f64 = y
            .iter()
            .zip(&next)
            .zip(&x)
            .map(|((yv, nv), xv)| (yv - nv) * (nv - xv))
            .sum();
        let change = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = next.iter().map(|v| v.abs()).fold(1.0, f64::max);
        if uphill > 0.0 {
            t = 1.0;
            y.copy_from_slice(&next);
        } else {
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let momentum = (t - 1.0) / t_next;
            for ((yv, nv), xv) in y.iter_mut().zip(&next).zip(&x) {
                *yv = nv + momentum * (nv - xv);
            }
            t = t_next;
        }
        x = next;
        if change <= cfg.tol * scale {
            break;
        }
    }
    let biases = x.split_off(n_weights);
    Ok(LinearModel {
        head,
        dim: p,
        weights: x,
        biases,
        regularizer: cfg.regularizer,
        lambda: cfg.lambda,
        iterations,
    })
}

/// Mean-centred projection onto the top principal directions of a set of
/// training vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaTransform {
    pub mean: Vec<f64>,
    /// `k x d`, row-major, orthonormal rows.
    pub components: Vec<f64>,
    pub k: usize,
    /// Variance along each retained component, non-increasing.
    pub explained_variance: Vec<f64>,
    /// Total variance of the training vectors.
    pub total_variance: f64,
}

impl PcaTransform {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn component(&self, r: usize) -> &[f64] {
        let d = self.dim();
        &self.components[r * d..(r + 1) * d]
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| if self.total_variance > 0.0 { v / self.total_variance } else { 0.0 })
            .collect()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let centred: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok((0..self.k)
            .map(|r| self.component(r).iter().zip(&centred).map(|(c, v)| c * v).sum())
            .collect())
    }

    /// Maps a reduced vector back to the original space.
    pub fn reconstruct(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                got: z.len(),
            });
        }
        let mut x = self.mean.clone();
        for (r, &zr) in z.iter().enumerate() {
            for (xi, c) in x.iter_mut().zip(self.component(r)) {
                *xi += zr * c;
            }
        }
        Ok(x)
    }

    /// Reduced features for the given vocabulary columns.
    pub fn transform(&self, embeddings: &EmbeddingMatrix, indices: &[usize]) -> Result<DenseFeatures> {
        let mut data = Vec::with_capacity(indices.len() * self.k);
        for &i in indices {
            data.extend(self.apply(embeddings.column(i))?);
        }
        DenseFeatures::new(self.k, data)
    }
}

/// Fits PCA on the embeddings of `indices` (training words only).
pub fn fit_pca(embeddings: &EmbeddingMatrix, indices: &[usize], k: usize) -> Result<PcaTransform> {
    let rows: Vec<&[f64]> = indices.iter().map(|&i| embeddings.column(i)).collect();
    fit_pca_rows(&rows, embeddings.dim(), k)
}

pub fn fit_pca_rows(rows: &[&[f64]], d: usize, k: usize) -> Result<PcaTransform> {
    if k == 0 || k > d {
        return Err(Error::invalid(format!("number of components {k} must lie in [1, {d}]")));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: r.len(),
        });
    }
    let mut distinct: Vec<&[f64]> = rows.to_vec();
    distinct.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    distinct.dedup();
    if distinct.len() < k + 1 {
        return Err(Error::invalid(format!(
            "PCA with {k} components needs at least {} distinct vectors, got {}",
            k + 1,
            distinct.len()
        )));
    }

    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centred = vec![0.0; d];
    for r in rows {
        for (c, (v, m)) in centred.iter_mut().zip(r.iter().zip(&mean)) {
            *c = v - m;
        }
        for a in 0..d {
            let ca = centred[a];
            if ca == 0.0 {
                continue;
            }
            for b in a..d {
                cov[(a, b)] += ca * centred[b];
            }
        }
    }
    let denom = (n - 1.0).max(1.0);
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let total_variance = cov.trace();
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut components = Vec::with_capacity(k * d);
    let mut explained_variance = Vec::with_capacity(k);
    for &j in order.iter().take(k) {
        let col = eig.eigenvectors.column(j);
        let mut v: Vec<f64> = col.iter().copied().collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        // sign convention: largest-magnitude entry positive
        let pivot = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, a)| if a.abs() > v[best].abs() { i } else { best });
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|a| *a = -*a);
        }
        components.extend(v);
        explained_variance.push(eig.eigenvalues[j].max(0.0));
    }
    Ok(PcaTransform {
        mean,
        components,
        k,
        explained_variance,
        total_variance,
    })
}
