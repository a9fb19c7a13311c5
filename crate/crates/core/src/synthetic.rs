//! Seeded synthetic embeddings and lexicons with known structure.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::lexicon::{CategoricalLexicon, ContinuousLexicon};

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn token(i: usize) -> String {
    format!("w{i:05}")
}

/// `words` points in `dim` dimensions labelled `pos`/`neg` by the sign of
/// their first coordinate, with a margin of 0.5 around the boundary.
pub fn separable(dim: usize, words: usize, seed: u64) -> Result<(EmbeddingMatrix, CategoricalLexicon)> {
    if dim == 0 || words < 2 {
        return Err(Error::invalid("separable fixture needs dim >= 1 and at least 2 words"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(words);
    let mut pairs = Vec::with_capacity(words);
    for i in 0..words {
        let mut v: Vec<f64> = (0..dim).map(|_| gaussian(&mut rng)).collect();
        let positive = i % 2 == 0;
        let magnitude = 0.5 + rng.gen::<f64>();
        v[0] = if positive { magnitude } else { -magnitude };
        rows.push((token(i), v));
        pairs.push((token(i), if positive { "pos" } else { "neg" }.to_owned()));
    }
    Ok((EmbeddingMatrix::from_rows(dim, rows)?, CategoricalLexicon::from_pairs(pairs)?))
}

/// Embeddings whose lexicon scores depend only on a few directions that
/// carry little variance.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub dim: usize,
    pub vocab: usize,
    /// Number of high-variance directions.
    pub high_variance: usize,
    pub high_std: f64,
    /// Standard deviation along the signal directions.
    pub low_std: f64,
    /// Standard deviation along the remaining directions.
    pub residual_std: f64,
    /// Size of the signal subspace, drawn from the low-variance part.
    pub planted: usize,
    /// Gain inside the saturating part of the target.
    pub sharpness: f64,
    /// Slope of the linear term subtracted from the target.
    pub curvature: f64,
    /// Standard deviation of the additive label noise.
    pub noise: f64,
    /// Number of vocabulary words that receive a lexicon score.
    pub labelled: usize,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            dim: 50,
            vocab: 2000,
            high_variance: 20,
            high_std: 2.0,
            low_std: 1.0,
            residual_std: 0.25,
            planted: 3,
            sharpness: 2.0,
            curvature: 0.5,
            noise: 0.1,
            labelled: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedFixture {
    pub embeddings: EmbeddingMatrix,
    pub lexicon: ContinuousLexicon,
    /// Orthonormal rows spanning the signal subspace.
    pub basis: Vec<Vec<f64>>,
}

/// Noise-free target on standardized subspace coordinates:
/// `sum_k tanh(sharpness * z_k) - curvature * z_k`. It is odd, like every function
/// of a bias-free sigmoid layer, and with positive curvature each term
/// turns back down past its peak, so no linear score ranks it exactly.
pub fn planted_target(z: &[f64], sharpness: f64, curvature: f64) -> f64 {
    z.iter().map(|&v| (sharpness * v).tanh() - curvature * v).sum()
}

pub fn planted_subspace(cfg: &PlantedConfig, seed: u64) -> Result<PlantedFixture> {
    let d = cfg.dim;
    if cfg.high_variance + cfg.planted > d || cfg.planted == 0 {
        return Err(Error::invalid("planted subspace must fit beside the high-variance directions"));
    }
    if cfg.labelled > cfg.vocab || cfg.labelled < 5 {
        return Err(Error::invalid("labelled count must lie in [5, vocab]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(d, d, |_, _| gaussian(&mut rng));
    let q = g.qr().q();
    // Columns of q: the first `high_variance` carry high variance, the
    // signal lives in the next `planted` columns, the rest is residual.
    let std_of = |j: usize| {
        if j < cfg.high_variance {
            cfg.high_std
        } else if j < cfg.high_variance + cfg.planted {
            cfg.low_std
        } else {
            cfg.residual_std
        }
    };
    let basis: Vec<Vec<f64>> = (cfg.high_variance..cfg.high_variance + cfg.planted)
        .map(|j| q.column(j).iter().copied().collect())
        .collect();

    let mut rows = Vec::with_capacity(cfg.vocab);
    let mut pairs = Vec::with_capacity(cfg.labelled);
    for i in 0..cfg.vocab {
        let coords: Vec<f64> = (0..d).map(|j| std_of(j) * gaussian(&mut rng)).collect();
        let mut v = vec![0.0; d];
        for (j, c) in coords.iter().enumerate() {
            for (r, out) in v.iter_mut().enumerate() {
                *out += q[(r, j)] * c;
            }
        }
        rows.push((token(i), v));
        if i < cfg.labelled {
            let z: Vec<f64> = (0..cfg.planted)
                .map(|k| coords[cfg.high_variance + k] / cfg.low_std)
                .collect();
            let y = planted_target(&z, cfg.sharpness, cfg.curvature) + cfg.noise * gaussian(&mut rng);
            pairs.push((token(i), y));
        }
    }
    Ok(PlantedFixture {
        embeddings: EmbeddingMatrix::from_rows(d, rows)?,
        lexicon: ContinuousLexicon::from_pairs(pairs, None)?,
        basis,
    })
}
