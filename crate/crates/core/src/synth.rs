//! Synthetic sparse classification data with a planted support.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label, Sample, SparseVector};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub dim: usize,
    pub n_train: usize,
    pub n_val: usize,
    /// Size of the planted support.
    pub support: usize,
    /// Per-feature densities are drawn log-uniformly from this range.
    pub density_min: f64,
    pub density_max: f64,
    /// Standard deviation of the label noise added to the margin.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            dim: 1000,
            n_train: 500,
            n_val: 500,
            support: 10,
            density_min: 0.005,
            density_max: 0.5,
            noise: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.support > self.dim {
            return Err(Error::config("support size exceeds dimension"));
        }
        let (a, b) = (self.density_min, self.density_max);
        if !(a > 0.0 && a <= b && b <= 1.0) {
            return Err(Error::config(format!("density range must satisfy 0 < min <= max <= 1, got [{a}, {b}]")));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::config("noise must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub train: Dataset,
    pub val: Dataset,
    /// Planted weights: `±1` on the support, 0 elsewhere.
    pub w_star: Vec<f64>,
    pub support: Vec<usize>,
    pub densities: Vec<f64>,
}

/// Draws a dataset: feature `j` is present with probability `lambda_j`, present
/// values are standard normal, and `y = sign(w*·x + noise)` with `sign(0) = +1`.
pub fn generate(cfg: &SynthConfig) -> Result<Synthetic> {
    cfg.validate()?;
    let p = cfg.dim;
    let mut rng = stream_rng(cfg.seed, 0);
    let (la, lb) = (cfg.density_min.ln(), cfg.density_max.ln());
    let densities: Vec<f64> = (0..p)
        .map(|_| if la == lb { cfg.density_min } else { rng.random_range(la..lb).exp() })
        .collect();

    let mut support = rand::seq::index::sample(&mut rng, p, cfg.support).into_vec();
    support.sort_unstable();
    let mut w_star = vec![0.0; p];
    for &j in &support {
        w_star[j] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    }

    let noise = Normal::new(0.0, cfg.noise).map_err(|e| Error::config(e.to_string()))?;
    let mut draw = |n: usize| -> Result<Dataset> {
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let mut pairs = Vec::new();
            for (j, &d) in densities.iter().enumerate() {
                if d >= 1.0 || rng.random_bool(d) {
                    let v: f64 = StandardNormal.sample(&mut rng);
                    pairs.push((j, v));
                }
            }
            let x = SparseVector::from_pairs(p, pairs)?;
            let f = x.dot(&w_star) + noise.sample(&mut rng);
            let y = if f >= 0.0 { Label::Positive } else { Label::Negative };
            samples.push(Sample::new(x, y));
        }
        Dataset::new(samples, p)
    };
    let train = draw(cfg.n_train)?;
    let val = draw(cfg.n_val)?;
    Ok(Synthetic {
        train,
        val,
        w_star,
        support,
        densities,
    })
}

/// Writes the planted support as `index weight` lines, 1-based like LIBSVM.
pub fn write_support<W: Write>(s: &Synthetic, mut out: W) -> Result<()> {
    for &j in &s.support {
        writeln!(out, "{} {}", j + 1, s.w_star[j])?;
    }
    Ok(())
}
