//! Adaptive gravity and annealing schedules.

use serde::{Deserialize, Serialize};

use crate::burst::BurstRecord;
use crate::error::{Error, Result};
use crate::stability::StableSet;

/// Shape of the rejection-rate and burst-size schedules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    /// Maximum rejection rate, in `[0, 1]`.
    pub beta0: f64,
    /// Annealing rate: > 0 exponential, 0 linear, < 0 logarithmic decay.
    pub gamma: f64,
    /// Initial burst size.
    pub k0: usize,
    /// Burst-size annealing rate; `None` keeps `K = k0` throughout.
    pub alpha: Option<f64>,
    /// Upper cap on the annealed burst size.
    pub k_max: usize,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            beta0: 0.7,
            gamma: 0.0,
            k0: 5,
            alpha: None,
            k_max: 1000,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta0) {
            return Err(Error::config(format!("beta0 must lie in [0, 1], got {}", self.beta0)));
        }
        if !self.gamma.is_finite() {
            return Err(Error::config("gamma must be finite"));
        }
        if self.k0 == 0 {
            return Err(Error::config("K0 must be at least 1"));
        }
        if self.k_max < self.k0 {
            return Err(Error::config("k_max must be >= K0"));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::config(format!("alpha must be positive, got {a}")));
            }
        }
        Ok(())
    }
}

/// Rejection-rate annealing function `phi(d)` on `d ∈ [0, 1]`.
///
/// `phi(0) = beta0` and `phi(1) = 0` for every `gamma`:
/// `beta0 * (exp(-gamma d) - d exp(-gamma))` for `gamma >= 0`,
/// `beta0 * ln(1 - gamma (1 - d)) / ln(1 - gamma)` for `gamma < 0`.
pub fn anneal_rejection(d: f64, cfg: &AnnealConfig) -> f64 {
    let d = d.clamp(0.0, 1.0);
    let g = cfg.gamma;
    let beta = if g >= 0.0 {
        cfg.beta0 * ((-g * d).exp() - d * (-g).exp())
    } else {
        cfg.beta0 * (-g * (1.0 - d)).ln_1p() / (-g).ln_1p()
    };
    beta.clamp(0.0, cfg.beta0)
}

/// Per-informative-update average magnitudes `|delta_j| / k_j` over stable features.
pub fn update_magnitudes<'a>(
    records: impl IntoIterator<Item = &'a BurstRecord>,
    stable: &StableSet,
) -> Vec<f64> {
    records
        .into_iter()
        .flat_map(|r| &r.entries)
        .filter(|e| stable.contains(e.feature as usize))
        .map(|e| e.delta.abs() / e.count as f64)
        .collect()
}

/// Smallest element `q` of `values` with `|{m <= q}| / |values| >= beta`.
///
/// `beta = 0` gives 0; an empty multiset gives `None`.
pub fn rejection_quantile(values: &[f64], beta: f64) -> Option<f64> {
    if beta <= 0.0 {
        return Some(0.0);
    }
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let nf = n as f64;
    // smallest k with k / n >= beta, evaluated with the same predicate as the definition
    let mut k = ((beta * nf).ceil() as usize).clamp(1, n);
    while k > 1 && (k - 1) as f64 / nf >= beta {
        k -= 1;
    }
    while k < n && (k as f64 / nf) < beta {
        k += 1;
    }
    Some(sorted[k - 1])
}

/// Base gravity whose induced truncation fraction matches the target rejection rate.
///
/// Returns `None` when the previous stage produced no informative update on a
/// stable feature; callers fall back to the previous gravity.
pub fn adaptive_gravity<'a>(
    records: impl IntoIterator<Item = &'a BurstRecord>,
    stable: &StableSet,
    beta: f64,
) -> Option<f64> {
    if beta <= 0.0 {
        return Some(0.0);
    }
    rejection_quantile(&update_magnitudes(records, stable), beta)
}

/// `K_s = clamp(ceil(K0 ln(1 / (alpha d))), K0, k_max)`; `d = 0` gives `k_max`.
pub fn anneal_burst_size(d_prev: f64, cfg: &AnnealConfig) -> usize {
    let Some(alpha) = cfg.alpha else {
        return cfg.k0;
    };
    if d_prev <= 0.0 {
        return cfg.k_max;
    }
    let raw = cfg.k0 as f64 * (1.0 / (alpha * d_prev)).ln();
    // absorb rounding noise so exact integers do not ceil up by one
    let k = (raw - 1e-9).ceil();
    if !(k >= cfg.k0 as f64) {
        return cfg.k0;
    }
    (k.min(cfg.k_max as f64) as usize).max(cfg.k0)
}
