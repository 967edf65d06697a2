//! Comparison algorithms: plain SGD, truncated gradient, L1-RDA and L1-FOBOS.
//!
//! All four walk the training set in the seeded permutation used by path 0
//! of the stabilized trainer, wrapping around for multiple passes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::burst::{run_burst, shrink, sgd_step, BurstParams, Identity, Truncation, Workspace};
use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Sgd,
    Truncated,
    Rda,
    Fobos,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::Sgd => "sgd",
            BaselineKind::Truncated => "truncated",
            BaselineKind::Rda => "rda",
            BaselineKind::Fobos => "fobos",
        })
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgd" => Ok(BaselineKind::Sgd),
            "truncated" => Ok(BaselineKind::Truncated),
            "rda" => Ok(BaselineKind::Rda),
            "fobos" => Ok(BaselineKind::Fobos),
            other => Err(Error::config(format!("unknown baseline `{other}`"))),
        }
    }
}

/// Interim FOBOS step size used to scale the shrinkage after step `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FobosInterim {
    /// `eta0 / sqrt(t + 1)`.
    Next,
    /// `eta0 / sqrt(t)`, the step size of the gradient step itself.
    Current,
}

impl FromStr for FobosInterim {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "next" => Ok(FobosInterim::Next),
            "current" => Ok(FobosInterim::Current),
            other => Err(Error::config(format!("unknown FOBOS interim step `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    /// Constant learning rate for SGD and truncated gradient.
    pub eta: f64,
    /// Base gravity of truncated gradient.
    pub g0: f64,
    /// Burst size of truncated gradient.
    pub burst_size: usize,
    /// RDA regularization weight.
    pub lambda: f64,
    pub gamma_rda: f64,
    /// RDA sparsity-enhancing parameter.
    pub rho: f64,
    pub lambda_fobos: f64,
    /// FOBOS uses `eta_t = fobos_eta0 / sqrt(t)`.
    pub fobos_eta0: f64,
    pub fobos_interim: FobosInterim,
    pub passes: f64,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            kind: BaselineKind::Sgd,
            eta: 0.1,
            g0: 0.005,
            burst_size: 5,
            lambda: 0.001,
            gamma_rda: 5000.0,
            rho: 0.005,
            lambda_fobos: 0.001,
            fobos_eta0: 1.0,
            fobos_interim: FobosInterim::Next,
            passes: 10.0,
            seed: 0,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive, got {v}")))
            }
        };
        let non_negative = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be >= 0, got {v}")))
            }
        };
        non_negative("passes", self.passes)?;
        match self.kind {
            BaselineKind::Sgd => positive("eta", self.eta),
            BaselineKind::Truncated => {
                positive("eta", self.eta)?;
                non_negative("g0", self.g0)?;
                if self.burst_size == 0 {
                    return Err(Error::config("burst_size must be at least 1"));
                }
                Ok(())
            }
            BaselineKind::Rda => {
                positive("gamma_rda", self.gamma_rda)?;
                non_negative("lambda", self.lambda)?;
                non_negative("rho", self.rho)
            }
            BaselineKind::Fobos => {
                positive("fobos_eta0", self.fobos_eta0)?;
                non_negative("lambda_fobos", self.lambda_fobos)
            }
        }
    }

    fn steps(&self, n: usize) -> usize {
        (self.passes * n as f64).floor() as usize
    }
}

/// Cyclic walk over `data` in the order given by `order`.
fn cyclic<'a>(data: &'a Dataset, order: &'a [usize]) -> impl Iterator<Item = &'a Sample> + 'a {
    order.iter().cycle().map(move |&i| &data.samples()[i])
}

fn order_for(data: &Dataset, seed: u64) -> Vec<usize> {
    rng::permutation(data.len(), seed, 0)
}

/// `steps` plain SGD updates from zero over `data` visited cyclically in `order`.
pub fn sgd_over_order(
    data: &Dataset,
    order: &[usize],
    steps: usize,
    eta: f64,
    loss: LossKind,
) -> Result<Vec<f64>> {
    let mut w = vec![0.0; data.dim()];
    if data.is_empty() {
        return Ok(w);
    }
    for sample in cyclic(data, order).take(steps) {
        sgd_step(&mut w, sample, eta, loss)?;
    }
    Ok(w)
}

/// `passes × n` SGD steps over the seeded permutation.
pub fn standard_sgd(data: &Dataset, loss: LossKind, cfg: &BaselineConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let order = order_for(data, cfg.seed);
    sgd_over_order(data, &order, cfg.steps(data.len()), cfg.eta, loss)
}

/// Repeated bursts of `K` SGD steps, each followed by uniform shrinkage `g0 * K`.
///
/// A trailing partial burst, when the step budget is not a multiple of `K`,
/// runs without truncation.
pub fn truncated_gradient(data: &Dataset, loss: LossKind, cfg: &BaselineConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let p = data.dim();
    let mut w = vec![0.0; p];
    if data.is_empty() {
        return Ok(w);
    }
    let order = order_for(data, cfg.seed);
    let steps = cfg.steps(data.len());
    let params = BurstParams::new(loss, cfg.eta, cfg.burst_size)?;
    let mut ws = Workspace::new(p);
    let mut stream = cyclic(data, &order);
    for _ in 0..steps / cfg.burst_size {
        run_burst(&mut w, &Identity, cfg.g0, stream.by_ref(), &params, Truncation::Uniform, &mut ws)?;
    }
    for sample in stream.take(steps % cfg.burst_size) {
        sgd_step(&mut w, sample, cfg.eta, loss)?;
    }
    Ok(w)
}

/// Closed-form RDA coordinate update from the average subgradient after `t` steps.
///
/// Returns 0 when `|gbar| <= lambda + gamma rho / sqrt(t)` and
/// `-(sqrt(t) / gamma) (gbar - lambda_t sgn(gbar))` otherwise.
pub fn rda_update(gbar: f64, t: usize, lambda: f64, gamma: f64, rho: f64) -> f64 {
    if t == 0 {
        return 0.0;
    }
    let st = (t as f64).sqrt();
    let lt = lambda + gamma * rho / st;
    if gbar.abs() <= lt {
        0.0
    } else {
        -(st / gamma) * (gbar - lt * gbar.signum())
    }
}

/// L1-regularized dual averaging.
///
/// The average subgradient is kept as a running sum divided by `t`; weights
/// are materialized from it only where a sample needs them.
pub fn rda_l1(data: &Dataset, loss: LossKind, cfg: &BaselineConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let p = data.dim();
    let mut sum = vec![0.0; p];
    if data.is_empty() {
        return Ok(vec![0.0; p]);
    }
    let order = order_for(data, cfg.seed);
    let steps = cfg.steps(data.len());
    let weight = |sum: &[f64], j: usize, t: usize| {
        if t == 0 {
            0.0
        } else {
            rda_update(sum[j] / t as f64, t, cfg.lambda, cfg.gamma_rda, cfg.rho)
        }
    };
    for (step, sample) in cyclic(data, &order).take(steps).enumerate() {
        // margin of w_t, built from the average after `step` observations
        let mut f = 0.0;
        for (j, x) in sample.x.iter() {
            f += weight(&sum, j, step) * x;
        }
        let scale = loss.subgradient_scale(f, sample.y);
        if scale != 0.0 {
            for (j, x) in sample.x.iter() {
                sum[j] += scale * x;
            }
        }
    }
    let w: Vec<f64> = (0..p).map(|j| weight(&sum, j, steps)).collect();
    if let Some(j) = w.iter().position(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            feature: j,
            stage: None,
            path: None,
        });
    }
    Ok(w)
}

/// Forward-backward splitting with an L1 prox step after every update.
pub fn fobos_l1(data: &Dataset, loss: LossKind, cfg: &BaselineConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let p = data.dim();
    let mut w = vec![0.0; p];
    if data.is_empty() {
        return Ok(w);
    }
    let order = order_for(data, cfg.seed);
    for (i, sample) in cyclic(data, &order).take(cfg.steps(data.len())).enumerate() {
        let t = (i + 1) as f64;
        sgd_step(&mut w, sample, cfg.fobos_eta0 / t.sqrt(), loss)?;
        let interim = match cfg.fobos_interim {
            FobosInterim::Next => cfg.fobos_eta0 / (t + 1.0).sqrt(),
            FobosInterim::Current => cfg.fobos_eta0 / t.sqrt(),
        };
        let g = interim * cfg.lambda_fobos;
        if g > 0.0 {
            for v in &mut w {
                *v = shrink(*v, g);
            }
        }
    }
    Ok(w)
}

/// Runs the baseline selected by `cfg.kind`.
pub fn run_baseline(data: &Dataset, loss: LossKind, cfg: &BaselineConfig) -> Result<Vec<f64>> {
    match cfg.kind {
        BaselineKind::Sgd => standard_sgd(data, loss, cfg),
        BaselineKind::Truncated => truncated_gradient(data, loss, cfg),
        BaselineKind::Rda => rda_l1(data, loss, cfg),
        BaselineKind::Fobos => fobos_l1(data, loss, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Label, SparseVector};
    use proptest::prelude::*;

    fn sample(dim: usize, pairs: &[(usize, f64)], y: Label) -> Sample {
        Sample::new(SparseVector::from_pairs(dim, pairs.to_vec()).unwrap(), y)
    }

    fn one(dim: usize, pairs: &[(usize, f64)], y: Label) -> Dataset {
        Dataset::new(vec![sample(dim, pairs, y)], dim).unwrap()
    }

    fn toy(n: usize, p: usize) -> Dataset {
        let samples = (0..n)
            .map(|i| {
                let pairs: Vec<(usize, f64)> = (0..p)
                    .filter(|j| (i * 3 + j) % 4 != 0)
                    .map(|j| (j, ((i * 5 + j * 7) % 9) as f64 / 4.0 - 1.0))
                    .collect();
                let y = if (i + p).is_multiple_of(3) { Label::Negative } else { Label::Positive };
                sample(p, &pairs, y)
            })
            .collect();
        Dataset::new(samples, p).unwrap()
    }

    fn cfg(kind: BaselineKind) -> BaselineConfig {
        BaselineConfig {
            kind,
            ..BaselineConfig::default()
        }
    }

    #[test]
    fn zero_passes_gives_zero() {
        let d = toy(10, 4);
        for kind in [BaselineKind::Sgd, BaselineKind::Truncated, BaselineKind::Rda, BaselineKind::Fobos] {
            let c = BaselineConfig { passes: 0.0, ..cfg(kind) };
            assert_eq!(run_baseline(&d, LossKind::Hinge, &c).unwrap(), vec![0.0; 4]);
        }
    }

    #[test]
    fn separable_single_sample_stops_moving() {
        let d = one(2, &[(0, 1.0)], Label::Positive);
        let c = BaselineConfig { eta: 2.0, passes: 5.0, ..cfg(BaselineKind::Sgd) };
        // first step reaches margin 2, after which the hinge subgradient is zero
        assert_eq!(standard_sgd(&d, LossKind::Hinge, &c).unwrap(), vec![2.0, 0.0]);
    }

    #[test]
    fn truncated_with_zero_gravity_is_sgd() {
        let d = toy(23, 6);
        for loss in [LossKind::Hinge, LossKind::Logistic] {
            for passes in [1.0, 2.5, 3.0] {
                let base = BaselineConfig { passes, seed: 7, g0: 0.0, burst_size: 4, ..cfg(BaselineKind::Sgd) };
                let t = BaselineConfig { kind: BaselineKind::Truncated, ..base.clone() };
                assert_eq!(
                    truncated_gradient(&d, loss, &t).unwrap(),
                    standard_sgd(&d, loss, &base).unwrap()
                );
            }
        }
    }

    #[test]
    fn truncated_hand_trace() {
        // K = 2, eta = 0.5, g0 = 0.1, hinge, samples visited in permutation order
        let s0 = sample(2, &[(0, 1.0)], Label::Positive);
        let s1 = sample(2, &[(0, 1.0), (1, 2.0)], Label::Negative);
        let d = Dataset::new(vec![s0, s1], 2).unwrap();
        let c = BaselineConfig {
            kind: BaselineKind::Truncated,
            eta: 0.5,
            g0: 0.1,
            burst_size: 2,
            passes: 1.0,
            seed: 3,
            ..BaselineConfig::default()
        };
        let mut w = [0.0f64; 2];
        for &i in &rng::permutation(2, 3, 0) {
            let s = &d.samples()[i];
            let f: f64 = s.x.dot(&w);
            if f * s.y.sign() < 1.0 {
                for (j, x) in s.x.iter() {
                    w[j] += 0.5 * s.y.sign() * x;
                }
            }
        }
        let expected: Vec<f64> = w.iter().map(|&v| shrink(v, 0.2)).collect();
        assert_eq!(truncated_gradient(&d, LossKind::Hinge, &c).unwrap(), expected);
        assert!(expected.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn truncated_sparser_than_sgd() {
        let d = toy(40, 12);
        let s = standard_sgd(&d, LossKind::Hinge, &cfg(BaselineKind::Sgd)).unwrap();
        let t = truncated_gradient(
            &d,
            LossKind::Hinge,
            &BaselineConfig { g0: 0.05, ..cfg(BaselineKind::Truncated) },
        )
        .unwrap();
        let nnz = |w: &[f64]| w.iter().filter(|v| **v != 0.0).count();
        assert!(nnz(&t) <= nnz(&s));
    }

    #[test]
    fn rda_closed_form_examples() {
        assert_eq!(rda_update(0.0, 5, 0.01, 1.0, 0.01), 0.0);
        assert!((rda_update(-1.0, 1, 0.01, 1.0, 0.01) - 0.98).abs() < 1e-15);
        assert_eq!(rda_update(0.001, 1, 0.01, 1.0, 0.01), 0.0);
    }

    #[test]
    fn rda_all_zero_data_stays_zero() {
        let samples = (0..5).map(|_| sample(3, &[], Label::Positive)).collect();
        let d = Dataset::new(samples, 3).unwrap();
        let w = rda_l1(&d, LossKind::Logistic, &cfg(BaselineKind::Rda)).unwrap();
        assert_eq!(w, vec![0.0; 3]);
    }

    #[test]
    fn rda_rejects_nonpositive_gamma() {
        let d = toy(3, 2);
        let c = BaselineConfig { gamma_rda: 0.0, ..cfg(BaselineKind::Rda) };
        assert!(rda_l1(&d, LossKind::Hinge, &c).is_err());
    }

    #[test]
    fn rda_matches_direct_recomputation() {
        // recompute the average subgradient by direct summation, step by step
        let d = toy(15, 5);
        let c = BaselineConfig { gamma_rda: 2.0, rho: 0.01, lambda: 0.01, passes: 2.0, seed: 5, ..cfg(BaselineKind::Rda) };
        let order = rng::permutation(15, 5, 0);
        let mut grads: Vec<Vec<f64>> = Vec::new();
        let mut w = vec![0.0; 5];
        for t in 0..30 {
            let s = &d.samples()[order[t % 15]];
            let g = LossKind::Hinge.subgradient_scale(s.x.dot(&w), s.y);
            let mut gt = vec![0.0; 5];
            for (j, x) in s.x.iter() {
                gt[j] = g * x;
            }
            grads.push(gt);
            let n = grads.len() as f64;
            for j in 0..5 {
                let gbar = grads.iter().map(|v| v[j]).sum::<f64>() / n;
                w[j] = rda_update(gbar, grads.len(), 0.01, 2.0, 0.01);
            }
        }
        let got = rda_l1(&d, LossKind::Hinge, &c).unwrap();
        for (a, b) in got.iter().zip(&w) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn fobos_hand_step() {
        let d = one(1, &[(0, 1.0)], Label::Positive);
        let c = BaselineConfig { lambda_fobos: 0.1, passes: 1.0, ..cfg(BaselineKind::Fobos) };
        let w = fobos_l1(&d, LossKind::Hinge, &c).unwrap();
        assert!((w[0] - (1.0 - 0.1 / 2f64.sqrt())).abs() < 1e-15);
        assert!((w[0] - 0.92929).abs() < 1e-5);
    }

    #[test]
    fn fobos_zero_gradient_stays_zero() {
        let d = one(2, &[], Label::Positive);
        let c = BaselineConfig { passes: 1.0, ..cfg(BaselineKind::Fobos) };
        assert_eq!(fobos_l1(&d, LossKind::Hinge, &c).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn fobos_without_penalty_is_decaying_sgd() {
        let d = toy(12, 4);
        let c = BaselineConfig { lambda_fobos: 0.0, passes: 2.0, seed: 1, ..cfg(BaselineKind::Fobos) };
        let order = rng::permutation(12, 1, 0);
        let mut w = vec![0.0; 4];
        for t in 0..24 {
            sgd_step(&mut w, &d.samples()[order[t % 12]], 1.0 / ((t + 1) as f64).sqrt(), LossKind::Logistic).unwrap();
        }
        assert_eq!(fobos_l1(&d, LossKind::Logistic, &c).unwrap(), w);
    }

    #[test]
    fn baselines_deterministic() {
        let d = toy(20, 5);
        for kind in [BaselineKind::Sgd, BaselineKind::Truncated, BaselineKind::Rda, BaselineKind::Fobos] {
            let c = BaselineConfig { seed: 9, ..cfg(kind) };
            assert_eq!(
                run_baseline(&d, LossKind::Logistic, &c).unwrap(),
                run_baseline(&d, LossKind::Logistic, &c).unwrap()
            );
        }
    }

    proptest! {
        #[test]
        fn rda_zero_iff_below_threshold(
            gbar in -2.0f64..2.0,
            t in 1usize..500,
            lambda in 0.0f64..0.5,
            gamma in 0.1f64..10.0,
            rho in 0.0f64..0.1,
        ) {
            let lt = lambda + gamma * rho / (t as f64).sqrt();
            prop_assert_eq!(rda_update(gbar, t, lambda, gamma, rho) == 0.0, gbar.abs() <= lt);
        }

        #[test]
        fn fobos_step_is_prox_optimal(
            dense in proptest::collection::vec(-2.0f64..2.0, 3),
            pos in any::<bool>(),
            lambda in 0.0f64..1.0,
        ) {
            let x = SparseVector::from_dense(&dense).unwrap();
            let y = if pos { Label::Positive } else { Label::Negative };
            let d = Dataset::new(vec![Sample::new(x, y)], 3).unwrap();
            let c = BaselineConfig { lambda_fobos: lambda, passes: 1.0, ..cfg(BaselineKind::Fobos) };
            let w = fobos_l1(&d, LossKind::Logistic, &c).unwrap();
            let mut half = vec![0.0; 3];
            sgd_step(&mut half, &d.samples()[0], 1.0, LossKind::Logistic).unwrap();
            let g = lambda / 2f64.sqrt();
            let obj = |v: f64, h: f64| 0.5 * (v - h).powi(2) + g * v.abs();
            for j in 0..3 {
                let best = obj(w[j], half[j]);
                for delta in [-1e-3, -1e-6, 1e-6, 1e-3] {
                    prop_assert!(best <= obj(w[j] + delta, half[j]) + 1e-15);
                }
            }
        }
    }
}
