//! Stabilized truncated SGD.
//!
//! `M` paths each walk their own permutation of the training set. A stage is
//! `n_K` informative bursts per path restricted to the current stable set,
//! followed by a barrier that pools the burst records of every path,
//! re-estimates selection probabilities, purges unstable features, and
//! updates the rejection rate and burst size for the next stage. Paths keep
//! their own purged weights across stages; the reported model is the mean of
//! the purged path weights.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::burst::{run_burst, BurstParams, BurstRecord, Projection, Truncation, Workspace};
use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::rng;
use crate::schedule::{adaptive_gravity, anneal_burst_size, anneal_rejection, AnnealConfig};
use crate::stability::{stable_set, ProbUnit, SelectionStats, StableSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Maximum rejection rate.
    pub beta0: f64,
    /// Rejection-rate annealing rate.
    pub gamma: f64,
    /// Purging threshold on the selection probability.
    pub pi0: f64,
    /// Burst size (initial burst size when `burst_alpha` is set).
    pub burst_size: usize,
    /// Burst-size annealing rate; `None` keeps the burst size fixed.
    pub burst_alpha: Option<f64>,
    pub max_burst_size: usize,
    /// Bursts per path per stage (`n_K`).
    pub bursts_per_stage: usize,
    /// Number of parallel paths (`M`).
    pub paths: usize,
    pub eta: f64,
    /// Carry-over threshold for the selection statistics.
    pub delta_k: f64,
    pub prob_unit: ProbUnit,
    /// Base gravity of the first stage, before any burst statistics exist.
    pub g0_init: f64,
    pub max_stages: usize,
    pub convergence_tol: f64,
    /// Budget in passes over the training set per path; `None` means unlimited.
    pub passes: Option<f64>,
    pub seed: u64,
    /// Keep every burst record and stable set in [`TrainResult::trace`].
    pub keep_trace: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            beta0: 0.7,
            gamma: 0.0,
            pi0: 0.75,
            burst_size: 5,
            burst_alpha: None,
            max_burst_size: 1000,
            bursts_per_stage: 5,
            paths: 16,
            eta: 0.1,
            delta_k: 3.0,
            prob_unit: ProbUnit::Bursts,
            g0_init: 0.0,
            max_stages: 100_000,
            convergence_tol: 1e-4,
            passes: Some(10.0),
            seed: 0,
            keep_trace: false,
        }
    }
}

impl TrainConfig {
    pub fn anneal(&self) -> AnnealConfig {
        AnnealConfig {
            beta0: self.beta0,
            gamma: self.gamma,
            k0: self.burst_size,
            alpha: self.burst_alpha,
            k_max: self.max_burst_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.anneal().validate()?;
        if self.paths == 0 {
            return Err(Error::config("paths (M) must be at least 1"));
        }
        if self.bursts_per_stage == 0 {
            return Err(Error::config("bursts_per_stage (n_K) must be at least 1"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::config(format!("eta must be positive, got {}", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.pi0) {
            return Err(Error::config(format!("pi0 must lie in [0, 1], got {}", self.pi0)));
        }
        if !(self.g0_init >= 0.0) {
            return Err(Error::config("g0_init must be >= 0"));
        }
        if !(self.delta_k >= 0.0) {
            return Err(Error::config("delta_k must be >= 0"));
        }
        if self.max_stages == 0 {
            return Err(Error::config("max_stages must be at least 1"));
        }
        if let Some(p) = self.passes {
            if !(p >= 0.0) {
                return Err(Error::config("passes must be >= 0"));
            }
        }
        Ok(())
    }
}

/// Summary of one stage, emitted for every stage that ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    /// Rejection rate that set this stage's gravity (`None` in the warm-up stage).
    pub beta: Option<f64>,
    pub g0: f64,
    pub burst_size: usize,
    /// Stable-set size after this stage's purge.
    pub stable_size: usize,
    /// `stable_size / p`.
    pub density: f64,
    /// Percentage of nonzero weights on each path after purging.
    pub path_sparsity_pct: Vec<f64>,
    /// Samples consumed by each path so far.
    pub samples_per_path: usize,
    /// Relative change of the aggregated weights from the previous stage.
    pub relative_change: f64,
}

/// Burst record tagged with the path and position that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBurst {
    pub path: usize,
    pub burst: usize,
    pub record: BurstRecord,
}

/// Full record of one stage, for oracle checks and debugging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub stage: usize,
    pub g0: f64,
    pub burst_size: usize,
    pub bursts: Vec<PathBurst>,
    /// Stable set after the stage's purge.
    pub stable: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    /// Mean of the purged path weights.
    pub w_bar: Vec<f64>,
    pub stable: StableSet,
    pub history: Vec<StageRecord>,
    pub trace: Vec<StageTrace>,
    pub converged: bool,
}

/// Sample orderings for `paths` paths; path `m` uses stream `m` of `seed`, so
/// path 0 matches [`crate::data::permute`] with the same seed.
pub fn path_orders(n: usize, paths: usize, seed: u64) -> Vec<Vec<usize>> {
    (0..paths)
        .map(|m| rng::permutation(n, seed, m as u64))
        .collect()
}

/// One permuted copy of `data` per path.
pub fn make_paths(data: &Dataset, paths: usize, seed: u64) -> Vec<Dataset> {
    path_orders(data.len(), paths, seed)
        .iter()
        .map(|o| data.select(o))
        .collect()
}

struct PathState {
    order: Vec<usize>,
    pos: usize,
    weights: Vec<f64>,
    ws: Workspace,
}

impl PathState {
    fn run_stage(
        &mut self,
        samples: &[Sample],
        proj: &Projection,
        g0: f64,
        params: &BurstParams,
        bursts: usize,
    ) -> Result<Vec<BurstRecord>> {
        let n = self.order.len();
        let mut out = Vec::with_capacity(bursts);
        for _ in 0..bursts {
            let order = &self.order;
            let pos = &mut self.pos;
            let stream = std::iter::from_fn(|| {
                let s = &samples[order[*pos]];
                *pos = (*pos + 1) % n;
                Some(s)
            });
            out.push(run_burst(
                &mut self.weights,
                proj,
                g0,
                stream,
                params,
                Truncation::Informative,
                &mut self.ws,
            )?);
        }
        Ok(out)
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Trains a sparse linear classifier with stabilized truncated SGD.
pub fn train(data: &Dataset, loss: LossKind, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    let n = data.len();
    let p = data.dim();
    let anneal = cfg.anneal();
    let budget = cfg.passes.map(|passes| (passes * n as f64).floor() as usize);

    let mut stable = StableSet::full(p);
    let mut proj = Projection::new(&stable);
    let mut paths: Vec<PathState> = path_orders(n, cfg.paths, cfg.seed)
        .into_iter()
        .map(|order| PathState {
            order,
            pos: 0,
            weights: vec![0.0; p],
            ws: Workspace::new(p),
        })
        .collect();
    let mut stats = SelectionStats::new(p, cfg.prob_unit, cfg.delta_k)?;
    let mut prev_records: Vec<BurstRecord> = Vec::new();
    let mut g0 = cfg.g0_init;
    let mut beta: Option<f64> = None;
    let mut burst_size = cfg.burst_size;
    let mut consumed = 0usize;
    let mut w_bar = vec![0.0; p];
    let mut history = Vec::new();
    let mut trace = Vec::new();
    let mut converged = false;

    for stage in 1..=cfg.max_stages {
        let stage_samples = cfg.bursts_per_stage * burst_size;
        if budget.is_some_and(|b| consumed + stage_samples > b) {
            break;
        }
        if let Some(b) = beta {
            if let Some(g) = adaptive_gravity(&prev_records, &stable, b) {
                g0 = g;
            }
        }
        let params = BurstParams::new(loss, cfg.eta, burst_size)?;

        let per_path: Vec<Result<Vec<BurstRecord>>> = paths
            .par_iter_mut()
            .enumerate()
            .map(|(m, path)| {
                path.run_stage(data.samples(), &proj, g0, &params, cfg.bursts_per_stage)
                    .map_err(|e| e.at(stage, m))
            })
            .collect();
        let per_path = per_path.into_iter().collect::<Result<Vec<_>>>()?;
        consumed += stage_samples;

        // barrier: pool in path order, purge, re-project
        let records: Vec<BurstRecord> = per_path.iter().flatten().cloned().collect();
        let pi = stats.update(&records);
        let next_stable = stable_set(&pi, cfg.pi0, &stable)?;
        let next_proj = Projection::new(&next_stable);

        let mut sum = vec![0.0; p];
        let mut path_sparsity_pct = Vec::with_capacity(paths.len());
        for path in &mut paths {
            let dense = proj.expand(&path.weights, p);
            path.weights = next_proj.restrict(&dense);
            let nnz = path.weights.iter().filter(|v| **v != 0.0).count();
            path_sparsity_pct.push(if p == 0 { 0.0 } else { 100.0 * nnz as f64 / p as f64 });
            for (&j, &v) in next_stable.members().iter().zip(&path.weights) {
                sum[j as usize] += v;
            }
        }
        let m = paths.len() as f64;
        let next_w_bar: Vec<f64> = sum.iter().map(|s| s / m).collect();
        let diff: Vec<f64> = next_w_bar.iter().zip(&w_bar).map(|(a, b)| a - b).collect();
        let relative_change = l2(&diff) / l2(&w_bar).max(f64::EPSILON);

        if cfg.keep_trace {
            let bursts = per_path
                .into_iter()
                .enumerate()
                .flat_map(|(path, recs)| {
                    recs.into_iter()
                        .enumerate()
                        .map(move |(burst, record)| PathBurst { path, burst, record })
                })
                .collect();
            trace.push(StageTrace {
                stage,
                g0,
                burst_size,
                bursts,
                stable: next_stable.members().to_vec(),
            });
        }

        let density = next_stable.density();
        history.push(StageRecord {
            stage,
            beta,
            g0,
            burst_size,
            stable_size: next_stable.len(),
            density,
            path_sparsity_pct,
            samples_per_path: consumed,
            relative_change,
        });

        // the annealing function is evaluated at the sparsity level 1 - d_s
        beta = Some(anneal_rejection(1.0 - density, &anneal));
        burst_size = anneal_burst_size(density, &anneal);
        stable = next_stable;
        proj = next_proj;
        prev_records = records;
        w_bar = next_w_bar;

        if relative_change < cfg.convergence_tol {
            converged = true;
            break;
        }
    }

    Ok(TrainResult {
        w_bar,
        stable,
        history,
        trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::burst::sgd_step;
    use crate::data::{Label, SparseVector};

    fn toy(n: usize, p: usize) -> Dataset {
        let samples = (0..n)
            .map(|i| {
                let pairs = (0..p)
                    .filter(|j| (i + j) % 3 != 0)
                    .map(|j| (j, ((i * 7 + j * 13) % 11) as f64 / 5.0 - 1.0))
                    .collect();
                let x = SparseVector::from_pairs(p, pairs).unwrap();
                let y = if (i * 5) % 7 < 3 { Label::Positive } else { Label::Negative };
                Sample::new(x, y)
            })
            .collect();
        Dataset::new(samples, p).unwrap()
    }

    #[test]
    fn make_paths_examples() {
        let d = toy(30, 4);
        assert_eq!(make_paths(&d, 1, 3).len(), 1);
        assert_eq!(make_paths(&d, 1, 3)[0], crate::data::permute(&d, 3));
        let a = make_paths(&d, 16, 9);
        assert_eq!(a, make_paths(&d, 16, 9));
        assert_eq!(a.len(), 16);
        for path in &a {
            assert_eq!(path.nnz_per_feature(), d.nnz_per_feature());
            assert_eq!(path.count_label(Label::Positive), d.count_label(Label::Positive));
        }
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn degenerate_single_stage_is_plain_sgd() {
        let d = toy(20, 6);
        let cfg = TrainConfig {
            paths: 1,
            bursts_per_stage: 1,
            pi0: 0.0,
            g0_init: 0.0,
            gamma: 3.0,
            max_stages: 1,
            burst_size: 7,
            eta: 0.2,
            seed: 4,
            ..TrainConfig::default()
        };
        let res = train(&d, LossKind::Hinge, &cfg).unwrap();
        let order = rng::permutation(20, 4, 0);
        let mut w = vec![0.0; 6];
        for &i in order.iter().take(7) {
            sgd_step(&mut w, &d.samples()[i], 0.2, LossKind::Hinge).unwrap();
        }
        assert_eq!(res.w_bar, w);
        assert_eq!(res.history.len(), 1);
    }

    #[test]
    fn stable_set_shrinks_and_contains_support() {
        let d = toy(60, 12);
        let cfg = TrainConfig {
            paths: 4,
            passes: Some(6.0),
            pi0: 0.8,
            keep_trace: true,
            convergence_tol: 0.0,
            ..TrainConfig::default()
        };
        let res = train(&d, LossKind::Logistic, &cfg).unwrap();
        let mut prev = StableSet::full(12);
        for t in &res.trace {
            let s = StableSet::from_indices(12, t.stable.iter().map(|&j| j as usize)).unwrap();
            assert!(s.is_subset_of(&prev));
            prev = s;
        }
        for (j, v) in res.w_bar.iter().enumerate() {
            if *v != 0.0 {
                assert!(res.stable.contains(j));
            }
        }
        assert!(res.history.last().unwrap().samples_per_path <= 6 * 60);
    }

    #[test]
    fn deterministic_across_runs() {
        let d = toy(40, 8);
        let cfg = TrainConfig {
            paths: 5,
            passes: Some(4.0),
            seed: 11,
            ..TrainConfig::default()
        };
        let a = train(&d, LossKind::Hinge, &cfg).unwrap();
        let b = train(&d, LossKind::Hinge, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_invalid_config() {
        let d = toy(5, 2);
        for cfg in [
            TrainConfig { paths: 0, ..TrainConfig::default() },
            TrainConfig { bursts_per_stage: 0, ..TrainConfig::default() },
            TrainConfig { eta: 0.0, ..TrainConfig::default() },
            TrainConfig { pi0: 1.1, ..TrainConfig::default() },
            TrainConfig { max_stages: 0, ..TrainConfig::default() },
        ] {
            assert!(train(&d, LossKind::Hinge, &cfg).is_err());
        }
        assert!(train(&Dataset::empty(3), LossKind::Hinge, &TrainConfig::default()).is_err());
    }

    #[test]
    fn divergence_reports_stage_and_path() {
        let x = SparseVector::from_pairs(1, vec![(0, 1e300)]).unwrap();
        let d = Dataset::new(vec![Sample::new(x, Label::Positive)], 1).unwrap();
        let cfg = TrainConfig {
            paths: 2,
            eta: 1e10,
            passes: None,
            ..TrainConfig::default()
        };
        match train(&d, LossKind::Hinge, &cfg).unwrap_err() {
            Error::Diverged { stage, path, .. } => {
                assert_eq!(stage, Some(1));
                assert_eq!(path, Some(0));
            }
            e => panic!("unexpected {e}"),
        }
    }
}
