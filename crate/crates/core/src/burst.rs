//! Soft-thresholding and truncated SGD bursts.
//!
//! A burst is `K` plain SGD steps followed by one soft-threshold truncation.
//! Three variants differ only in the gravity they truncate with:
//!
//! * uniform: every coordinate shrinks by `g0 * K`;
//! * informative: coordinate `j` shrinks by `g0 * k_j`, where `k_j` counts the
//!   samples of the burst with a stored entry at `j`;
//! * stable: informative, restricted to the coordinates of a stable set.
//!
//! All variants run on one in-place kernel that also produces a sparse
//! [`BurstRecord`] of the touched coordinates, which is what the stability
//! and gravity statistics consume.

use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::stability::StableSet;

/// Per-feature nonnegative shrinkage amounts.
#[derive(Debug, Clone, PartialEq)]
pub struct GravityVector(Vec<f64>);

impl GravityVector {
    pub fn new(g: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = g.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeGravity { index, value });
        }
        Ok(GravityVector(g))
    }

    pub fn uniform(dim: usize, g: f64) -> Result<Self> {
        Self::new(vec![g; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `T(w, g)`: shrink `w` toward zero by `g`, stopping at zero.
#[inline]
pub fn shrink(w: f64, g: f64) -> f64 {
    if w > 0.0 {
        (w - g).max(0.0)
    } else {
        (w + g).min(0.0)
    }
}

/// Componentwise soft threshold.
pub fn soft_threshold(w: &[f64], g: &GravityVector) -> Result<Vec<f64>> {
    if w.len() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            found: g.len(),
        });
    }
    Ok(w.iter().zip(g.as_slice()).map(|(&w, &g)| shrink(w, g)).collect())
}

/// Loss, learning rate and burst length shared by every burst of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurstParams {
    pub loss: LossKind,
    pub eta: f64,
    pub burst_size: usize,
}

impl BurstParams {
    pub fn new(loss: LossKind, eta: f64, burst_size: usize) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::config(format!("learning rate must be positive, got {eta}")));
        }
        if burst_size == 0 {
            return Err(Error::config("burst size must be at least 1"));
        }
        Ok(BurstParams {
            loss,
            eta,
            burst_size,
        })
    }
}

/// One SGD step `w <- w - eta * G(w·x, y) * x`, touching only the support of `x`.
pub fn sgd_step(w: &mut [f64], sample: &Sample, eta: f64, loss: LossKind) -> Result<()> {
    if w.len() != sample.x.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            found: sample.x.dim(),
        });
    }
    let f = sample.x.dot(w);
    let step = eta * loss.subgradient_scale(f, sample.y);
    if step != 0.0 {
        for (j, v) in sample.x.iter() {
            w[j] -= step * v;
            if !w[j].is_finite() {
                return Err(Error::Diverged {
                    feature: j,
                    stage: None,
                    path: None,
                });
            }
        }
    }
    Ok(())
}

/// Dense result of one burst.
#[derive(Debug, Clone, PartialEq)]
pub struct BurstOutput {
    /// Weights after truncation.
    pub w_hat: Vec<f64>,
    /// Informative-update counters.
    pub k_tilde: Vec<u32>,
    /// Pre-truncation change over the burst, `w_K - w_0`.
    pub delta_w: Vec<f64>,
}

/// Outcome of one burst for a feature with at least one informative update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstEntry {
    pub feature: u32,
    /// Informative updates `k_j` in this burst (always > 0).
    pub count: u32,
    /// Pre-truncation change `w_K,j - w_0,j`.
    pub delta: f64,
    /// Whether `|w_hat_j| > 0` after truncation.
    pub survived: bool,
}

/// Sparse record of one burst: only features with `k_j > 0`, sorted by feature.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BurstRecord {
    pub entries: Vec<BurstEntry>,
}

impl BurstRecord {
    pub fn from_output(out: &BurstOutput) -> Self {
        let entries = out
            .k_tilde
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .map(|(j, &k)| BurstEntry {
                feature: j as u32,
                count: k,
                delta: out.delta_w[j],
                survived: out.w_hat[j] != 0.0,
            })
            .collect();
        BurstRecord { entries }
    }
}

/// Maps global feature ids to positions in a compact weight vector.
pub(crate) trait CoordMap {
    fn local(&self, feature: u32) -> Option<u32>;
    fn global(&self, local: u32) -> u32;
}

pub(crate) struct Identity;

impl CoordMap for Identity {
    #[inline]
    fn local(&self, feature: u32) -> Option<u32> {
        Some(feature)
    }

    #[inline]
    fn global(&self, local: u32) -> u32 {
        local
    }
}

/// Compact coordinates for a stable set: `members[l]` is the global id of
/// local slot `l`, `slots[j]` the local slot of global `j` (or `ABSENT`).
#[derive(Debug, Clone)]
pub(crate) struct Projection {
    slots: Vec<u32>,
    members: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl Projection {
    pub(crate) fn new(set: &StableSet) -> Self {
        let mut slots = vec![ABSENT; set.dim()];
        for (l, &j) in set.members().iter().enumerate() {
            slots[j as usize] = l as u32;
        }
        Projection {
            slots,
            members: set.members().to_vec(),
        }
    }

    pub(crate) fn restrict(&self, w: &[f64]) -> Vec<f64> {
        self.members.iter().map(|&j| w[j as usize]).collect()
    }

    pub(crate) fn expand(&self, v: &[f64], dim: usize) -> Vec<f64> {
        let mut w = vec![0.0; dim];
        for (&j, &x) in self.members.iter().zip(v) {
            w[j as usize] = x;
        }
        w
    }
}

impl CoordMap for Projection {
    #[inline]
    fn local(&self, feature: u32) -> Option<u32> {
        match self.slots[feature as usize] {
            ABSENT => None,
            l => Some(l),
        }
    }

    #[inline]
    fn global(&self, local: u32) -> u32 {
        self.members[local as usize]
    }
}

/// Scratch buffers for the burst kernel, sized to the compact weight vector.
#[derive(Debug, Default)]
pub(crate) struct Workspace {
    counts: Vec<u32>,
    start: Vec<f64>,
    touched: Vec<u32>,
}

impl Workspace {
    pub(crate) fn new(len: usize) -> Self {
        Workspace {
            counts: vec![0; len],
            start: vec![0.0; len],
            touched: Vec::new(),
        }
    }

    fn ensure(&mut self, len: usize) {
        if self.counts.len() != len {
            *self = Workspace::new(len);
        }
    }
}

/// How the end-of-burst truncation is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Truncation {
    /// `g0 * k_j` on touched coordinates only.
    Informative,
    /// `g0 * K` on every coordinate of the compact vector.
    Uniform,
}

/// Runs one burst in place on the compact weights `v`.
pub(crate) fn run_burst<'a, M, I>(
    v: &mut [f64],
    map: &M,
    g0: f64,
    stream: I,
    params: &BurstParams,
    truncation: Truncation,
    ws: &mut Workspace,
) -> Result<BurstRecord>
where
    M: CoordMap,
    I: IntoIterator<Item = &'a Sample>,
{
    if !(g0 >= 0.0) {
        return Err(Error::NegativeGravity {
            index: 0,
            value: g0,
        });
    }
    ws.ensure(v.len());
    let mut drawn = 0;
    for sample in stream.into_iter().take(params.burst_size) {
        drawn += 1;
        let mut f = 0.0;
        for (&j, &x) in sample.x.indices().iter().zip(sample.x.values()) {
            if let Some(l) = map.local(j) {
                f += v[l as usize] * x;
            }
        }
        let step = params.eta * params.loss.subgradient_scale(f, sample.y);
        for (&j, &x) in sample.x.indices().iter().zip(sample.x.values()) {
            let Some(l) = map.local(j) else { continue };
            let l = l as usize;
            if ws.counts[l] == 0 {
                ws.touched.push(l as u32);
                ws.start[l] = v[l];
            }
            ws.counts[l] += 1;
            if step != 0.0 {
                v[l] -= step * x;
                if !v[l].is_finite() {
                    let feature = j as usize;
                    ws.reset();
                    return Err(Error::Diverged {
                        feature,
                        stage: None,
                        path: None,
                    });
                }
            }
        }
    }
    if drawn < params.burst_size {
        ws.reset();
        return Err(Error::StreamExhausted {
            needed: params.burst_size,
            got: drawn,
        });
    }

    ws.touched.sort_unstable();
    let mut entries: Vec<BurstEntry> = ws
        .touched
        .iter()
        .map(|&l| BurstEntry {
            feature: map.global(l),
            count: ws.counts[l as usize],
            delta: v[l as usize] - ws.start[l as usize],
            survived: false,
        })
        .collect();
    match truncation {
        Truncation::Uniform => {
            let g = g0 * params.burst_size as f64;
            for x in v.iter_mut() {
                *x = shrink(*x, g);
            }
        }
        Truncation::Informative => {
            for (e, &l) in entries.iter().zip(&ws.touched) {
                let l = l as usize;
                v[l] = shrink(v[l], g0 * e.count as f64);
            }
        }
    }
    for (e, &l) in entries.iter_mut().zip(&ws.touched) {
        e.survived = v[l as usize] != 0.0;
        ws.counts[l as usize] = 0;
    }
    ws.touched.clear();
    Ok(BurstRecord { entries })
}

impl Workspace {
    fn reset(&mut self) {
        for &l in &self.touched {
            self.counts[l as usize] = 0;
        }
        self.touched.clear();
    }
}

fn dense_output(dim: usize, w_hat: Vec<f64>, record: &BurstRecord) -> BurstOutput {
    let mut k_tilde = vec![0u32; dim];
    let mut delta_w = vec![0.0; dim];
    for e in &record.entries {
        let j = e.feature as usize;
        k_tilde[j] = e.count;
        delta_w[j] = e.delta;
    }
    BurstOutput {
        w_hat,
        k_tilde,
        delta_w,
    }
}

/// Burst with uniform gravity `g0 * K` on every coordinate.
pub fn burst_uniform<'a, I>(w0: &[f64], g0: f64, stream: I, params: &BurstParams) -> Result<BurstOutput>
where
    I: IntoIterator<Item = &'a Sample>,
{
    let mut v = w0.to_vec();
    let mut ws = Workspace::new(v.len());
    let record = run_burst(&mut v, &Identity, g0, stream, params, Truncation::Uniform, &mut ws)?;
    Ok(dense_output(w0.len(), v, &record))
}

/// Burst with informative truncation `g0 * k_j`.
pub fn burst_informative<'a, I>(w0: &[f64], g0: f64, stream: I, params: &BurstParams) -> Result<BurstOutput>
where
    I: IntoIterator<Item = &'a Sample>,
{
    let mut v = w0.to_vec();
    let mut ws = Workspace::new(v.len());
    let record = run_burst(&mut v, &Identity, g0, stream, params, Truncation::Informative, &mut ws)?;
    Ok(dense_output(w0.len(), v, &record))
}

/// Informative burst restricted to the coordinates of `stable`.
///
/// Samples are projected onto the stable set; the output is zero (weights,
/// counters and deltas) outside it.
pub fn burst_stable<'a, I>(
    w0: &[f64],
    g0: f64,
    stable: &StableSet,
    stream: I,
    params: &BurstParams,
) -> Result<BurstOutput>
where
    I: IntoIterator<Item = &'a Sample>,
{
    if stable.dim() != w0.len() {
        return Err(Error::DimensionMismatch {
            expected: w0.len(),
            found: stable.dim(),
        });
    }
    let proj = Projection::new(stable);
    let mut v = proj.restrict(w0);
    let mut ws = Workspace::new(v.len());
    let record = run_burst(&mut v, &proj, g0, stream, params, Truncation::Informative, &mut ws)?;
    let w_hat = proj.expand(&v, w0.len());
    Ok(dense_output(w0.len(), w_hat, &record))
}
