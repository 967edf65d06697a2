//! Stability selection over truncated bursts.
//!
//! Every burst is a small L1 feature selector. Pooling the bursts of one stage
//! across all paths gives, per feature, the fraction of informative bursts in
//! which the feature survived truncation (its selection probability). Features
//! whose probability drops below the purging threshold leave the stable set
//! for good.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::burst::BurstRecord;
use crate::error::{Error, Result};

/// A set of feature indices over `0..dim`, kept both as a sorted list and a mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StableSet {
    mask: Vec<bool>,
    members: Vec<u32>,
}

impl StableSet {
    pub fn full(dim: usize) -> Self {
        StableSet {
            mask: vec![true; dim],
            members: (0..dim as u32).collect(),
        }
    }

    pub fn empty(dim: usize) -> Self {
        StableSet {
            mask: vec![false; dim],
            members: Vec::new(),
        }
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        let members = mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(j, _)| j as u32)
            .collect();
        StableSet {
            mask: mask.to_vec(),
            members,
        }
    }

    pub fn from_indices(dim: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut mask = vec![false; dim];
        for j in indices {
            if j >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: j + 1,
                });
            }
            mask[j] = true;
        }
        Ok(Self::from_mask(&mask))
    }

    pub fn dim(&self) -> usize {
        self.mask.len()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    #[inline]
    pub fn contains(&self, j: usize) -> bool {
        self.mask[j]
    }

    pub fn members(&self) -> &[u32] {
        &self.members
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// `|set| / dim`.
    pub fn density(&self) -> f64 {
        if self.dim() == 0 {
            0.0
        } else {
            self.len() as f64 / self.dim() as f64
        }
    }

    pub fn is_subset_of(&self, other: &StableSet) -> bool {
        self.dim() == other.dim() && self.members.iter().all(|&j| other.mask[j as usize])
    }
}

/// Selection probabilities from one stage of bursts, pooled over all paths.
///
/// `pi[j]` is the number of bursts where `j` had an informative update and
/// survived truncation, over the number of bursts where it had an informative
/// update. Features never updated get 1.
pub fn selection_probability(records: &[BurstRecord], dim: usize) -> Vec<f64> {
    let mut informative = vec![0u64; dim];
    let mut survived = vec![0u64; dim];
    for r in records {
        for e in &r.entries {
            informative[e.feature as usize] += 1;
            survived[e.feature as usize] += u64::from(e.survived);
        }
    }
    informative
        .iter()
        .zip(&survived)
        .map(|(&k, &b)| if k > 0 { b as f64 / k as f64 } else { 1.0 })
        .collect()
}

/// Unit of the carried-over denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbUnit {
    /// Informative bursts (`k_j > 0`), the pooled stage estimate's denominator.
    Bursts,
    /// Informative updates, i.e. the sum of `k_j` over bursts; survivals are
    /// weighted by the same `k_j`.
    Updates,
}

impl fmt::Display for ProbUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbUnit::Bursts => "bursts",
            ProbUnit::Updates => "updates",
        })
    }
}

impl FromStr for ProbUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bursts" => Ok(ProbUnit::Bursts),
            "updates" => Ok(ProbUnit::Updates),
            other => Err(Error::config(format!("unknown probability unit `{other}`"))),
        }
    }
}

/// Per-feature evidence carried across stages.
///
/// `kappa` counts informative evidence and `survivals` counts informative
/// bursts that ended with a nonzero weight. A feature whose carried count is
/// still below `delta_k` keeps its history into the next stage; once it
/// reaches `delta_k` the history is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStats {
    unit: ProbUnit,
    delta_k: f64,
    kappa_acc: Vec<u64>,
    b_acc: Vec<u64>,
    kappa_stage: Vec<u64>,
    b_stage: Vec<u64>,
}

impl SelectionStats {
    pub fn new(dim: usize, unit: ProbUnit, delta_k: f64) -> Result<Self> {
        if !(delta_k >= 0.0) {
            return Err(Error::config(format!("delta_k must be >= 0, got {delta_k}")));
        }
        Ok(SelectionStats {
            unit,
            delta_k,
            kappa_acc: vec![0; dim],
            b_acc: vec![0; dim],
            kappa_stage: vec![0; dim],
            b_stage: vec![0; dim],
        })
    }

    pub fn kappa_acc(&self) -> &[u64] {
        &self.kappa_acc
    }

    pub fn b_acc(&self) -> &[u64] {
        &self.b_acc
    }

    pub fn kappa_stage(&self) -> &[u64] {
        &self.kappa_stage
    }

    pub fn b_stage(&self) -> &[u64] {
        &self.b_stage
    }

    /// Folds one stage of bursts into the carried counters and returns the
    /// carry-over selection probabilities.
    pub fn update(&mut self, records: &[BurstRecord]) -> Vec<f64> {
        self.kappa_stage.iter_mut().for_each(|v| *v = 0);
        self.b_stage.iter_mut().for_each(|v| *v = 0);
        for r in records {
            for e in &r.entries {
                let j = e.feature as usize;
                let weight = match self.unit {
                    ProbUnit::Bursts => 1,
                    ProbUnit::Updates => u64::from(e.count),
                };
                self.kappa_stage[j] += weight;
                if e.survived {
                    self.b_stage[j] += weight;
                }
            }
        }
        let delta_k = self.delta_k;
        let mut pi = vec![1.0; self.kappa_acc.len()];
        for j in 0..pi.len() {
            let carry = (self.kappa_acc[j] as f64) < delta_k;
            if !carry {
                self.kappa_acc[j] = 0;
                self.b_acc[j] = 0;
            }
            self.kappa_acc[j] += self.kappa_stage[j];
            self.b_acc[j] += self.b_stage[j];
            if self.kappa_acc[j] as f64 > delta_k {
                pi[j] = self.b_acc[j] as f64 / self.kappa_acc[j] as f64;
            }
        }
        pi
    }
}

/// Free-function form of [`SelectionStats::update`].
pub fn selection_probability_carryover(stats: &mut SelectionStats, records: &[BurstRecord]) -> Vec<f64> {
    stats.update(records)
}

/// `previous ∩ {j : pi[j] >= pi0}`. Intersecting keeps purges permanent.
pub fn stable_set(pi: &[f64], pi0: f64, previous: &StableSet) -> Result<StableSet> {
    if !(0.0..=1.0).contains(&pi0) {
        return Err(Error::config(format!("pi0 must lie in [0, 1], got {pi0}")));
    }
    if pi.len() != previous.dim() {
        return Err(Error::DimensionMismatch {
            expected: previous.dim(),
            found: pi.len(),
        });
    }
    let mask: Vec<bool> = previous
        .mask()
        .iter()
        .zip(pi)
        .map(|(&keep, &p)| keep && p >= pi0)
        .collect();
    Ok(StableSet::from_mask(&mask))
}

/// Zeroes every weight outside `set`.
pub fn purge(w: &[f64], set: &StableSet) -> Vec<f64> {
    w.iter()
        .zip(set.mask())
        .map(|(&v, &keep)| if keep { v } else { 0.0 })
        .collect()
}
