//! Test error, sparsity, and feature-selection stability.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::{margin, predict};

/// Fraction of samples whose predicted label differs from the true one.
///
/// An empty dataset has error 0.
pub fn test_error(w: &[f64], data: &Dataset) -> Result<f64> {
    if w.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            found: data.dim(),
        });
    }
    if data.is_empty() {
        return Ok(0.0);
    }
    let wrong = data
        .samples()
        .iter()
        .filter(|s| predict(w, &s.x) != s.y)
        .count();
    Ok(wrong as f64 / data.len() as f64)
}

/// Mean loss over `data`.
pub fn mean_loss(w: &[f64], data: &Dataset, loss: crate::loss::LossKind) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for s in data.samples() {
        total += loss.value(margin(w, &s.x)?, s.y);
    }
    Ok(total / data.len() as f64)
}

/// Percentage of nonzero weights.
pub fn sparsity_pct(w: &[f64]) -> f64 {
    if w.is_empty() {
        return 0.0;
    }
    100.0 * w.iter().filter(|v| **v != 0.0).count() as f64 / w.len() as f64
}

/// Features with a nonzero weight.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedSet {
    dim: usize,
    members: Vec<u32>,
}

impl SelectedSet {
    pub fn from_weights(w: &[f64]) -> Self {
        SelectedSet {
            dim: w.len(),
            members: (0..w.len()).filter(|&j| w[j] != 0.0).map(|j| j as u32).collect(),
        }
    }

    pub fn from_indices(dim: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut members = Vec::new();
        for j in indices {
            if j >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: j + 1,
                });
            }
            members.push(j as u32);
        }
        members.sort_unstable();
        members.dedup();
        Ok(SelectedSet { dim, members })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[u32] {
        &self.members
    }

    pub fn contains(&self, j: usize) -> bool {
        self.members.binary_search(&(j as u32)).is_ok()
    }

    fn overlap(&self, other: &SelectedSet) -> usize {
        let (mut a, mut b, mut n) = (0, 0, 0);
        while a < self.members.len() && b < other.members.len() {
            match self.members[a].cmp(&other.members[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    a += 1;
                    b += 1;
                }
            }
        }
        n
    }
}

/// Cohen's kappa between two selections over the same `p` features.
///
/// Evaluated from integer cell counts with a single final division. When the
/// chance agreement is 1 (both sets empty or both full) the result is 1.
pub fn cohens_kappa(s1: &SelectedSet, s2: &SelectedSet) -> Result<f64> {
    if s1.dim != s2.dim {
        return Err(Error::DimensionMismatch {
            expected: s1.dim,
            found: s2.dim,
        });
    }
    let p = s1.dim as i128;
    let p11 = s1.overlap(s2) as i128;
    let p12 = s1.len() as i128 - p11;
    let p21 = s2.len() as i128 - p11;
    let p22 = p - p11 - p12 - p21;
    let chance = (p11 + p12) * (p11 + p21) + (p12 + p22) * (p21 + p22);
    let denom = p * p - chance;
    if denom == 0 {
        return Ok(1.0);
    }
    let num = p * (p11 + p22) - chance;
    Ok(num as f64 / denom as f64)
}

/// Mean kappa over all ordered pairs of distinct selections.
pub fn stability_score(sets: &[SelectedSet]) -> Result<f64> {
    let b = sets.len();
    if b < 2 {
        return Err(Error::config(format!("stability needs at least 2 selections, got {b}")));
    }
    let mut total = 0.0;
    for (i, si) in sets.iter().enumerate() {
        for (j, sj) in sets.iter().enumerate() {
            if i != j {
                total += cohens_kappa(si, sj)?;
            }
        }
    }
    Ok(total / (b * (b - 1)) as f64)
}

/// One equal-width bin of feature densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityBin {
    pub lower: f64,
    pub upper: f64,
    /// Fraction of the bin's features that are selected; `None` for an empty bin.
    pub fraction: Option<f64>,
    pub count: usize,
}

/// Selected fraction of features, grouped by their density in `data`.
pub fn selection_by_density(selected: &SelectedSet, data: &Dataset, bins: usize) -> Result<Vec<DensityBin>> {
    if bins == 0 {
        return Err(Error::config("bins must be at least 1"));
    }
    if selected.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            found: selected.dim(),
        });
    }
    let mut counts = vec![0usize; bins];
    let mut hits = vec![0usize; bins];
    for (j, d) in data.feature_densities().into_iter().enumerate() {
        let b = ((d * bins as f64).floor() as usize).min(bins - 1);
        counts[b] += 1;
        if selected.contains(j) {
            hits[b] += 1;
        }
    }
    Ok((0..bins)
        .map(|b| DensityBin {
            lower: b as f64 / bins as f64,
            upper: (b + 1) as f64 / bins as f64,
            fraction: (counts[b] > 0).then(|| hits[b] as f64 / counts[b] as f64),
            count: counts[b],
        })
        .collect())
}

/// Ranks starting at 1, with tied values sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation; `None` for fewer than 2 points or a constant input.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Mean and sample standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Label, Sample, SparseVector};
    use crate::loss::LossKind;
    use proptest::prelude::*;

    fn set(p: usize, s: &[usize]) -> SelectedSet {
        SelectedSet::from_indices(p, s.iter().copied()).unwrap()
    }

    fn data(rows: &[(&[(usize, f64)], Label)], p: usize) -> Dataset {
        let samples = rows
            .iter()
            .map(|(x, y)| Sample::new(SparseVector::from_pairs(p, x.to_vec()).unwrap(), *y))
            .collect();
        Dataset::new(samples, p).unwrap()
    }

    #[test]
    fn test_error_examples() {
        let d = data(
            &[
                (&[(0, 1.0)], Label::Positive),
                (&[(0, -1.0)], Label::Negative),
                (&[(0, 2.0)], Label::Positive),
            ],
            1,
        );
        assert_eq!(test_error(&[1.0], &d).unwrap(), 0.0);
        assert_eq!(test_error(&[-1.0], &d).unwrap(), 1.0);
        assert!((test_error(&[0.0], &d).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(test_error(&[0.0, 0.0], &d).is_err());
        assert!(mean_loss(&[1.0], &d, LossKind::Hinge).unwrap() == 0.0);
    }

    #[test]
    fn sparsity_examples() {
        assert_eq!(sparsity_pct(&[0.0; 10]), 0.0);
        assert_eq!(sparsity_pct(&[1.0; 10]), 100.0);
        let mut w = vec![0.0; 10000];
        for v in w.iter_mut().take(50) {
            *v = 1.0;
        }
        assert_eq!(sparsity_pct(&w), 0.5);
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(cohens_kappa(&set(5, &[1, 2]), &set(5, &[1, 2])).unwrap(), 1.0);
        assert_eq!(cohens_kappa(&set(4, &[0, 1]), &set(4, &[2, 3])).unwrap(), -1.0);
        assert_eq!(cohens_kappa(&set(4, &[0, 1]), &set(4, &[0, 2])).unwrap(), 0.0);
        assert_eq!(cohens_kappa(&set(4, &[]), &set(4, &[])).unwrap(), 1.0);
        assert_eq!(cohens_kappa(&set(2, &[0, 1]), &set(2, &[0, 1])).unwrap(), 1.0);
        assert!(cohens_kappa(&set(4, &[]), &set(5, &[])).is_err());
    }

    #[test]
    fn stability_examples() {
        let a = set(6, &[0, 1, 2]);
        assert_eq!(stability_score(&[a.clone(), a.clone(), a.clone()]).unwrap(), 1.0);
        let b = set(6, &[0, 3]);
        assert_eq!(stability_score(&[a.clone(), b.clone()]).unwrap(), cohens_kappa(&a, &b).unwrap());
        assert!(stability_score(&[a]).is_err());
    }

    #[test]
    fn stability_mean_of_pairs() {
        // pairwise kappas: (s1,s2)=0, (s1,s3)=1, (s2,s3)=0
        let s1 = set(4, &[0, 1]);
        let s2 = set(4, &[0, 2]);
        let s3 = set(4, &[0, 1]);
        let k = stability_score(&[s1, s2, s3]).unwrap();
        assert!((k - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn density_bins_examples() {
        let rows: Vec<(&[(usize, f64)], Label)> = (0..10)
            .map(|i| {
                let x: &[(usize, f64)] = if i == 0 { &[(0, 1.0), (1, 1.0)] } else { &[(1, 1.0)] };
                (x, Label::Positive)
            })
            .collect();
        let d = data(&rows, 2);
        let h = selection_by_density(&set(2, &[1]), &d, 2).unwrap();
        assert_eq!(h.iter().map(|b| (b.fraction, b.count)).collect::<Vec<_>>(), vec![(Some(0.0), 1), (Some(1.0), 1)]);
        let all = selection_by_density(&set(2, &[0, 1]), &d, 20).unwrap();
        assert_eq!(all.len(), 20);
        assert!(all.iter().all(|b| b.fraction.is_none() || b.fraction == Some(1.0)));
        let none = selection_by_density(&set(2, &[]), &d, 20).unwrap();
        assert!(none.iter().all(|b| b.fraction.is_none() || b.fraction == Some(0.0)));
        assert_eq!(none.iter().map(|b| b.count).sum::<usize>(), 2);
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]), None);
        assert_eq!(average_ranks(&[5.0, 1.0, 5.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[2.0, 4.0]), (3.0, 2f64.sqrt()));
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }

    fn arb_pair() -> impl Strategy<Value = (SelectedSet, SelectedSet)> {
        (1usize..60).prop_flat_map(|p| {
            (
                proptest::collection::vec(any::<bool>(), p),
                proptest::collection::vec(any::<bool>(), p),
            )
                .prop_map(move |(a, b)| {
                    let pick = |m: &[bool]| set(p, &(0..p).filter(|&j| m[j]).collect::<Vec<_>>());
                    (pick(&a), pick(&b))
                })
        })
    }

    fn complement(s: &SelectedSet) -> SelectedSet {
        set(s.dim(), &(0..s.dim()).filter(|&j| !s.contains(j)).collect::<Vec<_>>())
    }

    proptest! {
        #[test]
        fn kappa_symmetric_and_bounded((a, b) in arb_pair()) {
            let k = cohens_kappa(&a, &b).unwrap();
            prop_assert_eq!(k, cohens_kappa(&b, &a).unwrap());
            prop_assert!((-1.0..=1.0).contains(&k));
            prop_assert_eq!(k, cohens_kappa(&complement(&a), &complement(&b)).unwrap());
        }

        #[test]
        fn kappa_self_is_one((a, _) in arb_pair()) {
            prop_assert_eq!(cohens_kappa(&a, &a).unwrap(), 1.0);
        }

        #[test]
        fn density_bins_partition(
            rows in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 8), 1..30),
            sel in proptest::collection::vec(any::<bool>(), 8),
            bins in 1usize..25,
        ) {
            let samples = rows.iter().map(|r| {
                let x = SparseVector::from_pairs(8, (0..8).filter(|&j| r[j]).map(|j| (j, 1.0)).collect()).unwrap();
                Sample::new(x, Label::Positive)
            }).collect();
            let d = Dataset::new(samples, 8).unwrap();
            let s = set(8, &(0..8).filter(|&j| sel[j]).collect::<Vec<_>>());
            let h = selection_by_density(&s, &d, bins).unwrap();
            prop_assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 8);
            for b in &h {
                if let Some(f) = b.fraction {
                    prop_assert!((0.0..=1.0).contains(&f));
                }
            }
        }
    }
}
