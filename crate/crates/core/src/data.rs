//! Sparse samples, datasets and the LIBSVM text format.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng;

/// A sparse vector over a fixed dimension.
///
/// Indices are 0-based and strictly increasing; explicit zeros are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    dim: usize,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    /// Builds a vector from `(index, value)` pairs in any order.
    ///
    /// Zero values are dropped. Duplicate indices, out-of-range indices and
    /// non-finite values are rejected.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(usize, f64)>) -> Result<Self> {
        pairs.sort_unstable_by_key(|&(j, _)| j);
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values = Vec::with_capacity(pairs.len());
        let mut last = None;
        for (j, v) in pairs {
            if last == Some(j) {
                return Err(Error::config(format!("duplicate index {j}")));
            }
            last = Some(j);
            if j >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: j + 1,
                });
            }
            if !v.is_finite() {
                return Err(Error::config(format!("non-finite value at index {j}")));
            }
            if v != 0.0 {
                indices.push(to_u32(j)?);
                values.push(v);
            }
        }
        Ok(SparseVector {
            dim,
            indices,
            values,
        })
    }

    /// Dense view to sparse. Zeros are skipped.
    pub fn from_dense(values: &[f64]) -> Result<Self> {
        let pairs = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect();
        Self::from_pairs(values.len(), pairs)
    }

    pub fn empty(dim: usize) -> Self {
        SparseVector {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&j, &v)| (j as usize, v))
    }

    /// Sparse dot product against a dense vector of the same dimension.
    #[inline]
    pub fn dot(&self, w: &[f64]) -> f64 {
        debug_assert_eq!(w.len(), self.dim);
        let mut f = 0.0;
        for (&j, &v) in self.indices.iter().zip(&self.values) {
            f += w[j as usize] * v;
        }
        f
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (j, v) in self.iter() {
            out[j] = v;
        }
        out
    }

    fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }
}

fn to_u32(j: usize) -> Result<u32> {
    u32::try_from(j).map_err(|_| Error::config(format!("feature index {j} exceeds u32 range")))
}

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }

    pub fn from_sign(v: f64) -> Self {
        if v < 0.0 {
            Label::Negative
        } else {
            Label::Positive
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: SparseVector,
    pub y: Label,
}

impl Sample {
    pub fn new(x: SparseVector, y: Label) -> Self {
        Sample { x, y }
    }
}

/// An ordered, immutable collection of labelled samples over `dim` features.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    dim: usize,
    nnz_per_feature: Vec<usize>,
}

impl Dataset {
    /// Samples may carry any dimension up to `dim`; they are widened to `dim`.
    pub fn new(samples: Vec<Sample>, dim: usize) -> Result<Self> {
        let mut nnz_per_feature = vec![0usize; dim];
        let mut widened = Vec::with_capacity(samples.len());
        for s in samples {
            if s.x.dim() > dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.x.dim(),
                });
            }
            for &j in s.x.indices() {
                nnz_per_feature[j as usize] += 1;
            }
            widened.push(Sample::new(s.x.with_dim(dim), s.y));
        }
        Ok(Dataset {
            samples: widened,
            dim,
            nnz_per_feature,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Dataset {
            samples: Vec::new(),
            dim,
            nnz_per_feature: vec![0; dim],
        }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn nnz_per_feature(&self) -> &[usize] {
        &self.nnz_per_feature
    }

    /// Fraction of samples with a stored entry for each feature.
    pub fn feature_densities(&self) -> Vec<f64> {
        let n = self.len().max(1) as f64;
        self.nnz_per_feature.iter().map(|&c| c as f64 / n).collect()
    }

    /// Column-wise average percentage of nonzero entries.
    pub fn density_pct(&self) -> f64 {
        if self.dim == 0 || self.is_empty() {
            return 0.0;
        }
        let total: usize = self.nnz_per_feature.iter().sum();
        100.0 * total as f64 / (self.dim as f64 * self.len() as f64)
    }

    /// Widens the feature space to `dim` (never narrows).
    pub fn with_dim(self, dim: usize) -> Result<Self> {
        if dim < self.dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim,
            });
        }
        Dataset::new(self.samples, dim)
    }

    /// A new dataset holding the samples at `order`, in that order.
    pub fn select(&self, order: &[usize]) -> Dataset {
        let samples = order.iter().map(|&i| self.samples[i].clone()).collect();
        let mut nnz_per_feature = vec![0usize; self.dim];
        for &i in order {
            for &j in self.samples[i].x.indices() {
                nnz_per_feature[j as usize] += 1;
            }
        }
        Dataset {
            samples,
            dim: self.dim,
            nnz_per_feature,
        }
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.y == label).count()
    }
}

/// Parses LIBSVM text: `<label> <idx>:<val> ...` with 1-based indices.
///
/// Labels `+1`/`1` map to positive, `-1`/`0` to negative. Without `dim` the
/// dimension is the largest index seen.
pub fn parse_libsvm<R: BufRead>(reader: R, dim: Option<usize>) -> Result<Dataset> {
    let mut rows: Vec<(Vec<(usize, f64)>, Label)> = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let err = |message: String| Error::Parse {
            line: lineno,
            message,
        };
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label = parse_label(label_tok).ok_or_else(|| err(format!("bad label `{label_tok}`")))?;

        let mut pairs = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected <index>:<value>, got `{tok}`")))?;
            if idx == "qid" {
                continue;
            }
            let idx: usize = idx
                .parse()
                .map_err(|_| err(format!("bad feature index `{idx}`")))?;
            if idx == 0 {
                return Err(err("feature indices are 1-based".into()));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| err(format!("bad feature value `{val}`")))?;
            if !val.is_finite() {
                return Err(err(format!("non-finite value at index {idx}")));
            }
            max_index = max_index.max(idx);
            pairs.push((idx - 1, val));
        }
        pairs.sort_unstable_by_key(|&(j, _)| j);
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(err(format!("duplicate feature index {}", w[0].0 + 1)));
        }
        rows.push((pairs, label));
    }

    let dim = match dim {
        Some(d) if d < max_index => {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: max_index,
            })
        }
        Some(d) => d,
        None => max_index,
    };
    let samples = rows
        .into_iter()
        .map(|(pairs, y)| SparseVector::from_pairs(dim, pairs).map(|x| Sample::new(x, y)))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples, dim)
}

fn parse_label(tok: &str) -> Option<Label> {
    let v: f64 = tok.parse().ok()?;
    if v == 1.0 {
        Some(Label::Positive)
    } else if v == -1.0 || v == 0.0 {
        Some(Label::Negative)
    } else {
        None
    }
}

pub fn read_libsvm(path: impl AsRef<Path>, dim: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    parse_libsvm(BufReader::new(file), dim)
}

/// Writes LIBSVM text. Values use the shortest representation that parses back
/// to the same `f64`.
pub fn write_libsvm<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    for s in data.samples() {
        out.write_all(if s.y == Label::Positive { b"+1" } else { b"-1" })?;
        for (j, v) in s.x.iter() {
            write!(out, " {}:{}", j + 1, v)?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Per-feature multiplicative scaling fitted on one dataset and reusable on others.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaling {
    scale: Vec<f64>,
}

impl FeatureScaling {
    /// Scale each feature by `1/σ_j`, where `σ_j` is the population standard
    /// deviation over all samples including implicit zeros. No centering.
    pub fn fit(data: &Dataset) -> Self {
        let n = data.len();
        let mut scale = vec![1.0; data.dim()];
        if n == 0 {
            return FeatureScaling { scale };
        }
        let nf = n as f64;
        let mut sum = vec![0.0; data.dim()];
        for s in data.samples() {
            for (j, v) in s.x.iter() {
                sum[j] += v;
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        // two-pass: stored entries, then the implicit zeros contribute mean^2 each
        let mut ss = vec![0.0; data.dim()];
        for s in data.samples() {
            for (j, v) in s.x.iter() {
                let d = v - mean[j];
                ss[j] += d * d;
            }
        }
        for j in 0..data.dim() {
            let zeros = (n - data.nnz_per_feature()[j]) as f64;
            let var = (ss[j] + zeros * mean[j] * mean[j]) / nf;
            let sigma = var.sqrt();
            if sigma > 0.0 && sigma.is_finite() {
                scale[j] = 1.0 / sigma;
            }
        }
        FeatureScaling { scale }
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.dim() != self.scale.len() {
            return Err(Error::DimensionMismatch {
                expected: self.scale.len(),
                found: data.dim(),
            });
        }
        let samples = data
            .samples()
            .iter()
            .map(|s| {
                let mut x = s.x.clone();
                for (v, &j) in x.values.iter_mut().zip(&s.x.indices) {
                    *v *= self.scale[j as usize];
                }
                Sample::new(x, s.y)
            })
            .collect();
        Ok(Dataset {
            samples,
            dim: data.dim(),
            nnz_per_feature: data.nnz_per_feature.clone(),
        })
    }
}

/// Scales every feature of `data` to unit population variance using its own statistics.
pub fn normalize_unit_variance(data: &Dataset) -> Dataset {
    FeatureScaling::fit(data)
        .apply(data)
        .expect("scaling fitted on the same dataset")
}

/// Seeded Fisher–Yates shuffle of the sample order.
pub fn permute(data: &Dataset, seed: u64) -> Dataset {
    data.select(&rng::permutation(data.len(), seed, 0))
}

/// Random train/holdout split with `round(n * train_fraction)` training samples.
/// Both parts keep the original relative sample order.
pub fn split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let order = rng::permutation(data.len(), seed, 0);
    let n_train = (data.len() as f64 * train_fraction).round() as usize;
    let mut train: Vec<usize> = order[..n_train].to_vec();
    let mut rest: Vec<usize> = order[n_train..].to_vec();
    train.sort_unstable();
    rest.sort_unstable();
    Ok((data.select(&train), data.select(&rest)))
}
