//! Benchmark harness: every algorithm is trained on `B` seeded permutations of
//! the training set and scored on the validation set.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline, BaselineConfig, BaselineKind};
use crate::config::{set_baseline, set_train};
use crate::data::{read_libsvm, Dataset, FeatureScaling};
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::metrics::{mean_std, selection_by_density, sparsity_pct, spearman, stability_score, test_error, SelectedSet};
use crate::synth::{generate, SynthConfig};
use crate::trainer::{train, TrainConfig};

/// Benchmark description, usually read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub loss: LossKind,
    /// Number of permutations `B`.
    pub permutations: usize,
    /// Run `b` uses seed `seed + b`.
    #[serde(default)]
    pub seed: u64,
    /// Scale features to unit variance using training-set statistics.
    #[serde(default)]
    pub normalize: bool,
    #[serde(default = "default_bins")]
    pub bins: usize,
    pub data: DataSource,
    #[serde(rename = "algorithm")]
    pub algorithms: Vec<AlgorithmEntry>,
}

fn default_name() -> String {
    "benchmark".into()
}

fn default_bins() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DataSource {
    pub train: Option<PathBuf>,
    pub val: Option<PathBuf>,
    pub dim: Option<usize>,
    pub synthetic: Option<SynthConfig>,
}

/// One algorithm of a benchmark: `kind` plus flat config keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmEntry {
    pub kind: String,
    pub name: Option<String>,
    #[serde(flatten)]
    pub params: toml::Table,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Algorithm {
    Stabilized(TrainConfig),
    Baseline(BaselineConfig),
}

impl Algorithm {
    pub fn with_seed(&self, seed: u64) -> Algorithm {
        match self {
            Algorithm::Stabilized(c) => Algorithm::Stabilized(TrainConfig { seed, ..c.clone() }),
            Algorithm::Baseline(c) => Algorithm::Baseline(BaselineConfig { seed, ..c.clone() }),
        }
    }
}

fn toml_scalar(key: &str, v: &toml::Value) -> Result<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        _ => Err(Error::config(format!("`{key}` must be a scalar"))),
    }
}

impl AlgorithmEntry {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.clone())
    }

    pub fn build(&self) -> Result<Algorithm> {
        let kind = self.kind.trim().to_ascii_lowercase();
        if kind == "stabilized" {
            let mut cfg = TrainConfig::default();
            for (k, v) in &self.params {
                if !set_train(&mut cfg, k, &toml_scalar(k, v)?)? {
                    return Err(Error::config(format!("unknown key `{k}` for stabilized")));
                }
            }
            cfg.validate()?;
            Ok(Algorithm::Stabilized(cfg))
        } else {
            let mut cfg = BaselineConfig {
                kind: kind.parse::<BaselineKind>()?,
                ..BaselineConfig::default()
            };
            for (k, v) in &self.params {
                if !set_baseline(&mut cfg, k, &toml_scalar(k, v)?)? {
                    return Err(Error::config(format!("unknown key `{k}` for {kind}")));
                }
            }
            cfg.validate()?;
            Ok(Algorithm::Baseline(cfg))
        }
    }
}

impl BenchmarkSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: BenchmarkSpec = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a spec; relative data paths resolve against the spec's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut spec = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut spec.data.train, &mut spec.data.val].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.permutations == 0 {
            return Err(Error::config("permutations must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("benchmark lists no algorithms"));
        }
        if self.bins == 0 {
            return Err(Error::config("bins must be at least 1"));
        }
        match (&self.data.synthetic, &self.data.train, &self.data.val) {
            (Some(_), None, None) | (None, Some(_), Some(_)) => Ok(()),
            _ => Err(Error::config("data needs either `train` and `val` paths or a `synthetic` table")),
        }
    }

    /// Loads or generates the training and validation sets, normalized if requested.
    pub fn load_data(&self) -> Result<(Dataset, Dataset)> {
        let (train, val) = match (&self.data.synthetic, &self.data.train, &self.data.val) {
            (Some(s), _, _) => {
                let g = generate(s)?;
                (g.train, g.val)
            }
            (None, Some(t), Some(v)) => {
                let train = read_libsvm(t, self.data.dim)?;
                let val = read_libsvm(v, Some(self.data.dim.unwrap_or(train.dim())))?;
                let dim = train.dim().max(val.dim());
                (train.with_dim(dim)?, val.with_dim(dim)?)
            }
            _ => return Err(Error::config("incomplete data source")),
        };
        if self.normalize {
            let scaling = FeatureScaling::fit(&train);
            Ok((scaling.apply(&train)?, scaling.apply(&val)?))
        } else {
            Ok((train, val))
        }
    }
}

/// Outcome of one (algorithm, permutation) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub run: usize,
    pub seed: u64,
    pub test_error_pct: f64,
    pub sparsity_pct: f64,
    pub selected: usize,
    /// Final stable-set size (stabilized runs only).
    pub stable_size: Option<usize>,
    pub stages: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub algorithm: String,
    pub runs: usize,
    pub mean_error_pct: f64,
    pub std_error_pct: f64,
    pub mean_sparsity_pct: f64,
    pub std_sparsity_pct: f64,
    /// Mean pairwise kappa; empty with fewer than two runs.
    pub stability: Option<f64>,
}

/// Selected fraction per density bin, averaged over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub algorithm: String,
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<AggregateRow>,
    pub profiles: Vec<ProfileRow>,
    /// Selected sets per algorithm, in run order.
    pub selections: Vec<(String, Vec<SelectedSet>)>,
}

struct RunOutput {
    record: RunRecord,
    selected: SelectedSet,
}

fn run_one(
    label: &str,
    algo: &Algorithm,
    run: usize,
    seed: u64,
    loss: LossKind,
    train_set: &Dataset,
    val: &Dataset,
) -> Result<RunOutput> {
    let (w, stable_size, stages) = match algo.with_seed(seed) {
        Algorithm::Stabilized(cfg) => {
            let res = train(train_set, loss, &cfg)?;
            let stages = res.history.len();
            (res.w_bar, Some(res.stable.len()), Some(stages))
        }
        Algorithm::Baseline(cfg) => (run_baseline(train_set, loss, &cfg)?, None, None),
    };
    let selected = SelectedSet::from_weights(&w);
    Ok(RunOutput {
        record: RunRecord {
            algorithm: label.to_string(),
            run,
            seed,
            test_error_pct: 100.0 * test_error(&w, val)?,
            sparsity_pct: sparsity_pct(&w),
            selected: selected.len(),
            stable_size,
            stages,
        },
        selected,
    })
}

/// Runs every (algorithm, permutation) pair and reduces in that order.
pub fn run_benchmark(spec: &BenchmarkSpec, train_set: &Dataset, val: &Dataset) -> Result<BenchmarkReport> {
    spec.validate()?;
    let algos = spec
        .algorithms
        .iter()
        .map(|a| Ok((a.label(), a.build()?)))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..algos.len())
        .flat_map(|a| (0..spec.permutations).map(move |b| (a, b)))
        .collect();
    let outputs = jobs
        .par_iter()
        .map(|&(a, b)| {
            let (label, algo) = &algos[a];
            run_one(label, algo, b, spec.seed + b as u64, spec.loss, train_set, val)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut runs = Vec::with_capacity(outputs.len());
    let mut aggregates = Vec::new();
    let mut profiles = Vec::new();
    let mut selections = Vec::new();
    for (a, chunk) in outputs.chunks(spec.permutations).enumerate() {
        let label = algos[a].0.clone();
        let errors: Vec<f64> = chunk.iter().map(|o| o.record.test_error_pct).collect();
        let sparsity: Vec<f64> = chunk.iter().map(|o| o.record.sparsity_pct).collect();
        let sets: Vec<SelectedSet> = chunk.iter().map(|o| o.selected.clone()).collect();
        let (mean_error_pct, std_error_pct) = mean_std(&errors);
        let (mean_sparsity_pct, std_sparsity_pct) = mean_std(&sparsity);
        aggregates.push(AggregateRow {
            algorithm: label.clone(),
            runs: chunk.len(),
            mean_error_pct,
            std_error_pct,
            mean_sparsity_pct,
            std_sparsity_pct,
            stability: if sets.len() >= 2 { Some(stability_score(&sets)?) } else { None },
        });
        profiles.extend(mean_profile(&label, &sets, train_set, spec.bins)?);
        selections.push((label, sets));
        runs.extend(chunk.iter().map(|o| o.record.clone()));
    }
    Ok(BenchmarkReport {
        runs,
        aggregates,
        profiles,
        selections,
    })
}

fn mean_profile(label: &str, sets: &[SelectedSet], data: &Dataset, bins: usize) -> Result<Vec<ProfileRow>> {
    let mut sums = vec![0.0; bins];
    let mut rows = Vec::new();
    for s in sets {
        let h = selection_by_density(s, data, bins)?;
        for (b, bin) in h.iter().enumerate() {
            sums[b] += bin.fraction.unwrap_or(0.0);
        }
        rows = h;
    }
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(b, bin)| ProfileRow {
            algorithm: label.to_string(),
            bin: b,
            lower: bin.lower,
            upper: bin.upper,
            count: bin.count,
            mean_fraction: (bin.count > 0).then(|| sums[b] / sets.len() as f64),
        })
        .collect())
}

/// Spearman correlation between bin midpoint and mean selected fraction over
/// the nonempty bins of one algorithm's profile.
pub fn profile_correlation(rows: &[ProfileRow]) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| r.mean_fraction.map(|f| ((r.lower + r.upper) / 2.0, f)))
        .unzip();
    spearman(&x, &y)
}

impl BenchmarkReport {
    pub fn profile(&self, algorithm: &str) -> Vec<ProfileRow> {
        self.profiles.iter().filter(|r| r.algorithm == algorithm).cloned().collect()
    }

    pub fn aggregate(&self, algorithm: &str) -> Option<&AggregateRow> {
        self.aggregates.iter().find(|r| r.algorithm == algorithm)
    }

    /// Writes `runs.csv`, `aggregate.csv`, `aggregate.txt` and `profile.csv` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        write_csv(&dir.join("runs.csv"), &self.runs)?;
        write_csv(&dir.join("aggregate.csv"), &self.aggregates)?;
        write_csv(&dir.join("profile.csv"), &self.profiles)?;
        let path = dir.join("aggregate.txt");
        std::fs::write(&path, render_table(&self.aggregates)).map_err(|e| Error::file(&path, e))?;
        Ok(())
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    write_csv_to(file, rows)
}

pub fn write_csv_to<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Aligned plain-text table of the aggregate rows.
pub fn render_table(rows: &[AggregateRow]) -> String {
    let header = ["algorithm", "runs", "error %", "nonzero %", "kappa"];
    let body: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.algorithm.clone(),
                r.runs.to_string(),
                format!("{:.2} ± {:.2}", r.mean_error_pct, r.std_error_pct),
                format!("{:.2} ± {:.2}", r.mean_sparsity_pct, r.std_sparsity_pct),
                r.stability.map_or("-".into(), |k| format!("{k:.3}")),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| {
                let pad = w - c.chars().count();
                if i == 0 {
                    format!("{c}{}", " ".repeat(pad))
                } else {
                    format!("{}{c}", " ".repeat(pad))
                }
            })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in &body {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}
