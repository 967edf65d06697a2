//! Convex margin losses for the linear model `f(x) = w·x`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Label, SparseVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Hinge,
    Logistic,
}

impl LossKind {
    /// `l(f, y)`.
    pub fn value(self, f: f64, y: Label) -> f64 {
        let z = f * y.sign();
        match self {
            LossKind::Hinge => (1.0 - z).max(0.0),
            LossKind::Logistic => {
                let t = -z;
                if t > 30.0 {
                    t + (-t).exp().ln_1p()
                } else {
                    t.exp().ln_1p()
                }
            }
        }
    }

    /// Scalar `G` such that `G·x` is a subgradient of the loss in `w`.
    ///
    /// Hinge uses 0 at the kink `fy = 1`.
    #[inline]
    pub fn subgradient_scale(self, f: f64, y: Label) -> f64 {
        let ys = y.sign();
        match self {
            LossKind::Hinge => {
                if f * ys < 1.0 {
                    -ys
                } else {
                    0.0
                }
            }
            LossKind::Logistic => -ys / (1.0 + (f * ys).exp()),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Hinge => "hinge",
            LossKind::Logistic => "logistic",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hinge" => Ok(LossKind::Hinge),
            "logistic" | "log" => Ok(LossKind::Logistic),
            other => Err(Error::config(format!("unknown loss `{other}`"))),
        }
    }
}

/// `w·x` with a dimension check.
pub fn margin(w: &[f64], x: &SparseVector) -> Result<f64> {
    if w.len() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            found: x.dim(),
        });
    }
    Ok(x.dot(w))
}

/// Sign of the margin; a zero margin predicts the positive class.
pub fn predict(w: &[f64], x: &SparseVector) -> Label {
    if x.dot(w) >= 0.0 {
        Label::Positive
    } else {
        Label::Negative
    }
}
