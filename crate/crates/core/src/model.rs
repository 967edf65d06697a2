//! Sparse text model files: a `p=<dim>` header, then one `index:weight` line
//! per nonzero weight with 1-based indices.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub fn write_model<W: Write>(w: &[f64], mut out: W) -> Result<()> {
    writeln!(out, "p={}", w.len())?;
    for (j, v) in w.iter().enumerate() {
        if *v != 0.0 {
            writeln!(out, "{}:{}", j + 1, v)?;
        }
    }
    Ok(())
}

pub fn read_model<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let mut w: Option<Vec<f64>> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let err = |message: String| Error::Parse { line: lineno, message };
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        match &mut w {
            None => {
                let dim = text
                    .strip_prefix("p=")
                    .and_then(|d| d.trim().parse::<usize>().ok())
                    .ok_or_else(|| err(format!("expected `p=<dim>` header, found `{text}`")))?;
                w = Some(vec![0.0; dim]);
            }
            Some(w) => {
                let (idx, val) = text
                    .split_once(':')
                    .ok_or_else(|| err(format!("expected `index:weight`, found `{text}`")))?;
                let idx: usize = idx.trim().parse().map_err(|_| err(format!("bad index `{idx}`")))?;
                let val: f64 = val.trim().parse().map_err(|_| err(format!("bad weight `{val}`")))?;
                if idx == 0 || idx > w.len() {
                    return Err(err(format!("index {idx} outside 1..={}", w.len())));
                }
                if !val.is_finite() {
                    return Err(err(format!("non-finite weight at index {idx}")));
                }
                w[idx - 1] = val;
            }
        }
    }
    w.ok_or_else(|| Error::Parse {
        line: 0,
        message: "empty model file".into(),
    })
}
