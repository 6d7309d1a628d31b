//! The second-order-difference estimator of `H` and its corrected variants.
//!
//! From `2n+1` equally spaced samples, `V_{2n}` is the sum of squared second
//! differences on the full grid and `V_n` the same on the even-index subgrid.
//! `Ĥ = ½ − log(V_{2n}/V_n) / (2 ln 2)`, clamped to `[0, 1]`.

use std::io::Read;
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HurstError, Result};
use crate::expansion::build_expansion_with;
use crate::fbm::{second_differences, Grid};
use crate::kernels::Truncation;
use crate::numeric::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub n: usize,
    pub v_n: f64,
    pub v_2n: f64,
    pub h_raw: f64,
    pub h_hat: f64,
    /// Bias-corrected estimate `Ĥ − b(Ĥ)/n`, clamped.
    #[serde(rename = "h_star")]
    pub h_b: Option<f64>,
    /// Median-corrected estimate `Ĥ − b**(Ĥ)/n`, clamped.
    pub h_med: Option<f64>,
    pub clamped: bool,
}

fn sum_of_squares(d: &[f64]) -> f64 {
    d.iter().map(|x| x * x).collect::<NeumaierSum>().value()
}

fn grid_count(len: usize) -> Result<usize> {
    if len < 5 || len.is_multiple_of(2) {
        return Err(HurstError::Length(format!(
            "need an odd number of at least 5 samples, got {len}"
        )));
    }
    Ok((len - 1) / 2)
}

/// `(V_n, V_{2n})` from `2n+1` samples.
pub fn v2_statistic(samples: &[f64]) -> Result<(f64, f64)> {
    grid_count(samples.len())?;
    Ok((
        sum_of_squares(&second_differences(samples, Grid::Coarse)),
        sum_of_squares(&second_differences(samples, Grid::Fine)),
    ))
}

/// `½ − log(v_2n / v_n) / (2 ln 2)` without clamping.
pub fn h_from_ratio(v_n: f64, v_2n: f64) -> f64 {
    0.5 - (v_2n / v_n).ln() / (2.0 * std::f64::consts::LN_2)
}

pub fn estimate_h(samples: &[f64]) -> Result<EstimateResult> {
    let n = grid_count(samples.len())?;
    let (v_n, v_2n) = v2_statistic(samples)?;
    if !(v_n > 0.0 && v_2n > 0.0) {
        return Err(HurstError::DegenerateData(format!(
            "quadratic variations vanish (V_n = {v_n}, V_2n = {v_2n}); input is constant or linear"
        )));
    }
    let h_raw = h_from_ratio(v_n, v_2n);
    Ok(EstimateResult {
        n,
        v_n,
        v_2n,
        h_raw,
        h_hat: h_raw.clamp(0.0, 1.0),
        h_b: None,
        h_med: None,
        clamped: !(0.0..=1.0).contains(&h_raw),
    })
}

/// A bias function `b(H)` used as `Ĥ − b(Ĥ)/n`.
pub trait BiasCorrection {
    fn b(&self, h: f64) -> Result<f64>;
}

impl<F: Fn(f64) -> f64> BiasCorrection for F {
    fn b(&self, h: f64) -> Result<f64> {
        Ok(self(h))
    }
}

/// Plug-in correction. Skipped when the raw estimate is outside `(0, 1)`.
pub fn apply_correction(result: &EstimateResult, correction: &dyn BiasCorrection) -> Result<f64> {
    if !(result.h_raw > 0.0 && result.h_raw < 1.0) {
        return Ok(result.h_hat);
    }
    let b = correction.b(result.h_hat)?;
    Ok((result.h_hat - b / result.n as f64).clamp(0.0, 1.0))
}

/// `estimate_h` followed by a correction; the corrected value is stored in `h_b`.
pub fn estimate_h_corrected(samples: &[f64], correction: &dyn BiasCorrection) -> Result<EstimateResult> {
    let mut r = estimate_h(samples)?;
    r.h_b = Some(apply_correction(&r, correction)?);
    Ok(r)
}

/// `estimate_h` with both `b*` and `b**` corrections.
pub fn estimate_h_all(samples: &[f64], table: &CorrectionTable) -> Result<EstimateResult> {
    let mut r = estimate_h(samples)?;
    r.h_b = Some(apply_correction(&r, &table.star())?);
    r.h_med = Some(apply_correction(&r, &table.star_star())?);
    Ok(r)
}

/// `b*(H)` and `b**(H)` tabulated at `H = 0.05, 0.10, …, 0.95` and
/// interpolated by local cubics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionTable {
    pub nodes: Vec<f64>,
    pub b_star: Vec<f64>,
    pub b_star_star: Vec<f64>,
}

pub const TABLE_STEP: f64 = 0.05;
pub const TABLE_NODES: usize = 19;

fn lagrange4(nodes: &[f64], values: &[f64], h: f64) -> f64 {
    let len = nodes.len();
    let below = nodes.partition_point(|&x| x <= h);
    let start = below.saturating_sub(2).min(len - 4);
    let (xs, ys) = (&nodes[start..start + 4], &values[start..start + 4]);
    (0..4)
        .map(|i| {
            let w: f64 = (0..4)
                .filter(|&j| j != i)
                .map(|j| (h - xs[j]) / (xs[i] - xs[j]))
                .product();
            w * ys[i]
        })
        .sum()
}

#[derive(Clone, Copy)]
pub struct TableCorrection<'a> {
    table: &'a CorrectionTable,
    median: bool,
}

impl BiasCorrection for TableCorrection<'_> {
    fn b(&self, h: f64) -> Result<f64> {
        Ok(if self.median {
            self.table.b_star_star_at(h)
        } else {
            self.table.b_star_at(h)
        })
    }
}

impl CorrectionTable {
    pub fn build(truncation: &Truncation) -> Result<Self> {
        let nodes: Vec<f64> = (1..=TABLE_NODES).map(|i| i as f64 * TABLE_STEP).collect();
        let models = nodes
            .par_iter()
            .map(|&h| build_expansion_with(h, truncation))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            b_star: models.iter().map(|m| m.b_star).collect(),
            b_star_star: models.iter().map(|m| m.b_star_star).collect(),
            nodes,
        })
    }

    /// Table at the default truncation, built once per process.
    pub fn shared() -> Result<&'static Self> {
        static TABLE: OnceLock<CorrectionTable> = OnceLock::new();
        if let Some(t) = TABLE.get() {
            return Ok(t);
        }
        let t = Self::build(&Truncation::default())?;
        Ok(TABLE.get_or_init(|| t))
    }

    pub fn b_star_at(&self, h: f64) -> f64 {
        lagrange4(&self.nodes, &self.b_star, h)
    }

    pub fn b_star_star_at(&self, h: f64) -> f64 {
        lagrange4(&self.nodes, &self.b_star_star, h)
    }

    pub fn star(&self) -> TableCorrection<'_> {
        TableCorrection { table: self, median: false }
    }

    pub fn star_star(&self) -> TableCorrection<'_> {
        TableCorrection { table: self, median: true }
    }
}

/// Reads a sample series from CSV. The last column holds the values; other
/// columns (such as time) are ignored. A non-numeric first row is a header.
/// An even number of rows loses its last row with a warning.
pub fn ingest_series<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| HurstError::Parse {
            row,
            column: 0,
            message: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let column = record.len();
        let cell = &record[column - 1];
        match cell.parse::<f64>() {
            Ok(x) if x.is_finite() => values.push(x),
            _ if row == 1 => continue,
            _ => {
                return Err(HurstError::Parse {
                    row,
                    column,
                    message: format!("'{cell}' is not a finite number"),
                })
            }
        }
    }
    if values.len() < 5 {
        return Err(HurstError::TooShort(format!(
            "need at least 5 samples (n >= 2), got {}",
            values.len()
        )));
    }
    if values.len() % 2 == 0 {
        log::warn!(
            "even number of samples ({}); dropping the last one",
            values.len()
        );
        values.pop();
    }
    Ok(values)
}

pub fn ingest_path(path: &Path) -> Result<Vec<f64>> {
    ingest_series(std::fs::File::open(path)?)
}
