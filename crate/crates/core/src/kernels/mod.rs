//! Correlation kernels of second-order differences of fBm.
//!
//! `rho_hat` is the normalized covariance of second differences on one grid,
//! `rho_tilde` the cross covariance between the coarse grid and the nested
//! fine grid. Both are even, sum to zero over ℤ and decay like `|j|^(2H-4)`.

mod chain;
mod lattice;

pub use chain::{chain_sum, chain_sum_at_radius, ChainEvaluator, ChainFactor, ChainSpec, ChainSum, Truncation};
pub use lattice::{a_n_diagnostic, AnCounts};

use serde::{Deserialize, Serialize};

use crate::error::{check_hurst, HurstError, Result};
use crate::numeric::NeumaierSum;

/// The triple `(H, T, n)`: Hurst coefficient, horizon and coarse grid count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurstModel {
    pub h: f64,
    pub t: f64,
    pub n: usize,
}

impl HurstModel {
    pub fn new(h: f64, t: f64, n: usize) -> Result<Self> {
        check_hurst(h)?;
        if !(t.is_finite() && t > 0.0) {
            return Err(HurstError::Domain(format!("horizon T must be positive, got {t}")));
        }
        if n < 2 {
            return Err(HurstError::Domain(format!("grid count n must be at least 2, got {n}")));
        }
        Ok(Self { h, t, n })
    }

    /// Coarse grid step `T / n`.
    pub fn coarse_step(&self) -> f64 {
        self.t / self.n as f64
    }

    /// Fine grid step `T / (2n)`.
    pub fn fine_step(&self) -> f64 {
        self.t / (2 * self.n) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    RhoHat,
    RhoTilde,
}

/// Grid on which [`increment_covariance`] is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    /// Both indices on the `n`-grid.
    Coarse,
    /// Both indices on the `2n`-grid.
    Fine,
    /// First index on the `n`-grid, second on the `2n`-grid.
    Cross,
}

const HAT_WEIGHTS: [f64; 5] = [-1.0, 4.0, -6.0, 4.0, -1.0];
const TILDE_WEIGHTS: [f64; 7] = [-1.0, 2.0, 1.0, -4.0, 1.0, 2.0, -1.0];

/// Lags at or above this use the binomial expansion of `|j + k|^(2H)` about `|j|`.
pub const SERIES_CROSSOVER: i64 = 32;
const SERIES_TERMS: usize = 12;

/// Evaluates both kernels at a fixed `H` to full relative precision.
///
/// Small lags use the defining finite differences with compensated summation.
/// Large lags expand `(1 + k/j)^(2H)` binomially; the orders below four cancel
/// exactly, so only the surviving terms are summed and no digits are lost to
/// cancellation against `|j|^(2H)`.
#[derive(Debug, Clone)]
pub struct KernelEvaluator {
    h: f64,
    hat_series: [f64; SERIES_TERMS],
    tilde_series: [f64; SERIES_TERMS],
    tilde_scale: f64,
}

impl KernelEvaluator {
    pub fn new(h: f64) -> Result<Self> {
        check_hurst(h)?;
        let alpha = 2.0 * h;
        let tilde_scale = 2f64.powf(-(alpha + 1.0));
        // binom[m] = C(2H, m)
        let mut binom = [0.0; 4 + 2 * SERIES_TERMS];
        binom[0] = 1.0;
        for m in 1..binom.len() {
            binom[m] = binom[m - 1] * (alpha - (m - 1) as f64) / m as f64;
        }
        let moment = |weights: &[f64], m: usize| -> f64 {
            let half = (weights.len() / 2) as i32;
            weights
                .iter()
                .enumerate()
                .map(|(i, w)| w * ((i as i32 - half) as f64).powi(m as i32))
                .sum()
        };
        let mut hat_series = [0.0; SERIES_TERMS];
        let mut tilde_series = [0.0; SERIES_TERMS];
        for t in 0..SERIES_TERMS {
            let m = 4 + 2 * t;
            hat_series[t] = 0.5 * binom[m] * moment(&HAT_WEIGHTS, m);
            tilde_series[t] = tilde_scale * binom[m] * moment(&TILDE_WEIGHTS, m);
        }
        Ok(Self {
            h,
            hat_series,
            tilde_series,
            tilde_scale,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn eval(&self, kernel: Kernel, j: i64) -> f64 {
        match kernel {
            Kernel::RhoHat => self.rho_hat(j),
            Kernel::RhoTilde => self.rho_tilde(j),
        }
    }

    pub fn rho_hat(&self, j: i64) -> f64 {
        let a = j.abs();
        if a >= SERIES_CROSSOVER {
            self.series(&self.hat_series, a)
        } else {
            0.5 * self.direct(&HAT_WEIGHTS, a)
        }
    }

    pub fn rho_tilde(&self, j: i64) -> f64 {
        let a = j.abs();
        if a >= SERIES_CROSSOVER {
            self.series(&self.tilde_series, a)
        } else {
            self.tilde_scale * self.direct(&TILDE_WEIGHTS, a)
        }
    }

    fn direct(&self, weights: &[f64], j: i64) -> f64 {
        let half = (weights.len() / 2) as i64;
        let alpha = 2.0 * self.h;
        let mut acc = NeumaierSum::new();
        for (i, w) in weights.iter().enumerate() {
            let lag = (j + i as i64 - half).abs();
            if lag != 0 {
                acc.add(w * (lag as f64).powf(alpha));
            }
        }
        acc.value()
    }

    fn series(&self, coeffs: &[f64; SERIES_TERMS], j: i64) -> f64 {
        let x = 1.0 / j as f64;
        let x2 = x * x;
        // Horner in x^2, smallest terms first.
        let mut acc = 0.0;
        for c in coeffs.iter().rev() {
            acc = acc * x2 + c;
        }
        acc * (j as f64).powf(2.0 * self.h - 4.0)
    }
}

/// `½(−|j−2|^{2H} + 4|j−1|^{2H} − 6|j|^{2H} + 4|j+1|^{2H} − |j+2|^{2H})`.
pub fn rho_hat(h: f64, j: i64) -> Result<f64> {
    Ok(KernelEvaluator::new(h)?.rho_hat(j))
}

/// `2^{−(2H+1)}(−|j−3|^{2H} + 2|j−2|^{2H} + |j−1|^{2H} − 4|j|^{2H} + |j+1|^{2H} + 2|j+2|^{2H} − |j+3|^{2H})`.
pub fn rho_tilde(h: f64, j: i64) -> Result<f64> {
    Ok(KernelEvaluator::new(h)?.rho_tilde(j))
}

/// Limit of `kernel(j) / |j|^(2H−4)` as `|j| → ∞`.
///
/// Equals `−H(2H−1)(2H−2)(2H−3)` for `rho_hat` and `2^{2−2H}` times that for
/// `rho_tilde`. The fourth difference of `|x|^{2H}` enters both kernels with a
/// negative sign, hence the leading minus.
pub fn decay_constant(h: f64, kernel: Kernel) -> Result<f64> {
    check_hurst(h)?;
    let base = -h * (2.0 * h - 1.0) * (2.0 * h - 2.0) * (2.0 * h - 3.0);
    Ok(match kernel {
        Kernel::RhoHat => base,
        Kernel::RhoTilde => 2f64.powf(2.0 - 2.0 * h) * base,
    })
}

/// Covariance of second-order differences on the coarse, fine or mixed grids.
///
/// For [`Level::Cross`], `j` indexes the coarse grid and `k` the fine grid.
pub fn increment_covariance(model: &HurstModel, level: Level, j: usize, k: usize) -> Result<f64> {
    let n = model.n;
    let (j_max, k_max) = match level {
        Level::Coarse => (n - 1, n - 1),
        Level::Fine => (2 * n - 1, 2 * n - 1),
        Level::Cross => (n - 1, 2 * n - 1),
    };
    if j == 0 || j > j_max || k == 0 || k > k_max {
        return Err(HurstError::IndexOutOfRange(format!(
            "indices ({j}, {k}) outside 1..={j_max} x 1..={k_max} for {level:?}"
        )));
    }
    let eval = KernelEvaluator::new(model.h)?;
    let two_h = 2.0 * model.h;
    let (j, k) = (j as i64, k as i64);
    Ok(match level {
        Level::Coarse => model.coarse_step().powf(two_h) * eval.rho_hat(j - k),
        Level::Fine => model.fine_step().powf(two_h) * eval.rho_hat(j - k),
        Level::Cross => model.coarse_step().powf(two_h) * eval.rho_tilde(k - 2 * j),
    })
}

/// Both kernels tabulated on `[−radius, radius]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelTable {
    pub h: f64,
    pub radius: usize,
    rho_hat: Vec<f64>,
    rho_tilde: Vec<f64>,
    /// Bound on `Σ_{|j|>radius} |kernel(j)|`, the larger of the two kernels.
    pub tail_bound: f64,
}

impl KernelTable {
    pub fn new(h: f64, radius: usize) -> Result<Self> {
        if radius < 4 {
            return Err(HurstError::Domain(format!("kernel table radius must be at least 4, got {radius}")));
        }
        let eval = KernelEvaluator::new(h)?;
        let r = radius as i64;
        let rho_hat = (-r..=r).map(|j| eval.rho_hat(j)).collect();
        let rho_tilde = (-r..=r).map(|j| eval.rho_tilde(j)).collect();
        let tail_bound = [Kernel::RhoHat, Kernel::RhoTilde]
            .into_iter()
            .map(|k| tail_bound(h, k, radius))
            .fold(0.0, f64::max);
        Ok(Self {
            h,
            radius,
            rho_hat,
            rho_tilde,
            tail_bound,
        })
    }

    /// Kernel value at lag `j`, or `None` outside the table.
    pub fn get(&self, kernel: Kernel, j: i64) -> Option<f64> {
        let idx = j + self.radius as i64;
        if idx < 0 || idx as usize >= self.rho_hat.len() {
            return None;
        }
        let values = match kernel {
            Kernel::RhoHat => &self.rho_hat,
            Kernel::RhoTilde => &self.rho_tilde,
        };
        Some(values[idx as usize])
    }

    /// Values on `[−radius, radius]`, index `j + radius`.
    pub fn values(&self, kernel: Kernel) -> &[f64] {
        match kernel {
            Kernel::RhoHat => &self.rho_hat,
            Kernel::RhoTilde => &self.rho_tilde,
        }
    }
}

/// Twice the two-sided integral of the leading decay term beyond `radius`.
pub(crate) fn tail_bound(h: f64, kernel: Kernel, radius: usize) -> f64 {
    let c = decay_constant(h, kernel).unwrap_or(f64::INFINITY).abs();
    let exponent = 3.0 - 2.0 * h;
    4.0 * c * (radius as f64).powf(-exponent) / exponent
}
