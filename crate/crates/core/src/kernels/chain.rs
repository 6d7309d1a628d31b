//! Truncated lattice chain sums
//! `Σ_{i₁..i_{k−1}} f₁(·) f₂(·) ⋯ f_k(·)` in which every factor couples at
//! most two neighbouring summation indices.

use serde::{Deserialize, Serialize};

use super::{Kernel, KernelEvaluator};
use crate::error::{HurstError, Result};
use crate::numeric::{convolve, NeumaierSum};

/// One factor `kernel(left · i_{a−1} − right · i_a + offset)` of a chain,
/// with the conventions `i_0 = i_k = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainFactor {
    pub kernel: Kernel,
    pub left: i64,
    pub right: i64,
    pub offset: i64,
}

impl ChainFactor {
    pub const fn new(kernel: Kernel, left: i64, right: i64, offset: i64) -> Self {
        Self {
            kernel,
            left,
            right,
            offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSpec {
    factors: Vec<ChainFactor>,
}

use Kernel::{RhoHat as HAT, RhoTilde as TILDE};

impl ChainSpec {
    pub fn new(factors: Vec<ChainFactor>) -> Result<Self> {
        if factors.len() < 2 {
            return Err(HurstError::Domain(format!(
                "a chain needs at least two factors, got {}",
                factors.len()
            )));
        }
        for f in &factors {
            if !(1..=2).contains(&f.left) || !(1..=2).contains(&f.right) || f.offset.abs() > 1 {
                return Err(HurstError::Domain(format!(
                    "unsupported chain factor {f:?}: dilations must be 1 or 2 and offsets in -1..=1"
                )));
            }
        }
        Ok(Self { factors })
    }

    fn from_args(args: &[(Kernel, i64, i64, i64)]) -> Self {
        Self::new(
            args.iter()
                .map(|&(k, l, r, o)| ChainFactor::new(k, l, r, o))
                .collect(),
        )
        .expect("preset chain is well formed")
    }

    pub fn factors(&self) -> &[ChainFactor] {
        &self.factors
    }

    /// Number of factors `k`; the sum runs over `k − 1` indices.
    pub fn order(&self) -> usize {
        self.factors.len()
    }

    /// `Σ_{i∈ℤ} kernel(i)²`.
    pub fn sum_of_squares(kernel: Kernel) -> Self {
        Self::from_args(&[(kernel, 1, 1, 0), (kernel, 1, 1, 0)])
    }

    /// `Σ ρ̂(i₁) ρ̂(i₁−i₂) ρ̂(i₂)`.
    pub fn kappa_1_11() -> Self {
        Self::from_args(&[(HAT, 1, 1, 0), (HAT, 1, 1, 0), (HAT, 1, 1, 0)])
    }

    /// `Σ ρ̂(i₁) ρ̃(i₂−2i₁) ρ̃(i₂)`.
    pub fn kappa_2_11() -> Self {
        Self::from_args(&[(HAT, 1, 1, 0), (TILDE, 2, 1, 0), (TILDE, 1, 1, 0)])
    }

    /// `Σ ρ̂(i₁) ρ̃(i₁−i₂) ρ̃(i₂)`.
    pub fn kappa_1_22() -> Self {
        Self::from_args(&[(HAT, 1, 1, 0), (TILDE, 1, 1, 0), (TILDE, 1, 1, 0)])
    }

    /// `Σ ρ̂(i₁) ρ̂(i₁−i₂) ρ̂(i₂−i₃) ρ̂(i₃)`.
    pub fn kappa_11_11() -> Self {
        Self::from_args(&[
            (HAT, 1, 1, 0),
            (HAT, 1, 1, 0),
            (HAT, 1, 1, 0),
            (HAT, 1, 1, 0),
        ])
    }

    /// Parity branch `e ∈ {0, 1}` of `Σ ρ̃(2i₁+e) ρ̂(i₁−i₂) ρ̃(2i₂−i₃+e) ρ̂(i₃)`.
    pub fn kappa_11_22(parity: i64) -> Self {
        assert!(parity == 0 || parity == 1);
        Self::from_args(&[
            (TILDE, 1, 2, -parity),
            (HAT, 1, 1, 0),
            (TILDE, 2, 1, parity),
            (HAT, 1, 1, 0),
        ])
    }

    /// `Σ ρ̂(i₁) ρ̃(2i₁−i₂) ρ̃(i₂−2i₃) ρ̂(i₃)`.
    pub fn kappa_11_12() -> Self {
        Self::from_args(&[
            (HAT, 1, 1, 0),
            (TILDE, 2, 1, 0),
            (TILDE, 1, 2, 0),
            (HAT, 1, 1, 0),
        ])
    }

    /// `Σ ρ̂(i₁) ρ̂(i₁−i₂) ρ̃(i₂−i₃) ρ̃(i₃)`.
    pub fn kappa_12_22() -> Self {
        Self::from_args(&[
            (HAT, 1, 1, 0),
            (HAT, 1, 1, 0),
            (TILDE, 1, 1, 0),
            (TILDE, 1, 1, 0),
        ])
    }

    /// `Σ ρ̂(i₁) ρ̃(2i₁−i₂) ρ̂(i₂−i₃) ρ̃(i₃)`.
    pub fn kappa_12_12_first() -> Self {
        Self::from_args(&[
            (HAT, 1, 1, 0),
            (TILDE, 2, 1, 0),
            (HAT, 1, 1, 0),
            (TILDE, 1, 1, 0),
        ])
    }

    /// Parity branch of `Σ ρ̃(2i₁+e) ρ̃(2i₁−i₂) ρ̃(i₂−2i₃) ρ̃(2i₃+e)`.
    pub fn kappa_12_12_second(parity: i64) -> Self {
        assert!(parity == 0 || parity == 1);
        Self::from_args(&[
            (TILDE, 1, 2, -parity),
            (TILDE, 2, 1, 0),
            (TILDE, 1, 2, 0),
            (TILDE, 2, 1, parity),
        ])
    }

    /// Largest kernel lag reached with all indices in `[−radius, radius]`.
    pub(crate) fn max_lag(&self, radius: usize) -> usize {
        let r = radius as i64;
        self.factors
            .iter()
            .map(|f| ((f.left + f.right) * r + f.offset.abs()) as usize)
            .max()
            .unwrap_or(0)
    }
}

/// Kernel values on `[−width, width]` shared by every chain at one radius.
#[derive(Debug, Clone)]
pub struct ChainEvaluator {
    radius: usize,
    width: usize,
    hat: Vec<f64>,
    tilde: Vec<f64>,
}

impl ChainEvaluator {
    pub fn new(h: f64, radius: usize) -> Result<Self> {
        if radius == 0 {
            return Err(HurstError::Domain("chain radius must be positive".into()));
        }
        let eval = KernelEvaluator::new(h)?;
        let width = 4 * radius + 1;
        let w = width as i64;
        Ok(Self {
            radius,
            width,
            hat: (-w..=w).map(|j| eval.rho_hat(j)).collect(),
            tilde: (-w..=w).map(|j| eval.rho_tilde(j)).collect(),
        })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    fn kernel(&self, kernel: Kernel, lag: i64) -> f64 {
        let table = match kernel {
            Kernel::RhoHat => &self.hat,
            Kernel::RhoTilde => &self.tilde,
        };
        table[(lag + self.width as i64) as usize]
    }

    /// Slice of the kernel table on `[−half, half]`.
    fn window(&self, kernel: Kernel, half: usize) -> &[f64] {
        let table = match kernel {
            Kernel::RhoHat => &self.hat,
            Kernel::RhoTilde => &self.tilde,
        };
        &table[self.width - half..=self.width + half]
    }

    /// The chain sum with every index restricted to `[−radius, radius]`.
    pub fn evaluate(&self, spec: &ChainSpec) -> f64 {
        debug_assert!(spec.max_lag(self.radius) <= self.width);
        let r = self.radius as i64;
        let factors = spec.factors();
        let k = factors.len();

        // g(i_{k−1}) = f_k(left · i_{k−1} + offset)
        let last = factors[k - 1];
        let mut g: Vec<f64> = (-r..=r)
            .map(|y| self.kernel(last.kernel, last.left * y + last.offset))
            .collect();

        // g'(x) = Σ_y f(left·x − right·y + offset) g(y), done as a convolution
        // of the kernel with g spread out to every `right`-th lattice point.
        for f in factors[1..k - 1].iter().rev() {
            let stride = f.right as usize;
            let spread_half = stride * self.radius;
            let mut spread = vec![0.0; 2 * spread_half + 1];
            for (i, &v) in g.iter().enumerate() {
                spread[i * stride] = v;
            }
            let half = (f.left as usize + stride) * self.radius + f.offset.unsigned_abs() as usize;
            let conv = convolve(self.window(f.kernel, half), &spread);
            let shift = (half + spread_half) as i64;
            g = (-r..=r)
                .map(|x| conv[(f.left * x + f.offset + shift) as usize])
                .collect();
        }

        let first = factors[0];
        let mut acc = NeumaierSum::new();
        for (i, &v) in g.iter().enumerate() {
            let x = i as i64 - r;
            acc.add(self.kernel(first.kernel, -first.right * x + first.offset) * v);
        }
        acc.value()
    }
}

/// Adaptive-doubling truncation schedule for lattice series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub tol: f64,
    pub start_radius: usize,
    pub max_radius: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            start_radius: 1024,
            max_radius: 1 << 20,
        }
    }
}

impl Truncation {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(HurstError::Domain(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.start_radius < 4 {
            return Err(HurstError::Domain("start radius must be at least 4".into()));
        }
        Ok(())
    }

    /// Runs `eval` at doubling radii until every component moves by less than
    /// `tol · max(1, |value|)`. Returns the last values, the last change and
    /// the radius reached.
    pub(crate) fn converge<F>(&self, mut eval: F) -> Result<(Vec<f64>, f64, usize)>
    where
        F: FnMut(usize) -> Result<Vec<f64>>,
    {
        self.validate()?;
        let mut radius = self.start_radius;
        let mut previous: Option<Vec<f64>> = None;
        let mut last_change = f64::INFINITY;
        let mut last_radius = 0;
        while radius <= self.max_radius {
            let current = eval(radius)?;
            if let Some(prev) = &previous {
                last_change = prev
                    .iter()
                    .zip(&current)
                    .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
                    .fold(0.0, f64::max);
                if last_change < self.tol {
                    return Ok((current, last_change, radius));
                }
            }
            previous = Some(current);
            last_radius = radius;
            radius *= 2;
        }
        Err(HurstError::ToleranceNotAchieved {
            requested: self.tol,
            achieved: last_change,
            radius: last_radius,
            cap: self.max_radius,
        })
    }
}

/// A converged chain sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSum {
    pub value: f64,
    /// Change between the last two radii.
    pub error_estimate: f64,
    pub radius: usize,
}

/// The chain sum with indices restricted to `[−radius, radius]`.
pub fn chain_sum_at_radius(h: f64, spec: &ChainSpec, radius: usize) -> Result<f64> {
    Ok(ChainEvaluator::new(h, radius)?.evaluate(spec))
}

/// The full chain sum over `ℤ^{k−1}`, truncated adaptively.
pub fn chain_sum(h: f64, spec: &ChainSpec, truncation: &Truncation) -> Result<ChainSum> {
    let (values, change, radius) =
        truncation.converge(|r| Ok(vec![chain_sum_at_radius(h, spec, r)?]))?;
    Ok(ChainSum {
        value: values[0],
        error_estimate: change * values[0].abs().max(1.0),
        radius,
    })
}
