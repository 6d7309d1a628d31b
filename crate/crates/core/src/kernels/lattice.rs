//! Finite cyclic lattice sums
//! `Aₙ = ν⁻¹ Σ_{j₁..j_k} ρ₁(j₁−j₂) ρ₂(j₂−j₃) ⋯ ρ_k(j_k−j₁)`
//! over the rectangle `[1, ν₁] × ⋯ × [1, ν_k]`.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use super::{Kernel, KernelEvaluator};
use crate::error::{HurstError, Result};
use crate::numeric::NeumaierSum;

/// Index counts `(ν, ν₁, …, ν_k)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnCounts {
    pub nu: usize,
    pub nus: Vec<usize>,
}

impl AnCounts {
    /// All counts equal to `n`.
    pub fn uniform(n: usize, k: usize) -> Self {
        Self { nu: n, nus: vec![n; k] }
    }
}

/// `w[j'] = Σ_j ρ(j' − j) v[j]` for `j ∈ [1, rows]`, `j' ∈ [1, cols]`.
struct ToeplitzStep {
    rows: usize,
    cols: usize,
    size: usize,
    kernel_hat: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl ToeplitzStep {
    fn new(eval: &KernelEvaluator, kernel: Kernel, rows: usize, cols: usize) -> Self {
        let len = rows + cols - 1;
        let size = len.next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        // lag d = t − (rows − 1) for t in 0..len
        let mut kernel_hat: Vec<Complex<f64>> = (0..len)
            .map(|t| Complex::new(eval.eval(kernel, t as i64 - (rows as i64 - 1)), 0.0))
            .collect();
        kernel_hat.resize(size, Complex::new(0.0, 0.0));
        forward.process(&mut kernel_hat);
        Self {
            rows,
            cols,
            size,
            kernel_hat,
            forward,
            inverse,
        }
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = v.iter().map(|&x| Complex::new(x, 0.0)).collect();
        buf.resize(self.size, Complex::new(0.0, 0.0));
        self.forward.process(&mut buf);
        for (x, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *x *= *k;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        // w[j'] sits at j' + rows − 2 for 1-based j'
        (1..=self.cols)
            .map(|jp| buf[jp + self.rows - 2].re * scale)
            .collect()
    }
}

/// Direct evaluation of `Aₙ(ρ₁, …, ρ_k)` for the kernels at Hurst index `h`.
pub fn a_n_diagnostic(h: f64, kernels: &[Kernel], counts: &AnCounts) -> Result<f64> {
    let k = kernels.len();
    if k < 2 {
        return Err(HurstError::Domain(format!("need at least two kernels, got {k}")));
    }
    if counts.nus.len() != k {
        return Err(HurstError::Domain(format!(
            "expected {k} index counts, got {}",
            counts.nus.len()
        )));
    }
    if counts.nu == 0 || counts.nus.contains(&0) {
        return Err(HurstError::Domain("all index counts must be at least 1".into()));
    }
    let eval = KernelEvaluator::new(h)?;
    let nus = &counts.nus;

    // steps[α] maps a vector over j_{α+1} to one over j_{α+2} (0-based α)
    let steps: Vec<ToeplitzStep> = (1..k - 1)
        .map(|a| ToeplitzStep::new(&eval, kernels[a], nus[a], nus[a + 1]))
        .collect();

    let per_start: Vec<f64> = (1..=nus[0])
        .into_par_iter()
        .map(|j1| {
            let mut v: Vec<f64> = (1..=nus[1])
                .map(|j2| eval.eval(kernels[0], j1 as i64 - j2 as i64))
                .collect();
            for step in &steps {
                v = step.apply(&v);
            }
            v.iter()
                .enumerate()
                .map(|(i, &x)| x * eval.eval(kernels[k - 1], (i + 1) as i64 - j1 as i64))
                .collect::<NeumaierSum>()
                .value()
        })
        .collect();

    Ok(per_start.into_iter().collect::<NeumaierSum>().value() / counts.nu as f64)
}
