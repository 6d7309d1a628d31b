//! Second-order (Edgeworth) expansion of the law of `√n(Ĥ − H)`.
//!
//! The density is `pₙ(z) = (1 + n^{−1/2} q(z)) φ(z; 0, v)` with the odd cubic
//! `q(z) = a3 z³ + a1 z`. The bias-modified estimator `Ĥ − b(Ĥ)/n` has the same
//! form with `q` replaced by `q(z) − (b/v) z`.

use serde::{Deserialize, Serialize};

use crate::coefficients::{global_cache, ExpansionCoefficients};
use crate::error::{check_hurst, HurstError, Result};
use crate::kernels::Truncation;
use crate::numeric::{normal_cdf, normal_pdf};

/// Which density a CDF or moment query refers to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Plain,
    /// Bias modification by the given value of `b(H)`.
    Modified(f64),
}

impl Variant {
    fn shift(self) -> f64 {
        match self {
            Variant::Plain => 0.0,
            Variant::Modified(b) => b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    /// Raw (uncentred) third moment.
    pub third_moment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeworthModel {
    #[serde(rename = "H")]
    pub h: f64,
    /// `2 ln 2`, the scale between `Ĥ` and the log-ratio statistic.
    pub c: f64,
    pub v: f64,
    pub g_inf: f64,
    pub theta: f64,
    pub tau: f64,
    /// Coefficients of `q^Z(z) = qz3 z³ + qz1 z` before rescaling.
    pub qz3: f64,
    pub qz1: f64,
    pub a3: f64,
    pub a1: f64,
    pub b_star: f64,
    pub b_star_star: f64,
}

pub fn build_expansion(h: f64, tol: f64) -> Result<EdgeworthModel> {
    build_expansion_with(h, &Truncation::with_tol(tol))
}

pub fn build_expansion_with(h: f64, truncation: &Truncation) -> Result<EdgeworthModel> {
    check_hurst(h)?;
    let coeffs = global_cache().get(h, truncation)?;
    Ok(EdgeworthModel::from_coefficients(&coeffs))
}

fn check_n(n: u64) -> Result<f64> {
    if n < 2 {
        return Err(HurstError::Domain(format!("n must be at least 2, got {n}")));
    }
    Ok(n as f64)
}

impl EdgeworthModel {
    pub fn from_coefficients(k: &ExpansionCoefficients) -> Self {
        let g = k.g_inf;
        let qz3 = k.theta / (3.0 * g * g) + k.tau / (2.0 * g);
        let qz1 = -((2.0 * k.theta + 1.0) / (2.0 * g) + k.tau);
        Self::from_parts(k.h, g, k.theta, k.tau, qz3, qz1)
    }

    fn from_parts(h: f64, g_inf: f64, theta: f64, tau: f64, qz3: f64, qz1: f64) -> Self {
        let c = 2.0 * std::f64::consts::LN_2;
        let v = g_inf / (c * c);
        let a3 = c.powi(3) * qz3;
        let a1 = c * qz1;
        Self {
            h,
            c,
            v,
            g_inf,
            theta,
            tau,
            qz3,
            qz1,
            a3,
            a1,
            b_star: 3.0 * a3 * v * v + a1 * v,
            b_star_star: 2.0 * a3 * v * v + a1 * v,
        }
    }

    /// A model with the given cubic and variance, bypassing the coefficient
    /// computation. Useful for testing and for hypothetical corrections.
    pub fn from_polynomial(h: f64, v: f64, a3: f64, a1: f64) -> Self {
        let c = 2.0 * std::f64::consts::LN_2;
        let mut m = Self::from_parts(h, v * c * c, f64::NAN, f64::NAN, a3 / c.powi(3), a1 / c);
        m.a3 = a3;
        m.a1 = a1;
        m.b_star = 3.0 * a3 * v * v + a1 * v;
        m.b_star_star = 2.0 * a3 * v * v + a1 * v;
        m.v = v;
        m
    }

    pub fn q(&self, z: f64) -> f64 {
        z * (self.a3 * z * z + self.a1)
    }

    /// `q^{(b)}(z) = q(z) − (b/v) z`.
    pub fn q_b(&self, b: f64, z: f64) -> f64 {
        z * (self.a3 * z * z + self.a1 - b / self.v)
    }

    pub fn q_z(&self, z: f64) -> f64 {
        z * (self.qz3 * z * z + self.qz1)
    }

    pub fn phi(&self, z: f64) -> f64 {
        normal_pdf(z, self.v)
    }

    /// Expansion density; can be negative far in the tails.
    pub fn density_pn(&self, n: u64, z: f64) -> Result<f64> {
        self.density(n, z, Variant::Plain)
    }

    pub fn density_pn_b(&self, n: u64, b_at_h: f64, z: f64) -> Result<f64> {
        self.density(n, z, Variant::Modified(b_at_h))
    }

    pub fn density(&self, n: u64, z: f64, variant: Variant) -> Result<f64> {
        let n = check_n(n)?;
        let q = self.q_b(variant.shift(), z);
        Ok((1.0 + q / n.sqrt()) * self.phi(z))
    }

    /// `b*(H) = ∫ z q(z) φ(z; 0, v) dz`.
    pub fn b_star(&self) -> f64 {
        self.b_star
    }

    /// `b**(H) = ∫₀^∞ q(z) e^{−z²/(2v)} dz`.
    pub fn b_star_star(&self) -> f64 {
        self.b_star_star
    }

    /// Exact antiderivative of the expansion density. Not necessarily
    /// monotone.
    pub fn cdf_pn(&self, n: u64, z: f64, variant: Variant) -> Result<f64> {
        let n = check_n(n)?;
        if z == f64::INFINITY {
            return Ok(1.0);
        }
        if z == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        let v = self.v;
        let a1 = self.a1 - variant.shift() / v;
        // ∫_{-∞}^z u φ = −vφ(z), ∫_{-∞}^z u³ φ = −v(z² + 2v)φ(z)
        let tail = -v * self.phi(z) * (self.a3 * (z * z + 2.0 * v) + a1);
        Ok(normal_cdf(z, v) + tail / n.sqrt())
    }

    pub fn predicted_moments(&self, n: u64) -> Result<Moments> {
        self.predicted_moments_variant(n, Variant::Plain)
    }

    pub fn predicted_moments_variant(&self, n: u64, variant: Variant) -> Result<Moments> {
        let root = check_n(n)?.sqrt();
        let (v, b) = (self.v, variant.shift());
        let mean = (3.0 * self.a3 * v * v + self.a1 * v - b) / root;
        let third = (15.0 * self.a3 * v.powi(3) + 3.0 * self.a1 * v * v - 3.0 * b * v) / root;
        Ok(Moments {
            mean,
            second_moment: v,
            variance: v - mean * mean,
            third_moment: third,
        })
    }
}
