//! Limit constants of the estimator's stochastic expansion: the variances
//! `Σ`, the Γ-factor limit `G∞`, the cubic and quartic contraction limits `κ`
//! and the asymptotic covariance matrices `𝔘` and `𝔗`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{check_hurst, HurstError, Result};
use crate::kernels::{ChainEvaluator, ChainSpec, Kernel, KernelEvaluator, Truncation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigmas {
    pub sigma11: f64,
    pub sigma12: f64,
    pub sigma22: f64,
}

impl Sigmas {
    /// `Σ₂₂ − 2Σ₁₂ + Σ₁₁`.
    pub fn g_inf(&self) -> f64 {
        self.sigma22 - 2.0 * self.sigma12 + self.sigma11
    }
}

/// Cubic contraction limits `κ(α₁; α₂, α₂)`.
///
/// The fine-grid contraction `κ(2;2,2)` is `κ(1;1,1)/4`: the fine grid carries
/// the same correlation sequence over twice as many indices, so its
/// normalized third cumulant is `2·(1/2)³ = 1/4` of the coarse one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa3 {
    #[serde(rename = "1;1,1")]
    pub k1_11: f64,
    #[serde(rename = "2;1,1")]
    pub k2_11: f64,
    #[serde(rename = "1;2,2")]
    pub k1_22: f64,
    #[serde(rename = "2;2,2")]
    pub k2_22: f64,
}

/// Quartic (double contraction) limits. By the same counting as for the
/// cubic case, `κ(2,2;2,2) = κ(1,1;1,1)/8`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa4 {
    #[serde(rename = "1,1;1,1")]
    pub k11_11: f64,
    #[serde(rename = "2,2;2,2")]
    pub k22_22: f64,
    #[serde(rename = "1,1;2,2")]
    pub k11_22: f64,
    #[serde(rename = "1,1;1,2")]
    pub k11_12: f64,
    #[serde(rename = "1,2;2,2")]
    pub k12_22: f64,
    /// `κ(1,2;1,2) = κ(1,2;1,2)₁ + κ(1,2;1,2)₂`.
    #[serde(rename = "1,2;1,2")]
    pub k12_12: f64,
}

/// Every constant of the expansion at one Hurst index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCoefficients {
    #[serde(rename = "H")]
    pub h: f64,
    pub sigma11: f64,
    pub sigma12: f64,
    pub sigma22: f64,
    pub g_inf: f64,
    pub kappa3: Kappa3,
    pub kappa4: Kappa4,
    pub u_mat: [[f64; 3]; 3],
    pub t_mat: [[f64; 2]; 2],
    pub theta: f64,
    pub tau: f64,
    /// Largest relative change of any constant over the last radius doubling.
    pub tol: f64,
    pub radius: usize,
}

fn normaliser(h: f64) -> f64 {
    4.0 - 2f64.powf(2.0 * h)
}

fn sigmas_at(h: f64, chains: &ChainEvaluator) -> Sigmas {
    let d = normaliser(h);
    let hat_sq = chains.evaluate(&ChainSpec::sum_of_squares(Kernel::RhoHat));
    let tilde_sq = chains.evaluate(&ChainSpec::sum_of_squares(Kernel::RhoTilde));
    // rho_hat(0) = d, so the one-sided sum drops the centre term
    let one_sided = 0.5 * (hat_sq - d * d);
    let sigma11 = 2.0 * (1.0 + 2.0 / (d * d) * one_sided);
    Sigmas {
        sigma11,
        sigma12: 2f64.powf(2.0 * h) / (d * d) * tilde_sq,
        sigma22: 0.5 * sigma11,
    }
}

fn kappa3_at(h: f64, chains: &ChainEvaluator) -> Kappa3 {
    let d3 = normaliser(h).powi(3);
    let k1_11 = chains.evaluate(&ChainSpec::kappa_1_11()) / d3;
    Kappa3 {
        k1_11,
        k2_11: 2f64.powf(2.0 * h - 1.0) / d3 * chains.evaluate(&ChainSpec::kappa_2_11()),
        k1_22: 2f64.powf(2.0 * h - 2.0) / d3 * chains.evaluate(&ChainSpec::kappa_1_22()),
        k2_22: k1_11 / 4.0,
    }
}

fn kappa4_at(h: f64, chains: &ChainEvaluator) -> Kappa4 {
    let d4 = normaliser(h).powi(4);
    let both = |f: fn(i64) -> ChainSpec| chains.evaluate(&f(0)) + chains.evaluate(&f(1));
    let k11_11 = chains.evaluate(&ChainSpec::kappa_11_11()) / d4;
    let first = 2f64.powf(2.0 * h - 3.0) / d4 * chains.evaluate(&ChainSpec::kappa_12_12_first());
    let second = 2f64.powf(4.0 * h - 3.0) / d4 * both(ChainSpec::kappa_12_12_second);
    Kappa4 {
        k11_11,
        k22_22: k11_11 / 8.0,
        k11_22: 2f64.powf(2.0 * h - 2.0) / d4 * both(ChainSpec::kappa_11_22),
        k11_12: 2f64.powf(2.0 * h - 1.0) / d4 * chains.evaluate(&ChainSpec::kappa_11_12()),
        k12_22: 2f64.powf(2.0 * h - 3.0) / d4 * chains.evaluate(&ChainSpec::kappa_12_22()),
        k12_12: first + second,
    }
}

fn truncation_for(tol: f64) -> Truncation {
    Truncation::with_tol(tol)
}

pub fn compute_sigmas(h: f64, tol: f64) -> Result<Sigmas> {
    compute_sigmas_with(h, &truncation_for(tol))
}

pub fn compute_sigmas_with(h: f64, truncation: &Truncation) -> Result<Sigmas> {
    check_hurst(h)?;
    let (v, _, _) = truncation.converge(|r| {
        let s = sigmas_at(h, &ChainEvaluator::new(h, r)?);
        Ok(vec![s.sigma11, s.sigma12, s.sigma22])
    })?;
    Ok(Sigmas {
        sigma11: v[0],
        sigma12: v[1],
        sigma22: v[2],
    })
}

fn checked_g_inf(s: &Sigmas) -> Result<f64> {
    let g = s.g_inf();
    if g > 0.0 && g.is_finite() {
        Ok(g)
    } else {
        Err(HurstError::Internal(format!(
            "non-positive G_inf = {g} from sigma11 = {}, sigma12 = {}",
            s.sigma11, s.sigma12
        )))
    }
}

pub fn compute_g_inf(h: f64, tol: f64) -> Result<f64> {
    checked_g_inf(&compute_sigmas(h, tol)?)
}

pub fn compute_kappa3(h: f64, tol: f64) -> Result<Kappa3> {
    check_hurst(h)?;
    let (v, _, _) = truncation_for(tol).converge(|r| {
        let k = kappa3_at(h, &ChainEvaluator::new(h, r)?);
        Ok(vec![k.k1_11, k.k2_11, k.k1_22, k.k2_22])
    })?;
    Ok(Kappa3 {
        k1_11: v[0],
        k2_11: v[1],
        k1_22: v[2],
        k2_22: v[3],
    })
}

pub fn compute_kappa4(h: f64, tol: f64) -> Result<Kappa4> {
    check_hurst(h)?;
    let (v, _, _) = truncation_for(tol).converge(|r| {
        let k = kappa4_at(h, &ChainEvaluator::new(h, r)?);
        Ok(vec![k.k11_11, k.k22_22, k.k11_22, k.k11_12, k.k12_22, k.k12_12])
    })?;
    Ok(Kappa4 {
        k11_11: v[0],
        k22_22: v[1],
        k11_22: v[2],
        k11_12: v[3],
        k12_22: v[4],
        k12_12: v[5],
    })
}

impl ExpansionCoefficients {
    /// Assembles `𝔘`, `𝔗`, `θ` and `τ` from the constants at one radius.
    ///
    /// The covariance of `M^{[1]}` and `M^{[2]}` with the Γ-factor involves the
    /// mixed contractions `κ(1;1,2)` and `κ(2;1,2)`; these coincide with
    /// `κ(2;1,1)` and `κ(1;2,2)` respectively and are taken from there.
    pub fn assemble(h: f64, s: Sigmas, k3: Kappa3, k4: Kappa4, tol: f64, radius: usize) -> Result<Self> {
        let g_inf = checked_g_inf(&s)?;
        let k1_12 = k3.k2_11;
        let k2_12 = k3.k1_22;
        let u13 = 4.0 * k3.k1_22 - 8.0 * k1_12 + 4.0 * k3.k1_11;
        let u23 = 4.0 * k3.k2_22 - 8.0 * k2_12 + 4.0 * k3.k2_11;
        let u33 = 8.0 * k4.k22_22 + 32.0 * k4.k12_12 + 8.0 * k4.k11_11 - 32.0 * k4.k12_22
            + 16.0 * k4.k11_22
            - 32.0 * k4.k11_12;
        let u_mat = [
            [s.sigma11, s.sigma12, u13],
            [s.sigma12, s.sigma22, u23],
            [u13, u23, u33],
        ];
        let t11 = s.sigma11 - 2.0 * s.sigma12 + s.sigma22;
        let t12 = u13 - u23;
        let t_mat = [[t11, t12], [t12, u33]];
        Ok(Self {
            h,
            sigma11: s.sigma11,
            sigma12: s.sigma12,
            sigma22: s.sigma22,
            g_inf,
            kappa3: k3,
            kappa4: k4,
            u_mat,
            t_mat,
            theta: t12 / t11,
            tau: (s.sigma22 - s.sigma11) / g_inf,
            tol,
            radius,
        })
    }

    /// Every constant with the lattice sums truncated at a fixed radius.
    pub fn at_radius(h: f64, radius: usize) -> Result<Self> {
        check_hurst(h)?;
        let chains = ChainEvaluator::new(h, radius)?;
        Self::assemble(
            h,
            sigmas_at(h, &chains),
            kappa3_at(h, &chains),
            kappa4_at(h, &chains),
            f64::NAN,
            radius,
        )
    }

    pub fn compute(h: f64, tol: f64) -> Result<Self> {
        Self::compute_with(h, &truncation_for(tol))
    }

    pub fn compute_with(h: f64, truncation: &Truncation) -> Result<Self> {
        check_hurst(h)?;
        let (_, change, radius) = truncation.converge(|r| {
            let c = Self::at_radius(h, r)?;
            Ok(c.components())
        })?;
        let mut c = Self::at_radius(h, radius)?;
        c.tol = change;
        Ok(c)
    }

    /// Flat list of every reported constant, used for convergence checks.
    pub fn components(&self) -> Vec<f64> {
        let k3 = &self.kappa3;
        let k4 = &self.kappa4;
        let mut v = vec![
            self.sigma11,
            self.sigma12,
            self.sigma22,
            self.g_inf,
            k3.k1_11,
            k3.k2_11,
            k3.k1_22,
            k3.k2_22,
            k4.k11_11,
            k4.k22_22,
            k4.k11_22,
            k4.k11_12,
            k4.k12_22,
            k4.k12_12,
            self.theta,
            self.tau,
        ];
        v.extend(self.u_mat.iter().flatten());
        v
    }

    pub fn sigmas(&self) -> Sigmas {
        Sigmas {
            sigma11: self.sigma11,
            sigma12: self.sigma12,
            sigma22: self.sigma22,
        }
    }
}

/// `ρ̂(0) = 4 − 2^{2H}`, the common normaliser of every κ.
pub fn rho_hat_zero(h: f64) -> Result<f64> {
    Ok(KernelEvaluator::new(h)?.rho_hat(0))
}

pub fn assemble_covariances(h: f64, tol: f64) -> Result<ExpansionCoefficients> {
    ExpansionCoefficients::compute(h, tol)
}

type CacheKey = (u64, u64, usize, usize);

fn cache_key(h: f64, t: &Truncation) -> CacheKey {
    (h.to_bits(), t.tol.to_bits(), t.start_radius, t.max_radius)
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    version: String,
    #[serde(rename = "requested_tol")]
    requested_tol: f64,
    #[serde(flatten)]
    coefficients: ExpansionCoefficients,
}

/// Process-wide memo of computed coefficients, optionally mirrored to JSON
/// files in a directory.
#[derive(Debug, Default)]
pub struct CoefficientCache {
    memo: Mutex<HashMap<CacheKey, Arc<ExpansionCoefficients>>>,
    dir: Option<PathBuf>,
}

pub const CACHE_DIR_ENV: &str = "HURST_CACHE_DIR";

impl CoefficientCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        Self {
            memo: Mutex::default(),
            dir: Some(dir.into()),
        }
    }

    /// Uses `HURST_CACHE_DIR` when set.
    pub fn from_env() -> Self {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Self::with_dir(dir),
            _ => Self::in_memory(),
        }
    }

    pub fn get(&self, h: f64, truncation: &Truncation) -> Result<Arc<ExpansionCoefficients>> {
        let key = cache_key(h, truncation);
        if let Some(hit) = self.memo.lock().expect("cache poisoned").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let coeffs = match self.load(&key) {
            Some(c) => c,
            None => {
                let c = ExpansionCoefficients::compute_with(h, truncation)?;
                self.store(&key, truncation, &c)?;
                c
            }
        };
        let coeffs = Arc::new(coeffs);
        self.memo
            .lock()
            .expect("cache poisoned")
            .entry(key)
            .or_insert_with(|| Arc::clone(&coeffs));
        Ok(coeffs)
    }

    fn path(dir: &Path, key: &CacheKey) -> PathBuf {
        dir.join(format!(
            "coeffs-{:016x}-{:016x}-{}-{}.json",
            key.0, key.1, key.2, key.3
        ))
    }

    fn load(&self, key: &CacheKey) -> Option<ExpansionCoefficients> {
        let dir = self.dir.as_ref()?;
        let text = std::fs::read_to_string(Self::path(dir, key)).ok()?;
        let file: CacheFile = serde_json::from_str(&text).ok()?;
        (file.version == env!("CARGO_PKG_VERSION")).then_some(file.coefficients)
    }

    fn store(&self, key: &CacheKey, t: &Truncation, c: &ExpansionCoefficients) -> Result<()> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        std::fs::create_dir_all(dir)?;
        let file = CacheFile {
            version: env!("CARGO_PKG_VERSION").to_string(),
            requested_tol: t.tol,
            coefficients: c.clone(),
        };
        std::fs::write(Self::path(dir, key), serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }
}

/// Shared in-process cache (reads `HURST_CACHE_DIR` on first use).
pub fn global_cache() -> &'static CoefficientCache {
    static CACHE: OnceLock<CoefficientCache> = OnceLock::new();
    CACHE.get_or_init(CoefficientCache::from_env)
}
