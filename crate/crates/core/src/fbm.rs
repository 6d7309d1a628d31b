//! Exact fractional Brownian motion on the fine grid `t_j = jT/(2n)`.
//!
//! Paths are built from fractional Gaussian noise by circulant embedding (one
//! FFT yields two independent paths) or, for small grids, by a Cholesky
//! factor of the noise covariance. The coarse grid is the even-index
//! subsample of the same path.

use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{HurstError, Result};
use crate::kernels::HurstModel;

/// Largest fine grid (`2n`) accepted by the Cholesky generator.
pub const CHOLESKY_MAX: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Circulant,
    Cholesky,
    /// Circulant, falling back to Cholesky if the embedding is not
    /// nonnegative definite.
    #[default]
    Auto,
}

impl FromStr for Method {
    type Err = HurstError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "circulant" => Ok(Method::Circulant),
            "cholesky" => Ok(Method::Cholesky),
            "auto" => Ok(Method::Auto),
            other => Err(HurstError::Domain(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grid {
    Coarse,
    Fine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbmPath {
    pub model: HurstModel,
    /// `B` at `jT/(2n)`, `j = 0..=2n`, with `values[0] = 0`.
    pub values: Vec<f64>,
    pub seed: u64,
    pub replication: u64,
}

impl FbmPath {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let dt = self.model.fine_step();
        (0..self.values.len()).map(move |j| j as f64 * dt)
    }

    pub fn coarse(&self) -> Vec<f64> {
        self.values.iter().step_by(2).copied().collect()
    }

    pub fn second_differences(&self, grid: Grid) -> Vec<f64> {
        second_differences(&self.values, grid)
    }
}

/// `d_j = B_{j+1} − 2B_j + B_{j−1}` on the chosen grid. `values` holds the
/// fine-grid samples; the coarse grid uses every other point.
pub fn second_differences(values: &[f64], grid: Grid) -> Vec<f64> {
    let stride = match grid {
        Grid::Coarse => 2,
        Grid::Fine => 1,
    };
    if values.len() < 2 * stride + 1 {
        return Vec::new();
    }
    let last = (values.len() - 1) / stride;
    (1..last)
        .map(|j| {
            let i = j * stride;
            values[i + stride] - 2.0 * values[i] + values[i - stride]
        })
        .collect()
}

/// Autocovariance of unit-step fractional Gaussian noise.
pub fn fgn_autocovariance(h: f64, k: usize) -> f64 {
    let k = k as f64;
    let p = 2.0 * h;
    0.5 * ((k + 1.0).powf(p) - 2.0 * k.powf(p) + (k - 1.0).abs().powf(p))
}

enum Engine {
    Circulant {
        /// `sqrt(λ_k / N)` for the circulant of size `N = 2m`.
        scale: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    Cholesky {
        lower: DMatrix<f64>,
    },
}

/// Reusable generator for one model; cheap to share across threads.
pub struct FbmSampler {
    model: HurstModel,
    method: Method,
    engine: Engine,
    /// `(T/(2n))^H`, the noise standard-deviation scale.
    step_scale: f64,
}

impl std::fmt::Debug for FbmSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FbmSampler")
            .field("model", &self.model)
            .field("method", &self.method)
            .finish()
    }
}

fn circulant_engine(h: f64, m: usize) -> Result<Engine> {
    let size = 2 * m;
    let mut row: Vec<Complex<f64>> = (0..size)
        .map(|k| Complex::new(fgn_autocovariance(h, k.min(size - k)), 0.0))
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(size);
    fft.process(&mut row);
    let largest = row.iter().map(|c| c.re).fold(0.0, f64::max);
    let smallest = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
    if smallest < -1e-10 * largest.max(1.0) {
        return Err(HurstError::EmbeddingFailure {
            min_eigenvalue: smallest,
        });
    }
    let scale = row
        .iter()
        .map(|c| (c.re.max(0.0) / size as f64).sqrt())
        .collect();
    Ok(Engine::Circulant { scale, fft })
}

fn cholesky_engine(h: f64, m: usize) -> Result<Engine> {
    if m > CHOLESKY_MAX {
        return Err(HurstError::Size(format!(
            "Cholesky generation limited to 2n <= {CHOLESKY_MAX}, got 2n = {m}"
        )));
    }
    let gamma: Vec<f64> = (0..m).map(|k| fgn_autocovariance(h, k)).collect();
    let cov = DMatrix::from_fn(m, m, |i, j| gamma[i.abs_diff(j)]);
    let chol = cov.cholesky().ok_or_else(|| {
        HurstError::Internal("fGn covariance is not positive definite".into())
    })?;
    Ok(Engine::Cholesky { lower: chol.unpack() })
}

impl FbmSampler {
    pub fn new(model: HurstModel, method: Method) -> Result<Self> {
        let m = 2 * model.n;
        let (engine, method) = match method {
            Method::Circulant => (circulant_engine(model.h, m)?, Method::Circulant),
            Method::Cholesky => (cholesky_engine(model.h, m)?, Method::Cholesky),
            Method::Auto => match circulant_engine(model.h, m) {
                Ok(e) => (e, Method::Circulant),
                Err(HurstError::EmbeddingFailure { min_eigenvalue }) => {
                    log::warn!("circulant embedding failed ({min_eigenvalue:e}); using Cholesky");
                    (cholesky_engine(model.h, m)?, Method::Cholesky)
                }
                Err(e) => return Err(e),
            },
        };
        Ok(Self {
            model,
            method,
            engine,
            step_scale: model.fine_step().powf(model.h),
        })
    }

    pub fn model(&self) -> &HurstModel {
        &self.model
    }

    /// The method actually in use (never `Auto`).
    pub fn method(&self) -> Method {
        self.method
    }

    fn rng(seed: u64, pair: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(pair);
        rng
    }

    /// Two independent paths from the random stream `(seed, pair)`.
    /// They are replications `2·pair` and `2·pair + 1`.
    pub fn pair(&self, seed: u64, pair: u64) -> (FbmPath, FbmPath) {
        let mut rng = Self::rng(seed, pair);
        let m = 2 * self.model.n;
        let (first, second) = match &self.engine {
            Engine::Circulant { scale, fft } => {
                let mut buf: Vec<Complex<f64>> = scale
                    .iter()
                    .map(|&s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                (
                    buf[..m].iter().map(|c| c.re).collect::<Vec<_>>(),
                    buf[..m].iter().map(|c| c.im).collect::<Vec<_>>(),
                )
            }
            Engine::Cholesky { lower } => {
                let mut draw = || {
                    let z = nalgebra::DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
                    (lower * z).as_slice().to_vec()
                };
                let a = draw();
                let b = draw();
                (a, b)
            }
        };
        (
            self.integrate(first, seed, 2 * pair),
            self.integrate(second, seed, 2 * pair + 1),
        )
    }

    /// Replication `r` of the deterministic sequence for `seed`.
    pub fn replication(&self, seed: u64, r: u64) -> FbmPath {
        let (a, b) = self.pair(seed, r / 2);
        if r.is_multiple_of(2) {
            a
        } else {
            b
        }
    }

    fn integrate(&self, noise: Vec<f64>, seed: u64, replication: u64) -> FbmPath {
        let mut values = Vec::with_capacity(noise.len() + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for x in noise {
            acc += self.step_scale * x;
            values.push(acc);
        }
        FbmPath {
            model: self.model,
            values,
            seed,
            replication,
        }
    }
}

/// One path for `(model, seed)`: replication 0 of the sampler's sequence.
pub fn generate_path(model: HurstModel, seed: u64, method: Method) -> Result<FbmPath> {
    Ok(FbmSampler::new(model, method)?.replication(seed, 0))
}
