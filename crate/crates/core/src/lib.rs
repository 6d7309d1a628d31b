//! Hurst coefficient estimation from second-order differences of fractional
//! Brownian motion, with the second-order (Edgeworth) expansion of the
//! estimator's distribution.
//!
//! * [`kernels`]: correlation kernels of second differences and lattice chain sums.
//! * [`coefficients`]: limit variances, cumulant constants and covariance matrices.
//! * [`expansion`]: the expansion density, its CDF and the bias corrections `b*`, `b**`.
//! * [`fbm`]: exact fBm synthesis on nested grids.
//! * [`estimator`]: the ratio estimator and its corrected variants.
//! * [`montecarlo`]: histogram-versus-density validation harness.

pub mod coefficients;
pub mod error;
pub mod estimator;
pub mod expansion;
pub mod fbm;
pub mod kernels;
pub mod montecarlo;
pub mod numeric;

pub use coefficients::ExpansionCoefficients;
pub use error::{HurstError, Result};

pub use estimator::{CorrectionTable, EstimateResult};
pub use expansion::EdgeworthModel;
pub use fbm::{FbmPath, Method};
pub use montecarlo::{McConfig, McReport};
pub use kernels::{HurstModel, Kernel, KernelTable, Truncation};

