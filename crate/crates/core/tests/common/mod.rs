//! Independent oracles shared by the integration tests. Kernels come from
//! the fBm covariance `½(|t|^{2H} + |s|^{2H} − |t−s|^{2H})`, never from the
//! library.
#![allow(dead_code)]

use hurst_core::coefficients::{Kappa3, Kappa4, Sigmas};
use hurst_core::kernels::ChainSpec;
use hurst_core::Kernel;
use nalgebra::DMatrix;

const W2: [(i64, f64); 3] = [(-1, 1.0), (0, -2.0), (1, 1.0)];

/// Covariance of two second differences from `−½|x|^{2H}`, in fine units,
/// with stencil spacings `step_a` and `step_b`.
pub fn stencil_cov(h: f64, lag: f64, step_a: f64, step_b: f64) -> f64 {
    let mut s = 0.0;
    for (a, wa) in W2 {
        for (b, wb) in W2 {
            s += wa * wb * (lag + b as f64 * step_b - a as f64 * step_a).abs().powf(2.0 * h);
        }
    }
    -0.5 * s
}

pub fn rho_hat(h: f64, j: i64) -> f64 {
    stencil_cov(h, j as f64, 1.0, 1.0)
}

/// Coarse point `2j` against fine point `k`, lag `k − 2j`, in coarse-step units.
pub fn rho_tilde(h: f64, l: i64) -> f64 {
    2f64.powf(-2.0 * h) * stencil_cov(h, l as f64, 2.0, 1.0)
}

pub fn kernel(h: f64, k: Kernel, j: i64) -> f64 {
    match k {
        Kernel::RhoHat => rho_hat(h, j),
        Kernel::RhoTilde => rho_tilde(h, j),
    }
}

pub fn brute_chain(h: f64, spec: &ChainSpec, r: i64) -> f64 {
    // every lag is within 4r + 1; tabulate once per call
    let reach = 4 * r + 1;
    let table = |k: Kernel| -> Vec<f64> { (-reach..=reach).map(|j| kernel(h, k, j)).collect() };
    let (hat, tilde) = (table(Kernel::RhoHat), table(Kernel::RhoTilde));
    let at = |k: Kernel, j: i64| match k {
        Kernel::RhoHat => hat[(j + reach) as usize],
        Kernel::RhoTilde => tilde[(j + reach) as usize],
    };
    let f = spec.factors();
    let free = f.len() - 1;
    let mut idx = vec![-r; free];
    let mut total = 0.0;
    loop {
        let mut prod = 1.0;
        for (a, fa) in f.iter().enumerate() {
            let prev = if a == 0 { 0 } else { idx[a - 1] };
            let next = if a == free { 0 } else { idx[a] };
            prod *= at(fa.kernel, fa.left * prev - fa.right * next + fa.offset);
        }
        total += prod;
        let mut p = 0;
        loop {
            if p == free {
                return total;
            }
            idx[p] += 1;
            if idx[p] <= r {
                break;
            }
            idx[p] = -r;
            p += 1;
        }
    }
}

fn cyclic_trace(cc: &DMatrix<f64>, cf: &DMatrix<f64>, ff: &DMatrix<f64>, w: &str) -> f64 {
    let levels: Vec<char> = w.chars().collect();
    let k = levels.len();
    let block = |a: char, b: char| -> DMatrix<f64> {
        match (a, b) {
            ('c', 'c') => cc.clone(),
            ('f', 'f') => ff.clone(),
            ('c', 'f') => cf.clone(),
            _ => cf.transpose(),
        }
    };
    let mut m = block(levels[0], levels[1 % k]);
    for i in 1..k {
        m *= block(levels[i], levels[(i + 1) % k]);
    }
    m.trace()
}

/// Every constant from the limits of cyclic trace words.
pub fn constants_from(word: impl Fn(&str) -> f64) -> (Sigmas, Kappa3, Kappa4) {
    let s = Sigmas {
        sigma11: 2.0 * word("cc"),
        sigma12: 2.0 * word("cf"),
        sigma22: 2.0 * word("ff"),
    };
    let k3 = Kappa3 {
        k1_11: word("ccc"),
        k2_11: word("ccf"),
        k1_22: word("cff"),
        k2_22: word("fff"),
    };
    let k4 = Kappa4 {
        k11_11: word("cccc"),
        k22_22: word("ffff"),
        k11_22: word("ccff"),
        k11_12: word("cccf"),
        k12_22: word("cfff"),
        k12_12: 0.5 * (word("ccff") + word("cfcf")),
    };
    (s, k3, k4)
}

/// Unnormalized covariance blocks of the second differences on a grid with
/// `n` coarse steps: coarse–coarse, coarse–fine and fine–fine, in fine units.
pub struct RawBlocks {
    pub cc: DMatrix<f64>,
    pub cf: DMatrix<f64>,
    pub ff: DMatrix<f64>,
}

impl RawBlocks {
    pub fn new(h: f64, n: usize) -> Self {
        // coarse point j sits at fine position 2j
        let coarse = n - 1;
        let fine = 2 * n - 1;
        Self {
            cc: DMatrix::from_fn(coarse, coarse, |a, b| stencil_cov(h, 2.0 * (b as f64 - a as f64), 2.0, 2.0)),
            ff: DMatrix::from_fn(fine, fine, |a, b| stencil_cov(h, b as f64 - a as f64, 1.0, 1.0)),
            cf: DMatrix::from_fn(coarse, fine, |a, b| {
                stencil_cov(h, (b + 1) as f64 - 2.0 * (a + 1) as f64, 2.0, 1.0)
            }),
        }
    }

    pub fn trace(&self, w: &str) -> f64 {
        cyclic_trace(&self.cc, &self.cf, &self.ff, w)
    }
}

/// Limit of a trace word for kernels of finite support (`H = ½`). Traces of
/// products of banded blocks are affine in `n` once `n` exceeds the band, so
/// the slope between two grids is the exact per-index contribution.
pub fn banded_limit(h: f64, n1: usize, n2: usize, w: &str) -> f64 {
    let (a, b) = (RawBlocks::new(h, n1), RawBlocks::new(h, n2));
    let slope = (b.trace(w) - a.trace(w)) / (n2 - n1) as f64;
    let (ec, ef) = (a.cc[(0, 0)], a.ff[(0, 0)]);
    let nc = w.chars().filter(|&c| c == 'c').count() as i32;
    let nf = w.len() as i32 - nc;
    slope / (ec.powi(nc) * (2.0 * ef).powi(nf))
}

/// Normalized blocks: each diagonal block divided by its trace.
pub struct Blocks {
    pub n: f64,
    pub cc: DMatrix<f64>,
    pub cf: DMatrix<f64>,
    pub ff: DMatrix<f64>,
}

impl Blocks {
    pub fn new(h: f64, n: usize) -> Self {
        let RawBlocks { cc, cf, ff } = RawBlocks::new(h, n);
        let (ec, ef) = (cc.trace(), ff.trace());
        let root = (ec * ef).sqrt();
        Self {
            n: n as f64,
            cc: cc / ec,
            cf: cf / root,
            ff: ff / ef,
        }
    }

    /// `n^{k−1} tr(X₁X₂⋯X_k)` for a cyclic word over {c, f}.
    pub fn word(&self, w: &str) -> f64 {
        self.n.powi(w.len() as i32 - 1) * cyclic_trace(&self.cc, &self.cf, &self.ff, w)
    }

    pub fn constants(&self) -> (Sigmas, Kappa3, Kappa4) {
        constants_from(|w| self.word(w))
    }
}
