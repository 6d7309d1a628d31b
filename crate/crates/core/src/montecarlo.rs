//! Monte Carlo study of `z = √n(Ĥ − H)` against the normal limit and the
//! Edgeworth expansion.
//!
//! Replications are generated in pairs from independent random streams and
//! collected in index order, so reports are bit-identical for any number of
//! worker threads. Clamped estimates are reported as atoms at `Ĥ = 0` and
//! `Ĥ = 1`; the histogram covers the remaining replications.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HurstError, Result};
use crate::estimator::{apply_correction, estimate_h, CorrectionTable};
use crate::expansion::{build_expansion_with, EdgeworthModel, Moments, Variant};
use crate::fbm::{FbmSampler, Method};
use crate::kernels::{HurstModel, Truncation};
use crate::numeric::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Plain,
    BStar,
    BStarStar,
}

impl std::str::FromStr for Estimator {
    type Err = HurstError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Estimator::Plain),
            "b_star" | "star" => Ok(Estimator::BStar),
            "b_star_star" | "star_star" | "median" => Ok(Estimator::BStarStar),
            other => Err(HurstError::Domain(format!("unknown estimator variant '{other}'"))),
        }
    }
}

pub const DEFAULT_BINS: usize = 81;
pub const BOOTSTRAP_RESAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub bins: usize,
    /// Half-width of the binned range; `5√v` when absent.
    pub z_range: Option<f64>,
    pub variants: Vec<Estimator>,
    pub method: Method,
    pub tol: f64,
    pub bootstrap: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            h: 0.5,
            t: 1.0,
            n: 64,
            reps: 10_000,
            seed: 0,
            bins: DEFAULT_BINS,
            z_range: None,
            variants: vec![Estimator::Plain, Estimator::BStar, Estimator::BStarStar],
            method: Method::Auto,
            tol: 1e-10,
            bootstrap: BOOTSTRAP_RESAMPLES,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<HurstModel> {
        let model = HurstModel::new(self.h, self.t, self.n)?;
        if self.reps < 100 {
            return Err(HurstError::Domain(format!("reps must be at least 100, got {}", self.reps)));
        }
        if self.bins < 3 || self.bins.is_multiple_of(2) {
            return Err(HurstError::Domain(format!("bins must be odd and at least 3, got {}", self.bins)));
        }
        if let Some(z) = self.z_range {
            if !(z.is_finite() && z > 0.0) {
                return Err(HurstError::Domain(format!("z_range must be positive, got {z}")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(HurstError::Domain(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(model)
    }
}

/// Binned values of `z` for the unclamped replications, with atoms and
/// overflow counts so that every replication is accounted for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub reps: usize,
    pub z_range: f64,
    pub counts: Vec<u64>,
    pub overflow_low: u64,
    pub overflow_high: u64,
    pub atom0: u64,
    pub atom1: u64,
    /// Positions of the atoms on the `z` scale.
    pub z_atom0: f64,
    pub z_atom1: f64,
}

impl Histogram {
    pub fn new(bins: usize, z_range: f64, reps: usize, z_atom0: f64, z_atom1: f64) -> Self {
        Self {
            reps,
            z_range,
            counts: vec![0; bins],
            overflow_low: 0,
            overflow_high: 0,
            atom0: 0,
            atom1: 0,
            z_atom0,
            z_atom1,
        }
    }

    pub fn width(&self) -> f64 {
        2.0 * self.z_range / self.counts.len() as f64
    }

    pub fn edge(&self, k: usize) -> f64 {
        -self.z_range + k as f64 * self.width()
    }

    pub fn center(&self, k: usize) -> f64 {
        self.edge(k) + 0.5 * self.width()
    }

    pub fn add(&mut self, z: f64) {
        if z < -self.z_range {
            self.overflow_low += 1;
        } else if z >= self.z_range {
            self.overflow_high += 1;
        } else {
            let last = self.counts.len() - 1;
            let k = ((z + self.z_range) / self.width()).floor() as usize;
            self.counts[k.min(last)] += 1;
        }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.reps as f64).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow_low + self.overflow_high + self.atom0 + self.atom1
    }

    /// Empirical CDF of `z` (atoms included at their positions) at bin edge `k`.
    fn cdf_at_edge(&self, k: usize) -> f64 {
        let e = self.edge(k);
        let mut below = self.overflow_low + self.counts[..k].iter().sum::<u64>();
        if self.z_atom0 < e {
            below += self.atom0;
        }
        if self.z_atom1 < e {
            below += self.atom1;
        }
        below as f64 / self.reps as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distances {
    pub l1_normal: f64,
    pub l1_expansion: f64,
    pub ks_normal: f64,
    pub ks_expansion: f64,
}

/// L1 distance `Σ_bins |freq − ∫_bin density|` and the largest CDF gap over
/// the bin edges, for the normal limit and the expansion.
///
/// The data are clamped, so a model is compared through the law it implies
/// for the clamped statistic: densities are integrated over the reachable
/// interior `(z_atom0, z_atom1)` only, and model mass beyond the clamp points
/// sits in the atoms when the CDFs are compared.
pub fn compare_densities(hist: &Histogram, model: &EdgeworthModel, n: usize) -> Result<Distances> {
    let n = n as u64;
    let bins = hist.counts.len();
    let (z0, z1) = (hist.z_atom0, hist.z_atom1);
    let normal = |z: f64| crate::numeric::normal_cdf(z, model.v);
    let expansion = |z: f64| model.cdf_pn(n, z, Variant::Plain);
    let freq = hist.frequencies();
    let mut l1_normal = NeumaierSum::new();
    let mut l1_expansion = NeumaierSum::new();
    for k in 0..bins {
        let lo = hist.edge(k).max(z0);
        let hi = hist.edge(k + 1).min(z1);
        let (pn, pe) = if lo < hi {
            (normal(hi) - normal(lo), expansion(hi)? - expansion(lo)?)
        } else {
            (0.0, 0.0)
        };
        l1_normal.add((freq[k] - pn).abs());
        l1_expansion.add((freq[k] - pe).abs());
    }
    let (mut ks_normal, mut ks_expansion) = (0.0f64, 0.0f64);
    for k in 0..=bins {
        let e = hist.edge(k);
        let (fn_, fe) = if e <= z0 {
            (0.0, 0.0)
        } else if e > z1 {
            (1.0, 1.0)
        } else {
            (normal(e), expansion(e)?)
        };
        let emp = hist.cdf_at_edge(k);
        ks_normal = ks_normal.max((emp - fn_).abs());
        ks_expansion = ks_expansion.max((emp - fe).abs());
    }
    Ok(Distances {
        l1_normal: l1_normal.value(),
        l1_expansion: l1_expansion.value(),
        ks_normal,
        ks_expansion,
    })
}

/// Bootstrap standard errors of the distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceErrors {
    pub l1_normal: f64,
    pub l1_expansion: f64,
    /// Standard error of `l1_normal − l1_expansion`.
    pub l1_difference: f64,
    pub ks_normal: f64,
    pub ks_expansion: f64,
}

fn std_dev(values: &[f64]) -> f64 {
    let k = values.len() as f64;
    let mean = values.iter().copied().collect::<NeumaierSum>().value() / k;
    let ss = values.iter().map(|x| (x - mean).powi(2)).collect::<NeumaierSum>().value();
    (ss / (k - 1.0)).sqrt()
}

/// Multinomial resampling of the category counts (atoms, overflow, bins).
fn bootstrap(hist: &Histogram, model: &EdgeworthModel, n: usize, resamples: usize, seed: u64) -> Result<DistanceErrors> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let mut cats: Vec<u64> = vec![hist.atom0, hist.atom1, hist.overflow_low, hist.overflow_high];
    cats.extend(&hist.counts);
    let reps = hist.reps as u64;
    let mut samples = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut remaining = reps;
        let mut mass_left = reps;
        let mut drawn = Vec::with_capacity(cats.len());
        for &c in &cats {
            let k = if remaining == 0 || c == 0 {
                0
            } else if c >= mass_left {
                remaining
            } else {
                Binomial::new(remaining, c as f64 / mass_left as f64)
                    .map_err(|e| HurstError::Internal(e.to_string()))?
                    .sample(&mut rng)
            };
            drawn.push(k);
            remaining -= k;
            mass_left -= c;
        }
        let mut h = hist.clone();
        h.atom0 = drawn[0];
        h.atom1 = drawn[1];
        h.overflow_low = drawn[2];
        h.overflow_high = drawn[3];
        h.counts.copy_from_slice(&drawn[4..]);
        samples.push(compare_densities(&h, model, n)?);
    }
    let col = |f: fn(&Distances) -> f64| std_dev(&samples.iter().map(f).collect::<Vec<_>>());
    Ok(DistanceErrors {
        l1_normal: col(|d| d.l1_normal),
        l1_expansion: col(|d| d.l1_expansion),
        l1_difference: col(|d| d.l1_normal - d.l1_expansion),
        ks_normal: col(|d| d.ks_normal),
        ks_expansion: col(|d| d.ks_expansion),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub mean: f64,
    pub mean_se: f64,
    pub second_moment: f64,
    pub variance: f64,
    pub variance_se: f64,
    /// Raw third moment.
    pub third_moment: f64,
    pub third_moment_se: f64,
}

impl SampleMoments {
    pub fn from_values(z: &[f64]) -> Self {
        let k = z.len() as f64;
        let avg = |f: &dyn Fn(f64) -> f64| z.iter().map(|&x| f(x)).collect::<NeumaierSum>().value() / k;
        let mean = avg(&|x| x);
        let second = avg(&|x| x * x);
        let third = avg(&|x| x * x * x);
        let sixth = avg(&|x| x.powi(6));
        let c2 = avg(&|x| (x - mean).powi(2));
        let c4 = avg(&|x| (x - mean).powi(4));
        let variance = c2 * k / (k - 1.0);
        Self {
            mean,
            mean_se: (variance / k).sqrt(),
            second_moment: second,
            variance,
            variance_se: ((c4 - c2 * c2).max(0.0) / k).sqrt(),
            third_moment: third,
            third_moment_se: ((sixth - third * third).max(0.0) / k).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: Estimator,
    /// Mean of the estimates of `H`.
    pub mean_h: f64,
    pub sample: SampleMoments,
    pub predicted: Moments,
    /// Fraction of replications with estimate `≤ H`.
    pub p_le_h: f64,
    pub p_le_h_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub z: f64,
    pub empirical: f64,
    pub phi: f64,
    pub p_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub v: f64,
    pub a3: f64,
    pub a1: f64,
    pub b_star: f64,
    pub b_star_star: f64,
    pub theta: f64,
    pub tau: f64,
    pub g_inf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub config: McConfig,
    /// Generator actually used.
    pub method: Method,
    pub model: ModelSummary,
    pub atom0: f64,
    pub atom1: f64,
    pub overflow_low: f64,
    pub overflow_high: f64,
    pub bin_edges: Vec<f64>,
    pub hist: Vec<f64>,
    pub density: Vec<DensityRow>,
    pub distances: Distances,
    pub distance_se: DistanceErrors,
    pub variants: Vec<VariantReport>,
    /// Moments of `√n(h_raw − H)`, before clamping to `[0, 1]`.
    pub unclamped: SampleMoments,
    #[serde(skip)]
    pub histogram: Option<Histogram>,
}

impl McReport {
    pub fn variant(&self, e: Estimator) -> Option<&VariantReport> {
        self.variants.iter().find(|v| v.variant == e)
    }

    /// Density table as CSV with header `z,empirical,phi,p_n`.
    pub fn density_csv(&self) -> String {
        let mut out = String::from("z,empirical,phi,p_n\n");
        for r in &self.density {
            let _ = writeln!(out, "{},{},{},{}", r.z, r.empirical, r.phi, r.p_n);
        }
        out
    }

    /// Histogram bars with the normal and expansion densities overlaid.
    pub fn svg(&self) -> String {
        render_svg(self)
    }
}

struct Replication {
    h_raw: f64,
    h_hat: f64,
}

fn simulate(model: HurstModel, config: &McConfig) -> Result<(Vec<Replication>, Method)> {
    let sampler = FbmSampler::new(model, config.method)?;
    let pairs = config.reps.div_ceil(2) as u64;
    let chunks: Vec<Vec<Replication>> = (0..pairs)
        .into_par_iter()
        .map(|p| {
            let (a, b) = sampler.pair(config.seed, p);
            [a, b]
                .into_iter()
                .filter(|path| (path.replication as usize) < config.reps)
                .map(|path| {
                    estimate_h(&path.values)
                        .map(|r| Replication {
                            h_raw: r.h_raw,
                            h_hat: r.h_hat,
                        })
                        .map_err(|e| HurstError::Replication {
                            index: path.replication as usize,
                            source: Box::new(e),
                        })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok((chunks.into_iter().flatten().collect(), sampler.method()))
}

pub fn run_mc(config: &McConfig) -> Result<McReport> {
    let model = config.validate()?;
    let truncation = Truncation::with_tol(config.tol);
    let edgeworth = build_expansion_with(config.h, &truncation)?;
    let needs_table = config.variants.iter().any(|&v| v != Estimator::Plain);
    let table = if needs_table {
        Some(CorrectionTable::build(&truncation)?)
    } else {
        None
    };

    let (reps, method) = simulate(model, config)?;
    let n = config.n;
    let root_n = (n as f64).sqrt();
    let z_range = config.z_range.unwrap_or(5.0 * edgeworth.v.sqrt());
    let mut resolved = config.clone();
    resolved.z_range = Some(z_range);

    let mut hist = Histogram::new(config.bins, z_range, config.reps, -root_n * config.h, root_n * (1.0 - config.h));
    for r in &reps {
        if r.h_raw <= 0.0 {
            hist.atom0 += 1;
        } else if r.h_raw >= 1.0 {
            hist.atom1 += 1;
        } else {
            hist.add(root_n * (r.h_hat - config.h));
        }
    }
    let distances = compare_densities(&hist, &edgeworth, n)?;
    let distance_se = bootstrap(&hist, &edgeworth, n, config.bootstrap.max(2), config.seed)?;

    let mut variants = Vec::new();
    for &variant in &config.variants {
        let (estimates, shift) = match variant {
            Estimator::Plain => (reps.iter().map(|r| r.h_hat).collect::<Vec<_>>(), Variant::Plain),
            Estimator::BStar | Estimator::BStarStar => {
                let table = table.as_ref().expect("table built for corrected variants");
                let (corr, b) = if variant == Estimator::BStar {
                    (table.star(), edgeworth.b_star)
                } else {
                    (table.star_star(), edgeworth.b_star_star)
                };
                let est = reps
                    .iter()
                    .map(|r| {
                        let e = crate::estimator::EstimateResult {
                            n,
                            v_n: f64::NAN,
                            v_2n: f64::NAN,
                            h_raw: r.h_raw,
                            h_hat: r.h_hat,
                            h_b: None,
                            h_med: None,
                            clamped: !(0.0..=1.0).contains(&r.h_raw),
                        };
                        apply_correction(&e, &corr)
                    })
                    .collect::<Result<Vec<_>>>()?;
                (est, Variant::Modified(b))
            }
        };
        let z: Vec<f64> = estimates.iter().map(|&h| root_n * (h - config.h)).collect();
        let k = estimates.len() as f64;
        let below = estimates.iter().filter(|&&h| h <= config.h).count() as f64 / k;
        variants.push(VariantReport {
            variant,
            mean_h: estimates.iter().copied().collect::<NeumaierSum>().value() / k,
            sample: SampleMoments::from_values(&z),
            predicted: edgeworth.predicted_moments_variant(n as u64, shift)?,
            p_le_h: below,
            p_le_h_se: (below * (1.0 - below) / k).sqrt(),
        });
    }

    let raw_z: Vec<f64> = reps.iter().map(|r| root_n * (r.h_raw - config.h)).collect();
    let unclamped = SampleMoments::from_values(&raw_z);

    let freq = hist.frequencies();
    let width = hist.width();
    let density = (0..config.bins)
        .map(|k| {
            let z = hist.center(k);
            Ok(DensityRow {
                z,
                empirical: freq[k] / width,
                phi: edgeworth.phi(z),
                p_n: edgeworth.density_pn(n as u64, z)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let total = config.reps as f64;
    Ok(McReport {
        config: resolved,
        method,
        model: ModelSummary {
            v: edgeworth.v,
            a3: edgeworth.a3,
            a1: edgeworth.a1,
            b_star: edgeworth.b_star,
            b_star_star: edgeworth.b_star_star,
            theta: edgeworth.theta,
            tau: edgeworth.tau,
            g_inf: edgeworth.g_inf,
        },
        atom0: hist.atom0 as f64 / total,
        atom1: hist.atom1 as f64 / total,
        overflow_low: hist.overflow_low as f64 / total,
        overflow_high: hist.overflow_high as f64 / total,
        bin_edges: (0..=config.bins).map(|k| hist.edge(k)).collect(),
        hist: freq,
        density,
        distances,
        distance_se,
        variants,
        unclamped,
        histogram: Some(hist),
    })
}

fn render_svg(report: &McReport) -> String {
    let (w, h) = (800.0, 480.0);
    let (left, right, top, bottom) = (60.0, 20.0, 30.0, 50.0);
    let z_range = report.config.z_range.unwrap_or(1.0);
    let y_max = report
        .density
        .iter()
        .flat_map(|r| [r.empirical, r.phi, r.p_n])
        .fold(0.0, f64::max)
        * 1.1;
    let y_max = if y_max > 0.0 { y_max } else { 1.0 };
    let sx = |z: f64| left + (z + z_range) / (2.0 * z_range) * (w - left - right);
    let sy = |y: f64| h - bottom - y.max(0.0) / y_max * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let bin_w = sx(-z_range + 2.0 * z_range / report.density.len() as f64) - sx(-z_range);
    for r in &report.density {
        let x = sx(r.z) - bin_w / 2.0;
        let y = sy(r.empirical);
        let _ = writeln!(
            s,
            r##"<rect x="{x:.2}" y="{y:.2}" width="{bin_w:.2}" height="{:.2}" fill="#c8d3e6" stroke="#8fa3c7" stroke-width="0.5"/>"##,
            (h - bottom - y).max(0.0)
        );
    }
    let line = |f: fn(&DensityRow) -> f64| {
        report
            .density
            .iter()
            .map(|r| format!("{:.2},{:.2}", sx(r.z), sy(f(r))))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-width="2"/>"##, line(|r| r.phi));
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#2ca02c" stroke-width="2"/>"##, line(|r| r.p_n));
    let (x0, x1, yb) = (sx(-z_range), sx(z_range), h - bottom);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{yb}" x2="{x1}" y2="{yb}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{top}" x2="{x0}" y2="{yb}" stroke="black"/>"#);
    let ticks = z_range.floor() as i64;
    for t in -ticks..=ticks {
        let x = sx(t as f64);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{yb}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, yb + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" font-size="12" text-anchor="middle">{t}</text>"#, yb + 20.0);
    }
    for i in 0..=4 {
        let y = y_max * i as f64 / 4.0;
        let py = sy(y);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{y:.2}</text>"#, x0 - 6.0, py + 4.0);
    }
    let c = &report.config;
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="18" font-size="14">H = {}, n = {}, reps = {}</text>"#,
        c.h, c.n, c.reps
    );
    let lx = w - right - 190.0;
    let _ = writeln!(s, r##"<rect x="{lx}" y="{top}" width="14" height="10" fill="#c8d3e6"/><text x="{}" y="{}" font-size="12">empirical</text>"##, lx + 20.0, top + 10.0);
    let _ = writeln!(s, r##"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="#d62728" stroke-width="2"/><text x="{}" y="{}" font-size="12">normal</text>"##, top + 25.0, lx + 14.0, top + 25.0, lx + 20.0, top + 29.0);
    let _ = writeln!(s, r##"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="#2ca02c" stroke-width="2"/><text x="{}" y="{}" font-size="12">expansion</text>"##, top + 43.0, lx + 14.0, top + 43.0, lx + 20.0, top + 47.0);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">z = sqrt(n) (H_hat - H)</text>"#,
        (x0 + x1) / 2.0,
        h - 10.0
    );
    s.push_str("</svg>\n");
    s
}
