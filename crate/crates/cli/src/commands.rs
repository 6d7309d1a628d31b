use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use hurst_core::coefficients::global_cache;
use hurst_core::estimator::{estimate_h_all, ingest_path, ingest_series};
use hurst_core::expansion::EdgeworthModel;
use hurst_core::fbm::generate_path;
use hurst_core::kernels::{a_n_diagnostic, chain_sum, decay_constant, AnCounts, ChainSpec, KernelEvaluator};
use hurst_core::montecarlo::{run_mc, Estimator, DEFAULT_BINS};
use hurst_core::{CorrectionTable, ExpansionCoefficients, HurstModel, Kernel, McConfig, Method, Truncation};

use crate::config::*;
use crate::output::Output;

fn truncation(s: &Settings) -> Truncation {
    let base = Truncation::default();
    let max_radius = s.max_radius.unwrap_or(DEFAULT_MAX_RADIUS);
    Truncation {
        tol: s.tol.unwrap_or(DEFAULT_TOL),
        start_radius: base.start_radius.min(max_radius).max(4),
        max_radius,
    }
}

fn method(s: &Settings) -> Result<Method> {
    Ok(s.method.as_deref().unwrap_or("auto").parse()?)
}

fn resolved(command: &str, s: &Settings, default_format: Format) -> Resolved {
    Resolved {
        command: command.into(),
        format: Some(s.format.unwrap_or(default_format)),
        ..Resolved::default()
    }
}

fn with_truncation(mut r: Resolved, t: &Truncation) -> Resolved {
    r.tol = Some(t.tol);
    r.max_radius = Some(t.max_radius);
    r
}

fn coefficients(h: f64, t: &Truncation) -> Result<ExpansionCoefficients> {
    Ok(global_cache().get(h, t)?.as_ref().clone())
}

#[derive(Serialize)]
struct CoeffsOut {
    coefficients: ExpansionCoefficients,
    expansion: EdgeworthModel,
}

pub fn coeffs(s: &Settings) -> Result<Output> {
    let mut missing = Missing::default();
    let h = missing.take(s.h, "--H");
    missing.check("coeffs")?;
    let t = truncation(s);
    let mut r = with_truncation(resolved("coeffs", s, Format::Json), &t);
    r.h = Some(h);
    let c = coefficients(h, &t)?;
    let out = CoeffsOut {
        expansion: EdgeworthModel::from_coefficients(&c),
        coefficients: c,
    };
    match r.format {
        Some(Format::Csv) => Output::key_value_csv(r, &out),
        _ => Output::json(r, &out),
    }
}

#[derive(Serialize)]
struct PathOut {
    #[serde(rename = "t")]
    times: Vec<f64>,
    #[serde(rename = "B")]
    values: Vec<f64>,
}

pub fn simulate(s: &Settings) -> Result<Output> {
    let mut missing = Missing::default();
    let h = missing.take(s.h, "--H");
    let n = missing.take(s.n, "--n");
    missing.check("simulate")?;
    let model = HurstModel::new(h, s.t.unwrap_or(DEFAULT_T), n)?;
    let seed = s.seed.unwrap_or(DEFAULT_SEED);
    let method = method(s)?;
    let path = generate_path(model, seed, method)?;
    let mut r = resolved("simulate", s, Format::Csv);
    r.h = Some(h);
    r.t = Some(model.t);
    r.n = Some(n);
    r.seed = Some(seed);
    r.method = Some(format!("{method:?}").to_lowercase());
    let out = PathOut {
        times: path.times().collect(),
        values: path.values,
    };
    match r.format {
        Some(Format::Json) => Output::json(r, &out),
        _ => {
            let mut body = String::from("t,B\n");
            for (t, b) in out.times.iter().zip(&out.values) {
                let _ = writeln!(body, "{t},{b}");
            }
            Ok(Output::csv(r, body))
        }
    }
}

pub fn estimate(s: &Settings, stdin: bool) -> Result<Output> {
    let (samples, source) = match (&s.input, stdin) {
        (_, true) => (ingest_series(std::io::stdin().lock())?, "<stdin>".to_string()),
        (Some(p), false) => (
            ingest_path(p).with_context(|| format!("reading {}", p.display()))?,
            p.display().to_string(),
        ),
        (None, false) => bail!("usage: `estimate` needs --input <csv> or --stdin"),
    };
    let t = truncation(s);
    let owned;
    let table = if t == Truncation::default() {
        CorrectionTable::shared()?
    } else {
        owned = CorrectionTable::build(&t)?;
        &owned
    };
    let result = estimate_h_all(&samples, table)?;
    let mut r = with_truncation(resolved("estimate", s, Format::Json), &t);
    r.input = Some(source);
    match r.format {
        Some(Format::Csv) => Output::key_value_csv(r, &result),
        _ => Output::json(r, &result),
    }
}

#[derive(Serialize)]
struct DensityRow {
    z: f64,
    p_n: f64,
    phi: f64,
    p_n_b: f64,
}

#[derive(Serialize)]
struct ExpandOut {
    v: f64,
    b_star: f64,
    rows: Vec<DensityRow>,
}

pub fn expand(s: &Settings) -> Result<Output> {
    let mut missing = Missing::default();
    let h = missing.take(s.h, "--H");
    let n = missing.take(s.n, "--n");
    missing.check("expand")?;
    let steps = s.steps.unwrap_or(DEFAULT_STEPS);
    if steps < 3 {
        bail!("usage: --steps must be at least 3, got {steps}");
    }
    let t = truncation(s);
    let m = EdgeworthModel::from_coefficients(&coefficients(h, &t)?);
    let range = s.range.unwrap_or(DEFAULT_RANGE_SDS * m.v.sqrt());
    if !(range.is_finite() && range > 0.0) {
        bail!("usage: --range must be positive, got {range}");
    }
    let rows = (0..steps)
        .map(|i| {
            let z = range * (2 * i as i64 - (steps - 1) as i64) as f64 / (steps - 1) as f64;
            Ok(DensityRow {
                z,
                p_n: m.density_pn(n as u64, z)?,
                phi: m.phi(z),
                p_n_b: m.density_pn_b(n as u64, m.b_star, z)?,
            })
        })
        .collect::<hurst_core::Result<Vec<_>>>()?;
    let mut r = with_truncation(resolved("expand", s, Format::Csv), &t);
    r.h = Some(h);
    r.n = Some(n);
    r.range = Some(range);
    r.steps = Some(steps);
    let out = ExpandOut {
        v: m.v,
        b_star: m.b_star,
        rows,
    };
    match r.format {
        Some(Format::Json) => Output::json(r, &out),
        _ => {
            let mut body = String::from("z,p_n,phi,p_n_b\n");
            for row in &out.rows {
                let _ = writeln!(body, "{},{},{},{}", row.z, row.p_n, row.phi, row.p_n_b);
            }
            Ok(Output::csv(r, body))
        }
    }
}

pub fn mc(s: &Settings) -> Result<Output> {
    let mut missing = Missing::default();
    let h = missing.take(s.h, "--H");
    let n = missing.take(s.n, "--n");
    missing.check("mc")?;
    let defaults = McConfig::default();
    let variants = match &s.variants {
        Some(v) => v.iter().map(|x| x.parse()).collect::<hurst_core::Result<Vec<Estimator>>>()?,
        None => defaults.variants.clone(),
    };
    let config = McConfig {
        h,
        t: s.t.unwrap_or(DEFAULT_T),
        n,
        reps: s.reps.unwrap_or(DEFAULT_REPS),
        seed: s.seed.unwrap_or(DEFAULT_SEED),
        bins: s.bins.unwrap_or(DEFAULT_BINS),
        z_range: s.z_range,
        variants,
        method: method(s)?,
        tol: s.tol.unwrap_or(DEFAULT_TOL),
        ..defaults
    };
    let report = run_mc(&config)?;
    let mut r = resolved("mc", s, Format::Json);
    r.h = Some(h);
    r.t = Some(config.t);
    r.n = Some(n);
    r.seed = Some(config.seed);
    r.tol = Some(config.tol);
    r.method = Some(format!("{:?}", config.method).to_lowercase());
    r.reps = Some(config.reps);
    r.bins = Some(config.bins);
    r.z_range = config.z_range;
    r.variants = Some(
        config
            .variants
            .iter()
            .map(|v| serde_json::to_value(v).map(|x| x.as_str().unwrap_or_default().to_string()))
            .collect::<serde_json::Result<_>>()?,
    );
    let out = match r.format {
        Some(Format::Csv) => Output::csv(r, report.density_csv()),
        _ => Output::json(r, &report)?,
    };
    Ok(out
        .with_file(s.svg.as_deref(), || report.svg())
        .with_file(s.density_csv.as_deref(), || report.density_csv()))
}

#[derive(Serialize)]
struct AnRow {
    k: usize,
    n: usize,
    a_n: f64,
    limit: f64,
    error: f64,
    /// `n · |A_n − limit|`.
    scaled_error: f64,
}

#[derive(Serialize)]
struct DecayRow {
    kernel: Kernel,
    j: i64,
    value: f64,
    asymptote: f64,
    /// `value / asymptote`; absent when the asymptotic constant vanishes.
    ratio: Option<f64>,
}

#[derive(Serialize)]
struct DiagOut {
    a_n: Vec<AnRow>,
    decay: Vec<DecayRow>,
}

/// Smallest `n` of the lattice-sum table; doubles up to `--n`.
const DIAG_N_START: usize = 256;
const DIAG_N_DEFAULT: usize = 2048;

pub fn diag(s: &Settings) -> Result<Output> {
    let mut missing = Missing::default();
    let h = missing.take(s.h, "--H");
    missing.check("diag")?;
    let n_max = s.n.unwrap_or(DIAG_N_DEFAULT);
    if n_max < DIAG_N_START {
        bail!("usage: diag needs --n of at least {DIAG_N_START}, got {n_max}");
    }
    let t = truncation(s);
    let mut a_n = Vec::new();
    for (k, spec) in [(2, ChainSpec::sum_of_squares(Kernel::RhoHat)), (3, ChainSpec::kappa_1_11())] {
        let limit = chain_sum(h, &spec, &t)?.value;
        let mut n = DIAG_N_START;
        while n <= n_max {
            let value = a_n_diagnostic(h, &vec![Kernel::RhoHat; k], &AnCounts::uniform(n, k))?;
            let error = (value - limit).abs();
            a_n.push(AnRow {
                k,
                n,
                a_n: value,
                limit,
                error,
                scaled_error: n as f64 * error,
            });
            n *= 2;
        }
    }
    let eval = KernelEvaluator::new(h)?;
    let mut decay = Vec::new();
    for kernel in [Kernel::RhoHat, Kernel::RhoTilde] {
        let c = decay_constant(h, kernel)?;
        for p in 3..=10 {
            let j = 1i64 << p;
            let value = eval.eval(kernel, j);
            let asymptote = c * (j as f64).powf(2.0 * h - 4.0);
            decay.push(DecayRow {
                kernel,
                j,
                value,
                asymptote,
                ratio: (asymptote != 0.0).then(|| value / asymptote),
            });
        }
    }
    let mut r = with_truncation(resolved("diag", s, Format::Json), &t);
    r.h = Some(h);
    r.n = Some(n_max);
    let out = DiagOut { a_n, decay };
    match r.format {
        Some(Format::Csv) => Output::key_value_csv(r, &out),
        _ => Output::json(r, &out),
    }
}
