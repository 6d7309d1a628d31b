use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Every setting that can come from a flag or from the `--config` file.
/// Unset fields fall through to the next layer.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(rename = "H")]
    pub h: Option<f64>,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub max_radius: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub method: Option<String>,
    pub reps: Option<usize>,
    pub bins: Option<usize>,
    pub z_range: Option<f64>,
    pub variants: Option<Vec<String>>,
    pub svg: Option<PathBuf>,
    pub density_csv: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub range: Option<f64>,
    pub steps: Option<usize>,
}

macro_rules! overlay {
    ($top:expr, $under:expr, $($field:ident),*) => {
        Settings { $($field: $top.$field.or($under.$field)),* }
    };
}

impl Settings {
    /// Fields of `self` win over those of `under`.
    pub fn over(self, under: Settings) -> Settings {
        overlay!(
            self, under, h, t, n, seed, tol, max_radius, out, format, method, reps, bins, z_range,
            variants, svg, density_csv, input, range, steps
        )
    }

    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
    }
}

pub const DEFAULT_T: f64 = 1.0;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_RADIUS: usize = 1 << 20;
pub const DEFAULT_REPS: usize = 10_000;
pub const DEFAULT_STEPS: usize = 241;
/// Default half-width of the `expand` grid in units of `√v`.
pub const DEFAULT_RANGE_SDS: f64 = 6.0;

/// The configuration a run actually used, echoed into its output. Output
/// destinations are left out so that the same run written to two places
/// produces the same bytes.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Resolved {
    pub command: String,
    #[serde(rename = "H", skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_radius: Option<usize>,
    pub format: Option<Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_range: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variants: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

/// Collects the names of required settings that no layer supplied.
#[derive(Default)]
pub struct Missing(Vec<&'static str>);

impl Missing {
    pub fn take<T: Copy + Default>(&mut self, value: Option<T>, flag: &'static str) -> T {
        if value.is_none() {
            self.0.push(flag);
        }
        value.unwrap_or_default()
    }

    pub fn check(self, command: &str) -> Result<()> {
        if self.0.is_empty() {
            return Ok(());
        }
        bail!(
            "usage: `{command}` is missing required settings: {} (give them as flags or in --config)",
            self.0.join(", ")
        )
    }
}
