//! Run configuration: one JSON document per invocation, with the resolved
//! form echoed next to the outputs so any run can be reproduced from its
//! output directory alone.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationSettings;
use crate::error::{Error, Result};
use crate::residual::ResidualParams;

/// Conventions shared by every command: dates are ISO-8601, rates are
/// decimals (0.045, not 4.5), futures prices are in exchange points.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Default seed; the `--seed` flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Default output directory; the `--out` flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Holidays applied to the weekend calendar in every command.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub holidays: Vec<NaiveDate>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decompose: Option<DecomposeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hurst: Option<HurstConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate: Option<CalibrateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<PriceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2: Option<R2Config>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termrate: Option<TermrateConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    /// Observed fixings, CSV with `date,rate` header.
    pub series_csv: PathBuf,
    /// Target-rate series covering the same days, same format.
    pub target_csv: PathBuf,
    /// Classify non-month-end deviations beyond this as spikes (SOFR
    /// mode); omit for the target-rate (EFFR) treatment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spike_threshold: Option<f64>,
    /// Month-end dates; derived from the calendar over the series span
    /// when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eom_dates: Option<Vec<NaiveDate>>,
    /// Lags for the residual's Hurst regression; defaults to 1..=20
    /// shrunk to what the series length supports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hurst_lags: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HurstConfig {
    /// Daily values, CSV with `date,rate` header.
    pub series_csv: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lags: Option<Vec<usize>>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ff,
    Sofr,
    Both,
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ff" => Ok(Stage::Ff),
            "sofr" => Ok(Stage::Sofr),
            "both" => Ok(Stage::Both),
            other => Err(Error::invalid(format!(
                "unknown calibration stage {other:?}; expected ff, sofr, or both"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    pub valuation_date: NaiveDate,
    /// Futures quotes CSV; kinds are split by stage automatically.
    pub quotes_csv: PathBuf,
    /// Policy-change dates after the valuation date.
    pub fomc_dates: Vec<NaiveDate>,
    /// Today's target rate, pinning the first curve level and identifying
    /// the effective-rate spread. Without it the spread stays zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effr_fixings_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sofr_fixings_csv: Option<PathBuf>,
    /// Spike schedule; derived month-ends over the quote span when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spike_dates: Option<Vec<NaiveDate>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spike_widths_days: Option<Vec<i64>>,
    /// Which stage to run; the `--stage` flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<CalibrationSettings>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceConfig {
    /// Model snapshot JSON (a calibration's `model` section or handwritten).
    pub model_json: PathBuf,
    pub quotes_csv: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effr_fixings_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sofr_fixings_csv: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model_json: PathBuf,
    /// Horizon in years.
    pub horizon: f64,
    pub paths: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_true")]
    pub antithetic: bool,
    #[serde(default = "default_grid_step")]
    pub grid_step_days: i64,
    /// How many individual paths land in paths.csv (summaries always use
    /// all of them).
    #[serde(default = "default_output_paths")]
    pub output_paths: usize,
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    /// Volatility overrides: calibration leaves them zero, so simulations
    /// supply them here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_z: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<ResidualParams>,
}

fn default_true() -> bool {
    true
}
fn default_grid_step() -> i64 {
    1
}
fn default_output_paths() -> usize {
    100
}
fn default_quantiles() -> Vec<f64> {
    vec![0.05, 0.25, 0.50, 0.75, 0.95]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct R2Config {
    /// Directory of dated curve documents: calibration `curve.json` files
    /// or bare `{valuation, knot_dates, levels}` objects.
    pub curves_dir: PathBuf,
    /// Realized policy changes, CSV with `date,change` header.
    pub realized_csv: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_edges: Option<Vec<i64>>,
    /// Largest tolerated gap in days between consecutive curve dates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_gap_days: Option<i64>,
    /// A second curve directory scored into `r2_naive.csv` for the
    /// maturity-knot comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub naive_curves_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermrateConfig {
    /// Published fixings, CSV with `date,rate` header.
    pub fixings_csv: PathBuf,
    #[serde(default = "default_term_months")]
    pub months: u32,
    /// First period start; defaults to the first fixing date.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<NaiveDate>,
    /// Last period start considered; defaults to the latest start whose
    /// period the fixings cover.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<NaiveDate>,
    /// Benchmark series (`date,rate`); adds benchmark and spread columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark_csv: Option<PathBuf>,
}

fn default_term_months() -> u32 {
    3
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line() as u64,
            msg: e.to_string(),
        })
    }
}
