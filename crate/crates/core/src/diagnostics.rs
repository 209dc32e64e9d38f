//! Empirical diagnostics on fixing histories: rate decomposition with
//! variance attribution, Hurst-exponent estimation, and the anticipation
//! R-squared between realized policy moves and curve-implied moves.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{DatedCurve, FixingSeries};
use crate::numerics::{correlation, ols, pairwise_sum, sample_variance};

/// Component order used everywhere a decomposition is tabulated.
pub const COMPONENT_NAMES: [&str; 4] = ["target", "eom_spike", "non_eom_spike", "residual"];

/// A daily rate series split into additive components:
/// `observed = target + eom_spike + non_eom_spike + residual`, with the sum
/// evaluated exactly in [`DecompositionResult::reconstruct`]'s order.
///
/// Spikes are transient: a spike day's deviation sits in its spike
/// component for that day only and the residual carries straight through,
/// so the next observation's spike-component change is the reversal.
#[derive(Clone, Debug)]
pub struct DecompositionResult {
    pub dates: Vec<NaiveDate>,
    pub observed: Vec<f64>,
    pub target: Vec<f64>,
    /// Unexplained deviation on month-end dates, assigned regardless of
    /// magnitude; zero elsewhere.
    pub eom_spike: Vec<f64>,
    /// Unexplained deviation beyond the threshold on non-month-end dates;
    /// only populated when a threshold is supplied (SOFR mode).
    pub non_eom_spike: Vec<f64>,
    pub residual: Vec<f64>,
    /// Sample variance of daily changes per component, in
    /// [`COMPONENT_NAMES`] order. NaN when there are fewer than two changes.
    pub change_variance: [f64; 4],
    /// Pearson correlation of component daily changes; NaN where a
    /// component's changes are degenerate.
    pub change_correlation: [[f64; 4]; 4],
}

impl DecompositionResult {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Recompose day `i` in the fixed order
    /// `((target + residual) + eom_spike) + non_eom_spike`. For rate-like
    /// magnitudes this reproduces the observed value bit for bit: each
    /// component was defined as the complement of the others under exactly
    /// this grouping, and the subtractions involved are exact by the
    /// Sterbenz lemma when the quantities are within a factor of two of
    /// each other.
    pub fn reconstruct(&self, i: usize) -> f64 {
        ((self.target[i] + self.residual[i]) + self.eom_spike[i]) + self.non_eom_spike[i]
    }

    /// Component series in [`COMPONENT_NAMES`] order.
    pub fn components(&self) -> [&[f64]; 4] {
        [
            &self.target,
            &self.eom_spike,
            &self.non_eom_spike,
            &self.residual,
        ]
    }

    /// Each component's share of the summed change variances; NaN when the
    /// total is not positive.
    pub fn variance_share(&self) -> [f64; 4] {
        let total: f64 = self.change_variance.iter().sum();
        self.change_variance.map(|v| v / total)
    }
}

/// Split an observed fixing series into target, month-end spike, non-month-
/// end spike, and residual components.
///
/// `target` must carry an observation on every day of `series`. `eom_dates`
/// (strictly increasing) are the days whose deviation is always treated as
/// a transient spike; `spike_threshold`, when given, additionally classifies
/// any other day whose unexplained deviation exceeds it (both in decimal
/// rate units).
///
/// The residual is the running spread of observed over target. On a spike
/// day it is carried through unchanged and the spike takes the whole
/// deviation measured against that carried residual, which makes the
/// following day's spike reversal automatic.
pub fn decompose(
    series: &FixingSeries,
    target: &FixingSeries,
    eom_dates: &[NaiveDate],
    spike_threshold: Option<f64>,
) -> Result<DecompositionResult> {
    if series.len() < 2 {
        return Err(Error::data(
            "decomposition needs at least two observations",
        ));
    }
    if !eom_dates.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid(
            "month-end dates must be strictly increasing",
        ));
    }
    if let Some(t) = spike_threshold {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!(
                "spike threshold must be positive and finite, got {t}"
            )));
        }
    }

    let n = series.len();
    let mut dates = Vec::with_capacity(n);
    let mut observed = Vec::with_capacity(n);
    let mut target_col = Vec::with_capacity(n);
    let mut eom_spike = vec![0.0; n];
    let mut non_eom_spike = vec![0.0; n];
    let mut residual = Vec::with_capacity(n);

    for (i, (date, g)) in series.iter().enumerate() {
        let p = target.get(date).ok_or_else(|| {
            Error::data(format!(
                "target series has no observation on {date}; it must cover \
                 every day of the decomposed series"
            ))
        })?;
        dates.push(date);
        observed.push(g);
        target_col.push(p);
        if i == 0 {
            residual.push(g - p);
            continue;
        }
        let carried = residual[i - 1];
        // Deviation of today's observation from target plus the carried
        // residual, evaluated in the order that lets `reconstruct` undo it
        // exactly.
        let deviation = g - (p + carried);
        let is_eom = eom_dates.binary_search(&date).is_ok();
        let is_threshold_spike =
            spike_threshold.is_some_and(|t| !is_eom && deviation.abs() > t);
        if is_eom {
            eom_spike[i] = deviation;
            residual.push(carried);
        } else if is_threshold_spike {
            non_eom_spike[i] = deviation;
            residual.push(carried);
        } else {
            residual.push(g - p);
        }
    }

    let diffs = |xs: &[f64]| -> Vec<f64> { xs.windows(2).map(|w| w[1] - w[0]).collect() };
    let changes = [
        diffs(&target_col),
        diffs(&eom_spike),
        diffs(&non_eom_spike),
        diffs(&residual),
    ];
    let change_variance = [
        sample_variance(&changes[0]),
        sample_variance(&changes[1]),
        sample_variance(&changes[2]),
        sample_variance(&changes[3]),
    ];
    let mut change_correlation = [[f64::NAN; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            change_correlation[a][b] = if a == b {
                1.0
            } else {
                correlation(&changes[a], &changes[b])
            };
        }
    }

    Ok(DecompositionResult {
        dates,
        observed,
        target: target_col,
        eom_spike,
        non_eom_spike,
        residual,
        change_variance,
        change_correlation,
    })
}

/// One lag of the Hurst regression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HurstRow {
    pub lag: usize,
    /// Sample variance of overlapping lagged differences.
    pub variance: f64,
    /// Variance the fitted power law predicts at this lag.
    pub fitted_variance: f64,
}

/// Least-squares fit of log lagged-difference variance against log lag.
/// The Hurst exponent is half the slope; values below one half indicate
/// mean reversion.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HurstFit {
    pub h: f64,
    pub slope: f64,
    pub intercept: f64,
    pub rows: Vec<HurstRow>,
}

/// Lags 1 through 20, the default span of the variance regression.
pub fn default_hurst_lags() -> Vec<usize> {
    (1..=20).collect()
}

/// Fit the lagged-difference variance power law
/// `Var[x(t+lag) - x(t)] ~ c * lag^(2h)` over the given lags, using
/// overlapping differences. Requires at least two lags, each at least one,
/// strictly increasing, and a series at least ten times the largest lag.
pub fn hurst_fit(series: &[f64], lags: &[usize]) -> Result<HurstFit> {
    if lags.len() < 2 {
        return Err(Error::invalid("Hurst fit needs at least two lags"));
    }
    if lags[0] < 1 || !lags.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid(
            "Hurst lags must be strictly increasing and at least one",
        ));
    }
    let max_lag = *lags.last().expect("validated non-empty");
    if series.len() < 10 * max_lag {
        return Err(Error::invalid(format!(
            "series of {} points is too short for lag {max_lag}; need at \
             least ten times the largest lag",
            series.len()
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series values must be finite"));
    }

    let mut log_lags = Vec::with_capacity(lags.len());
    let mut log_vars = Vec::with_capacity(lags.len());
    let mut variances = Vec::with_capacity(lags.len());
    for &lag in lags {
        let diffs: Vec<f64> = (0..series.len() - lag)
            .map(|i| series[i + lag] - series[i])
            .collect();
        let var = sample_variance(&diffs);
        if !(var > 0.0) {
            return Err(Error::data(format!(
                "degenerate series: lagged differences at lag {lag} have no \
                 variance"
            )));
        }
        variances.push(var);
        log_lags.push((lag as f64).ln());
        log_vars.push(var.ln());
    }
    let (slope, intercept) = ols(&log_lags, &log_vars)?;
    let rows = lags
        .iter()
        .zip(&variances)
        .map(|(&lag, &variance)| HurstRow {
            lag,
            variance,
            fitted_variance: (intercept + slope * (lag as f64).ln()).exp(),
        })
        .collect();
    Ok(HurstFit {
        h: slope / 2.0,
        slope,
        intercept,
        rows,
    })
}

/// The Hurst exponent alone; see [`hurst_fit`].
pub fn hurst_exponent(series: &[f64], lags: &[usize]) -> Result<f64> {
    hurst_fit(series, lags).map(|fit| fit.h)
}

/// One horizon bucket of the anticipation table: how well curve-implied
/// jumps predicted realized policy moves `bucket_lo..bucket_hi` days ahead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct R2Row {
    pub bucket_lo: i64,
    pub bucket_hi: i64,
    pub r2: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct AnticipationTable {
    pub rows: Vec<R2Row>,
}

/// Ten-day buckets spanning 0 to 250 days ahead.
pub fn default_horizon_edges() -> Vec<i64> {
    (0..=25).map(|k| 10 * k).collect()
}

/// R-squared between realized policy moves and the moves the calibrated
/// curves implied in advance, grouped by how many days ahead the curve
/// looked.
///
/// Every pair of a curve (valued at `t`) and a later event date `x` with a
/// realized change contributes one point to the bucket containing
/// `x - t` days: realized change against the curve's jump at `x`. Buckets
/// are `[lo, hi)` over the supplied strictly increasing edges. Empty
/// buckets and buckets whose realized changes are all identical while
/// unmatched (zero total variation with nonzero error) are omitted rather
/// than reported as zero.
pub fn anticipation_r2(
    realized_changes: &[(NaiveDate, f64)],
    curves: &[DatedCurve],
    bucket_edges: &[i64],
) -> Result<AnticipationTable> {
    if bucket_edges.len() < 2 || !bucket_edges.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid(
            "horizon bucket edges must be strictly increasing with at least \
             two entries",
        ));
    }
    if bucket_edges[0] < 0 {
        return Err(Error::invalid("horizon bucket edges must be non-negative"));
    }
    if !realized_changes.windows(2).all(|w| w[0].0 < w[1].0) {
        return Err(Error::data(
            "realized change dates must be strictly increasing",
        ));
    }
    if realized_changes
        .iter()
        .any(|(_, change)| !change.is_finite())
    {
        return Err(Error::data("realized changes must be finite"));
    }

    let n_buckets = bucket_edges.len() - 1;
    let mut realized_by_bucket: Vec<Vec<f64>> = vec![Vec::new(); n_buckets];
    let mut implied_by_bucket: Vec<Vec<f64>> = vec![Vec::new(); n_buckets];
    for curve in curves {
        for &(event, realized) in realized_changes {
            if event <= curve.valuation {
                continue;
            }
            let days = (event - curve.valuation).num_days();
            if days < bucket_edges[0] || days >= *bucket_edges.last().expect("non-empty") {
                continue;
            }
            let bucket = bucket_edges.partition_point(|&e| e <= days) - 1;
            realized_by_bucket[bucket].push(realized);
            implied_by_bucket[bucket].push(curve.jump_at(event));
        }
    }

    let mut rows = Vec::new();
    for b in 0..n_buckets {
        let realized = &realized_by_bucket[b];
        let implied = &implied_by_bucket[b];
        if realized.is_empty() {
            continue;
        }
        let ssr_terms: Vec<f64> = realized
            .iter()
            .zip(implied)
            .map(|(r, i)| (r - i) * (r - i))
            .collect();
        let ssr = pairwise_sum(&ssr_terms);
        let mean_r = pairwise_sum(realized) / realized.len() as f64;
        let sst_terms: Vec<f64> = realized.iter().map(|r| (r - mean_r) * (r - mean_r)).collect();
        let sst = pairwise_sum(&sst_terms);
        let r2 = if ssr == 0.0 {
            1.0
        } else if sst == 0.0 {
            // No variation to explain yet nonzero error: undefined, omitted.
            continue;
        } else {
            1.0 - ssr / sst
        };
        rows.push(R2Row {
            bucket_lo: bucket_edges[b],
            bucket_hi: bucket_edges[b + 1],
            r2,
            n: realized.len(),
        });
    }
    Ok(AnticipationTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::BusinessCalendar;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn series_from(days: &[(&str, f64)]) -> FixingSeries {
        FixingSeries::new(days.iter().map(|&(s, r)| (d(s), r)).collect()).unwrap()
    }

    /// January 2025 business days with a constant target.
    fn flat_target(rate: f64) -> FixingSeries {
        let cal = BusinessCalendar::standard([]).unwrap();
        let days = cal.business_days_between(d("2025-01-01"), d("2025-02-10"));
        FixingSeries::new(days.into_iter().map(|day| (day, rate)).collect()).unwrap()
    }

    #[test]
    fn identical_series_decomposes_to_pure_target() {
        let target = flat_target(0.0450);
        let result = decompose(&target, &target, &[d("2025-01-31")], Some(0.002)).unwrap();
        for i in 0..result.len() {
            assert_eq!(result.eom_spike[i], 0.0);
            assert_eq!(result.non_eom_spike[i], 0.0);
            assert_eq!(result.residual[i], 0.0);
            assert_eq!(result.reconstruct(i).to_bits(), result.observed[i].to_bits());
        }
    }

    #[test]
    fn eom_deviation_lands_in_the_eom_component_and_reverses() {
        let target = flat_target(0.0450);
        let spiked: Vec<(NaiveDate, f64)> = target
            .iter()
            .map(|(day, r)| (day, if day == d("2025-01-31") { r + 0.0030 } else { r }))
            .collect();
        let series = FixingSeries::new(spiked).unwrap();
        let result = decompose(&series, &target, &[d("2025-01-31")], None).unwrap();
        for (i, &date) in result.dates.iter().enumerate() {
            if date == d("2025-01-31") {
                assert_eq!(
                    result.eom_spike[i].to_bits(),
                    (result.observed[i] - result.target[i]).to_bits()
                );
            } else {
                assert_eq!(result.eom_spike[i], 0.0);
            }
            assert_eq!(result.residual[i], 0.0);
            assert_eq!(result.reconstruct(i).to_bits(), result.observed[i].to_bits());
        }
        // The spike component's change on the next business day is the
        // exact reversal.
        let jan31 = result.dates.iter().position(|&x| x == d("2025-01-31")).unwrap();
        assert_eq!(
            result.eom_spike[jan31 + 1] - result.eom_spike[jan31],
            -result.eom_spike[jan31]
        );
    }

    #[test]
    fn constant_spread_sits_in_the_residual() {
        let target = flat_target(0.0450);
        let shifted: Vec<(NaiveDate, f64)> =
            target.iter().map(|(day, r)| (day, r + 0.0007)).collect();
        let series = FixingSeries::new(shifted).unwrap();
        let result = decompose(&series, &target, &[d("2025-01-31")], Some(0.002)).unwrap();
        for i in 0..result.len() {
            assert_eq!(result.eom_spike[i], 0.0, "day {i}");
            assert_eq!(result.non_eom_spike[i], 0.0);
            assert_eq!(
                result.residual[i].to_bits(),
                (result.observed[i] - result.target[i]).to_bits()
            );
            assert_eq!(result.reconstruct(i).to_bits(), result.observed[i].to_bits());
        }
    }

    #[test]
    fn threshold_classifies_non_eom_spikes_only_in_sofr_mode() {
        let target = flat_target(0.0430);
        let blip_day = d("2025-01-15");
        let blipped: Vec<(NaiveDate, f64)> = target
            .iter()
            .map(|(day, r)| (day, if day == blip_day { r + 0.0025 } else { r }))
            .collect();
        let series = FixingSeries::new(blipped).unwrap();

        let sofr = decompose(&series, &target, &[d("2025-01-31")], Some(0.002)).unwrap();
        let idx = sofr.dates.iter().position(|&x| x == blip_day).unwrap();
        assert!(sofr.non_eom_spike[idx] > 0.002);
        assert_eq!(sofr.residual[idx], sofr.residual[idx - 1]);

        // Without a threshold the blip flows through the residual instead.
        let effr = decompose(&series, &target, &[d("2025-01-31")], None).unwrap();
        assert_eq!(effr.non_eom_spike[idx], 0.0);
        assert!(effr.residual[idx] > 0.002);
        for result in [&sofr, &effr] {
            for i in 0..result.len() {
                assert_eq!(
                    result.reconstruct(i).to_bits(),
                    result.observed[i].to_bits(),
                    "day {i}"
                );
            }
        }
    }

    #[test]
    fn residual_is_frozen_across_a_spike_bitwise() {
        let target = flat_target(0.0440);
        let wobble: Vec<(NaiveDate, f64)> = target
            .iter()
            .enumerate()
            .map(|(i, (day, r))| {
                let base = r + 0.0006 + 1e-5 * (i as f64 * 0.7).sin();
                (day, if day == d("2025-01-31") { base + 0.004 } else { base })
            })
            .collect();
        let series = FixingSeries::new(wobble).unwrap();
        let result = decompose(&series, &target, &[d("2025-01-31")], Some(0.002)).unwrap();
        let jan31 = result.dates.iter().position(|&x| x == d("2025-01-31")).unwrap();
        assert_eq!(
            result.residual[jan31].to_bits(),
            result.residual[jan31 - 1].to_bits()
        );
        for i in 0..result.len() {
            assert_eq!(result.reconstruct(i).to_bits(), result.observed[i].to_bits());
        }
    }

    #[test]
    fn random_fixtures_reconstruct_bitwise() {
        let cal = BusinessCalendar::standard([]).unwrap();
        let days = cal.business_days_between(d("2024-01-01"), d("2025-01-01"));
        let eom: Vec<NaiveDate> = (1..=12)
            .map(|m| cal.last_business_day_of_month(2024, m).unwrap())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let base = 0.01 + 0.07 * rng.random::<f64>();
            let mut level = base;
            let mut target_obs = Vec::new();
            let mut series_obs = Vec::new();
            for &day in &days {
                if rng.random::<f64>() < 0.02 {
                    level += if rng.random::<bool>() { 0.0025 } else { -0.0025 };
                }
                let noise: f64 = rng.random::<f64>() * 2e-4 - 1e-4;
                let spike = if eom.binary_search(&day).is_ok() {
                    0.004 * rng.random::<f64>()
                } else if rng.random::<f64>() < 0.01 {
                    0.003
                } else {
                    0.0
                };
                target_obs.push((day, level));
                series_obs.push((day, level + 0.0005 + noise + spike));
            }
            let target = FixingSeries::new(target_obs).unwrap();
            let series = FixingSeries::new(series_obs).unwrap();
            let result = decompose(&series, &target, &eom, Some(0.002)).unwrap();
            for i in 0..result.len() {
                assert_eq!(
                    result.reconstruct(i).to_bits(),
                    result.observed[i].to_bits(),
                    "fixture day {i}"
                );
            }
        }
    }

    #[test]
    fn variance_contributions_rank_as_constructed() {
        // Target steps dominate, spikes second, residual noise smallest.
        let cal = BusinessCalendar::standard([]).unwrap();
        let days = cal.business_days_between(d("2024-01-01"), d("2025-01-01"));
        let eom: Vec<NaiveDate> = (1..=12)
            .map(|m| cal.last_business_day_of_month(2024, m).unwrap())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut level = 0.05;
        let mut target_obs = Vec::new();
        let mut series_obs = Vec::new();
        for (i, &day) in days.iter().enumerate() {
            // Each spike contributes an up change and a down change, so the
            // steps must be large enough to dominate both.
            if i % 40 == 39 {
                level += if rng.random::<bool>() { 0.0100 } else { -0.0100 };
            }
            let spike = if eom.binary_search(&day).is_ok() { 0.0030 } else { 0.0 };
            let noise: f64 = rng.random::<f64>() * 2e-4 - 1e-4;
            target_obs.push((day, level));
            series_obs.push((day, level + spike + noise));
        }
        let target = FixingSeries::new(target_obs).unwrap();
        let series = FixingSeries::new(series_obs).unwrap();
        let result = decompose(&series, &target, &eom, Some(0.002)).unwrap();
        let [v_target, v_eom, _, v_resid] = result.change_variance;
        assert!(v_target > v_eom, "{v_target} vs {v_eom}");
        assert!(v_eom > v_resid, "{v_eom} vs {v_resid}");
        assert!(result.change_variance.iter().all(|&v| v >= 0.0));
        let shares = result.variance_share();
        assert!((shares.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_target_day_is_a_data_error() {
        let target = flat_target(0.0450);
        let series = series_from(&[("2025-01-02", 0.045), ("2025-03-03", 0.045)]);
        let err = decompose(&series, &target, &[], None).unwrap_err();
        assert!(matches!(err, Error::DataConsistency(_)), "{err:?}");
    }

    #[test]
    fn hurst_of_brownian_motion_is_near_one_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut x = 0.0;
        let path: Vec<f64> = (0..5000)
            .map(|_| {
                let eps: f64 = rng.sample(StandardNormal);
                x += eps;
                x
            })
            .collect();
        let h = hurst_exponent(&path, &default_hurst_lags()).unwrap();
        assert!((0.4..=0.6).contains(&h), "h = {h}");
    }

    #[test]
    fn hurst_of_strong_mean_reversion_is_low() {
        // Discretized OU with beta = 50/yr at daily sampling.
        let beta = 50.0f64;
        let dt = 1.0 / 250.0;
        let phi = (-beta * dt).exp();
        let sd = (1.0 - phi * phi).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut r = 0.0;
        let path: Vec<f64> = (0..5000)
            .map(|_| {
                let eps: f64 = rng.sample(StandardNormal);
                r = phi * r + sd * eps;
                r
            })
            .collect();
        let h = hurst_exponent(&path, &default_hurst_lags()).unwrap();
        assert!(h < 0.45, "h = {h}");
    }

    #[test]
    fn hurst_is_scale_and_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut x = 0.0;
        let path: Vec<f64> = (0..2000)
            .map(|_| {
                let eps: f64 = rng.sample(StandardNormal);
                x += eps;
                x
            })
            .collect();
        let lags = default_hurst_lags();
        let h = hurst_exponent(&path, &lags).unwrap();
        let scaled: Vec<f64> = path.iter().map(|v| 3.25 * v).collect();
        let shifted: Vec<f64> = path.iter().map(|v| v + 100.0).collect();
        let h_scaled = hurst_exponent(&scaled, &lags).unwrap();
        let h_shifted = hurst_exponent(&shifted, &lags).unwrap();
        assert!((h - h_scaled).abs() < 1e-10, "{h} vs {h_scaled}");
        assert!((h - h_shifted).abs() < 1e-10, "{h} vs {h_shifted}");
    }

    #[test]
    fn alternating_series_over_odd_lags_has_flat_variance_and_zero_h() {
        // x alternates +-A: odd-lag differences are +-2A with constant
        // variance, so the fitted slope and the exponent are exactly zero.
        let path: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let fit = hurst_fit(&path, &[1, 3, 5, 7]).unwrap();
        // The diff sets have odd lengths, so their means are not exactly
        // zero and the variances differ in the last few digits; the slope
        // is tiny but not bitwise zero.
        assert!(fit.slope.abs() < 1e-4, "slope = {}", fit.slope);
        assert!(fit.h.abs() < 1e-4, "h = {}", fit.h);
        // Even lags difference to exactly zero: degenerate.
        assert!(hurst_fit(&path, &[2, 4]).is_err());
    }

    #[test]
    fn hurst_preconditions_are_enforced() {
        let path: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert!(hurst_fit(&path, &[5]).is_err(), "one lag");
        assert!(hurst_fit(&path, &[5, 3]).is_err(), "unsorted");
        assert!(hurst_fit(&path, &[0, 1]).is_err(), "zero lag");
        assert!(hurst_fit(&path, &[1, 11]).is_err(), "series too short");
        let constant = vec![1.0; 500];
        assert!(hurst_fit(&constant, &[1, 2]).is_err(), "degenerate");
    }

    fn curve(valuation: &str, knots: &[(&str, f64)], first_level: f64) -> DatedCurve {
        let mut levels = vec![first_level];
        let mut dates = Vec::new();
        let mut current = first_level;
        for &(date, jump) in knots {
            dates.push(d(date));
            current += jump;
            levels.push(current);
        }
        DatedCurve::new(d(valuation), dates, levels).unwrap()
    }

    #[test]
    fn perfect_foresight_scores_one_in_every_bucket() {
        let realized = vec![(d("2025-03-19"), 0.0025), (d("2025-06-18"), -0.0050)];
        let curves: Vec<DatedCurve> = ["2025-01-02", "2025-02-03", "2025-04-01"]
            .iter()
            .map(|v| {
                curve(
                    v,
                    &[("2025-03-19", 0.0025), ("2025-06-18", -0.0050)],
                    0.0450,
                )
            })
            .collect();
        let table =
            anticipation_r2(&realized, &curves, &default_horizon_edges()).unwrap();
        assert!(!table.rows.is_empty());
        for row in &table.rows {
            assert_eq!(row.r2, 1.0, "bucket {}..{}", row.bucket_lo, row.bucket_hi);
            assert!(row.n > 0);
        }
    }

    #[test]
    fn flat_curves_score_at_most_zero() {
        let realized = vec![
            (d("2025-03-19"), 0.0025),
            (d("2025-05-07"), -0.0025),
            (d("2025-06-18"), -0.0050),
        ];
        let curves = vec![
            curve("2025-01-02", &[], 0.0450),
            curve("2025-01-20", &[], 0.0450),
        ];
        // Wide bucket so several events share one bucket with spread-out
        // realized values.
        let table = anticipation_r2(&realized, &curves, &[0, 250]).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert!(table.rows[0].r2 <= 0.0, "r2 = {}", table.rows[0].r2);
        assert!(table.rows[0].r2 <= 1.0);
    }

    #[test]
    fn noisier_forecasts_at_longer_horizons_decrease_r2() {
        // Synthetic forecaster: implied = realized + noise whose scale grows
        // with the horizon bucket.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut realized = Vec::new();
        let mut day = d("2025-02-03");
        for _ in 0..40 {
            let change = if rng.random::<bool>() { 0.0025 } else { -0.0025 };
            realized.push((day, change));
            day += chrono::Duration::days(7);
        }
        let valuation = d("2025-01-30");
        let curves: Vec<DatedCurve> = (0..30)
            .map(|_| {
                let knots: Vec<(NaiveDate, f64)> = realized
                    .iter()
                    .map(|&(event, change)| {
                        let days_ahead = (event - valuation).num_days() as f64;
                        let noise_scale = 0.0004 + 0.00004 * days_ahead;
                        let eps: f64 = rng.sample(StandardNormal);
                        (event, change + noise_scale * eps)
                    })
                    .collect();
                let mut levels = vec![0.0450];
                let mut acc = 0.0450;
                let mut dates = Vec::new();
                for (event, jump) in knots {
                    dates.push(event);
                    acc += jump;
                    levels.push(acc);
                }
                DatedCurve::new(valuation, dates, levels).unwrap()
            })
            .collect();
        let edges: Vec<i64> = (0..=4).map(|k| 70 * k).collect();
        let table = anticipation_r2(&realized, &curves, &edges).unwrap();
        assert!(table.rows.len() >= 3);
        for pair in table.rows.windows(2) {
            assert!(
                pair[0].r2 > pair[1].r2,
                "bucket {} r2 {} not above bucket {} r2 {}",
                pair[0].bucket_lo,
                pair[0].r2,
                pair[1].bucket_lo,
                pair[1].r2
            );
        }
    }

    #[test]
    fn empty_buckets_are_omitted() {
        // Exactly representable jump (0.25 against base 1.0) so the
        // singleton bucket's squared error is bitwise zero; a singleton
        // with any error has no variance to explain and is omitted.
        let curves = vec![curve("2025-03-01", &[("2025-03-19", 0.25)], 1.0)];
        let realized = vec![(d("2025-03-19"), curves[0].jump_at(d("2025-03-19")))];
        // Event sits 18 days ahead: only the 10..20 bucket reports.
        let table =
            anticipation_r2(&realized, &curves, &default_horizon_edges()).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].bucket_lo, 10);
        assert_eq!(table.rows[0].bucket_hi, 20);
        assert_eq!(table.rows[0].n, 1);
    }

    #[test]
    fn horizon_edges_are_validated() {
        let realized = vec![(d("2025-03-19"), 0.0025)];
        assert!(anticipation_r2(&realized, &[], &[10]).is_err());
        assert!(anticipation_r2(&realized, &[], &[10, 10]).is_err());
        assert!(anticipation_r2(&realized, &[], &[-10, 10]).is_err());
    }
}
