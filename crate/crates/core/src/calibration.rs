//! Tolerance-banded curve calibration from futures quotes.
//!
//! Stage one fits the piecewise-flat target curve between policy dates plus
//! a constant effective-rate spread to Fed Funds futures. Stage two holds
//! that curve fixed and fits month-end spike levels plus a SOFR spread to
//! one- and three-month SOFR futures jointly.
//!
//! The primary objective is banded: a quote contributes
//! `[(|F_model - F_market| - h)^+]^2`, with a tighter band `h` on the front
//! contract. Inside the band the error is exactly zero, so the minimizer is
//! a set; to make results canonical and reproducible, candidates are ranked
//! lexicographically with the plain sum of squared price differences as the
//! secondary key. The optimizer is a seeded differential evolution under
//! that lexicographic order, followed by a deterministic coordinate pattern
//! search.
//!
//! Identifiability notes: a curve level and a constant spread added to every
//! day are collinear, so the first interval's level is pinned to the known
//! current target rate whenever the caller supplies it; without it the
//! spread is fixed at zero and absorbed into the levels. Levels or spikes
//! touched by no model-priced day are reported with an `identified: false`
//! flag instead of a silently arbitrary value: untouched levels inherit
//! their left neighbor (the curve extends flat), untouched spikes stay zero.

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::composite::ModelSpec;
use crate::error::{Error, Result};
use crate::futures::{resolve, ContractKind, FuturesQuote};
use crate::market::calendar::first_of_next_month;
use crate::market::{BusinessCalendar, FixingSeries};
use crate::residual::ResidualParams;

/// Daily-compounding denominator of the quarterly contract convention.
const COMPOUND_DENOM: f64 = 360.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationSettings {
    /// Bounds for curve levels (decimal rates).
    pub level_bounds: (f64, f64),
    /// Bounds for spike levels.
    pub spike_bounds: (f64, f64),
    /// Bounds for the constant spreads.
    pub spread_bounds: (f64, f64),
    /// Dead band on the front (nearest) contract, in price points.
    pub tolerance_front: f64,
    /// Dead band on every other contract, in price points.
    pub tolerance_back: f64,
    /// Differential-evolution population size.
    pub population: usize,
    /// Budget: evolution generations, and separately polish sweeps.
    pub max_iters: usize,
    pub optimizer_seed: u64,
    /// The fit converged when the banded objective ends at or below this.
    pub converged_threshold: f64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        CalibrationSettings {
            level_bounds: (-0.01, 0.10),
            spike_bounds: (-0.02, 0.05),
            spread_bounds: (-0.01, 0.01),
            tolerance_front: 0.0025,
            tolerance_back: 0.005,
            population: 48,
            max_iters: 300,
            optimizer_seed: 0,
            converged_threshold: 1e-8,
        }
    }
}

impl CalibrationSettings {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("level_bounds", self.level_bounds),
            ("spike_bounds", self.spike_bounds),
            ("spread_bounds", self.spread_bounds),
        ] {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::invalid(format!(
                    "{name} must be a finite interval, got [{lo}, {hi}]"
                )));
            }
        }
        if !(self.tolerance_front >= 0.0 && self.tolerance_back >= 0.0) {
            return Err(Error::invalid("tolerances must be non-negative"));
        }
        if self.population < 8 {
            return Err(Error::invalid("population must be at least 8"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        if !(self.converged_threshold >= 0.0) {
            return Err(Error::invalid("converged_threshold must be non-negative"));
        }
        Ok(())
    }
}

/// Everything a calibration stage needs besides its stage-specific schedule.
pub struct CalibrationProblem<'a> {
    pub valuation_date: NaiveDate,
    pub calendar: &'a BusinessCalendar,
    pub quotes: &'a [FuturesQuote],
    pub fixings: Option<&'a FixingSeries>,
    pub settings: CalibrationSettings,
}

/// Per-quote fit report. `error` is the banded residual, zero inside the
/// tolerance band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuoteResidual {
    pub code: String,
    pub kind: String,
    pub ref_start: NaiveDate,
    pub market_price: f64,
    pub model_price: f64,
    pub tolerance: f64,
    pub error: f64,
}

/// Stage-one result: the target curve and the effective-rate spread.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FfFit {
    pub fomc_dates: Vec<NaiveDate>,
    /// Piecewise-flat levels: `levels[k]` applies from `fomc_dates[k-1]`
    /// (inclusive) to `fomc_dates[k]` (exclusive).
    pub levels: Vec<f64>,
    /// Whether each level was pinned by data (or the supplied current
    /// target); inherited tail levels are `false`.
    pub identified: Vec<bool>,
    pub spread: f64,
    pub spread_identified: bool,
    pub residuals: Vec<QuoteResidual>,
    /// Banded objective at the reported parameters.
    pub objective: f64,
    /// Secondary tie-break objective (plain sum of squared differences).
    pub secondary_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
}

/// Stage-two result: spike levels and the SOFR spread.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SofrFit {
    pub spike_dates: Vec<NaiveDate>,
    pub spike_widths_days: Vec<i64>,
    pub spike_levels: Vec<f64>,
    pub identified: Vec<bool>,
    pub spread: f64,
    pub spread_identified: bool,
    pub residuals: Vec<QuoteResidual>,
    pub objective: f64,
    pub secondary_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
}

/// Banded error `(|diff| - tolerance)^+`.
pub fn banded_error(diff: f64, tolerance: f64) -> f64 {
    (diff.abs() - tolerance).max(0.0)
}

/// Lexicographic comparison of (primary, secondary) objective pairs.
fn tuple_less(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

// ---------------------------------------------------------------------------
// Optimizer: differential evolution + coordinate pattern search, both under
// the lexicographic order, both fully determined by the seed.
// ---------------------------------------------------------------------------

fn clamp_to(bounds: &[(f64, f64)], x: &mut [f64]) {
    for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(*lo, *hi);
    }
}

fn optimize<F>(
    bounds: &[(f64, f64)],
    init: &[f64],
    eval: F,
    settings: &CalibrationSettings,
) -> (Vec<f64>, (f64, f64), usize)
where
    F: Fn(&[f64]) -> (f64, f64),
{
    let d = bounds.len();
    if d == 0 {
        return (Vec::new(), eval(&[]), 0);
    }
    let mut iterations = 0;

    // Differential evolution, rand/1/bin, lexicographic selection.
    let np = settings.population;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.optimizer_seed);
    let mut population: Vec<Vec<f64>> = Vec::with_capacity(np);
    let mut seeded = init.to_vec();
    clamp_to(bounds, &mut seeded);
    population.push(seeded);
    for _ in 1..np {
        let member: Vec<f64> = bounds
            .iter()
            .map(|(lo, hi)| lo + rng.random::<f64>() * (hi - lo))
            .collect();
        population.push(member);
    }
    let mut values: Vec<(f64, f64)> = population.iter().map(|m| eval(m)).collect();
    let mut best = 0usize;
    for i in 1..np {
        if tuple_less(values[i], values[best]) {
            best = i;
        }
    }

    const DIFF_WEIGHT: f64 = 0.8;
    const CROSSOVER: f64 = 0.9;
    let mut stall = 0usize;
    let mut trial = vec![0.0; d];
    for _ in 0..settings.max_iters {
        iterations += 1;
        let prev_best = values[best];
        for i in 0..np {
            let mut pick = || loop {
                let k = rng.random_range(0..np);
                if k != i {
                    return k;
                }
            };
            let (a, b, c) = (pick(), pick(), pick());
            let j_rand = rng.random_range(0..d);
            for j in 0..d {
                trial[j] = if rng.random::<f64>() < CROSSOVER || j == j_rand {
                    population[a][j] + DIFF_WEIGHT * (population[b][j] - population[c][j])
                } else {
                    population[i][j]
                };
            }
            clamp_to(bounds, &mut trial);
            let tv = eval(&trial);
            if tuple_less(tv, values[i]) {
                population[i].copy_from_slice(&trial);
                values[i] = tv;
                if tuple_less(tv, values[best]) {
                    best = i;
                }
            }
        }
        if values[best] == prev_best {
            stall += 1;
            if stall >= 60 {
                break;
            }
        } else {
            stall = 0;
        }
    }

    // Coordinate pattern search from the evolution's best member.
    let mut x = population[best].clone();
    let mut fx = values[best];
    let mut steps: Vec<f64> = bounds.iter().map(|(lo, hi)| (hi - lo) / 16.0).collect();
    for _ in 0..settings.max_iters {
        iterations += 1;
        let mut improved = false;
        for j in 0..d {
            for dir in [1.0, -1.0] {
                loop {
                    let proposal = (x[j] + dir * steps[j]).clamp(bounds[j].0, bounds[j].1);
                    if proposal == x[j] {
                        break;
                    }
                    let old = x[j];
                    x[j] = proposal;
                    let v = eval(&x);
                    if tuple_less(v, fx) {
                        fx = v;
                        improved = true;
                    } else {
                        x[j] = old;
                        break;
                    }
                }
            }
        }
        if !improved {
            for s in &mut steps {
                *s *= 0.5;
            }
            if steps.iter().all(|s| *s < 1e-10) {
                break;
            }
        }
    }
    (x, fx, iterations)
}

// ---------------------------------------------------------------------------
// Prepared quotes: reference periods resolved once into weights on the
// unknowns, so each objective evaluation is a handful of multiplications.
// ---------------------------------------------------------------------------

/// Monthly (averaging) quote reduced to an affine function of the unknowns.
struct LinearQuote {
    market: f64,
    tolerance: f64,
    n_days: f64,
    /// Observed fixings and fixed-parameter contributions, pre-summed.
    const_sum: f64,
    /// (unknown position, total day weight) for the level-like unknowns.
    weights: Vec<(usize, f64)>,
    /// Total model-priced day weight; multiplies the spread unknown.
    spread_weight: f64,
}

impl LinearQuote {
    fn price(&self, x: &[f64], spread: f64) -> f64 {
        let mut acc = self.const_sum + spread * self.spread_weight;
        for &(pos, w) in &self.weights {
            acc += x[pos] * w;
        }
        100.0 * (1.0 - acc / self.n_days)
    }
}

/// One weighted source day of a compounded quote.
struct CompoundSegment {
    weight: f64,
    /// Published fixing; when present the model terms are ignored.
    fixed: Option<f64>,
    /// Fixed target-curve rate for the day.
    base: f64,
    /// Spike unknown covering the day, if any.
    spike_pos: Option<usize>,
}

/// Quarterly (compounding) quote with per-segment composition.
struct CompoundQuote {
    market: f64,
    tolerance: f64,
    n_days: f64,
    segments: Vec<CompoundSegment>,
}

impl CompoundQuote {
    fn price(&self, x: &[f64], spread: f64) -> f64 {
        let mut product = 1.0;
        for seg in &self.segments {
            let rate = match seg.fixed {
                Some(r) => r,
                None => {
                    let mut r = seg.base + spread;
                    if let Some(pos) = seg.spike_pos {
                        r += x[pos];
                    }
                    r
                }
            };
            product *= 1.0 + seg.weight * rate / COMPOUND_DENOM;
        }
        100.0 * (1.0 - (product - 1.0) * COMPOUND_DENOM / self.n_days)
    }
}

struct PreparedObjective {
    linear: Vec<LinearQuote>,
    compound: Vec<CompoundQuote>,
    /// Position of the spread unknown; `None` fixes the spread at zero.
    spread_pos: Option<usize>,
}

impl PreparedObjective {
    fn spread_of(&self, x: &[f64]) -> f64 {
        self.spread_pos.map_or(0.0, |p| x[p])
    }

    /// Model prices in prepared order: linear quotes first, then compound.
    fn model_prices(&self, x: &[f64]) -> Vec<f64> {
        let spread = self.spread_of(x);
        self.linear
            .iter()
            .map(|q| q.price(x, spread))
            .chain(self.compound.iter().map(|q| q.price(x, spread)))
            .collect()
    }

    fn eval(&self, x: &[f64]) -> (f64, f64) {
        let spread = self.spread_of(x);
        let mut primary = 0.0;
        let mut secondary = 0.0;
        let mut account = |model: f64, market: f64, tol: f64| {
            let diff = model - market;
            let e = banded_error(diff, tol);
            primary += e * e;
            secondary += diff * diff;
        };
        for q in &self.linear {
            account(q.price(x, spread), q.market, q.tolerance);
        }
        for q in &self.compound {
            account(q.price(x, spread), q.market, q.tolerance);
        }
        if primary.is_finite() && secondary.is_finite() {
            (primary, secondary)
        } else {
            (f64::INFINITY, f64::INFINITY)
        }
    }
}

/// Index of the curve level applying on `date`: the number of policy dates
/// at or before it (the jump applies on the date itself).
fn interval_index(fomc_dates: &[NaiveDate], date: NaiveDate) -> usize {
    fomc_dates.partition_point(|x| *x <= date)
}

/// Spike covering `date` under the half-open day window
/// `[spike_date, spike_date + width)`.
fn spike_index(
    spike_dates: &[NaiveDate],
    spike_widths_days: &[i64],
    date: NaiveDate,
) -> Option<usize> {
    let k = spike_dates.partition_point(|z| *z <= date);
    if k == 0 {
        return None;
    }
    let j = k - 1;
    if (date - spike_dates[j]).num_days() < spike_widths_days[j] {
        Some(j)
    } else {
        None
    }
}

fn check_schedule(name: &str, dates: &[NaiveDate], valuation: NaiveDate) -> Result<()> {
    if !dates.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::data(format!(
            "{name} dates must be strictly increasing"
        )));
    }
    if let Some(first) = dates.first() {
        if *first <= valuation {
            return Err(Error::data(format!(
                "{name} date {first} is not after the valuation date {valuation}; \
                 drop past dates before calibrating"
            )));
        }
    }
    Ok(())
}

/// Sort quote indices canonically (nearest first) and deduplicate nothing:
/// the nearest quote gets the front tolerance.
fn sorted_quote_indices(quotes: &[&FuturesQuote]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..quotes.len()).collect();
    order.sort_by(|&a, &b| {
        let qa = quotes[a];
        let qb = quotes[b];
        (qa.contract.ref_start, qa.contract.kind.as_str(), &qa.contract.code)
            .cmp(&(qb.contract.ref_start, qb.contract.kind.as_str(), &qb.contract.code))
    });
    order
}

fn check_observe_dates(quotes: &[&FuturesQuote], valuation: NaiveDate) -> Result<()> {
    for q in quotes {
        if q.observe_date != valuation {
            return Err(Error::data(format!(
                "quote {} observed on {} but the calibration values {valuation}; \
                 one calibration run uses one observation date",
                q.contract.code, q.observe_date
            )));
        }
    }
    Ok(())
}

fn residual_rows(
    quotes: &[&FuturesQuote],
    order: &[usize],
    tolerances: &[f64],
    model_prices: &[f64],
) -> Vec<QuoteResidual> {
    order
        .iter()
        .enumerate()
        .map(|(slot, &qi)| {
            let q = quotes[qi];
            QuoteResidual {
                code: q.contract.code.clone(),
                kind: q.contract.kind.to_string(),
                ref_start: q.contract.ref_start,
                market_price: q.price,
                model_price: model_prices[slot],
                tolerance: tolerances[slot],
                error: banded_error(model_prices[slot] - q.price, tolerances[slot]),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Stage one: Fed Funds.
// ---------------------------------------------------------------------------

/// Fit the piecewise-flat target curve and the effective-rate spread to the
/// Fed Funds quotes in the problem (nearest twelve are used). When
/// `current_target` is given, the first interval's level is pinned to it and
/// the spread becomes a free, identified unknown; otherwise the spread is
/// fixed at zero.
pub fn calibrate_ff(
    problem: &CalibrationProblem,
    fomc_dates: &[NaiveDate],
    current_target: Option<f64>,
) -> Result<FfFit> {
    problem.settings.validate()?;
    check_schedule("policy", fomc_dates, problem.valuation_date)?;
    if let Some(t) = current_target {
        if !t.is_finite() {
            return Err(Error::invalid("current target rate must be finite"));
        }
    }

    let ff_quotes: Vec<&FuturesQuote> = problem
        .quotes
        .iter()
        .filter(|q| q.contract.kind == ContractKind::Ff30d)
        .collect();
    if ff_quotes.is_empty() {
        return Err(Error::data(
            "no Fed Funds quotes to calibrate the target curve against",
        ));
    }
    check_observe_dates(&ff_quotes, problem.valuation_date)?;
    let mut order = sorted_quote_indices(&ff_quotes);
    order.truncate(12);

    let n_levels = fomc_dates.len() + 1;
    let anchored = current_target.is_some();

    // Pass one: resolve each quote into per-interval day weights.
    struct Raw {
        market: f64,
        tolerance: f64,
        n_days: f64,
        fixed_sum: f64,
        interval_weights: Vec<(usize, f64)>,
        unobserved_weight: f64,
    }
    let mut raw: Vec<Raw> = Vec::with_capacity(order.len());
    let mut touched = vec![false; n_levels];
    let mut first_implied: Vec<Option<f64>> = vec![None; n_levels];
    for (slot, &qi) in order.iter().enumerate() {
        let q = ff_quotes[qi];
        let resolved = resolve(
            &q.contract,
            problem.calendar,
            problem.valuation_date,
            problem.fixings,
        )?;
        let mut fixed_sum = 0.0;
        let mut interval_weights: Vec<(usize, f64)> = Vec::new();
        let mut unobserved_weight = 0.0;
        for seg in resolved.segments() {
            match seg.observed {
                Some(rate) => fixed_sum += seg.weight * rate,
                None => {
                    let k = interval_index(fomc_dates, seg.source);
                    match interval_weights.iter_mut().find(|(i, _)| *i == k) {
                        Some((_, w)) => *w += seg.weight,
                        None => interval_weights.push((k, seg.weight)),
                    }
                    unobserved_weight += seg.weight;
                    touched[k] = true;
                    if first_implied[k].is_none() {
                        first_implied[k] = Some((100.0 - q.price) / 100.0);
                    }
                }
            }
        }
        raw.push(Raw {
            market: q.price,
            tolerance: if slot == 0 {
                problem.settings.tolerance_front
            } else {
                problem.settings.tolerance_back
            },
            n_days: resolved.n_days(),
            fixed_sum,
            interval_weights,
            unobserved_weight,
        });
    }

    // Unknown layout: free levels in interval order, then the spread.
    let mut position: Vec<Option<usize>> = vec![None; n_levels];
    let mut bounds: Vec<(f64, f64)> = Vec::new();
    let mut init: Vec<f64> = Vec::new();
    for k in 0..n_levels {
        let free = touched[k] && !(k == 0 && anchored);
        if free {
            position[k] = Some(bounds.len());
            bounds.push(problem.settings.level_bounds);
            init.push(first_implied[k].unwrap_or(0.0));
        }
    }
    let spread_identified = anchored && raw.iter().any(|r| r.unobserved_weight > 0.0);
    let spread_pos = if spread_identified {
        bounds.push(problem.settings.spread_bounds);
        init.push(0.0);
        Some(bounds.len() - 1)
    } else {
        None
    };

    // Pass two: fold pinned contributions into constants.
    let linear: Vec<LinearQuote> = raw
        .iter()
        .map(|r| {
            let mut const_sum = r.fixed_sum;
            let mut weights = Vec::new();
            for &(k, w) in &r.interval_weights {
                match position[k] {
                    Some(pos) => weights.push((pos, w)),
                    None => {
                        // Only the anchored first interval can be pinned yet
                        // carry weight.
                        const_sum += w * current_target.unwrap_or(0.0);
                    }
                }
            }
            LinearQuote {
                market: r.market,
                tolerance: r.tolerance,
                n_days: r.n_days,
                const_sum,
                weights,
                spread_weight: if spread_pos.is_some() {
                    r.unobserved_weight
                } else {
                    0.0
                },
            }
        })
        .collect();

    let objective = PreparedObjective {
        linear,
        compound: Vec::new(),
        spread_pos,
    };
    let (x, (primary, secondary), iterations) = optimize(
        &bounds,
        &init,
        |x| objective.eval(x),
        &problem.settings,
    );

    // Expand to the full level vector, inheriting across untouched gaps.
    let mut levels = vec![f64::NAN; n_levels];
    let mut identified = vec![false; n_levels];
    if anchored {
        levels[0] = current_target.unwrap_or(0.0);
        identified[0] = true;
    }
    for k in 0..n_levels {
        if let Some(pos) = position[k] {
            levels[k] = x[pos];
            identified[k] = true;
        }
    }
    if !identified.iter().any(|&b| b) {
        return Err(Error::data(
            "no quote identifies any curve level; cannot calibrate",
        ));
    }
    for k in 0..n_levels {
        if levels[k].is_nan() {
            levels[k] = match k {
                0 => {
                    let first = levels.iter().position(|v| !v.is_nan()).expect("some level set");
                    levels[first]
                }
                _ => levels[k - 1],
            };
        }
    }

    let tolerances: Vec<f64> = raw.iter().map(|r| r.tolerance).collect();
    let model_prices = objective.model_prices(&x);
    let residuals = residual_rows(&ff_quotes, &order, &tolerances, &model_prices);

    Ok(FfFit {
        fomc_dates: fomc_dates.to_vec(),
        levels,
        identified,
        spread: objective.spread_of(&x),
        spread_identified,
        residuals,
        objective: primary,
        secondary_objective: secondary,
        iterations,
        converged: primary <= problem.settings.converged_threshold,
        seed: problem.settings.optimizer_seed,
    })
}

// ---------------------------------------------------------------------------
// Stage two: SOFR.
// ---------------------------------------------------------------------------

/// Fit month-end spike levels and the SOFR spread to the one- and
/// three-month SOFR quotes jointly, holding the target curve from stage one
/// fixed. `target_levels` must have one more entry than `fomc_dates`.
pub fn calibrate_sofr(
    problem: &CalibrationProblem,
    fomc_dates: &[NaiveDate],
    target_levels: &[f64],
    spike_dates: &[NaiveDate],
    spike_widths_days: &[i64],
) -> Result<SofrFit> {
    problem.settings.validate()?;
    check_schedule("policy", fomc_dates, problem.valuation_date)?;
    check_schedule("spike", spike_dates, problem.valuation_date)?;
    if target_levels.len() != fomc_dates.len() + 1 {
        return Err(Error::invalid(format!(
            "{} target levels for {} policy dates; need one more level than dates",
            target_levels.len(),
            fomc_dates.len()
        )));
    }
    if spike_widths_days.len() != spike_dates.len() {
        return Err(Error::invalid(format!(
            "{} spike widths for {} spike dates",
            spike_widths_days.len(),
            spike_dates.len()
        )));
    }
    if spike_widths_days.iter().any(|&w| w < 1) {
        return Err(Error::invalid("spike widths must be at least one day"));
    }

    let sofr_quotes: Vec<&FuturesQuote> = problem
        .quotes
        .iter()
        .filter(|q| {
            matches!(
                q.contract.kind,
                ContractKind::Sofr1m | ContractKind::Sofr3m
            )
        })
        .collect();
    if sofr_quotes.is_empty() {
        return Err(Error::data(
            "no SOFR quotes to calibrate spikes and spread against",
        ));
    }
    check_observe_dates(&sofr_quotes, problem.valuation_date)?;
    let order = sorted_quote_indices(&sofr_quotes);

    // Pass one: resolve and classify each quote's model-priced days.
    enum RawQuote {
        Linear {
            market: f64,
            n_days: f64,
            fixed_sum: f64,
            base_sum: f64,
            spike_weights: Vec<(usize, f64)>,
            unobserved_weight: f64,
        },
        Compound {
            market: f64,
            n_days: f64,
            segments: Vec<CompoundSegment>,
        },
    }
    let mut raws: Vec<RawQuote> = Vec::with_capacity(order.len());
    let mut touched = vec![false; spike_dates.len()];
    let mut any_unobserved = false;
    for &qi in &order {
        let q = sofr_quotes[qi];
        let resolved = resolve(
            &q.contract,
            problem.calendar,
            problem.valuation_date,
            problem.fixings,
        )?;
        match q.contract.kind {
            ContractKind::Sofr1m => {
                let mut fixed_sum = 0.0;
                let mut base_sum = 0.0;
                let mut spike_weights: Vec<(usize, f64)> = Vec::new();
                let mut unobserved_weight = 0.0;
                for seg in resolved.segments() {
                    match seg.observed {
                        Some(rate) => fixed_sum += seg.weight * rate,
                        None => {
                            base_sum += seg.weight
                                * target_levels[interval_index(fomc_dates, seg.source)];
                            unobserved_weight += seg.weight;
                            any_unobserved = true;
                            if let Some(j) =
                                spike_index(spike_dates, spike_widths_days, seg.source)
                            {
                                touched[j] = true;
                                match spike_weights.iter_mut().find(|(i, _)| *i == j) {
                                    Some((_, w)) => *w += seg.weight,
                                    None => spike_weights.push((j, seg.weight)),
                                }
                            }
                        }
                    }
                }
                raws.push(RawQuote::Linear {
                    market: q.price,
                    n_days: resolved.n_days(),
                    fixed_sum,
                    base_sum,
                    spike_weights,
                    unobserved_weight,
                });
            }
            ContractKind::Sofr3m => {
                let mut segments = Vec::with_capacity(resolved.segments().len());
                for seg in resolved.segments() {
                    let spike = if seg.observed.is_none() {
                        any_unobserved = true;
                        let j = spike_index(spike_dates, spike_widths_days, seg.source);
                        if let Some(j) = j {
                            touched[j] = true;
                        }
                        j
                    } else {
                        None
                    };
                    segments.push(CompoundSegment {
                        weight: seg.weight,
                        fixed: seg.observed,
                        base: target_levels[interval_index(fomc_dates, seg.source)],
                        // Spike position is patched after layout below.
                        spike_pos: spike,
                    });
                }
                raws.push(RawQuote::Compound {
                    market: q.price,
                    n_days: resolved.n_days(),
                    segments,
                });
            }
            ContractKind::Ff30d => unreachable!("filtered above"),
        }
    }

    // Unknown layout: identified spikes in schedule order, then the spread.
    let mut position: Vec<Option<usize>> = vec![None; spike_dates.len()];
    let mut bounds: Vec<(f64, f64)> = Vec::new();
    let mut init: Vec<f64> = Vec::new();
    for j in 0..spike_dates.len() {
        if touched[j] {
            position[j] = Some(bounds.len());
            bounds.push(problem.settings.spike_bounds);
            init.push(0.0);
        }
    }
    let spread_identified = any_unobserved;
    let spread_pos = if spread_identified {
        bounds.push(problem.settings.spread_bounds);
        init.push(0.0);
        Some(bounds.len() - 1)
    } else {
        None
    };

    // Pass two: map schedule indices to unknown positions.
    let mut linear = Vec::new();
    let mut compound = Vec::new();
    let mut tolerances = Vec::with_capacity(raws.len());
    for (slot, r) in raws.into_iter().enumerate() {
        let tolerance = if slot == 0 {
            problem.settings.tolerance_front
        } else {
            problem.settings.tolerance_back
        };
        tolerances.push(tolerance);
        match r {
            RawQuote::Linear {
                market,
                n_days,
                fixed_sum,
                base_sum,
                spike_weights,
                unobserved_weight,
            } => linear.push(LinearQuote {
                market,
                tolerance,
                n_days,
                const_sum: fixed_sum + base_sum,
                weights: spike_weights
                    .into_iter()
                    .map(|(j, w)| (position[j].expect("touched spike has a position"), w))
                    .collect(),
                spread_weight: if spread_pos.is_some() {
                    unobserved_weight
                } else {
                    0.0
                },
            }),
            RawQuote::Compound {
                market,
                n_days,
                mut segments,
            } => {
                for seg in &mut segments {
                    seg.spike_pos = seg
                        .spike_pos
                        .map(|j| position[j].expect("touched spike has a position"));
                }
                compound.push(CompoundQuote {
                    market,
                    tolerance,
                    n_days,
                    segments,
                });
            }
        }
    }

    // The prepared objective stores linear quotes and compound quotes in
    // separate vectors; residual rows must follow the sorted quote order.
    enum Slot {
        Linear(usize),
        Compound(usize),
    }
    let mut prepared_slot = Vec::with_capacity(order.len());
    let (mut n_lin, mut n_cmp) = (0usize, 0usize);
    for &qi in &order {
        match sofr_quotes[qi].contract.kind {
            ContractKind::Sofr1m => {
                prepared_slot.push(Slot::Linear(n_lin));
                n_lin += 1;
            }
            ContractKind::Sofr3m => {
                prepared_slot.push(Slot::Compound(n_cmp));
                n_cmp += 1;
            }
            ContractKind::Ff30d => unreachable!(),
        }
    }

    let objective = PreparedObjective {
        linear,
        compound,
        spread_pos,
    };
    let (x, (primary, secondary), iterations) = optimize(
        &bounds,
        &init,
        |x| objective.eval(x),
        &problem.settings,
    );

    // Model prices back in sorted order.
    let spread_val = objective.spread_of(&x);
    let model_prices: Vec<f64> = prepared_slot
        .iter()
        .map(|slot| match *slot {
            Slot::Linear(i) => objective.linear[i].price(&x, spread_val),
            Slot::Compound(i) => objective.compound[i].price(&x, spread_val),
        })
        .collect();
    let residuals = residual_rows(&sofr_quotes, &order, &tolerances, &model_prices);

    let mut spike_levels = vec![0.0; spike_dates.len()];
    let mut identified = vec![false; spike_dates.len()];
    for j in 0..spike_dates.len() {
        if let Some(pos) = position[j] {
            spike_levels[j] = x[pos];
            identified[j] = true;
        }
    }

    Ok(SofrFit {
        spike_dates: spike_dates.to_vec(),
        spike_widths_days: spike_widths_days.to_vec(),
        spike_levels,
        identified,
        spread: spread_val,
        spread_identified,
        residuals,
        objective: primary,
        secondary_objective: secondary,
        iterations,
        converged: primary <= problem.settings.converged_threshold,
        seed: problem.settings.optimizer_seed,
    })
}

// ---------------------------------------------------------------------------
// Schedule and snapshot helpers.
// ---------------------------------------------------------------------------

/// Month-end spike schedule: for each month whose last business day falls in
/// `[from, to)`, the spike opens on that day and stays elevated until the
/// next business day (so a Friday month-end carries its weekend).
pub fn eom_spike_schedule(
    calendar: &BusinessCalendar,
    from: NaiveDate,
    to: NaiveDate,
) -> Result<(Vec<NaiveDate>, Vec<i64>)> {
    if from >= to {
        return Err(Error::invalid(format!(
            "empty spike schedule span [{from}, {to})"
        )));
    }
    let mut dates = Vec::new();
    let mut widths = Vec::new();
    let (mut year, mut month) = (from.year(), from.month());
    loop {
        let eom = calendar.last_business_day_of_month(year, month)?;
        if eom >= to {
            break;
        }
        if eom >= from {
            dates.push(eom);
            widths.push(calendar.days_to_next_business(eom)?);
        }
        let next = first_of_next_month(year, month)?;
        (year, month) = (next.year(), next.month());
    }
    Ok((dates, widths))
}

/// Assemble a deterministic model snapshot from the calibration results.
/// Volatilities are not calibrated and stay zero; supply them separately
/// before simulating.
pub fn build_spec(
    valuation: NaiveDate,
    calendar: &BusinessCalendar,
    ff: &FfFit,
    sofr: Option<&SofrFit>,
) -> ModelSpec {
    ModelSpec {
        anchor: valuation,
        calendar: calendar.clone(),
        fomc_dates: ff.fomc_dates.clone(),
        xi: Vec::new(),
        rho: Vec::new(),
        f0_knots: ff.fomc_dates.clone(),
        f0_levels: ff.levels.clone(),
        spike_dates: sofr.map(|s| s.spike_dates.clone()).unwrap_or_default(),
        spike_widths_days: sofr
            .map(|s| s.spike_widths_days.clone())
            .unwrap_or_default(),
        sigma_z: Vec::new(),
        spike_levels: sofr.map(|s| s.spike_levels.clone()).unwrap_or_default(),
        residual: ResidualParams::spread(sofr.map_or(0.0, |s| s.spread)),
        effr_spread: Some(ff.spread),
    }
}
