//! Composite model: the short rate is the sum of the step, spike, and
//! residual components, forwards add, and bond prices multiply. This module
//! assembles the three components on a shared date grid, exposes the joint
//! closed forms, and advances the joint state with exact per-interval
//! discount accrual.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{BusinessCalendar, DateGrid, JumpSchedule, PiecewiseFlatCurve};
use crate::residual::ResidualParams;
use crate::spike::{SpikeFactorState, SpikeModelParams};
use crate::step::{StepFactorState, StepModelParams};

const TIME_EQ_TOL: f64 = 1e-12;

/// Serialized model snapshot: everything needed to rebuild the composite,
/// expressed in dates (converted to year fractions on load).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Valuation date: model time zero.
    pub anchor: NaiveDate,
    #[serde(default = "default_calendar")]
    pub calendar: BusinessCalendar,

    /// Policy-meeting dates carrying persistent level jumps.
    #[serde(default)]
    pub fomc_dates: Vec<NaiveDate>,
    /// Jump volatilities per meeting date (one jump's standard deviation).
    #[serde(default)]
    pub xi: Vec<f64>,
    /// Jump correlation matrix; identity when omitted.
    #[serde(default)]
    pub rho: Vec<Vec<f64>>,
    /// Initial forward curve of the step component: piecewise flat with jumps
    /// at the knot dates.
    #[serde(default)]
    pub f0_knots: Vec<NaiveDate>,
    pub f0_levels: Vec<f64>,

    /// Month-end spike window start dates.
    #[serde(default)]
    pub spike_dates: Vec<NaiveDate>,
    /// Window widths in calendar days, one per spike date.
    #[serde(default)]
    pub spike_widths_days: Vec<i64>,
    /// Spike volatilities, one per spike date.
    #[serde(default)]
    pub sigma_z: Vec<f64>,
    /// Initial spike forward levels, one per spike date (the curve is zero
    /// outside the windows).
    #[serde(default)]
    pub spike_levels: Vec<f64>,

    /// Residual component: `{"spread": s}` or full Vasicek parameters.
    #[serde(default = "default_residual")]
    pub residual: ResidualParams,

    /// Constant spread of the effective funds rate over the target rate, used
    /// when pricing Fed Funds contracts off this model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effr_spread: Option<f64>,
}

fn default_calendar() -> BusinessCalendar {
    BusinessCalendar::standard([]).expect("standard weekend rule is valid")
}

fn default_residual() -> ResidualParams {
    ResidualParams::spread(0.0)
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::invalid(format!("model snapshot does not parse: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model spec serializes")
    }
}

/// Joint state of all three components at one time, plus the exact running
/// integral of the short rate from time zero along the path.
#[derive(Clone, Debug)]
pub struct CompositeState {
    t: f64,
    step: StepFactorState,
    spike: SpikeFactorState,
    residual_rate: f64,
    integral: f64,
}

impl CompositeState {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn step(&self) -> &StepFactorState {
        &self.step
    }

    pub fn spike(&self) -> &SpikeFactorState {
        &self.spike
    }

    /// Residual component level `r^V(t)`.
    pub fn residual_rate(&self) -> f64 {
        self.residual_rate
    }

    /// `int_0^t r(s) ds` accumulated exactly along the path.
    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// Path discount factor `exp(-int_0^t r ds)`.
    pub fn discount(&self) -> f64 {
        (-self.integral).exp()
    }
}

#[derive(Clone, Debug)]
pub struct CompositeModel {
    step: StepModelParams,
    spike: SpikeModelParams,
    residual: ResidualParams,
    grid: DateGrid,
    calendar: BusinessCalendar,
    effr_spread: Option<f64>,
}

impl CompositeModel {
    pub fn new(
        step: StepModelParams,
        spike: SpikeModelParams,
        residual: ResidualParams,
        grid: DateGrid,
        calendar: BusinessCalendar,
    ) -> Result<Self> {
        residual.validate()?;
        Ok(CompositeModel {
            step,
            spike,
            residual,
            grid,
            calendar,
            effr_spread: None,
        })
    }

    /// Build the composite from a snapshot, converting all dates to year
    /// fractions on the anchor's grid.
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let grid = DateGrid::new(spec.anchor)?;

        let n = spec.fomc_dates.len();
        let step_times = if n > 0 {
            JumpSchedule::step(spec.fomc_dates.clone())?.times(&grid)?
        } else {
            Vec::new()
        };
        let xi = if spec.xi.is_empty() {
            vec![0.0; n]
        } else {
            spec.xi.clone()
        };
        let rho = if spec.rho.is_empty() {
            identity_matrix(n)
        } else {
            spec.rho.clone()
        };
        let f0_times = {
            let mut ts = Vec::with_capacity(spec.f0_knots.len());
            for &d in &spec.f0_knots {
                let t = grid.year_fraction(d)?;
                if t <= 0.0 {
                    return Err(Error::data(format!(
                        "curve knot {d} is not strictly after the anchor {}",
                        spec.anchor
                    )));
                }
                ts.push(t);
            }
            ts
        };
        let f0 = PiecewiseFlatCurve::new(f0_times, spec.f0_levels.clone())?;
        let step = StepModelParams::new(step_times, xi, rho, f0)?;

        let m = spec.spike_dates.len();
        let spike = if m == 0 {
            SpikeModelParams::none()
        } else {
            let sched =
                JumpSchedule::spike(spec.spike_dates.clone(), spec.spike_widths_days.clone())?;
            let times = sched.times(&grid)?;
            let widths = sched.widths(&grid)?;
            let sigma = if spec.sigma_z.is_empty() {
                vec![0.0; m]
            } else {
                spec.sigma_z.clone()
            };
            let levels = if spec.spike_levels.is_empty() {
                vec![0.0; m]
            } else {
                spec.spike_levels.clone()
            };
            if levels.len() != m {
                return Err(Error::invalid(format!(
                    "{} spike levels for {m} spike dates",
                    levels.len()
                )));
            }
            SpikeModelParams::from_levels(times, widths, sigma, &levels)?
        };

        let mut model = CompositeModel::new(
            step,
            spike,
            spec.residual,
            grid,
            spec.calendar.clone(),
        )?;
        model.effr_spread = spec.effr_spread;
        Ok(model)
    }

    pub fn step(&self) -> &StepModelParams {
        &self.step
    }

    pub fn spike(&self) -> &SpikeModelParams {
        &self.spike
    }

    pub fn residual(&self) -> &ResidualParams {
        &self.residual
    }

    pub fn grid(&self) -> &DateGrid {
        &self.grid
    }

    pub fn calendar(&self) -> &BusinessCalendar {
        &self.calendar
    }

    pub fn effr_spread(&self) -> Option<f64> {
        self.effr_spread
    }

    pub fn set_effr_spread(&mut self, spread: Option<f64>) {
        self.effr_spread = spread;
    }

    /// The assembly that prices Fed Funds contracts: the same target-rate
    /// step component, no spikes, and the constant effective-rate spread as
    /// the residual.
    pub fn ff_variant(&self) -> Result<CompositeModel> {
        let spread = self.effr_spread.ok_or_else(|| {
            Error::invalid("model carries no effr_spread; cannot price Fed Funds contracts")
        })?;
        Ok(CompositeModel {
            step: self.step.clone(),
            spike: SpikeModelParams::none(),
            residual: ResidualParams::spread(spread),
            grid: self.grid,
            calendar: self.calendar.clone(),
            effr_spread: Some(spread),
        })
    }

    /// True when every stochastic degree of freedom is switched off.
    pub fn is_deterministic(&self) -> bool {
        self.step.xi().iter().all(|&x| x == 0.0)
            && self.spike.sigma().iter().all(|&s| s == 0.0)
            && self.residual.is_deterministic()
    }

    /// All component event times (step dates, spike window starts and ends),
    /// sorted and deduplicated.
    pub fn event_times(&self) -> Vec<f64> {
        let mut events: Vec<f64> = self.step.times().to_vec();
        for i in 0..self.spike.len() {
            events.push(self.spike.times()[i]);
            events.push(self.spike.window_end(i));
        }
        events.sort_by(|a, b| a.partial_cmp(b).expect("event times are finite"));
        events.dedup();
        events
    }

    pub fn initial_state(&self) -> CompositeState {
        CompositeState {
            t: 0.0,
            step: self.step.initial_state(),
            spike: self.spike.initial_state(),
            residual_rate: self.residual.initial_rate(),
            integral: 0.0,
        }
    }

    fn check_state_at(&self, state: &CompositeState, t: f64) -> Result<()> {
        if (state.t - t).abs() > TIME_EQ_TOL {
            return Err(Error::invalid(format!(
                "composite state is at {} but evaluation time is {t}",
                state.t
            )));
        }
        Ok(())
    }

    /// Short rate `r(t) = r^P(t) + r^Z(t) + r^V(t)`.
    pub fn short_rate(&self, state: &CompositeState, t: f64) -> Result<f64> {
        self.check_state_at(state, t)?;
        Ok(self.step.short_rate(&state.step, t)?
            + self.spike.short_rate(&state.spike, t)?
            + state.residual_rate)
    }

    /// Instantaneous forward rate: the sum of the component forwards.
    pub fn forward_rate(&self, state: &CompositeState, t: f64, big_t: f64) -> Result<f64> {
        self.check_state_at(state, t)?;
        Ok(self.step.forward_rate(&state.step, t, big_t)?
            + self.spike.forward_rate(&state.spike, t, big_t)?
            + self.residual.forward_rate(t, big_t, state.residual_rate)?)
    }

    /// Zero-coupon bond: the product of the component bonds.
    pub fn bond_price(&self, state: &CompositeState, t: f64, big_t: f64) -> Result<f64> {
        self.check_state_at(state, t)?;
        Ok(self.step.bond_price(&state.step, t, big_t)?
            * self.spike.bond_price(&state.spike, t, big_t)?
            * self.residual.bond_price(t, big_t, state.residual_rate)?)
    }

    /// Conditional expectation `E_t[r(s)]` for `s >= t`: deterministic terms
    /// at `s`, stopped factors at their current (frozen or live) values, and
    /// the mean-reverting residual decayed toward its long-run level.
    pub fn expected_short_rate(&self, state: &CompositeState, t: f64, s: f64) -> Result<f64> {
        self.check_state_at(state, t)?;
        if s < t - TIME_EQ_TOL {
            return Err(Error::invalid(format!(
                "expectation time {s} is before the evaluation time {t}"
            )));
        }
        Ok(self.step.expected_short_rate(&state.step, s)?
            + self.spike.expected_short_rate(&state.spike, s)?
            + self.residual.conditional_mean(t, s, state.residual_rate))
    }

    /// `E_t[r(s)]` with `s` given as a date on the model grid.
    pub fn expected_rate_on(&self, state: &CompositeState, date: NaiveDate) -> Result<f64> {
        let s = self.grid.year_fraction(date)?;
        self.expected_short_rate(state, state.t, s)
    }

    /// Advance the joint state to `target`, accruing the short-rate integral
    /// exactly over the interval. The caller must not skip event times (step
    /// dates or spike window starts); the simulator's grid guarantees that.
    pub(crate) fn advance(
        &self,
        state: &CompositeState,
        target: f64,
        step_normals: &[f64],
        spike_normals: &[f64],
        residual_normals: (f64, f64),
    ) -> Result<CompositeState> {
        let t0 = state.t;
        if target < t0 {
            return Err(Error::invalid(format!(
                "simulation target {target} precedes the state time {t0}"
            )));
        }
        let step = self.step.evolve_to(&state.step, target, step_normals)?;
        let spike = self.spike.evolve_to(&state.spike, target, spike_normals)?;

        let deterministic = self.step.deterministic_integral(t0, target)?
            + self.spike.deterministic_integral(t0, target)?;
        let stochastic = self.step.stochastic_integral(&step, t0, target)?
            + self.spike.stochastic_integral(&spike, t0, target)?;
        let (residual_rate, residual_integral) = self.residual.evolve_with_integral(
            state.residual_rate,
            target - t0,
            residual_normals.0,
            residual_normals.1,
        )?;

        Ok(CompositeState {
            t: target,
            step,
            spike,
            residual_rate,
            integral: state.integral + deterministic + stochastic + residual_integral,
        })
    }
}

fn identity_matrix(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|r| (0..n).map(|c| if r == c { 1.0 } else { 0.0 }).collect())
        .collect()
}
