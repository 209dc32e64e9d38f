//! Spike component: transient rate spikes over short scheduled windows.
//!
//! Window `i` runs over `H_i = [z_i, z_i + h_i]` — typically the last
//! business day of a month extended over the following weekend. Inside the
//! window the short rate picks up an extra level driven by a dedicated
//! Brownian factor stopped at the window start, `W_i(t ∧ z_i)`; outside
//! every window the component vanishes identically. Windows are pairwise
//! disjoint and factors are independent of each other and of the step
//! component's.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::PiecewiseFlatCurve;
use crate::step::{check_horizon, ramp_integral};

const TIME_EQ_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeModelParams {
    /// Window starts `z_i`, strictly increasing, > 0.
    times: Vec<f64>,
    /// Window lengths `h_i > 0`; windows must not overlap.
    widths: Vec<f64>,
    /// Spike volatility per window, `>= 0`.
    sigma: Vec<f64>,
    /// Initial forward spike curve; identically zero outside the windows.
    f0: PiecewiseFlatCurve,
}

/// Factor state: `w[i] = W_i(t ∧ z_i)` — live until the window opens, frozen
/// afterwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeFactorState {
    t: f64,
    w: Vec<f64>,
}

impl SpikeFactorState {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }
}

impl SpikeModelParams {
    pub fn new(
        times: Vec<f64>,
        widths: Vec<f64>,
        sigma: Vec<f64>,
        f0: PiecewiseFlatCurve,
    ) -> Result<Self> {
        let n = times.len();
        if widths.len() != n || sigma.len() != n {
            return Err(Error::invalid(format!(
                "spike schedule of {n} dates needs {n} widths and sigmas, got {} and {}",
                widths.len(),
                sigma.len()
            )));
        }
        if !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("spike times must be strictly increasing"));
        }
        if times.iter().any(|&z| !z.is_finite() || z <= 0.0) {
            return Err(Error::invalid("spike times must be positive and finite"));
        }
        if widths.iter().any(|&h| !h.is_finite() || h <= 0.0) {
            return Err(Error::invalid("spike widths must be positive and finite"));
        }
        if sigma.iter().any(|&s| !s.is_finite() || s < 0.0) {
            return Err(Error::invalid("spike sigmas must be finite and non-negative"));
        }
        for i in 1..n {
            if times[i] <= times[i - 1] + widths[i - 1] {
                return Err(Error::invalid(format!(
                    "spike windows {} and {} overlap",
                    i - 1,
                    i
                )));
            }
        }
        check_zero_outside_windows(&f0, &times, &widths)?;
        Ok(SpikeModelParams {
            times,
            widths,
            sigma,
            f0,
        })
    }

    /// Build the initial curve from one level per window: `f(0, ·) = level_i`
    /// on `[z_i, z_i + h_i)` and zero elsewhere.
    pub fn from_levels(
        times: Vec<f64>,
        widths: Vec<f64>,
        sigma: Vec<f64>,
        levels: &[f64],
    ) -> Result<Self> {
        if levels.len() != times.len() {
            return Err(Error::invalid(format!(
                "expected {} spike levels, got {}",
                times.len(),
                levels.len()
            )));
        }
        let f0 = spike_curve(&times, &widths, levels)?;
        Self::new(times, widths, sigma, f0)
    }

    /// No spike windows at all.
    pub fn none() -> Self {
        SpikeModelParams {
            times: Vec::new(),
            widths: Vec::new(),
            sigma: Vec::new(),
            f0: PiecewiseFlatCurve::flat(0.0).expect("flat zero curve"),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn f0(&self) -> &PiecewiseFlatCurve {
        &self.f0
    }

    /// Window end `z_i + h_i`.
    pub fn window_end(&self, i: usize) -> f64 {
        self.times[i] + self.widths[i]
    }

    /// Is `s` inside window `i` (closed on both ends)?
    /// Window membership is half-open `[z, z + h)`: the opening instant is
    /// elevated, the closing instant is back to normal. Interval quantities
    /// (bond prices, integrals) are insensitive to the boundary convention;
    /// pointwise daily sampling is not, and half-open keeps a one-day window
    /// on exactly one fixing day.
    fn in_window(&self, i: usize, s: f64) -> bool {
        s >= self.times[i] && s < self.window_end(i)
    }

    pub fn initial_state(&self) -> SpikeFactorState {
        SpikeFactorState {
            t: 0.0,
            w: vec![0.0; self.times.len()],
        }
    }

    fn check_state(&self, state: &SpikeFactorState) -> Result<()> {
        if state.w.len() != self.times.len() {
            return Err(Error::invalid(format!(
                "state has {} spike factors for a schedule of {}",
                state.w.len(),
                self.times.len()
            )));
        }
        Ok(())
    }

    fn check_state_at(&self, state: &SpikeFactorState, t: f64) -> Result<()> {
        self.check_state(state)?;
        if (state.t - t).abs() > TIME_EQ_TOL {
            return Err(Error::invalid(format!(
                "spike state is at {} but evaluation time is {t}",
                state.t
            )));
        }
        Ok(())
    }

    /// A frozen `W_i(z_i)` is required whenever evaluation touches times at
    /// or past `z_i`; the state must have advanced that far.
    fn require_frozen_through(&self, state: &SpikeFactorState, s: f64) -> Result<()> {
        for &z in &self.times {
            if z > state.t + TIME_EQ_TOL && z <= s {
                return Err(Error::invalid(format!(
                    "state at {} has not frozen the spike factor opening at {z}",
                    state.t
                )));
            }
        }
        Ok(())
    }

    /// Instantaneous forward spike `f(t, T)`.
    pub fn forward_rate(&self, state: &SpikeFactorState, t: f64, big_t: f64) -> Result<f64> {
        self.check_state_at(state, t)?;
        check_horizon(t, big_t)?;
        let mut f = self.f0.value(big_t);
        for i in 0..self.times.len() {
            if !self.in_window(i, big_t) {
                continue;
            }
            let z = self.times[i];
            f += self.sigma[i].powi(2) * (big_t - z) * t.min(z);
            f += self.sigma[i] * state.w[i];
        }
        Ok(f)
    }

    /// Short rate contribution `r(t)`; identically zero outside the windows.
    pub fn short_rate(&self, state: &SpikeFactorState, t: f64) -> Result<f64> {
        self.check_state(state)?;
        self.require_frozen_through(state, t)?;
        Ok(self.deterministic_short_rate(t) + self.stochastic_short_rate(state, t))
    }

    pub fn deterministic_short_rate(&self, s: f64) -> f64 {
        let mut r = self.f0.value(s);
        for i in 0..self.times.len() {
            if self.in_window(i, s) {
                let z = self.times[i];
                r += self.sigma[i].powi(2) * (s - z) * z;
            }
        }
        r
    }

    /// Realized spike level: non-zero only inside a window, where it equals
    /// `sigma_i * W_i(z_i)`.
    pub fn stochastic_short_rate(&self, state: &SpikeFactorState, s: f64) -> f64 {
        let mut r = 0.0;
        for i in 0..self.times.len() {
            if self.in_window(i, s) {
                r += self.sigma[i] * state.w[i];
            }
        }
        r
    }

    /// Conditional expectation `E_t[r^Z(s)]` for `s >= state.t`: windows not
    /// yet open use the live factor value, their martingale expectation.
    pub fn expected_short_rate(&self, state: &SpikeFactorState, s: f64) -> Result<f64> {
        self.check_state(state)?;
        if s < state.t - TIME_EQ_TOL {
            return Err(Error::invalid(format!(
                "expectation time {s} is before the state time {}",
                state.t
            )));
        }
        Ok(self.deterministic_short_rate(s) + self.stochastic_short_rate(state, s))
    }

    /// Zero-coupon bond factor `B(t, T)` in closed form.
    pub fn bond_price(&self, state: &SpikeFactorState, t: f64, big_t: f64) -> Result<f64> {
        self.check_state_at(state, t)?;
        check_horizon(t, big_t)?;
        let mut exponent = -self.f0.integral(t, big_t)?;
        for i in 0..self.times.len() {
            let z = self.times[i];
            let h = self.widths[i];
            // Drift: -sigma^2 (t ∧ z) int_t^T 1(s in H)(s - z) ds, where the
            // half-squared overlap caps at h^2/2 once the window has closed.
            let i1 = if big_t >= z {
                (big_t - z).min(h).powi(2) / 2.0
            } else {
                0.0
            };
            let i2 = if t >= z {
                (t - z).min(h).powi(2) / 2.0
            } else {
                0.0
            };
            exponent -= self.sigma[i].powi(2) * t.min(z) * (i1 - i2);

            // Stochastic: -sigma W(t ∧ z) × length of [t, T] ∩ H_i.
            let overlap = (big_t - z).min(big_t - t).min(h).min(z + h - t).max(0.0);
            exponent -= self.sigma[i] * state.w[i] * overlap;
        }
        Ok(exponent.exp())
    }

    /// Exact integral of the deterministic part over `[a, b]`.
    pub fn deterministic_integral(&self, a: f64, b: f64) -> Result<f64> {
        let mut total = self.f0.integral(a, b)?;
        for i in 0..self.times.len() {
            let z = self.times[i];
            let end = self.window_end(i);
            // int 1(s in H)(s - z) ds over [a, b]: ramp clipped to the window.
            let lo = a.max(z).min(end);
            let hi = b.max(z).min(end);
            if hi > lo {
                total += self.sigma[i].powi(2) * z * ramp_integral(z, z, lo, hi);
            }
        }
        Ok(total)
    }

    /// Exact integral of the realized spike levels over `[a, b]`.
    pub fn stochastic_integral(&self, state: &SpikeFactorState, a: f64, b: f64) -> Result<f64> {
        self.check_state(state)?;
        if a > b {
            return Err(Error::invalid(format!("integration bounds {a} > {b}")));
        }
        self.require_frozen_through(state, b)?;
        let mut total = 0.0;
        for i in 0..self.times.len() {
            let z = self.times[i];
            if z >= b {
                break;
            }
            let overlap = b.min(self.window_end(i)) - a.max(z);
            if overlap > 0.0 {
                total += self.sigma[i] * state.w[i] * overlap;
            }
        }
        Ok(total)
    }

    /// Advance the spike factors by `dt`; factor `i` stops at `z_i`.
    pub fn evolve(
        &self,
        state: &SpikeFactorState,
        dt: f64,
        normals: &[f64],
    ) -> Result<SpikeFactorState> {
        if !dt.is_finite() || dt < 0.0 {
            return Err(Error::invalid(format!("step dt must be >= 0, got {dt}")));
        }
        self.evolve_to(state, state.t + dt, normals)
    }

    /// Advance to time `t1` exactly; see the step model's `evolve_to` for why
    /// the target time rather than an increment decides crossings.
    pub fn evolve_to(
        &self,
        state: &SpikeFactorState,
        t1: f64,
        normals: &[f64],
    ) -> Result<SpikeFactorState> {
        self.check_state(state)?;
        let t0 = state.t;
        if !t1.is_finite() || t1 < t0 {
            return Err(Error::invalid(format!(
                "evolve target {t1} precedes the state time {t0}"
            )));
        }
        if normals.len() != self.times.len() {
            return Err(Error::invalid(format!(
                "expected {} normals, got {}",
                self.times.len(),
                normals.len()
            )));
        }
        if normals.iter().any(|&z| !z.is_finite()) {
            return Err(Error::invalid("normals must be finite"));
        }
        let dt = t1 - t0;
        let mut w = state.w.clone();
        for i in 0..self.times.len() {
            let z = self.times[i];
            if z <= t0 {
                continue; // already frozen
            }
            // Not yet reached: the full step accrues. Crossing inside the
            // step: only the sub-interval up to the window start.
            let effective = if z >= t1 { dt } else { z - t0 };
            w[i] += effective.sqrt() * normals[i];
        }
        Ok(SpikeFactorState { t: t1, w })
    }
}

/// Build a spike forward curve: `levels[i]` on `[z_i, z_i + h_i)`, zero
/// elsewhere.
pub fn spike_curve(times: &[f64], widths: &[f64], levels: &[f64]) -> Result<PiecewiseFlatCurve> {
    let mut knots = Vec::with_capacity(times.len() * 2);
    let mut vals = vec![0.0];
    for i in 0..times.len() {
        knots.push(times[i]);
        vals.push(levels[i]);
        knots.push(times[i] + widths[i]);
        vals.push(0.0);
    }
    PiecewiseFlatCurve::new(knots, vals)
}

fn check_zero_outside_windows(
    f0: &PiecewiseFlatCurve,
    times: &[f64],
    widths: &[f64],
) -> Result<()> {
    // Examine every flat piece of f0: a non-zero level must lie inside a window.
    let knots = f0.knots();
    let levels = f0.levels();
    for (idx, &level) in levels.iter().enumerate() {
        if level == 0.0 {
            continue;
        }
        let lo = if idx == 0 { f64::NEG_INFINITY } else { knots[idx - 1] };
        let hi = if idx == knots.len() { f64::INFINITY } else { knots[idx] };
        let contained = (0..times.len())
            .any(|i| lo >= times[i] && hi <= times[i] + widths[i]);
        if !contained {
            return Err(Error::invalid(format!(
                "spike curve is non-zero on [{lo}, {hi}) outside every window"
            )));
        }
    }
    Ok(())
}
