//! Step component: persistent target-rate moves at scheduled policy dates.
//!
//! Rates move only at known dates `x_1 < ... < x_n`. Each date carries a
//! Gaussian jump whose size is driven by correlated Brownian factors stopped
//! at the date: factor `j` contributes `lambda[i][j] * W_j(t ∧ x_i)` to the
//! jump at `x_i`, scaled by `xi[i]`. Before `x_i` the jump expectation moves
//! with the live factors (anticipation); at `x_i` it freezes. The
//! no-arbitrage drift couples every pair of dates through the factor
//! correlation `rho`.
//!
//! Everything here is piecewise polynomial between schedule dates, so bond
//! prices and discount integrals have exact closed forms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::PiecewiseFlatCurve;

/// Tolerance for validating that `rho` is symmetric with unit diagonal.
const CORRELATION_SHAPE_TOL: f64 = 1e-9;
/// Eigenvalues above `-PSD_TOL` are clamped to zero; anything lower fails.
const PSD_TOL: f64 = 1e-8;
/// Two time points are treated as the same instant within this tolerance.
const TIME_EQ_TOL: f64 = 1e-12;

/// Factor the correlation matrix as `lambda * lambda^T = rho`.
///
/// Strictly positive definite input takes the Cholesky route (lower
/// triangular result). Semidefinite input falls back to a symmetric
/// eigendecomposition with eigenvalues sorted descending and tiny negative
/// eigenvalues clamped to zero, so rank-deficient correlation structures
/// (perfectly co-moving dates) factor cleanly with zero trailing columns.
pub fn decompose_correlation(rho: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = rho.len();
    for (q, row) in rho.iter().enumerate() {
        if row.len() != n {
            return Err(Error::invalid(format!(
                "correlation matrix row {q} has {} entries, expected {n}",
                row.len()
            )));
        }
        for (i, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::invalid("correlation entries must be finite"));
            }
            if (v - rho[i][q]).abs() > CORRELATION_SHAPE_TOL {
                return Err(Error::invalid(format!(
                    "correlation matrix is not symmetric at ({q},{i})"
                )));
            }
        }
        if (row[q] - 1.0).abs() > CORRELATION_SHAPE_TOL {
            return Err(Error::invalid(format!(
                "correlation matrix diagonal entry {q} is {} (expected 1)",
                row[q]
            )));
        }
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    let m = nalgebra::DMatrix::from_fn(n, n, |r, c| rho[r][c]);
    if let Some(chol) = m.clone().cholesky() {
        let l = chol.l();
        return Ok((0..n)
            .map(|r| (0..n).map(|c| l[(r, c)]).collect())
            .collect());
    }

    let eig = nalgebra::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut lambda = vec![vec![0.0; n]; n];
    for (col, &k) in order.iter().enumerate() {
        let ev = eig.eigenvalues[k];
        if ev < -PSD_TOL {
            return Err(Error::invalid(format!(
                "correlation matrix is not positive semidefinite (eigenvalue {ev:.3e})"
            )));
        }
        let scale = ev.max(0.0).sqrt();
        if scale == 0.0 {
            continue; // columns beyond the rank stay zero
        }
        for r in 0..n {
            lambda[r][col] = eig.eigenvectors[(r, k)] * scale;
        }
    }
    Ok(lambda)
}

/// Parameters of the step component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepModelParams {
    /// Schedule dates `x_i` as year fractions, strictly increasing, > 0.
    times: Vec<f64>,
    /// Jump volatility scale per date, `>= 0`.
    xi: Vec<f64>,
    /// Factor correlation across dates.
    rho: Vec<Vec<f64>>,
    /// `lambda * lambda^T = rho`; derived, never supplied.
    #[serde(skip)]
    lambda: Vec<Vec<f64>>,
    /// Initial forward curve `f(0, ·)` for this component.
    f0: PiecewiseFlatCurve,
}

/// Brownian factor state for the step component.
///
/// Stopped values are stored minimally: `frozen[i][j] = W_j(x_i)` for every
/// schedule date already passed (a prefix of the schedule), and `live[j] =
/// W_j(t)` for the factors still running.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepFactorState {
    t: f64,
    live: Vec<f64>,
    frozen: Vec<Vec<f64>>,
}

impl StepFactorState {
    pub fn t(&self) -> f64 {
        self.t
    }

    /// `W_j(t ∧ x_i)` given the schedule index `i`.
    fn w(&self, j: usize, i: usize) -> f64 {
        if i < self.frozen.len() {
            self.frozen[i][j]
        } else {
            self.live[j]
        }
    }

    pub fn live(&self) -> &[f64] {
        &self.live
    }

    pub fn frozen(&self) -> &[Vec<f64>] {
        &self.frozen
    }
}

impl StepModelParams {
    pub fn new(
        times: Vec<f64>,
        xi: Vec<f64>,
        rho: Vec<Vec<f64>>,
        f0: PiecewiseFlatCurve,
    ) -> Result<Self> {
        let n = times.len();
        if !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("schedule times must be strictly increasing"));
        }
        if times.iter().any(|&x| !x.is_finite() || x <= 0.0) {
            return Err(Error::invalid("schedule times must be positive and finite"));
        }
        if xi.len() != n {
            return Err(Error::invalid(format!(
                "xi has {} entries for {n} schedule dates",
                xi.len()
            )));
        }
        if xi.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::invalid("xi entries must be finite and non-negative"));
        }
        let lambda = decompose_correlation(&rho)?;
        Ok(StepModelParams {
            times,
            xi,
            rho,
            lambda,
            f0,
        })
    }

    /// Deterministic model: no schedule dates, just the initial curve.
    pub fn deterministic(f0: PiecewiseFlatCurve) -> Self {
        StepModelParams {
            times: Vec::new(),
            xi: Vec::new(),
            rho: Vec::new(),
            lambda: Vec::new(),
            f0,
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

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn rho(&self) -> &[Vec<f64>] {
        &self.rho
    }

    pub fn lambda(&self) -> &[Vec<f64>] {
        &self.lambda
    }

    pub fn f0(&self) -> &PiecewiseFlatCurve {
        &self.f0
    }

    /// Rebuild `lambda` after deserialization (it is not serialized).
    pub fn refresh_factorization(&mut self) -> Result<()> {
        self.lambda = decompose_correlation(&self.rho)?;
        Ok(())
    }

    pub fn initial_state(&self) -> StepFactorState {
        StepFactorState {
            t: 0.0,
            live: vec![0.0; self.times.len()],
            frozen: Vec::new(),
        }
    }

    /// Number of schedule dates at or before `t`.
    fn passed(&self, t: f64) -> usize {
        self.times.partition_point(|&x| x <= t)
    }

    fn check_state(&self, state: &StepFactorState) -> Result<()> {
        if state.live.len() != self.times.len() {
            return Err(Error::invalid(format!(
                "state has {} factors for a schedule of {}",
                state.live.len(),
                self.times.len()
            )));
        }
        Ok(())
    }

    fn check_state_at(&self, state: &StepFactorState, t: f64) -> Result<()> {
        self.check_state(state)?;
        if (state.t - t).abs() > TIME_EQ_TOL {
            return Err(Error::invalid(format!(
                "state is at {} but evaluation time is {t}",
                state.t
            )));
        }
        Ok(())
    }

    /// Instantaneous forward rate `f(t, T)` given the factor state at `t`.
    pub fn forward_rate(&self, state: &StepFactorState, t: f64, big_t: f64) -> Result<f64> {
        self.check_state_at(state, t)?;
        check_horizon(t, big_t)?;
        let mut f = self.f0.value(big_t) + self.forward_drift(t, big_t);
        for (i, &x_i) in self.times.iter().enumerate() {
            if big_t < x_i {
                continue;
            }
            let mut load = 0.0;
            for j in 0..self.times.len() {
                load += self.lambda[i][j] * state.w(j, i);
            }
            f += self.xi[i] * load;
        }
        Ok(f)
    }

    /// Drift part of `f(t, T)`: pairs of schedule dates accrue covariance
    /// until the earlier of `t` and both dates.
    fn forward_drift(&self, t: f64, big_t: f64) -> f64 {
        let mut drift = 0.0;
        for (q, &x_q) in self.times.iter().enumerate() {
            for (i, &x_i) in self.times.iter().enumerate() {
                if big_t < x_q.max(x_i) {
                    continue;
                }
                let c = self.xi[q] * self.xi[i] * self.rho[q][i];
                drift += c * (big_t - x_i) * t.min(x_q).min(x_i);
            }
        }
        drift
    }

    /// Short rate `r(t) = f(t, t)`. Needs only the frozen factor values for
    /// dates at or before `t`, so any state that has passed those dates works.
    pub fn short_rate(&self, state: &StepFactorState, t: f64) -> Result<f64> {
        self.check_state(state)?;
        let passed = self.passed(t);
        if state.frozen.len() < passed {
            return Err(Error::invalid(format!(
                "state frozen {} of {passed} schedule dates needed for t={t}",
                state.frozen.len()
            )));
        }
        Ok(self.deterministic_short_rate(t) + self.stochastic_short_rate(state, t))
    }

    /// Deterministic part of the short rate: initial curve plus accrued drift.
    pub fn deterministic_short_rate(&self, t: f64) -> f64 {
        let mut r = self.f0.value(t);
        for (q, &x_q) in self.times.iter().enumerate() {
            for (i, &x_i) in self.times.iter().enumerate() {
                if t < x_q.max(x_i) {
                    continue;
                }
                r += self.xi[q] * self.xi[i] * self.rho[q][i] * (t - x_i) * x_q.min(x_i);
            }
        }
        r
    }

    /// Stochastic part of the short rate: the realized jumps, constant
    /// between schedule dates.
    pub fn stochastic_short_rate(&self, state: &StepFactorState, t: f64) -> f64 {
        let mut r = 0.0;
        for (i, &x_i) in self.times.iter().enumerate() {
            if t < x_i {
                continue;
            }
            let mut load = 0.0;
            for j in 0..self.times.len() {
                load += self.lambda[i][j] * state.w(j, i);
            }
            r += self.xi[i] * load;
        }
        r
    }

    /// Conditional expectation `E_t[r^P(s)]` for `s >= state.t`: stopped
    /// factors are martingales, so dates not yet frozen use the live factor
    /// values and the deterministic terms are taken at `s`.
    pub fn expected_short_rate(&self, state: &StepFactorState, s: f64) -> Result<f64> {
        self.check_state(state)?;
        if s < state.t - TIME_EQ_TOL {
            return Err(Error::invalid(format!(
                "expectation time {s} is before the state time {}",
                state.t
            )));
        }
        // Same sum as stochastic_short_rate, but state.w falls back to the
        // live value for dates beyond the frozen prefix.
        Ok(self.deterministic_short_rate(s) + self.stochastic_short_rate(state, s))
    }

    /// Zero-coupon bond `B(t, T)` in closed form.
    pub fn bond_price(&self, state: &StepFactorState, t: f64, big_t: f64) -> Result<f64> {
        self.check_state_at(state, t)?;
        check_horizon(t, big_t)?;
        // Initial-curve part: B(0,T)/B(0,t) = exp(-int_t^T f0).
        let mut exponent = -self.f0.integral(t, big_t)?;

        // Drift part: a(t,T) = -sum c * (t ∧ x_q ∧ x_i) * int_t^T 1(s >= x_max)(s - x_i) ds.
        for (q, &x_q) in self.times.iter().enumerate() {
            for (i, &x_i) in self.times.iter().enumerate() {
                let c = self.xi[q] * self.xi[i] * self.rho[q][i];
                exponent -=
                    c * t.min(x_q).min(x_i) * ramp_integral(x_q.max(x_i), x_i, t, big_t);
            }
        }

        // Stochastic part: b(t,T) = -sum xi_i lambda_ij W_j(t ∧ x_i) 1(T >= x_i) (T - (t ∨ x_i)).
        for (i, &x_i) in self.times.iter().enumerate() {
            if big_t < x_i {
                continue;
            }
            let mut load = 0.0;
            for j in 0..self.times.len() {
                load += self.lambda[i][j] * state.w(j, i);
            }
            exponent -= self.xi[i] * load * (big_t - t.max(x_i));
        }
        Ok(exponent.exp())
    }

    /// Exact integral of the deterministic short-rate part over `[a, b]`.
    pub fn deterministic_integral(&self, a: f64, b: f64) -> Result<f64> {
        let mut total = self.f0.integral(a, b)?;
        for (q, &x_q) in self.times.iter().enumerate() {
            for (i, &x_i) in self.times.iter().enumerate() {
                let c = self.xi[q] * self.xi[i] * self.rho[q][i];
                total += c * x_q.min(x_i) * ramp_integral(x_q.max(x_i), x_i, a, b);
            }
        }
        Ok(total)
    }

    /// Exact integral of the stochastic short-rate part over `[a, b]`:
    /// each realized jump contributes level × covered length.
    pub fn stochastic_integral(&self, state: &StepFactorState, a: f64, b: f64) -> Result<f64> {
        self.check_state(state)?;
        if a > b {
            return Err(Error::invalid(format!("integration bounds {a} > {b}")));
        }
        let passed = self.passed(b);
        if state.frozen.len() < passed {
            return Err(Error::invalid(format!(
                "state frozen {} of {passed} schedule dates needed for [{a}, {b}]",
                state.frozen.len()
            )));
        }
        let mut total = 0.0;
        for (i, &x_i) in self.times.iter().enumerate() {
            if x_i >= b {
                break;
            }
            let covered = b - a.max(x_i);
            if covered <= 0.0 {
                continue;
            }
            let mut load = 0.0;
            for j in 0..self.times.len() {
                load += self.lambda[i][j] * state.w(j, i);
            }
            total += self.xi[i] * load * covered;
        }
        Ok(total)
    }

    /// Advance the factor state by `dt` using one standard normal per factor.
    ///
    /// Factors stop at their schedule dates: an entry whose date lies inside
    /// `(t, t+dt]` receives the increment only up to the stopping time
    /// (`sqrt(x_i - t) * normal`). Simulation wanting the exact joint law
    /// must land on schedule dates exactly, which the composite simulator
    /// guarantees by splitting every step at event dates.
    pub fn evolve(
        &self,
        state: &StepFactorState,
        dt: f64,
        normals: &[f64],
    ) -> Result<StepFactorState> {
        if !dt.is_finite() || dt < 0.0 {
            return Err(Error::invalid(format!("step dt must be >= 0, got {dt}")));
        }
        self.evolve_to(state, state.t + dt, normals)
    }

    /// Advance to time `t1` exactly. The target time, not an accumulated
    /// `t + dt`, decides which schedule dates are crossed, so a simulator
    /// landing on a date hits it bit-exactly.
    pub fn evolve_to(
        &self,
        state: &StepFactorState,
        t1: f64,
        normals: &[f64],
    ) -> Result<StepFactorState> {
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
        let n = self.times.len();

        let scale = dt.sqrt();
        let mut frozen = state.frozen.clone();
        for i in frozen.len()..n {
            let x_i = self.times[i];
            if x_i > t1 {
                break;
            }
            // Stop this date's entry exactly at x_i. Landing on the date
            // reuses the full-step scale so frozen == live bitwise.
            let sub = if x_i == t1 {
                scale
            } else {
                (x_i - t0).max(0.0).sqrt()
            };
            frozen.push((0..n).map(|j| state.live[j] + sub * normals[j]).collect());
        }
        let live = (0..n)
            .map(|j| state.live[j] + scale * normals[j])
            .collect();
        Ok(StepFactorState {
            t: t1,
            live,
            frozen,
        })
    }
}

/// `int_a^b 1(s >= threshold) (s - offset) ds`, the integral of a clipped ramp.
pub(crate) fn ramp_integral(threshold: f64, offset: f64, a: f64, b: f64) -> f64 {
    if b <= threshold {
        return 0.0;
    }
    let lo = a.max(threshold);
    ((b - offset).powi(2) - (lo - offset).powi(2)) / 2.0
}

pub(crate) fn check_horizon(t: f64, big_t: f64) -> Result<()> {
    if !(t.is_finite() && big_t.is_finite()) {
        return Err(Error::invalid("times must be finite"));
    }
    if t < 0.0 {
        return Err(Error::invalid(format!("evaluation time {t} is negative")));
    }
    if big_t < t {
        return Err(Error::invalid(format!("maturity {big_t} precedes time {t}")));
    }
    Ok(())
}
