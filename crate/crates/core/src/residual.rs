//! Residual component: what is left of the benchmark rate after the step and
//! spike components — either a constant additive spread or a mean-reverting
//! Ornstein-Uhlenbeck (Vasicek) process
//! `dr = (theta - beta r) dt + sigma dW`.
//!
//! Transitions use the exact discretization, and the simulator can draw the
//! pair `(r(t+dt), int_t^{t+dt} r ds)` from its exact joint Gaussian law so
//! discount factors carry no time-stepping bias.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::step::check_horizon;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VasicekParams {
    pub theta: f64,
    pub beta: f64,
    #[serde(rename = "sigma_v")]
    pub sigma: f64,
    pub r0: f64,
}

impl VasicekParams {
    pub fn new(theta: f64, beta: f64, sigma: f64, r0: f64) -> Result<Self> {
        let p = VasicekParams {
            theta,
            beta,
            sigma,
            r0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.beta.is_finite() && self.r0.is_finite()) {
            return Err(Error::invalid("vasicek parameters must be finite"));
        }
        if self.beta <= 0.0 {
            return Err(Error::invalid(format!(
                "vasicek beta must be positive, got {}",
                self.beta
            )));
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::invalid(format!(
                "vasicek sigma must be non-negative, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    /// Long-run mean `theta / beta`.
    pub fn mean_level(&self) -> f64 {
        self.theta / self.beta
    }

    /// Deterministic mean of `r(t)` from `r(0) = r0`.
    pub fn mean(&self, t: f64) -> f64 {
        let decay = (-self.beta * t).exp();
        self.mean_level() + (self.r0 - self.mean_level()) * decay
    }

    /// Conditional expectation `E[r(s) | r(t) = r_t]` for `s >= t`.
    pub fn conditional_mean(&self, t: f64, s: f64, r_t: f64) -> f64 {
        let decay = (-self.beta * (s - t)).exp();
        self.mean_level() + (r_t - self.mean_level()) * decay
    }

    /// `B(t, T)` given `r(t) = r_t`: the affine bond formula.
    pub fn bond_price(&self, t: f64, big_t: f64, r_t: f64) -> Result<f64> {
        check_horizon(t, big_t)?;
        let tau = big_t - t;
        let b = self.b_factor(tau);
        let long = self.mean_level() - self.sigma.powi(2) / (2.0 * self.beta.powi(2));
        let ln_a = (b - tau) * long - self.sigma.powi(2) * b * b / (4.0 * self.beta);
        Ok((ln_a - b * r_t).exp())
    }

    /// Instantaneous forward rate `f(t, T)` given `r(t) = r_t`.
    pub fn forward_rate(&self, t: f64, big_t: f64, r_t: f64) -> Result<f64> {
        check_horizon(t, big_t)?;
        let tau = big_t - t;
        let decay = (-self.beta * tau).exp();
        let pull = 1.0 - decay;
        Ok(r_t * decay + self.mean_level() * pull
            - self.sigma.powi(2) / (2.0 * self.beta.powi(2)) * pull * pull)
    }

    fn b_factor(&self, tau: f64) -> f64 {
        (1.0 - (-self.beta * tau).exp()) / self.beta
    }

    /// Exact one-step transition.
    pub fn evolve(&self, r_t: f64, dt: f64, normal: f64) -> Result<f64> {
        if !dt.is_finite() || dt < 0.0 {
            return Err(Error::invalid(format!("step dt must be >= 0, got {dt}")));
        }
        if !normal.is_finite() {
            return Err(Error::invalid("normal draw must be finite"));
        }
        let phi = (-self.beta * dt).exp();
        let sd = (self.sigma.powi(2) * (1.0 - phi * phi) / (2.0 * self.beta)).sqrt();
        Ok(self.mean_level() + (r_t - self.mean_level()) * phi + sd * normal)
    }

    /// Exact joint draw of the end-of-step rate and the integral of the rate
    /// over the step. Uses two independent standard normals; the integral is
    /// sampled conditionally on the end rate.
    pub fn evolve_with_integral(
        &self,
        r_t: f64,
        dt: f64,
        n1: f64,
        n2: f64,
    ) -> Result<(f64, f64)> {
        if !dt.is_finite() || dt < 0.0 {
            return Err(Error::invalid(format!("step dt must be >= 0, got {dt}")));
        }
        if !(n1.is_finite() && n2.is_finite()) {
            return Err(Error::invalid("normal draws must be finite"));
        }
        let mu = self.mean_level();
        let beta = self.beta;
        let phi = (-beta * dt).exp();
        let mean_r = mu + (r_t - mu) * phi;
        let mean_i = mu * dt + (r_t - mu) * (1.0 - phi) / beta;
        if self.sigma == 0.0 || dt == 0.0 {
            return Ok((mean_r, mean_i));
        }
        let s2 = self.sigma.powi(2);
        let var_r = s2 * (1.0 - phi * phi) / (2.0 * beta);
        let var_i =
            s2 / (beta * beta) * (dt - 2.0 * (1.0 - phi) / beta + (1.0 - phi * phi) / (2.0 * beta));
        let cov = s2 * (1.0 - phi) * (1.0 - phi) / (2.0 * beta * beta);

        let r_next = mean_r + var_r.sqrt() * n1;
        let resid_var = (var_i - cov * cov / var_r).max(0.0);
        let integral = mean_i + cov / var_r * (r_next - mean_r) + resid_var.sqrt() * n2;
        Ok((r_next, integral))
    }
}

/// Residual specification: a constant spread (zero-vol mode) or a full
/// Vasicek process. A constant spread behaves exactly like Vasicek with
/// `sigma = 0` started at its long-run mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResidualParams {
    Vasicek(VasicekParams),
    Spread { spread: f64 },
}

impl ResidualParams {
    pub fn spread(value: f64) -> Self {
        ResidualParams::Spread { spread: value }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ResidualParams::Spread { spread } => {
                if !spread.is_finite() {
                    return Err(Error::invalid("spread must be finite"));
                }
                Ok(())
            }
            ResidualParams::Vasicek(p) => p.validate(),
        }
    }

    pub fn initial_rate(&self) -> f64 {
        match self {
            ResidualParams::Spread { spread } => *spread,
            ResidualParams::Vasicek(p) => p.r0,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        match self {
            ResidualParams::Spread { .. } => true,
            ResidualParams::Vasicek(p) => p.sigma == 0.0,
        }
    }

    pub fn conditional_mean(&self, t: f64, s: f64, r_t: f64) -> f64 {
        match self {
            ResidualParams::Spread { spread } => *spread,
            ResidualParams::Vasicek(p) => p.conditional_mean(t, s, r_t),
        }
    }

    pub fn bond_price(&self, t: f64, big_t: f64, r_t: f64) -> Result<f64> {
        match self {
            ResidualParams::Spread { spread } => {
                check_horizon(t, big_t)?;
                Ok((-spread * (big_t - t)).exp())
            }
            ResidualParams::Vasicek(p) => p.bond_price(t, big_t, r_t),
        }
    }

    pub fn forward_rate(&self, t: f64, big_t: f64, r_t: f64) -> Result<f64> {
        match self {
            ResidualParams::Spread { spread } => {
                check_horizon(t, big_t)?;
                Ok(*spread)
            }
            ResidualParams::Vasicek(p) => p.forward_rate(t, big_t, r_t),
        }
    }

    pub fn evolve(&self, r_t: f64, dt: f64, normal: f64) -> Result<f64> {
        match self {
            ResidualParams::Spread { spread } => Ok(*spread),
            ResidualParams::Vasicek(p) => p.evolve(r_t, dt, normal),
        }
    }

    pub fn evolve_with_integral(
        &self,
        r_t: f64,
        dt: f64,
        n1: f64,
        n2: f64,
    ) -> Result<(f64, f64)> {
        match self {
            ResidualParams::Spread { spread } => Ok((*spread, spread * dt)),
            ResidualParams::Vasicek(p) => p.evolve_with_integral(r_t, dt, n1, n2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn zero_vol_zero_theta_bond_is_pure_discounting() {
        let p = VasicekParams::new(0.0, 1.4, 0.0, 0.03).unwrap();
        let tau: f64 = 2.0;
        let b = (1.0 - (-1.4f64 * tau).exp()) / 1.4;
        assert_relative_eq!(
            p.bond_price(0.0, tau, 0.03).unwrap(),
            (-b * 0.03).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn forward_is_minus_dlog_bond() {
        let p = VasicekParams::new(0.02, 0.8, 0.015, 0.01).unwrap();
        let (t, r_t) = (0.3, 0.012);
        for big_t in [0.5, 1.0, 3.0] {
            let eps = 1e-6;
            let up = p.bond_price(t, big_t + eps, r_t).unwrap();
            let dn = p.bond_price(t, big_t - eps, r_t).unwrap();
            let numeric = -(up.ln() - dn.ln()) / (2.0 * eps);
            let closed = p.forward_rate(t, big_t, r_t).unwrap();
            assert_relative_eq!(closed, numeric, epsilon = 1e-7);
        }
    }

    #[test]
    fn exact_transition_moments() {
        // Compose two exact half-steps and compare with one full step in
        // distribution: means must agree to rounding, variances add per the
        // AR(1) composition rule.
        let p = VasicekParams::new(0.04, 2.0, 0.02, 0.01).unwrap();
        let dt = 0.7;
        let phi = (-p.beta * dt).exp();
        let var_full = p.sigma.powi(2) * (1.0 - phi * phi) / (2.0 * p.beta);

        let half = 0.35;
        let phi_h = (-p.beta * half).exp();
        let var_half = p.sigma.powi(2) * (1.0 - phi_h * phi_h) / (2.0 * p.beta);
        let var_composed = var_half * phi_h * phi_h + var_half;
        assert_relative_eq!(var_full, var_composed, max_relative = 1e-12);

        let mean_full = p.conditional_mean(0.0, dt, p.r0);
        let mean_composed = p.conditional_mean(half, dt, p.conditional_mean(0.0, half, p.r0));
        assert_relative_eq!(mean_full, mean_composed, max_relative = 1e-12);
    }

    #[test]
    fn bond_matches_monte_carlo_discounting() {
        // E[exp(-int_t^T r ds)] by exact pair sampling must reproduce the
        // affine bond price within 3 standard errors.
        let p = VasicekParams::new(0.03, 1.2, 0.02, 0.015).unwrap();
        let big_t = 1.5;
        let steps = 6;
        let dt = big_t / steps as f64;
        let paths = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(42);

        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..paths {
            let mut r = p.r0;
            let mut integral = 0.0;
            for _ in 0..steps {
                let n1: f64 = rng.sample(StandardNormal);
                let n2: f64 = rng.sample(StandardNormal);
                let (r_next, step_int) = p.evolve_with_integral(r, dt, n1, n2).unwrap();
                r = r_next;
                integral += step_int;
            }
            let x = (-integral as f64).exp();
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum / paths as f64;
        let var = (sum_sq / paths as f64 - mean * mean).max(0.0);
        let se = (var / paths as f64).sqrt();
        let closed = p.bond_price(0.0, big_t, p.r0).unwrap();
        assert!(
            (mean - closed).abs() < 3.0 * se,
            "MC {mean} vs closed {closed}, se {se}"
        );
    }

    #[test]
    fn integral_moments_match_closed_form() {
        let p = VasicekParams::new(0.0, 3.0, 0.05, 0.02).unwrap();
        let dt = 0.4;
        let paths = 200_000;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut sum_i = 0.0;
        let mut sum_i2 = 0.0;
        let mut sum_ri = 0.0;
        let mut sum_r = 0.0;
        for _ in 0..paths {
            let n1: f64 = rng.sample(StandardNormal);
            let n2: f64 = rng.sample(StandardNormal);
            let (r, i) = p.evolve_with_integral(p.r0, dt, n1, n2).unwrap();
            sum_i += i;
            sum_i2 += i * i;
            sum_ri += r * i;
            sum_r += r;
        }
        let n = paths as f64;
        let mean_i = sum_i / n;
        let var_i = sum_i2 / n - mean_i * mean_i;
        let mean_r = sum_r / n;
        let cov = sum_ri / n - mean_r * mean_i;

        let beta = p.beta;
        let phi = (-beta * dt).exp();
        let mu = p.mean_level();
        let exp_mean_i = mu * dt + (p.r0 - mu) * (1.0 - phi) / beta;
        let exp_var_i = p.sigma.powi(2) / (beta * beta)
            * (dt - 2.0 * (1.0 - phi) / beta + (1.0 - phi * phi) / (2.0 * beta));
        let exp_cov = p.sigma.powi(2) * (1.0 - phi) * (1.0 - phi) / (2.0 * beta * beta);

        assert_relative_eq!(mean_i, exp_mean_i, epsilon = 3.0 * (exp_var_i / n).sqrt());
        assert_relative_eq!(var_i, exp_var_i, max_relative = 0.02);
        assert_relative_eq!(cov, exp_cov, max_relative = 0.03);
    }

    #[test]
    fn spread_mode_is_constant() {
        let r = ResidualParams::spread(0.0007);
        assert_eq!(r.initial_rate(), 0.0007);
        assert_eq!(r.evolve(0.0007, 0.3, 1.7).unwrap(), 0.0007);
        assert_eq!(r.conditional_mean(0.1, 2.0, 0.0007), 0.0007);
        let (rate, integral) = r.evolve_with_integral(0.0007, 0.5, 1.0, -1.0).unwrap();
        assert_eq!(rate, 0.0007);
        assert_eq!(integral, 0.0007 * 0.5);
        assert_relative_eq!(
            r.bond_price(0.5, 2.0, 0.0007).unwrap(),
            (-0.0007f64 * 1.5).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn spread_equals_stationary_zero_vol_vasicek() {
        let s = 0.0012;
        let spread = ResidualParams::spread(s);
        let vas = ResidualParams::Vasicek(VasicekParams::new(s * 0.9, 0.9, 0.0, s).unwrap());
        for (t, big_t) in [(0.0, 1.0), (0.4, 2.5)] {
            assert_relative_eq!(
                spread.bond_price(t, big_t, s).unwrap(),
                vas.bond_price(t, big_t, s).unwrap(),
                max_relative = 1e-13
            );
            assert_relative_eq!(
                spread.forward_rate(t, big_t, s).unwrap(),
                vas.forward_rate(t, big_t, s).unwrap(),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn json_round_trip_both_modes() {
        let spread: ResidualParams = serde_json::from_str(r#"{"spread": 7e-4}"#).unwrap();
        assert_eq!(spread, ResidualParams::spread(7e-4));

        let vas: ResidualParams = serde_json::from_str(
            r#"{"theta": 0.02, "beta": 1.5, "sigma_v": 0.01, "r0": 0.013}"#,
        )
        .unwrap();
        match vas {
            ResidualParams::Vasicek(p) => {
                assert_eq!(p.theta, 0.02);
                assert_eq!(p.sigma, 0.01);
            }
            other => panic!("parsed {other:?}"),
        }
        let text = serde_json::to_string(&vas).unwrap();
        assert!(text.contains("sigma_v"));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(VasicekParams::new(0.0, 0.0, 0.01, 0.0).is_err());
        assert!(VasicekParams::new(0.0, -1.0, 0.01, 0.0).is_err());
        assert!(VasicekParams::new(0.0, 1.0, -0.01, 0.0).is_err());
        assert!(VasicekParams::new(f64::NAN, 1.0, 0.01, 0.0).is_err());
        assert!(ResidualParams::spread(f64::INFINITY).validate().is_err());
        let p = VasicekParams::new(0.0, 1.0, 0.01, 0.0).unwrap();
        assert!(p.evolve(0.0, -0.1, 0.0).is_err());
        assert!(p.evolve(0.0, 0.1, f64::NAN).is_err());
        assert!(p.bond_price(1.0, 0.5, 0.0).is_err());
    }
}
