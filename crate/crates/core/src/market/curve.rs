//! Piecewise-flat curves on the year-fraction axis and their dated
//! (calendar-facing) counterpart.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-continuous piecewise-flat curve.
///
/// `levels` has one more entry than `knots`: `levels[0]` applies on
/// `(-inf, knots[0])`, `levels[i]` on `[knots[i-1], knots[i])` and the last
/// level on `[knots.last(), +inf)`. At a knot the post-knot level applies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveSpec", into = "CurveSpec")]
pub struct PiecewiseFlatCurve {
    knots: Vec<f64>,
    levels: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CurveSpec {
    knots: Vec<f64>,
    levels: Vec<f64>,
}

impl PiecewiseFlatCurve {
    pub fn new(knots: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if levels.len() != knots.len() + 1 {
            return Err(Error::invalid(format!(
                "piecewise-flat curve needs {} levels for {} knots, got {}",
                knots.len() + 1,
                knots.len(),
                levels.len()
            )));
        }
        if !knots.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("curve knots must be strictly increasing"));
        }
        if knots.iter().chain(levels.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("curve knots and levels must be finite"));
        }
        Ok(PiecewiseFlatCurve { knots, levels })
    }

    pub fn flat(level: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![level])
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Index of the interval containing `t` under right-continuity.
    fn interval_index(&self, t: f64) -> usize {
        // partition_point: number of knots <= t, which is exactly the index of
        // the level in force at t (post-knot level applies at the knot).
        self.knots.partition_point(|&k| k <= t)
    }

    /// Curve value at `t` (right-continuous: at a knot, the new level).
    pub fn value(&self, t: f64) -> f64 {
        self.levels[self.interval_index(t)]
    }

    /// Limit from the left at `t` (the level in force just before a knot).
    pub fn left_value(&self, t: f64) -> f64 {
        self.levels[self.knots.partition_point(|&k| k < t)]
    }

    /// Jump at `t`: zero everywhere except at knots.
    pub fn jump_at(&self, t: f64) -> f64 {
        self.value(t) - self.left_value(t)
    }

    /// Exact integral over `[a, b]`. Requires `a <= b`.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::invalid("integration bounds must be finite"));
        }
        if a > b {
            return Err(Error::invalid(format!(
                "integration bounds out of order: {a} > {b}"
            )));
        }
        let mut total = 0.0;
        let mut lo = a;
        let mut idx = self.interval_index(a);
        while idx < self.knots.len() && self.knots[idx] < b {
            let hi = self.knots[idx];
            total += self.levels[idx] * (hi - lo);
            lo = hi;
            idx += 1;
        }
        total += self.levels[idx] * (b - lo);
        Ok(total)
    }
}

/// Piecewise-flat curve keyed by calendar dates, as produced by calibration:
/// the level in force from the valuation date, switching at each knot date
/// (right-continuous, the knot date itself carries the new level).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatedCurve {
    pub valuation: NaiveDate,
    pub knot_dates: Vec<NaiveDate>,
    pub levels: Vec<f64>,
}

impl DatedCurve {
    pub fn new(valuation: NaiveDate, knot_dates: Vec<NaiveDate>, levels: Vec<f64>) -> Result<Self> {
        if levels.len() != knot_dates.len() + 1 {
            return Err(Error::invalid(format!(
                "dated curve needs {} levels for {} knot dates, got {}",
                knot_dates.len() + 1,
                knot_dates.len(),
                levels.len()
            )));
        }
        if !knot_dates.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("curve knot dates must be strictly increasing"));
        }
        if levels.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("curve levels must be finite"));
        }
        Ok(DatedCurve {
            valuation,
            knot_dates,
            levels,
        })
    }

    pub fn value_on(&self, date: NaiveDate) -> f64 {
        let idx = self.knot_dates.partition_point(|&k| k <= date);
        self.levels[idx]
    }

    /// Level change at `date`: non-zero only at knot dates.
    pub fn jump_at(&self, date: NaiveDate) -> f64 {
        let at = self.knot_dates.partition_point(|&k| k <= date);
        let before = self.knot_dates.partition_point(|&k| k < date);
        self.levels[at] - self.levels[before]
    }
}

impl TryFrom<CurveSpec> for PiecewiseFlatCurve {
    type Error = Error;

    fn try_from(spec: CurveSpec) -> Result<Self> {
        PiecewiseFlatCurve::new(spec.knots, spec.levels)
    }
}

impl From<PiecewiseFlatCurve> for CurveSpec {
    fn from(curve: PiecewiseFlatCurve) -> Self {
        CurveSpec {
            knots: curve.knots,
            levels: curve.levels,
        }
    }
}
