//! Model time: dates are mapped to year fractions from a fixed anchor.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Earliest supported year for any date handled by the engine.
pub const MIN_YEAR: i32 = 1900;
/// Latest supported year for any date handled by the engine.
pub const MAX_YEAR: i32 = 2200;

/// Day-count convention used to turn calendar day distances into year
/// fractions. `Act365Fixed` is the model-time default; `Act360` exists for
/// money-market style accruals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayCount {
    #[default]
    Act365Fixed,
    Act360,
}

impl DayCount {
    pub fn denominator(self) -> f64 {
        match self {
            DayCount::Act365Fixed => 365.0,
            DayCount::Act360 => 360.0,
        }
    }
}

/// Anchor date plus day count: the bridge between calendar dates and the
/// real-valued time axis every model component works on. Time `0` is the
/// anchor; dates before the anchor map to negative year fractions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateGrid {
    pub anchor: NaiveDate,
    #[serde(default)]
    pub day_count: DayCount,
}

impl DateGrid {
    pub fn new(anchor: NaiveDate) -> Result<Self> {
        check_supported(anchor)?;
        Ok(DateGrid {
            anchor,
            day_count: DayCount::default(),
        })
    }

    pub fn with_day_count(anchor: NaiveDate, day_count: DayCount) -> Result<Self> {
        check_supported(anchor)?;
        Ok(DateGrid { anchor, day_count })
    }

    /// Signed year fraction of `date` measured from the anchor.
    pub fn year_fraction(&self, date: NaiveDate) -> Result<f64> {
        check_supported(date)?;
        let days = (date - self.anchor).num_days();
        Ok(days as f64 / self.day_count.denominator())
    }

    /// Signed year fraction from `d1` to `d2` (negative when `d2 < d1`).
    pub fn year_fraction_between(&self, d1: NaiveDate, d2: NaiveDate) -> Result<f64> {
        check_supported(d1)?;
        check_supported(d2)?;
        let days = (d2 - d1).num_days();
        Ok(days as f64 / self.day_count.denominator())
    }

    /// Year fraction covered by a whole number of days.
    pub fn days_to_years(&self, days: i64) -> f64 {
        days as f64 / self.day_count.denominator()
    }
}

pub(crate) fn check_supported(date: NaiveDate) -> Result<()> {
    let year = date.year();
    if !(MIN_YEAR..=MAX_YEAR).contains(&year) {
        return Err(Error::invalid(format!(
            "date {date} outside supported range {MIN_YEAR}-01-01..{MAX_YEAR}-12-31"
        )));
    }
    Ok(())
}
