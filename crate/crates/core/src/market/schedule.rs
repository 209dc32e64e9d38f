//! Schedules of known discontinuity dates: policy announcement dates for the
//! step component, month-end dates for the spike component.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::daycount::DateGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpKind {
    /// Persistent level shifts at scheduled policy dates.
    Step,
    /// Transient spikes over short windows starting at scheduled dates.
    Spike,
}

/// Ordered schedule of jump dates. Spike schedules also carry window widths
/// in calendar days (the window runs from the date until `width_days` later,
/// covering weekends and holidays on which the last fixing still applies).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JumpSchedule {
    pub kind: JumpKind,
    pub dates: Vec<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_days: Option<Vec<i64>>,
}

impl JumpSchedule {
    pub fn step(dates: Vec<NaiveDate>) -> Result<Self> {
        check_dates(&dates)?;
        Ok(JumpSchedule {
            kind: JumpKind::Step,
            dates,
            width_days: None,
        })
    }

    pub fn spike(dates: Vec<NaiveDate>, width_days: Vec<i64>) -> Result<Self> {
        check_dates(&dates)?;
        if width_days.len() != dates.len() {
            return Err(Error::invalid(format!(
                "spike schedule has {} dates but {} widths",
                dates.len(),
                width_days.len()
            )));
        }
        if width_days.iter().any(|&w| w <= 0) {
            return Err(Error::invalid("spike widths must be positive day counts"));
        }
        Ok(JumpSchedule {
            kind: JumpKind::Spike,
            dates,
            width_days: Some(width_days),
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Schedule dates as year fractions on `grid`. All dates must fall
    /// strictly after the grid anchor.
    pub fn times(&self, grid: &DateGrid) -> Result<Vec<f64>> {
        let mut times = Vec::with_capacity(self.dates.len());
        for &d in &self.dates {
            let t = grid.year_fraction(d)?;
            if t <= 0.0 {
                return Err(Error::data(format!(
                    "schedule date {d} is not strictly after the anchor {}",
                    grid.anchor
                )));
            }
            times.push(t);
        }
        Ok(times)
    }

    /// Spike window widths as year fractions on `grid`.
    pub fn widths(&self, grid: &DateGrid) -> Result<Vec<f64>> {
        let days = self
            .width_days
            .as_ref()
            .ok_or_else(|| Error::invalid("schedule carries no spike widths"))?;
        Ok(days.iter().map(|&d| grid.days_to_years(d)).collect())
    }
}

fn check_dates(dates: &[NaiveDate]) -> Result<()> {
    if !dates.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid("schedule dates must be strictly increasing"));
    }
    Ok(())
}
