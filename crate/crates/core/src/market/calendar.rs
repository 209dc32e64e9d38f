//! Business-day calendar: weekend rule plus an explicit holiday list.
//!
//! The calendar is pure data — nothing is hard-coded beyond the default
//! Saturday/Sunday weekend. Holiday files carry one ISO date per line.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::daycount::check_supported;

/// Hard cap on consecutive non-business days before calendar scans give up.
/// Any real-world calendar has a business day well within this window; hitting
/// the cap means the weekend mask and holiday list leave no working days.
const MAX_SCAN_DAYS: u64 = 3700;

/// Serialized form: ISO weekday numbers (1 = Monday .. 7 = Sunday) plus the
/// holiday list.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct CalendarSpec {
    weekend_days: Vec<u8>,
    holidays: Vec<NaiveDate>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CalendarSpec", into = "CalendarSpec")]
pub struct BusinessCalendar {
    /// `weekend[i]` — weekday with `num_days_from_monday() == i` is a weekend day.
    weekend: [bool; 7],
    holidays: BTreeSet<NaiveDate>,
}

impl BusinessCalendar {
    /// Saturday/Sunday weekend with the supplied holiday list.
    pub fn standard(holidays: impl IntoIterator<Item = NaiveDate>) -> Result<Self> {
        Self::new([Weekday::Sat, Weekday::Sun], holidays)
    }

    pub fn new(
        weekend_days: impl IntoIterator<Item = Weekday>,
        holidays: impl IntoIterator<Item = NaiveDate>,
    ) -> Result<Self> {
        let mut weekend = [false; 7];
        for day in weekend_days {
            weekend[day.num_days_from_monday() as usize] = true;
        }
        if weekend.iter().all(|&w| w) {
            return Err(Error::invalid("weekend rule excludes every weekday"));
        }
        let holidays: BTreeSet<NaiveDate> = holidays.into_iter().collect();
        for &h in &holidays {
            check_supported(h)?;
        }
        Ok(BusinessCalendar { weekend, holidays })
    }

    /// Parse a holiday file: one ISO date (`YYYY-MM-DD`) per line, blank lines
    /// ignored. The weekend rule stays Saturday/Sunday.
    pub fn from_holiday_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut holidays = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let date: NaiveDate = line.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: idx as u64 + 1,
                msg: format!("expected ISO date (YYYY-MM-DD), got {line:?}"),
            })?;
            holidays.push(date);
        }
        Self::standard(holidays)
    }

    pub fn is_business(&self, date: NaiveDate) -> bool {
        !self.weekend[date.weekday().num_days_from_monday() as usize]
            && !self.holidays.contains(&date)
    }

    pub fn holidays(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.holidays.iter().copied()
    }

    /// First business day strictly after `date`.
    pub fn next_business(&self, date: NaiveDate) -> Result<NaiveDate> {
        let mut d = date;
        for _ in 0..MAX_SCAN_DAYS {
            d = d
                .checked_add_days(Days::new(1))
                .ok_or_else(|| Error::invalid("date overflow scanning forward"))?;
            if self.is_business(d) {
                return Ok(d);
            }
        }
        Err(Error::data(format!(
            "no business day within {MAX_SCAN_DAYS} days after {date}"
        )))
    }

    /// Last business day strictly before `date`.
    pub fn prev_business(&self, date: NaiveDate) -> Result<NaiveDate> {
        let mut d = date;
        for _ in 0..MAX_SCAN_DAYS {
            d = d
                .checked_sub_days(Days::new(1))
                .ok_or_else(|| Error::invalid("date underflow scanning backward"))?;
            if self.is_business(d) {
                return Ok(d);
            }
        }
        Err(Error::data(format!(
            "no business day within {MAX_SCAN_DAYS} days before {date}"
        )))
    }

    /// `date` itself when it is a business day, otherwise the last business
    /// day before it. This is the fixing-source convention: a weekend or
    /// holiday carries the previous business day's rate.
    pub fn prior_or_self_business(&self, date: NaiveDate) -> Result<NaiveDate> {
        if self.is_business(date) {
            Ok(date)
        } else {
            self.prev_business(date)
        }
    }

    /// Calendar days from `date` (a business day) until the next business day.
    /// 1 on a regular weekday, 3 on a Friday with a free weekend, and so on.
    pub fn days_to_next_business(&self, date: NaiveDate) -> Result<i64> {
        Ok((self.next_business(date)? - date).num_days())
    }

    pub fn last_business_day_of_month(&self, year: i32, month: u32) -> Result<NaiveDate> {
        let first_next = first_of_next_month(year, month)?;
        self.prev_business(first_next)
    }

    pub fn is_last_business_day_of_month(&self, date: NaiveDate) -> Result<bool> {
        if !self.is_business(date) {
            return Ok(false);
        }
        Ok(date == self.last_business_day_of_month(date.year(), date.month())?)
    }

    /// Third Wednesday of the given month (the quarterly IMM date).
    pub fn third_wednesday(year: i32, month: u32) -> Result<NaiveDate> {
        NaiveDate::from_weekday_of_month_opt(year, month, Weekday::Wed, 3)
            .ok_or_else(|| Error::invalid(format!("no third Wednesday in {year}-{month:02}")))
    }

    pub fn is_third_wednesday(date: NaiveDate) -> bool {
        Self::third_wednesday(date.year(), date.month()).is_ok_and(|d| d == date)
    }

    /// Business days in the half-open range `[start, end)`, in order.
    pub fn business_days_between(&self, start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
        let mut out = Vec::new();
        let mut d = start;
        while d < end {
            if self.is_business(d) {
                out.push(d);
            }
            match d.checked_add_days(Days::new(1)) {
                Some(next) => d = next,
                None => break,
            }
        }
        out
    }
}

impl TryFrom<CalendarSpec> for BusinessCalendar {
    type Error = Error;

    fn try_from(spec: CalendarSpec) -> Result<Self> {
        let mut weekdays = Vec::with_capacity(spec.weekend_days.len());
        for n in spec.weekend_days {
            let wd = match n {
                1 => Weekday::Mon,
                2 => Weekday::Tue,
                3 => Weekday::Wed,
                4 => Weekday::Thu,
                5 => Weekday::Fri,
                6 => Weekday::Sat,
                7 => Weekday::Sun,
                other => {
                    return Err(Error::invalid(format!(
                        "weekend day {other} outside ISO range 1..=7"
                    )))
                }
            };
            weekdays.push(wd);
        }
        BusinessCalendar::new(weekdays, spec.holidays)
    }
}

impl From<BusinessCalendar> for CalendarSpec {
    fn from(cal: BusinessCalendar) -> Self {
        let weekend_days = (0u8..7)
            .filter(|&i| cal.weekend[i as usize])
            .map(|i| i + 1)
            .collect();
        CalendarSpec {
            weekend_days,
            holidays: cal.holidays.into_iter().collect(),
        }
    }
}

pub(crate) fn first_of_next_month(year: i32, month: u32) -> Result<NaiveDate> {
    let (y, m) = if month == 12 {
        (year + 1, 1)
    } else {
        (year, month + 1)
    };
    NaiveDate::from_ymd_opt(y, m, 1)
        .ok_or_else(|| Error::invalid(format!("invalid month {year}-{month:02}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn cal() -> BusinessCalendar {
        // 2025-01-01 and 2025-01-20 as holidays.
        BusinessCalendar::standard([d(2025, 1, 1), d(2025, 1, 20)]).unwrap()
    }

    #[test]
    fn weekends_and_holidays_are_not_business_days() {
        let c = cal();
        assert!(!c.is_business(d(2025, 1, 1))); // holiday (Wednesday)
        assert!(c.is_business(d(2025, 1, 2))); // Thursday
        assert!(!c.is_business(d(2025, 1, 4))); // Saturday
        assert!(!c.is_business(d(2025, 1, 5))); // Sunday
        assert!(!c.is_business(d(2025, 1, 20))); // holiday (Monday)
    }

    #[test]
    fn friday_spans_three_days_to_next_business() {
        let c = cal();
        assert_eq!(c.days_to_next_business(d(2025, 1, 3)).unwrap(), 3);
        assert_eq!(c.days_to_next_business(d(2025, 1, 6)).unwrap(), 1);
        // Friday before the Monday holiday spans four days.
        assert_eq!(c.days_to_next_business(d(2025, 1, 17)).unwrap(), 4);
    }

    #[test]
    fn prior_or_self_maps_weekend_to_friday() {
        let c = cal();
        assert_eq!(c.prior_or_self_business(d(2025, 1, 5)).unwrap(), d(2025, 1, 3));
        assert_eq!(c.prior_or_self_business(d(2025, 1, 3)).unwrap(), d(2025, 1, 3));
    }

    #[test]
    fn month_end_and_imm_helpers() {
        let c = cal();
        // 2025-08-31 is a Sunday, so the last business day is Friday the 29th.
        assert_eq!(
            c.last_business_day_of_month(2025, 8).unwrap(),
            d(2025, 8, 29)
        );
        assert!(c.is_last_business_day_of_month(d(2025, 8, 29)).unwrap());
        assert!(!c.is_last_business_day_of_month(d(2025, 8, 28)).unwrap());

        assert_eq!(
            BusinessCalendar::third_wednesday(2025, 3).unwrap(),
            d(2025, 3, 19)
        );
        assert!(BusinessCalendar::is_third_wednesday(d(2025, 6, 18)));
        assert!(!BusinessCalendar::is_third_wednesday(d(2025, 6, 11)));
    }

    #[test]
    fn business_days_between_is_half_open() {
        let c = cal();
        let days = c.business_days_between(d(2025, 1, 2), d(2025, 1, 9));
        assert_eq!(
            days,
            vec![d(2025, 1, 2), d(2025, 1, 3), d(2025, 1, 6), d(2025, 1, 7), d(2025, 1, 8)]
        );
    }

    #[test]
    fn all_weekend_rule_is_rejected() {
        let every_day = [
            Weekday::Mon,
            Weekday::Tue,
            Weekday::Wed,
            Weekday::Thu,
            Weekday::Fri,
            Weekday::Sat,
            Weekday::Sun,
        ];
        assert!(BusinessCalendar::new(every_day, []).is_err());
    }

    #[test]
    fn holiday_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("holidays.txt");
        std::fs::write(&path, "2025-01-01\n\n2025-01-20\n").unwrap();
        let c = BusinessCalendar::from_holiday_file(&path).unwrap();
        assert_eq!(c, cal());

        std::fs::write(&path, "2025-01-01\nnot-a-date\n").unwrap();
        let err = BusinessCalendar::from_holiday_file(&path).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn serde_round_trip() {
        let c = cal();
        let json = serde_json::to_string(&c).unwrap();
        let back: BusinessCalendar = serde_json::from_str(&json).unwrap();
        assert_eq!(c, back);
    }
}
