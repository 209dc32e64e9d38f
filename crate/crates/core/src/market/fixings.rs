//! Observed fixing series (daily published rates) and their CSV form.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::calendar::BusinessCalendar;

/// Daily rate observations sorted by date. Rates are decimals (0.0425 for
/// 4.25%), one observation per publication date.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FixingSeries {
    observations: Vec<(NaiveDate, f64)>,
}

impl FixingSeries {
    pub fn new(observations: Vec<(NaiveDate, f64)>) -> Result<Self> {
        if !observations.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(Error::invalid(
                "fixing dates must be strictly increasing with no duplicates",
            ));
        }
        if observations.iter().any(|(_, r)| !r.is_finite()) {
            return Err(Error::invalid("fixing rates must be finite"));
        }
        Ok(FixingSeries { observations })
    }

    /// Read a two-column CSV with header `date,rate`.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            // Plain-\n terminators keep cited line numbers exact for CRLF
            // files too; the trim absorbs the leftover \r.
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(|e| csv_open_error(path, e))?;
        check_headers(path, reader.headers().map_err(|e| csv_open_error(path, e))?)?;

        let mut observations = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_record_error(path, e))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != 2 {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line,
                    msg: format!("expected 2 columns, got {}", record.len()),
                });
            }
            let date: NaiveDate = record[0].parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line,
                msg: format!("bad date {:?}", &record[0]),
            })?;
            let rate: f64 = record[1].parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line,
                msg: format!("bad rate {:?}", &record[1]),
            })?;
            observations.push((date, rate));
        }
        Self::new(observations)
    }

    pub fn to_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = csv::Writer::from_path(path).map_err(|e| csv_open_error(path, e))?;
        writer
            .write_record(["date", "rate"])
            .map_err(|e| csv_record_error(path, e))?;
        for (date, rate) in &self.observations {
            writer
                .write_record([date.to_string(), format!("{rate}")])
                .map_err(|e| csv_record_error(path, e))?;
        }
        writer.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(())
    }

    /// Every observation date must be a business day on `calendar`.
    pub fn validate_business_days(&self, calendar: &BusinessCalendar) -> Result<()> {
        for (date, _) in &self.observations {
            if !calendar.is_business(*date) {
                return Err(Error::data(format!(
                    "fixing dated {date} falls on a non-business day"
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        self.observations
            .binary_search_by_key(&date, |(d, _)| *d)
            .ok()
            .map(|i| self.observations[i].1)
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.observations.first().map(|(d, _)| *d)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.observations.last().map(|(d, _)| *d)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        self.observations.iter().copied()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.observations.iter().map(|(_, r)| *r).collect()
    }
}

fn check_headers(path: &Path, headers: &csv::StringRecord) -> Result<()> {
    let got: Vec<&str> = headers.iter().collect();
    if got != ["date", "rate"] {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: format!("expected header date,rate got {}", got.join(",")),
        });
    }
    Ok(())
}

pub(crate) fn csv_open_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path.display().to_string(), io),
        other => Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: format!("{other:?}"),
        },
    }
}

pub(crate) fn csv_record_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path.display().to_string(), io),
        other => Error::Parse {
            path: path.display().to_string(),
            line,
            msg: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn lookup_and_order_validation() {
        let s = FixingSeries::new(vec![(d("2025-01-02"), 0.0433), (d("2025-01-03"), 0.0431)])
            .unwrap();
        assert_eq!(s.get(d("2025-01-02")), Some(0.0433));
        assert_eq!(s.get(d("2025-01-04")), None);

        assert!(FixingSeries::new(vec![
            (d("2025-01-03"), 0.04),
            (d("2025-01-02"), 0.04)
        ])
        .is_err());
        assert!(
            FixingSeries::new(vec![(d("2025-01-02"), 0.04), (d("2025-01-02"), 0.04)]).is_err()
        );
        assert!(FixingSeries::new(vec![(d("2025-01-02"), f64::NAN)]).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fixings.csv");
        std::fs::write(&path, "date,rate\n2025-01-02,0.0433\n2025-01-03,0.0431\n").unwrap();
        let s = FixingSeries::from_csv_path(&path).unwrap();
        assert_eq!(s.len(), 2);

        let out = dir.path().join("out.csv");
        s.to_csv_path(&out).unwrap();
        assert_eq!(FixingSeries::from_csv_path(&out).unwrap(), s);

        std::fs::write(&path, "date,rate\n2025-01-02,0.0433\n2025-01-03,oops\n").unwrap();
        match FixingSeries::from_csv_path(&path).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }

        std::fs::write(&path, "when,value\n2025-01-02,0.0433\n").unwrap();
        assert!(FixingSeries::from_csv_path(&path).is_err());
    }

    #[test]
    fn business_day_validation() {
        let cal = BusinessCalendar::standard([]).unwrap();
        let weekend =
            FixingSeries::new(vec![(d("2025-01-04"), 0.04)]).unwrap(); // Saturday
        assert!(weekend.validate_business_days(&cal).is_err());
        let weekday = FixingSeries::new(vec![(d("2025-01-03"), 0.04)]).unwrap();
        assert!(weekday.validate_business_days(&cal).is_ok());
    }
}
