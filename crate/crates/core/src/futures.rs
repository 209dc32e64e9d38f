//! Money-market futures: contract definitions, reference-period resolution,
//! and settlement pricing off the composite model.
//!
//! Two settlement conventions are supported. Monthly contracts (30-day Fed
//! Funds and one-month SOFR) settle on the arithmetic average of the daily
//! rate over every calendar day of the delivery month, where a weekend or
//! holiday carries the previous business day's rate. Quarterly SOFR
//! contracts settle on the daily-compounded rate over an IMM quarter, where
//! each business day's factor is weighted by the number of calendar days it
//! covers. Reference periods are half-open: `ref_end` is the first day
//! after the period.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};

use crate::composite::CompositeModel;
use crate::error::{Error, Result};
use crate::market::calendar::first_of_next_month;
use crate::market::fixings::{csv_open_error, csv_record_error};
use crate::market::{BusinessCalendar, FixingSeries};

/// Fixed denominator of the SOFR compounding convention, independent of the
/// model's own day count.
const COMPOUND_DENOM: f64 = 360.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ContractKind {
    /// 30-day Fed Funds future: monthly arithmetic average of the effective
    /// rate.
    Ff30d,
    /// One-month SOFR future: monthly arithmetic average.
    Sofr1m,
    /// Three-month SOFR future: compounded over an IMM quarter.
    Sofr3m,
}

impl ContractKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ContractKind::Ff30d => "FF30D",
            ContractKind::Sofr1m => "SOFR1M",
            ContractKind::Sofr3m => "SOFR3M",
        }
    }

    /// Quarterly contracts compound daily; monthly contracts average.
    pub fn is_compounded(self) -> bool {
        matches!(self, ContractKind::Sofr3m)
    }

    /// Fed Funds contracts price off the target-plus-spread variant of the
    /// model; SOFR contracts price off the full composite.
    pub fn is_fed_funds(self) -> bool {
        matches!(self, ContractKind::Ff30d)
    }
}

impl fmt::Display for ContractKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContractKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FF30D" => Ok(ContractKind::Ff30d),
            "SOFR1M" => Ok(ContractKind::Sofr1m),
            "SOFR3M" => Ok(ContractKind::Sofr3m),
            other => Err(Error::invalid(format!(
                "unknown contract kind {other:?}; expected FF30D, SOFR1M or SOFR3M"
            ))),
        }
    }
}

/// One futures contract with its half-open reference period.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FuturesContract {
    pub kind: ContractKind,
    pub code: String,
    pub ref_start: NaiveDate,
    pub ref_end: NaiveDate,
}

impl FuturesContract {
    pub fn new(
        kind: ContractKind,
        code: impl Into<String>,
        ref_start: NaiveDate,
        ref_end: NaiveDate,
    ) -> Result<Self> {
        let contract = FuturesContract {
            kind,
            code: code.into(),
            ref_start,
            ref_end,
        };
        contract.validate()?;
        Ok(contract)
    }

    /// Monthly contract covering one calendar month.
    pub fn monthly(
        kind: ContractKind,
        code: impl Into<String>,
        year: i32,
        month: u32,
    ) -> Result<Self> {
        if kind.is_compounded() {
            return Err(Error::invalid(format!(
                "{kind} is a quarterly contract; use FuturesContract::quarterly"
            )));
        }
        let start = NaiveDate::from_ymd_opt(year, month, 1)
            .ok_or_else(|| Error::invalid(format!("bad delivery month {year}-{month:02}")))?;
        let end = first_of_next_month(year, month)?;
        FuturesContract::new(kind, code, start, end)
    }

    /// Quarterly SOFR contract from IMM date to IMM date, starting at the
    /// third Wednesday of the given quarter month (Mar/Jun/Sep/Dec).
    pub fn quarterly(code: impl Into<String>, year: i32, month: u32) -> Result<Self> {
        let start = BusinessCalendar::third_wednesday(year, month)?;
        let (ny, nm) = next_quarter_month(year, month)?;
        let end = BusinessCalendar::third_wednesday(ny, nm)?;
        FuturesContract::new(ContractKind::Sofr3m, code, start, end)
    }

    pub fn validate(&self) -> Result<()> {
        if self.code.is_empty() {
            return Err(Error::invalid("contract code must not be empty"));
        }
        match self.kind {
            ContractKind::Ff30d | ContractKind::Sofr1m => {
                if self.ref_start.day() != 1 {
                    return Err(Error::invalid(format!(
                        "{}: monthly reference period must start on the 1st, got {}",
                        self.code, self.ref_start
                    )));
                }
                let end = first_of_next_month(self.ref_start.year(), self.ref_start.month())?;
                if self.ref_end != end {
                    return Err(Error::invalid(format!(
                        "{}: monthly reference period starting {} must end {end}, got {}",
                        self.code, self.ref_start, self.ref_end
                    )));
                }
            }
            ContractKind::Sofr3m => {
                let (y, m) = (self.ref_start.year(), self.ref_start.month());
                if !matches!(m, 3 | 6 | 9 | 12)
                    || !BusinessCalendar::is_third_wednesday(self.ref_start)
                {
                    return Err(Error::invalid(format!(
                        "{}: quarterly reference period must start on the third Wednesday \
                         of Mar/Jun/Sep/Dec, got {}",
                        self.code, self.ref_start
                    )));
                }
                let (ny, nm) = next_quarter_month(y, m)?;
                let end = BusinessCalendar::third_wednesday(ny, nm)?;
                if self.ref_end != end {
                    return Err(Error::invalid(format!(
                        "{}: quarterly reference period starting {} must end {end}, got {}",
                        self.code, self.ref_start, self.ref_end
                    )));
                }
            }
        }
        Ok(())
    }

    /// Calendar days in the reference period.
    pub fn n_days(&self) -> i64 {
        (self.ref_end - self.ref_start).num_days()
    }
}

fn next_quarter_month(year: i32, month: u32) -> Result<(i32, u32)> {
    match month {
        3 | 6 | 9 => Ok((year, month + 3)),
        12 => Ok((year + 1, 3)),
        other => Err(Error::invalid(format!(
            "{year}-{other:02} is not a quarterly IMM month"
        ))),
    }
}

/// A market quote: a contract, the day it was observed, and its price.
#[derive(Clone, Debug, PartialEq)]
pub struct FuturesQuote {
    pub observe_date: NaiveDate,
    pub contract: FuturesContract,
    pub price: f64,
}

/// The average rate a futures price implies: `(100 - price) / 100`.
pub fn implied_rate(price: f64) -> f64 {
    (100.0 - price) / 100.0
}

/// A run of consecutive calendar days that all carry the same source
/// business day's rate.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    /// Business day whose fixing the run carries.
    pub source: NaiveDate,
    /// Number of calendar days in the run.
    pub weight: f64,
    /// The published fixing when the source day precedes the observation
    /// date; `None` when the rate is still in the future.
    pub observed: Option<f64>,
}

/// A contract with its reference period resolved into weighted source days
/// and known fixings, ready to price against any rate function.
#[derive(Clone, Debug)]
pub struct ResolvedContract {
    kind: ContractKind,
    n_days: f64,
    segments: Vec<Segment>,
}

/// Walk the reference period day by day, group days by their source business
/// day, and attach fixings for sources already published before
/// `observe_date`. A missing required fixing is a data error.
pub fn resolve(
    contract: &FuturesContract,
    calendar: &BusinessCalendar,
    observe_date: NaiveDate,
    fixings: Option<&FixingSeries>,
) -> Result<ResolvedContract> {
    contract.validate()?;
    let mut segments: Vec<Segment> = Vec::new();
    let mut day = contract.ref_start;
    while day < contract.ref_end {
        let source = calendar.prior_or_self_business(day)?;
        match segments.last_mut() {
            Some(seg) if seg.source == source => seg.weight += 1.0,
            _ => {
                let observed = if source < observe_date {
                    match fixings.and_then(|f| f.get(source)) {
                        Some(rate) => Some(rate),
                        None => {
                            return Err(Error::data(format!(
                                "contract {} observed on {observe_date} needs the fixing \
                                 published on {source}, which is not in the series",
                                contract.code
                            )))
                        }
                    }
                } else {
                    None
                };
                segments.push(Segment {
                    source,
                    weight: 1.0,
                    observed,
                });
            }
        }
        day = day
            .succ_opt()
            .ok_or_else(|| Error::invalid("reference period overflows the calendar"))?;
    }
    Ok(ResolvedContract {
        kind: contract.kind,
        n_days: contract.n_days() as f64,
        segments,
    })
}

impl ResolvedContract {
    pub fn kind(&self) -> ContractKind {
        self.kind
    }

    pub fn n_days(&self) -> f64 {
        self.n_days
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// True when every source day already has a published fixing.
    pub fn is_fully_settled(&self) -> bool {
        self.segments.iter().all(|s| s.observed.is_some())
    }

    /// Settlement rate of the period: observed fixings where available,
    /// `rate_fn` for source days at or after the observation date.
    pub fn settlement_rate<F>(&self, mut rate_fn: F) -> Result<f64>
    where
        F: FnMut(NaiveDate) -> Result<f64>,
    {
        match self.kind {
            ContractKind::Ff30d | ContractKind::Sofr1m => {
                let mut acc = 0.0;
                for seg in &self.segments {
                    let r = match seg.observed {
                        Some(r) => r,
                        None => rate_fn(seg.source)?,
                    };
                    acc += seg.weight * r;
                }
                Ok(acc / self.n_days)
            }
            ContractKind::Sofr3m => {
                let mut product = 1.0;
                for seg in &self.segments {
                    let r = match seg.observed {
                        Some(r) => r,
                        None => rate_fn(seg.source)?,
                    };
                    product *= 1.0 + seg.weight * r / COMPOUND_DENOM;
                }
                Ok((product - 1.0) * COMPOUND_DENOM / self.n_days)
            }
        }
    }

    /// Futures price `100 (1 - R)` for the settlement rate `R`.
    pub fn price<F>(&self, rate_fn: F) -> Result<f64>
    where
        F: FnMut(NaiveDate) -> Result<f64>,
    {
        Ok(100.0 * (1.0 - self.settlement_rate(rate_fn)?))
    }
}

/// Price a contract off the model's time-zero expectations: Fed Funds
/// contracts use the target-plus-spread variant, SOFR contracts the full
/// composite. `observe_date` splits past fixings from model-implied rates
/// and should be the model's anchor for a live valuation.
pub fn price_quote(
    model: &CompositeModel,
    contract: &FuturesContract,
    observe_date: NaiveDate,
    fixings: Option<&FixingSeries>,
) -> Result<f64> {
    let variant;
    let pricing_model = if contract.kind.is_fed_funds() {
        variant = model.ff_variant()?;
        &variant
    } else {
        model
    };
    let state = pricing_model.initial_state();
    let resolved = resolve(contract, pricing_model.calendar(), observe_date, fixings)?;
    resolved.price(|d| pricing_model.expected_rate_on(&state, d))
}

/// Realized compounded term rate over `[start, end)` from published fixings
/// alone, using the same weighted daily-compounding convention as the
/// quarterly contract.
pub fn compounded_term_rate(
    calendar: &BusinessCalendar,
    fixings: &FixingSeries,
    start: NaiveDate,
    end: NaiveDate,
) -> Result<f64> {
    if start >= end {
        return Err(Error::invalid(format!(
            "term-rate period must be non-empty, got [{start}, {end})"
        )));
    }
    let n_days = (end - start).num_days() as f64;
    let mut product = 1.0;
    let mut day = start;
    let mut last_source: Option<NaiveDate> = None;
    let mut weight = 0.0;
    let mut rate = 0.0;
    while day < end {
        let source = calendar.prior_or_self_business(day)?;
        if last_source == Some(source) {
            weight += 1.0;
        } else {
            if last_source.is_some() {
                product *= 1.0 + weight * rate / COMPOUND_DENOM;
            }
            rate = fixings.get(source).ok_or_else(|| {
                Error::data(format!("no fixing published on {source} in the series"))
            })?;
            last_source = Some(source);
            weight = 1.0;
        }
        day = day
            .succ_opt()
            .ok_or_else(|| Error::invalid("term-rate period overflows the calendar"))?;
    }
    if last_source.is_some() {
        product *= 1.0 + weight * rate / COMPOUND_DENOM;
    }
    Ok((product - 1.0) * COMPOUND_DENOM / n_days)
}

const QUOTE_HEADERS: [&str; 6] = [
    "observe_date",
    "contract_kind",
    "contract_code",
    "ref_start",
    "ref_end",
    "price",
];

/// Read quotes from a CSV with header
/// `observe_date,contract_kind,contract_code,ref_start,ref_end,price`.
pub fn read_quotes_path(path: impl AsRef<Path>) -> Result<Vec<FuturesQuote>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        // Plain-\n terminators keep cited line numbers exact for CRLF files
        // too; the trim absorbs the leftover \r.
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_open_error(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_open_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers != QUOTE_HEADERS {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: format!(
                "expected header {} got {}",
                QUOTE_HEADERS.join(","),
                headers.join(",")
            ),
        });
    }

    let mut quotes = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_record_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let fail = |msg: String| Error::Parse {
            path: path.display().to_string(),
            line,
            msg,
        };
        if record.len() != QUOTE_HEADERS.len() {
            return Err(fail(format!(
                "expected {} columns, got {}",
                QUOTE_HEADERS.len(),
                record.len()
            )));
        }
        let observe_date: NaiveDate = record[0]
            .parse()
            .map_err(|_| fail(format!("bad observe_date {:?}", &record[0])))?;
        let kind: ContractKind = record[1]
            .parse()
            .map_err(|_| fail(format!("bad contract_kind {:?}", &record[1])))?;
        let ref_start: NaiveDate = record[3]
            .parse()
            .map_err(|_| fail(format!("bad ref_start {:?}", &record[3])))?;
        let ref_end: NaiveDate = record[4]
            .parse()
            .map_err(|_| fail(format!("bad ref_end {:?}", &record[4])))?;
        let price: f64 = record[5]
            .parse()
            .map_err(|_| fail(format!("bad price {:?}", &record[5])))?;
        if !price.is_finite() {
            return Err(fail(format!("price must be finite, got {price}")));
        }
        let contract = FuturesContract::new(kind, record[2].to_owned(), ref_start, ref_end)
            .map_err(|e| fail(e.to_string()))?;
        quotes.push(FuturesQuote {
            observe_date,
            contract,
            price,
        });
    }
    Ok(quotes)
}

/// Write quotes in the same CSV layout `read_quotes_path` expects.
pub fn write_quotes_path(path: impl AsRef<Path>, quotes: &[FuturesQuote]) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_open_error(path, e))?;
    writer
        .write_record(QUOTE_HEADERS)
        .map_err(|e| csv_record_error(path, e))?;
    for q in quotes {
        writer
            .write_record([
                q.observe_date.to_string(),
                q.contract.kind.to_string(),
                q.contract.code.clone(),
                q.contract.ref_start.to_string(),
                q.contract.ref_end.to_string(),
                format!("{}", q.price),
            ])
            .map_err(|e| csv_record_error(path, e))?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composite::ModelSpec;
    use crate::residual::ResidualParams;
    use approx::assert_relative_eq;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn cal() -> BusinessCalendar {
        BusinessCalendar::standard([]).unwrap()
    }

    /// Zero-volatility model anchored 2025-01-01 with a flat target curve.
    fn flat_model(level: f64, spread: f64) -> CompositeModel {
        let spec = ModelSpec {
            anchor: d("2025-01-01"),
            calendar: cal(),
            fomc_dates: vec![],
            xi: vec![],
            rho: vec![],
            f0_knots: vec![],
            f0_levels: vec![level],
            spike_dates: vec![],
            spike_widths_days: vec![],
            sigma_z: vec![],
            spike_levels: vec![],
            residual: ResidualParams::spread(0.0),
            effr_spread: Some(spread),
        };
        CompositeModel::from_spec(&spec).unwrap()
    }

    #[test]
    fn kind_parses_case_insensitively() {
        assert_eq!("ff30d".parse::<ContractKind>().unwrap(), ContractKind::Ff30d);
        assert_eq!(
            "SOFR1M".parse::<ContractKind>().unwrap(),
            ContractKind::Sofr1m
        );
        assert_eq!(
            "Sofr3m".parse::<ContractKind>().unwrap(),
            ContractKind::Sofr3m
        );
        assert!("EURIBOR".parse::<ContractKind>().is_err());
        assert_eq!(ContractKind::Sofr3m.to_string(), "SOFR3M");
    }

    #[test]
    fn monthly_contract_validation() {
        let good = FuturesContract::monthly(ContractKind::Ff30d, "FFF5", 2025, 1).unwrap();
        assert_eq!(good.ref_start, d("2025-01-01"));
        assert_eq!(good.ref_end, d("2025-02-01"));
        assert_eq!(good.n_days(), 31);

        assert!(
            FuturesContract::new(ContractKind::Ff30d, "X", d("2025-01-02"), d("2025-02-01"))
                .is_err()
        );
        assert!(
            FuturesContract::new(ContractKind::Sofr1m, "X", d("2025-01-01"), d("2025-01-31"))
                .is_err()
        );
        assert!(FuturesContract::monthly(ContractKind::Sofr3m, "X", 2025, 3).is_err());
    }

    #[test]
    fn quarterly_contract_validation() {
        let good = FuturesContract::quarterly("SFRH5", 2025, 3).unwrap();
        assert_eq!(good.ref_start, d("2025-03-19"));
        assert_eq!(good.ref_end, d("2025-06-18"));
        assert_eq!(good.n_days(), 91);

        let dec = FuturesContract::quarterly("SFRZ5", 2025, 12).unwrap();
        assert_eq!(dec.ref_end, d("2026-03-18"));

        // Not an IMM month.
        assert!(FuturesContract::quarterly("X", 2025, 4).is_err());
        // Start is an IMM date but the end is the wrong quarter.
        assert!(
            FuturesContract::new(ContractKind::Sofr3m, "X", d("2025-03-19"), d("2025-09-17"))
                .is_err()
        );
        // Start is not a third Wednesday.
        assert!(
            FuturesContract::new(ContractKind::Sofr3m, "X", d("2025-03-12"), d("2025-06-18"))
                .is_err()
        );
    }

    #[test]
    fn resolve_groups_weekend_days_onto_fridays() {
        let c = FuturesContract::monthly(ContractKind::Sofr1m, "SERF5", 2025, 1).unwrap();
        let resolved = resolve(&c, &cal(), d("2025-01-01"), None).unwrap();
        let total: f64 = resolved.segments().iter().map(|s| s.weight).sum();
        assert_eq!(total, 31.0);
        // Friday 2025-01-03 carries Saturday and Sunday.
        let friday = resolved
            .segments()
            .iter()
            .find(|s| s.source == d("2025-01-03"))
            .unwrap();
        assert_eq!(friday.weight, 3.0);
        // Every source is a business day and sources strictly increase.
        assert!(resolved.segments().iter().all(|s| cal().is_business(s.source)));
        assert!(resolved
            .segments()
            .windows(2)
            .all(|w| w[0].source < w[1].source));
    }

    #[test]
    fn resolve_maps_a_holiday_start_to_the_prior_business_day() {
        let holiday_cal = BusinessCalendar::standard([d("2025-01-01")]).unwrap();
        let c = FuturesContract::monthly(ContractKind::Sofr1m, "SERF5", 2025, 1).unwrap();
        let fixings = FixingSeries::new(vec![(d("2024-12-31"), 0.05)]).unwrap();
        let resolved = resolve(&c, &holiday_cal, d("2025-01-02"), Some(&fixings)).unwrap();
        let first = &resolved.segments()[0];
        assert_eq!(first.source, d("2024-12-31"));
        assert_eq!(first.weight, 1.0);
        assert_eq!(first.observed, Some(0.05));
        let total: f64 = resolved.segments().iter().map(|s| s.weight).sum();
        assert_eq!(total, 31.0);
    }

    #[test]
    fn missing_required_fixing_is_a_data_error() {
        let c = FuturesContract::monthly(ContractKind::Sofr1m, "SERF5", 2025, 1).unwrap();
        // Observing mid-month with no fixing series at all.
        let err = resolve(&c, &cal(), d("2025-01-15"), None).unwrap_err();
        assert!(err.to_string().contains("2025-01-01"), "{err}");
    }

    #[test]
    fn fully_settled_contract_prices_from_fixings_alone() {
        let c = FuturesContract::monthly(ContractKind::Sofr1m, "SERF5", 2025, 1).unwrap();
        let obs: Vec<(NaiveDate, f64)> = cal()
            .business_days_between(d("2025-01-01"), d("2025-02-01"))
            .into_iter()
            .map(|day| (day, 0.03125))
            .collect();
        let fixings = FixingSeries::new(obs).unwrap();
        let resolved = resolve(&c, &cal(), d("2025-02-05"), Some(&fixings)).unwrap();
        assert!(resolved.is_fully_settled());
        // The rate function must never be called.
        let price = resolved
            .price(|day| -> Result<f64> { panic!("unexpected model query for {day}") })
            .unwrap();
        assert_eq!(price, 96.875);
    }

    #[test]
    fn flat_curve_prices_are_exact() {
        // 0.03125 is a power of two: every average collapses exactly.
        let model = flat_model(0.03125, 0.0);
        let c = FuturesContract::monthly(ContractKind::Sofr1m, "SERF5", 2025, 1).unwrap();
        let price = price_quote(&model, &c, d("2025-01-01"), None).unwrap();
        assert_eq!(price, 96.875);

        let zero = flat_model(0.0, 0.0);
        let price = price_quote(&zero, &c, d("2025-01-01"), None).unwrap();
        assert_eq!(price, 100.0);
    }

    #[test]
    fn fed_funds_prices_off_target_plus_spread_and_ignores_spikes() {
        let mut spec = ModelSpec {
            anchor: d("2025-01-01"),
            calendar: cal(),
            fomc_dates: vec![],
            xi: vec![],
            rho: vec![],
            f0_knots: vec![],
            f0_levels: vec![0.03125],
            spike_dates: vec![],
            spike_widths_days: vec![],
            sigma_z: vec![],
            spike_levels: vec![],
            residual: ResidualParams::spread(0.0),
            effr_spread: Some(0.0005),
        };
        let no_spike = CompositeModel::from_spec(&spec).unwrap();
        let c = FuturesContract::monthly(ContractKind::Ff30d, "FFF5", 2025, 1).unwrap();
        let p0 = price_quote(&no_spike, &c, d("2025-01-01"), None).unwrap();
        assert_relative_eq!(
            p0,
            100.0 * (1.0 - (0.03125 + 0.0005)),
            max_relative = 1e-13
        );

        // A large month-end spike moves the SOFR average but not Fed Funds.
        spec.spike_dates = vec![d("2025-01-31")];
        spec.spike_widths_days = vec![1];
        spec.sigma_z = vec![0.0];
        spec.spike_levels = vec![0.01];
        let with_spike = CompositeModel::from_spec(&spec).unwrap();
        let p1 = price_quote(&with_spike, &c, d("2025-01-01"), None).unwrap();
        assert_eq!(p0.to_bits(), p1.to_bits());
    }

    #[test]
    fn month_end_spike_moves_the_monthly_average() {
        let spec = ModelSpec {
            anchor: d("2025-01-01"),
            calendar: cal(),
            fomc_dates: vec![],
            xi: vec![],
            rho: vec![],
            f0_knots: vec![],
            f0_levels: vec![0.04],
            spike_dates: vec![d("2025-01-31")],
            spike_widths_days: vec![1],
            sigma_z: vec![0.0],
            spike_levels: vec![0.01],
            residual: ResidualParams::spread(0.0),
            effr_spread: None,
        };
        let spiked = CompositeModel::from_spec(&spec).unwrap();
        let base = flat_model(0.04, 0.0);
        let jan = FuturesContract::monthly(ContractKind::Sofr1m, "SERF5", 2025, 1).unwrap();
        let p_base = price_quote(&base, &jan, d("2025-01-01"), None).unwrap();
        let p_spiked = price_quote(&spiked, &jan, d("2025-01-01"), None).unwrap();
        // The spike day is the last of the month, so January counts it once.
        assert_relative_eq!(
            p_base - p_spiked,
            100.0 * 0.01 * 1.0 / 31.0,
            max_relative = 1e-10
        );

        // 2025-01-31 is a Friday: Saturday and Sunday fall in February and
        // carry its rate, so the February contract inherits two spike days.
        let feb = FuturesContract::monthly(ContractKind::Sofr1m, "SERG5", 2025, 2).unwrap();
        let p_base = price_quote(&base, &feb, d("2025-01-01"), None).unwrap();
        let p_spiked = price_quote(&spiked, &feb, d("2025-01-01"), None).unwrap();
        assert_relative_eq!(
            p_base - p_spiked,
            100.0 * 0.01 * 2.0 / 28.0,
            max_relative = 1e-10
        );
    }

    #[test]
    fn higher_curve_means_lower_price() {
        let low = flat_model(0.03, 0.0);
        let high = flat_model(0.031, 0.0);
        let m = FuturesContract::monthly(ContractKind::Sofr1m, "SERF5", 2025, 1).unwrap();
        let q = FuturesContract::quarterly("SFRH5", 2025, 3).unwrap();
        for c in [m, q] {
            let p_low = price_quote(&low, &c, d("2025-01-01"), None).unwrap();
            let p_high = price_quote(&high, &c, d("2025-01-01"), None).unwrap();
            assert!(p_high < p_low, "{}: {p_high} !< {p_low}", c.code);
        }
    }

    #[test]
    fn quarterly_compounding_exceeds_the_flat_rate() {
        let model = flat_model(0.04, 0.0);
        let c = FuturesContract::quarterly("SFRH5", 2025, 3).unwrap();
        let resolved = resolve(&c, &cal(), d("2025-01-01"), None).unwrap();
        let state = model.initial_state();
        let rate = resolved
            .settlement_rate(|day| model.expected_rate_on(&state, day))
            .unwrap();
        // Compounding a flat 4% over a quarter adds roughly r^2 * n / 720.
        assert!(rate > 0.04);
        assert!(rate < 0.04 + 0.04 * 0.04 * 91.0 / 360.0);
        let price = price_quote(&model, &c, d("2025-01-01"), None).unwrap();
        assert_relative_eq!(price, 100.0 * (1.0 - rate), max_relative = 1e-13);
    }

    /// Brute-force day-walk oracle for the monthly average: per calendar day,
    /// look up the prior-or-self business day's rate and average.
    fn oracle_monthly_average(
        c: &FuturesContract,
        calendar: &BusinessCalendar,
        rate_of: &dyn Fn(NaiveDate) -> f64,
    ) -> f64 {
        let mut acc = 0.0;
        let mut day = c.ref_start;
        let mut n = 0.0;
        while day < c.ref_end {
            acc += rate_of(calendar.prior_or_self_business(day).unwrap());
            n += 1.0;
            day = day.succ_opt().unwrap();
        }
        acc / n
    }

    /// Brute-force oracle for the quarterly compounded rate: one factor per
    /// distinct source day, weighted by the calendar days it covers.
    fn oracle_compounded_rate(
        c: &FuturesContract,
        calendar: &BusinessCalendar,
        rate_of: &dyn Fn(NaiveDate) -> f64,
    ) -> f64 {
        let mut product = 1.0;
        let mut day = c.ref_start;
        let mut runs: Vec<(NaiveDate, f64)> = Vec::new();
        while day < c.ref_end {
            let src = calendar.prior_or_self_business(day).unwrap();
            match runs.last_mut() {
                Some((s, w)) if *s == src => *w += 1.0,
                _ => runs.push((src, 1.0)),
            }
            day = day.succ_opt().unwrap();
        }
        for (src, w) in &runs {
            product *= 1.0 + w * rate_of(*src) / 360.0;
        }
        (product - 1.0) * 360.0 / c.n_days() as f64
    }

    #[test]
    fn settlement_matches_the_day_walk_oracle() {
        // A calendar with a mid-month holiday exercises multi-day carries
        // beyond plain weekends.
        let calendar = BusinessCalendar::standard([d("2025-01-20")]).unwrap();
        // Deterministic but varying daily rates.
        let rate_of = |day: NaiveDate| 0.04 + 1e-4 * f64::from(day.day() % 7);

        let m = FuturesContract::monthly(ContractKind::Ff30d, "FFF5", 2025, 1).unwrap();
        let resolved = resolve(&m, &calendar, d("2025-01-01"), None).unwrap();
        let got = resolved
            .settlement_rate(|day| Ok(rate_of(day)))
            .unwrap();
        assert_relative_eq!(
            got,
            oracle_monthly_average(&m, &calendar, &rate_of),
            max_relative = 1e-15
        );

        let q = FuturesContract::quarterly("SFRZ4", 2024, 12).unwrap();
        let resolved = resolve(&q, &calendar, d("2024-12-01"), None).unwrap();
        let got = resolved
            .settlement_rate(|day| Ok(rate_of(day)))
            .unwrap();
        assert_relative_eq!(
            got,
            oracle_compounded_rate(&q, &calendar, &rate_of),
            max_relative = 1e-15
        );
    }

    #[test]
    fn observed_and_model_rates_blend_mid_period() {
        // Observe on Jan 16: the first half is fixed, the rest is model.
        let model = flat_model(0.04, 0.0);
        let c = FuturesContract::monthly(ContractKind::Sofr1m, "SERF5", 2025, 1).unwrap();
        let obs: Vec<(NaiveDate, f64)> = cal()
            .business_days_between(d("2025-01-01"), d("2025-01-16"))
            .into_iter()
            .map(|day| (day, 0.05))
            .collect();
        let n_fixed = {
            // Calendar days sourced before Jan 16.
            let mut n = 0.0;
            let mut day = d("2025-01-01");
            while day < d("2025-02-01") {
                if cal().prior_or_self_business(day).unwrap() < d("2025-01-16") {
                    n += 1.0;
                }
                day = day.succ_opt().unwrap();
            }
            n
        };
        let fixings = FixingSeries::new(obs).unwrap();
        let price = price_quote(&model, &c, d("2025-01-16"), Some(&fixings)).unwrap();
        let expected = 100.0 * (1.0 - (n_fixed * 0.05 + (31.0 - n_fixed) * 0.04) / 31.0);
        assert_relative_eq!(price, expected, max_relative = 1e-12);
    }

    #[test]
    fn term_rate_matches_the_quarterly_convention() {
        let fixings = FixingSeries::new(
            cal()
                .business_days_between(d("2025-03-19"), d("2025-06-18"))
                .into_iter()
                .map(|day| (day, 0.04 + 1e-4 * f64::from(day.day() % 7)))
                .collect(),
        )
        .unwrap();
        let c = FuturesContract::quarterly("SFRH5", 2025, 3).unwrap();
        let resolved = resolve(&c, &cal(), d("2025-07-01"), Some(&fixings)).unwrap();
        assert!(resolved.is_fully_settled());
        let via_contract = resolved
            .settlement_rate(|day| -> Result<f64> { panic!("unexpected query for {day}") })
            .unwrap();
        let via_term =
            compounded_term_rate(&cal(), &fixings, d("2025-03-19"), d("2025-06-18")).unwrap();
        assert_eq!(via_contract.to_bits(), via_term.to_bits());

        assert!(compounded_term_rate(&cal(), &fixings, d("2025-06-18"), d("2025-06-18")).is_err());
        assert!(
            compounded_term_rate(&cal(), &fixings, d("2025-01-01"), d("2025-02-01")).is_err()
        );
    }

    #[test]
    fn quotes_csv_round_trips_and_reports_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("quotes.csv");
        let quotes = vec![
            FuturesQuote {
                observe_date: d("2025-01-02"),
                contract: FuturesContract::monthly(ContractKind::Ff30d, "FFF5", 2025, 1)
                    .unwrap(),
                price: 95.6875,
            },
            FuturesQuote {
                observe_date: d("2025-01-02"),
                contract: FuturesContract::quarterly("SFRH5", 2025, 3).unwrap(),
                price: 96.03,
            },
        ];
        write_quotes_path(&path, &quotes).unwrap();
        assert_eq!(read_quotes_path(&path).unwrap(), quotes);

        std::fs::write(
            &path,
            "observe_date,contract_kind,contract_code,ref_start,ref_end,price\n\
             2025-01-02,FF30D,FFF5,2025-01-01,2025-02-01,95.68\n\
             2025-01-02,FF30D,FFG5,2025-02-02,2025-03-01,95.70\n",
        )
        .unwrap();
        match read_quotes_path(&path).unwrap_err() {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 3);
                assert!(msg.contains("must start on the 1st"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }

        std::fs::write(&path, "date,price\n2025-01-02,95.0\n").unwrap();
        assert!(read_quotes_path(&path).is_err());
    }
}
