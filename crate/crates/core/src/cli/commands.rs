//! The file-to-file subcommands that need no optimizer or simulator:
//! decompose, hurst, price, r2, termrate. Shared loading helpers live here
//! too.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Months, NaiveDate};

use crate::diagnostics::{
    anticipation_r2, decompose, default_horizon_edges, default_hurst_lags, hurst_fit,
    AnticipationTable, HurstFit, COMPONENT_NAMES,
};
use crate::error::{Error, Result};
use crate::futures::{compounded_term_rate, price_quote, read_quotes_path};
use crate::market::calendar::first_of_next_month;
use crate::market::{BusinessCalendar, DatedCurve, FixingSeries};

use super::calibrate_cmd::CurveDocument;
use super::config::RunConfig;
use super::fmt::{fmt_sig, write_csv, write_json};

pub(super) fn calendar_from(config: &RunConfig) -> Result<BusinessCalendar> {
    BusinessCalendar::standard(config.holidays.iter().copied())
}

pub(super) fn echo_config(config: &RunConfig, out: &Path) -> Result<()> {
    // The output location is where the echo lives, not part of the run's
    // content; dropping it keeps reruns into any directory byte-identical.
    let mut echoed = config.clone();
    echoed.out_dir = None;
    write_json(&out.join("config.json"), &echoed)
}

pub(super) fn load_fixings(path: &Path) -> Result<FixingSeries> {
    FixingSeries::from_csv_path(path)
}

pub(super) fn load_fixings_opt(path: Option<&PathBuf>) -> Result<Option<FixingSeries>> {
    path.map(|p| load_fixings(p)).transpose()
}

fn missing_section(name: &str) -> Error {
    Error::invalid(format!(
        "config has no \"{name}\" section; the {name} command needs one"
    ))
}

/// Last business day of every month intersecting `[first, last]`.
fn derived_eom_dates(
    calendar: &BusinessCalendar,
    first: NaiveDate,
    last: NaiveDate,
) -> Result<Vec<NaiveDate>> {
    let mut dates = Vec::new();
    let (mut year, mut month) = (first.year(), first.month());
    loop {
        let eom = calendar.last_business_day_of_month(year, month)?;
        if eom > last {
            break;
        }
        if eom >= first {
            dates.push(eom);
        }
        let next = first_of_next_month(year, month)?;
        (year, month) = (next.year(), next.month());
    }
    Ok(dates)
}

/// Default Hurst lags shrunk to what `len` supports; empty when even two
/// lags do not fit.
fn feasible_default_lags(len: usize) -> Vec<usize> {
    let lags: Vec<usize> = default_hurst_lags()
        .into_iter()
        .filter(|&lag| len >= 10 * lag)
        .collect();
    if lags.len() < 2 {
        Vec::new()
    } else {
        lags
    }
}

fn hurst_csv_rows(fit: &HurstFit) -> Vec<Vec<String>> {
    fit.rows
        .iter()
        .map(|r| {
            vec![
                r.lag.to_string(),
                fmt_sig(r.variance),
                fmt_sig(r.fitted_variance),
            ]
        })
        .collect()
}

const HURST_HEADER: [&str; 3] = ["lag", "variance", "fitted_variance"];

pub fn cmd_decompose(config: &mut RunConfig, out: &Path) -> Result<()> {
    let calendar = calendar_from(config)?;
    let cfg = config
        .decompose
        .as_mut()
        .ok_or_else(|| missing_section("decompose"))?;
    let series = load_fixings(&cfg.series_csv)?;
    let target = load_fixings(&cfg.target_csv)?;
    if series.is_empty() {
        return Err(Error::data("the fixing series is empty"));
    }
    let eom_dates = match &cfg.eom_dates {
        Some(dates) => dates.clone(),
        None => derived_eom_dates(
            &calendar,
            series.first_date().expect("non-empty"),
            series.last_date().expect("non-empty"),
        )?,
    };
    cfg.eom_dates = Some(eom_dates.clone());

    let result = decompose(&series, &target, &eom_dates, cfg.spike_threshold)?;

    // Hurst regression of the residual component; with explicit lags any
    // infeasibility is an error, while the default adapts to the series
    // length and degrades to a header-only table.
    let lags = match &cfg.hurst_lags {
        Some(lags) => lags.clone(),
        None => feasible_default_lags(result.residual.len()),
    };
    cfg.hurst_lags = Some(lags.clone());
    let fit = if lags.is_empty() {
        None
    } else {
        match hurst_fit(&result.residual, &lags) {
            Ok(fit) => Some(fit),
            // A flat residual (series identical to target) has no variance
            // at any lag; report an empty table rather than failing the
            // whole decomposition.
            Err(Error::DataConsistency(_)) => None,
            Err(e) => return Err(e),
        }
    };

    echo_config(config, out)?;

    let rows: Vec<Vec<String>> = (0..result.len())
        .map(|i| {
            vec![
                result.dates[i].to_string(),
                fmt_sig(result.observed[i]),
                fmt_sig(result.target[i]),
                fmt_sig(result.eom_spike[i]),
                fmt_sig(result.non_eom_spike[i]),
                fmt_sig(result.residual[i]),
            ]
        })
        .collect();
    write_csv(
        &out.join("decomposition.csv"),
        &[
            "date",
            "observed",
            "target",
            "eom_spike",
            "non_eom_spike",
            "residual",
        ],
        &rows,
    )?;

    let shares = result.variance_share();
    let var_rows: Vec<Vec<String>> = (0..4)
        .map(|c| {
            let mut row = vec![
                COMPONENT_NAMES[c].to_string(),
                fmt_sig(result.change_variance[c]),
                fmt_sig(shares[c]),
            ];
            for other in 0..4 {
                row.push(fmt_sig(result.change_correlation[c][other]));
            }
            row
        })
        .collect();
    write_csv(
        &out.join("variance_contribution.csv"),
        &[
            "component",
            "variance",
            "share",
            "corr_target",
            "corr_eom_spike",
            "corr_non_eom_spike",
            "corr_residual",
        ],
        &var_rows,
    )?;

    let hurst_rows = fit.as_ref().map(hurst_csv_rows).unwrap_or_default();
    write_csv(&out.join("hurst.csv"), &HURST_HEADER, &hurst_rows)?;
    if let Some(fit) = fit {
        write_json(&out.join("hurst.json"), &fit)?;
    }
    Ok(())
}

pub fn cmd_hurst(config: &mut RunConfig, out: &Path) -> Result<()> {
    let cfg = config
        .hurst
        .as_mut()
        .ok_or_else(|| missing_section("hurst"))?;
    let series = load_fixings(&cfg.series_csv)?;
    let values: Vec<f64> = series.rates().to_vec();
    let lags = match &cfg.lags {
        Some(lags) => lags.clone(),
        None => {
            let lags = feasible_default_lags(values.len());
            if lags.is_empty() {
                return Err(Error::invalid(format!(
                    "series of {} points is too short for a Hurst fit; need \
                     at least 20",
                    values.len()
                )));
            }
            lags
        }
    };
    cfg.lags = Some(lags.clone());
    let fit = hurst_fit(&values, &lags)?;
    echo_config(config, out)?;
    write_csv(&out.join("hurst.csv"), &HURST_HEADER, &hurst_csv_rows(&fit))?;
    write_json(&out.join("hurst.json"), &fit)
}

pub fn cmd_price(config: &mut RunConfig, out: &Path) -> Result<()> {
    let cfg = config
        .price
        .as_ref()
        .ok_or_else(|| missing_section("price"))?;
    let text = fs::read_to_string(&cfg.model_json)
        .map_err(|e| Error::io(cfg.model_json.display().to_string(), e))?;
    let spec = crate::composite::ModelSpec::from_json(&text)?;
    let model = crate::composite::CompositeModel::from_spec(&spec)?;
    let quotes = read_quotes_path(&cfg.quotes_csv)?;
    let effr = load_fixings_opt(cfg.effr_fixings_csv.as_ref())?;
    let sofr = load_fixings_opt(cfg.sofr_fixings_csv.as_ref())?;

    echo_config(config, out)?;

    let mut rows = Vec::with_capacity(quotes.len());
    for q in &quotes {
        let fixings = if q.contract.kind.is_fed_funds() {
            effr.as_ref()
        } else {
            sofr.as_ref()
        };
        let model_price = price_quote(&model, &q.contract, q.observe_date, fixings)?;
        rows.push(vec![
            q.observe_date.to_string(),
            q.contract.kind.to_string(),
            q.contract.code.clone(),
            q.contract.ref_start.to_string(),
            q.contract.ref_end.to_string(),
            fmt_sig(q.price),
            fmt_sig(model_price),
            fmt_sig(model_price - q.price),
        ]);
    }
    write_csv(
        &out.join("prices.csv"),
        &[
            "observe_date",
            "contract_kind",
            "contract_code",
            "ref_start",
            "ref_end",
            "market_price",
            "model_price",
            "difference",
        ],
        &rows,
    )
}

/// Realized policy changes: CSV with a `date,change` header.
fn read_realized_csv(path: &Path) -> Result<Vec<(NaiveDate, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        let parse_err = |msg: String| Error::Parse {
            path: path.display().to_string(),
            line: line_no,
            msg,
        };
        if i == 0 {
            if line.trim() != "date,change" {
                return Err(parse_err(format!(
                    "expected header \"date,change\", got {line:?}"
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (date_text, change_text) = line
            .split_once(',')
            .ok_or_else(|| parse_err("expected two comma-separated fields".into()))?;
        let date: NaiveDate = date_text
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("bad date {:?}: {e}", date_text.trim())))?;
        let change: f64 = change_text
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("bad change {:?}: {e}", change_text.trim())))?;
        rows.push((date, change));
    }
    Ok(rows)
}

/// Load every `.json` file in `dir` as a dated curve, accepting either a
/// calibration curve document or a bare dated curve. Files are read in
/// name order and results sorted by valuation date.
fn load_curves_dir(dir: &Path) -> Result<Vec<DatedCurve>> {
    let entries =
        fs::read_dir(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::data(format!(
            "no .json curve files in {}",
            dir.display()
        )));
    }
    let mut curves = Vec::with_capacity(files.len());
    for file in &files {
        let text =
            fs::read_to_string(file).map_err(|e| Error::io(file.display().to_string(), e))?;
        let curve = if let Ok(doc) = serde_json::from_str::<CurveDocument>(&text) {
            DatedCurve::new(doc.valuation_date, doc.ff.fomc_dates, doc.ff.levels)?
        } else {
            serde_json::from_str::<DatedCurve>(&text).map_err(|e| Error::Parse {
                path: file.display().to_string(),
                line: e.line() as u64,
                msg: format!(
                    "not a calibration curve document or a dated curve: {e}"
                ),
            })?
        };
        curves.push(curve);
    }
    curves.sort_by_key(|c| c.valuation);
    Ok(curves)
}

fn check_curve_gaps(curves: &[DatedCurve], max_gap_days: i64) -> Result<()> {
    for pair in curves.windows(2) {
        let gap = (pair[1].valuation - pair[0].valuation).num_days();
        if gap > max_gap_days {
            return Err(Error::data(format!(
                "curve dates {} and {} are {gap} days apart, above the \
                 configured tolerance of {max_gap_days}",
                pair[0].valuation, pair[1].valuation
            )));
        }
    }
    Ok(())
}

fn r2_rows(table: &AnticipationTable) -> Vec<Vec<String>> {
    table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.bucket_lo.to_string(),
                r.bucket_hi.to_string(),
                fmt_sig(r.r2),
                r.n.to_string(),
            ]
        })
        .collect()
}

const R2_HEADER: [&str; 4] = ["bucket_lo", "bucket_hi", "r2", "n"];

pub fn cmd_r2(config: &mut RunConfig, out: &Path) -> Result<()> {
    let cfg = config.r2.as_mut().ok_or_else(|| missing_section("r2"))?;
    let realized = read_realized_csv(&cfg.realized_csv)?;
    let curves = load_curves_dir(&cfg.curves_dir)?;
    if let Some(max_gap) = cfg.max_gap_days {
        check_curve_gaps(&curves, max_gap)?;
    }
    let edges = cfg
        .horizon_edges
        .clone()
        .unwrap_or_else(default_horizon_edges);
    cfg.horizon_edges = Some(edges.clone());
    let naive_dir = cfg.naive_curves_dir.clone();

    echo_config(config, out)?;

    let table = anticipation_r2(&realized, &curves, &edges)?;
    write_csv(&out.join("r2.csv"), &R2_HEADER, &r2_rows(&table))?;

    if let Some(dir) = naive_dir {
        let naive_curves = load_curves_dir(&dir)?;
        let naive_table = anticipation_r2(&realized, &naive_curves, &edges)?;
        write_csv(&out.join("r2_naive.csv"), &R2_HEADER, &r2_rows(&naive_table))?;
    }
    Ok(())
}

pub fn cmd_termrate(config: &mut RunConfig, out: &Path) -> Result<()> {
    let calendar = calendar_from(config)?;
    let cfg = config
        .termrate
        .as_mut()
        .ok_or_else(|| missing_section("termrate"))?;
    if cfg.months == 0 {
        return Err(Error::invalid("term length must be at least one month"));
    }
    let fixings = load_fixings(&cfg.fixings_csv)?;
    let (first, last) = match (fixings.first_date(), fixings.last_date()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::data("the fixing series is empty")),
    };
    let from = cfg.from.unwrap_or(first);
    let explicit_to = cfg.to;
    let scan_to = explicit_to.unwrap_or(last);
    let benchmark = load_fixings_opt(cfg.benchmark_csv.as_ref())?;

    let mut rows = Vec::new();
    let mut last_start = from;
    for start in calendar.business_days_between(from, scan_to + chrono::Duration::days(1)) {
        let end = start
            .checked_add_months(Months::new(cfg.months))
            .ok_or_else(|| Error::invalid(format!("term end overflows from {start}")))?;
        // The final fixing the period needs is sourced on the last
        // business day before the period closes.
        let needed = calendar.prior_or_self_business(end - chrono::Duration::days(1))?;
        if needed > last {
            if explicit_to.is_some() {
                return Err(Error::data(format!(
                    "period [{start}, {end}) needs the fixing of {needed}, \
                     beyond the series end {last}"
                )));
            }
            break;
        }
        let rate = compounded_term_rate(&calendar, &fixings, start, end)?;
        let mut row = vec![start.to_string(), end.to_string(), fmt_sig(rate)];
        if let Some(bench) = &benchmark {
            match bench.get(start) {
                Some(b) => {
                    row.push(fmt_sig(b));
                    row.push(fmt_sig(rate - b));
                }
                None => {
                    row.push(String::new());
                    row.push(String::new());
                }
            }
        }
        rows.push(row);
        last_start = start;
    }
    cfg.from = Some(from);
    cfg.to = Some(if rows.is_empty() { scan_to } else { last_start });

    echo_config(config, out)?;

    let header: Vec<&str> = if benchmark.is_some() {
        vec!["start", "end", "rate", "benchmark", "spread"]
    } else {
        vec!["start", "end", "rate"]
    };
    write_csv(&out.join("termrate.csv"), &header, &rows)
}
