//! The calibrate subcommand: stage one fits the target curve to Fed Funds
//! quotes, stage two fits spikes and spread to SOFR quotes on top of it.
//! Stages communicate through `curve.json` in the output directory, so
//! `--stage sofr` can resume from an earlier `--stage ff` run.

use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    build_spec, calibrate_ff, calibrate_sofr, eom_spike_schedule, CalibrationProblem, FfFit,
    QuoteResidual, SofrFit,
};
use crate::composite::ModelSpec;
use crate::error::{Error, Result};
use crate::futures::{read_quotes_path, write_quotes_path, ContractKind, FuturesQuote};

use super::commands::{calendar_from, echo_config, load_fixings_opt};
use super::config::{RunConfig, Stage};
use super::fmt::{fmt_sig, quantize, write_csv, write_json};

/// The durable calibration artifact: fitted parameters per stage plus the
/// assembled deterministic model snapshot.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveDocument {
    pub valuation_date: NaiveDate,
    pub ff: FfFit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sofr: Option<SofrFit>,
    pub model: ModelSpec,
}

fn residual_csv_rows<'a>(
    stage: &str,
    residuals: impl IntoIterator<Item = &'a QuoteResidual>,
) -> Vec<Vec<String>> {
    residuals
        .into_iter()
        .map(|r| {
            vec![
                stage.to_string(),
                r.code.clone(),
                r.kind.clone(),
                r.ref_start.to_string(),
                fmt_sig(r.market_price),
                fmt_sig(r.model_price),
                fmt_sig(r.tolerance),
                fmt_sig(r.error),
            ]
        })
        .collect()
}

/// Quotes repriced at the fitted parameters, in residual-report order,
/// keeping the input schema so the file can feed any command that reads
/// quotes.
fn repriced_quotes(
    quotes: &[FuturesQuote],
    residuals: &[&QuoteResidual],
) -> Result<Vec<FuturesQuote>> {
    residuals
        .iter()
        .map(|r| {
            let original = quotes
                .iter()
                .find(|q| {
                    q.contract.code == r.code
                        && q.contract.kind.to_string() == r.kind
                        && q.contract.ref_start == r.ref_start
                })
                .ok_or_else(|| {
                    Error::data(format!(
                        "repriced contract {} not found among the input quotes",
                        r.code
                    ))
                })?;
            Ok(FuturesQuote {
                observe_date: original.observe_date,
                contract: original.contract.clone(),
                price: quantize(r.model_price),
            })
        })
        .collect()
}

pub fn cmd_calibrate(
    config: &mut RunConfig,
    out: &Path,
    stage_flag: Option<&str>,
) -> Result<()> {
    let calendar = calendar_from(config)?;
    let cfg = config
        .calibrate
        .as_mut()
        .ok_or_else(|| Error::invalid("config has no \"calibrate\" section"))?;
    let stage = match stage_flag {
        Some(text) => text.parse()?,
        None => cfg.stage.unwrap_or(Stage::Both),
    };
    cfg.stage = Some(stage);
    if cfg.fomc_dates.is_empty() {
        return Err(Error::invalid(
            "calibration needs at least the policy-date schedule (fomc_dates)",
        ));
    }

    let quotes = read_quotes_path(&cfg.quotes_csv)?;
    let effr_fixings = load_fixings_opt(cfg.effr_fixings_csv.as_ref())?;
    let sofr_fixings = load_fixings_opt(cfg.sofr_fixings_csv.as_ref())?;
    let mut settings = cfg.settings.clone().unwrap_or_default();
    if let Some(seed) = config.seed {
        settings.optimizer_seed = seed;
    }
    cfg.settings = Some(settings.clone());

    // Spike schedule for stage two: explicit dates (widths default to the
    // calendar's carry to the next business day), or derived month-ends
    // across the SOFR quote span.
    let needs_sofr = stage != Stage::Ff;
    let (spike_dates, spike_widths) = if needs_sofr {
        match (&cfg.spike_dates, &cfg.spike_widths_days) {
            (Some(dates), Some(widths)) => {
                if dates.len() != widths.len() {
                    return Err(Error::invalid(format!(
                        "{} spike dates but {} widths",
                        dates.len(),
                        widths.len()
                    )));
                }
                (dates.clone(), widths.clone())
            }
            (Some(dates), None) => {
                let widths = dates
                    .iter()
                    .map(|&z| calendar.days_to_next_business(z))
                    .collect::<Result<Vec<i64>>>()?;
                (dates.clone(), widths)
            }
            (None, Some(_)) => {
                return Err(Error::invalid(
                    "spike_widths_days given without spike_dates",
                ))
            }
            (None, None) => {
                let span_end = quotes
                    .iter()
                    .filter(|q| q.contract.kind != ContractKind::Ff30d)
                    .map(|q| q.contract.ref_end)
                    .max();
                match span_end {
                    Some(end) => eom_spike_schedule(
                        &calendar,
                        cfg.valuation_date + chrono::Duration::days(1),
                        end,
                    )?,
                    None => (Vec::new(), Vec::new()),
                }
            }
        }
    } else {
        (Vec::new(), Vec::new())
    };
    if needs_sofr {
        cfg.spike_dates = Some(spike_dates.clone());
        cfg.spike_widths_days = Some(spike_widths.clone());
    }

    let valuation_date = cfg.valuation_date;
    let fomc_dates = cfg.fomc_dates.clone();
    let current_target = cfg.current_target;

    echo_config(config, out)?;

    let ff: FfFit = match stage {
        Stage::Ff | Stage::Both => {
            let problem = CalibrationProblem {
                valuation_date,
                calendar: &calendar,
                quotes: &quotes,
                fixings: effr_fixings.as_ref(),
                settings: settings.clone(),
            };
            calibrate_ff(&problem, &fomc_dates, current_target)?
        }
        Stage::Sofr => {
            let path = out.join("curve.json");
            let text = fs::read_to_string(&path).map_err(|_| {
                Error::MissingStage(format!(
                    "--stage sofr needs the ff stage's {} ; run --stage ff \
                     (or both) into this output directory first",
                    path.display()
                ))
            })?;
            let doc: CurveDocument = serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: e.line() as u64,
                msg: e.to_string(),
            })?;
            if doc.valuation_date != valuation_date {
                return Err(Error::data(format!(
                    "existing curve.json values {} but this run values {}",
                    doc.valuation_date, valuation_date
                )));
            }
            doc.ff
        }
    };

    let sofr = if needs_sofr {
        let problem = CalibrationProblem {
            valuation_date,
            calendar: &calendar,
            quotes: &quotes,
            fixings: sofr_fixings.as_ref(),
            settings: settings.clone(),
        };
        Some(calibrate_sofr(
            &problem,
            &ff.fomc_dates,
            &ff.levels,
            &spike_dates,
            &spike_widths,
        )?)
    } else {
        None
    };
    let document = CurveDocument {
        valuation_date,
        model: build_spec(valuation_date, &calendar, &ff, sofr.as_ref()),
        ff,
        sofr,
    };
    write_json(&out.join("curve.json"), &document)?;

    let mut residual_rows = residual_csv_rows("ff", &document.ff.residuals);
    let mut all_residuals: Vec<&QuoteResidual> = document.ff.residuals.iter().collect();
    if let Some(sofr) = &document.sofr {
        residual_rows.extend(residual_csv_rows("sofr", &sofr.residuals));
        all_residuals.extend(sofr.residuals.iter());
    }
    write_csv(
        &out.join("residuals.csv"),
        &[
            "stage",
            "code",
            "kind",
            "ref_start",
            "market_price",
            "model_price",
            "tolerance",
            "error",
        ],
        &residual_rows,
    )?;
    write_quotes_path(
        out.join("repriced.csv"),
        &repriced_quotes(&quotes, &all_residuals)?,
    )?;

    let mut failures = Vec::new();
    if !document.ff.converged && stage != Stage::Sofr {
        failures.push(format!(
            "ff objective {} above threshold {}",
            fmt_sig(document.ff.objective),
            fmt_sig(settings.converged_threshold)
        ));
    }
    if let Some(sofr) = &document.sofr {
        if !sofr.converged {
            failures.push(format!(
                "sofr objective {} above threshold {}",
                fmt_sig(sofr.objective),
                fmt_sig(settings.converged_threshold)
            ));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::NoConvergence(format!(
            "{} (outputs written with converged:false)",
            failures.join("; ")
        )))
    }
}
