//! The simulate subcommand: Monte Carlo paths of the composite short rate
//! plus per-time summaries, with the discount-factor mean checked against
//! the closed-form bond price as a built-in sanity column.

use std::fs;
use std::path::Path;

use crate::composite::{CompositeModel, ModelSpec};
use crate::error::{Error, Result};
use crate::numerics::mean_and_se;
use crate::sim::{simulate_map, simulation_grid, SimulationConfig};

use super::commands::echo_config;
use super::config::RunConfig;
use super::fmt::{fmt_sig, write_csv};

pub fn cmd_simulate(config: &mut RunConfig, out: &Path) -> Result<()> {
    let global_seed = config.seed;
    let cfg = config
        .simulate
        .as_mut()
        .ok_or_else(|| Error::invalid("config has no \"simulate\" section"))?;

    let text = fs::read_to_string(&cfg.model_json)
        .map_err(|e| Error::io(cfg.model_json.display().to_string(), e))?;
    let mut spec = ModelSpec::from_json(&text)?;
    if let Some(xi) = &cfg.xi {
        spec.xi = xi.clone();
    }
    if let Some(rho) = &cfg.rho {
        spec.rho = rho.clone();
    }
    if let Some(sigma_z) = &cfg.sigma_z {
        spec.sigma_z = sigma_z.clone();
    }
    if let Some(residual) = &cfg.residual {
        spec.residual = residual.clone();
    }

    for &q in &cfg.quantiles {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid(format!(
                "quantile {q} is outside [0, 1]"
            )));
        }
    }
    let grid_step_days = u32::try_from(cfg.grid_step_days)
        .ok()
        .filter(|&d| d > 0)
        .ok_or_else(|| {
            Error::invalid(format!(
                "grid_step_days {} must be a positive day count",
                cfg.grid_step_days
            ))
        })?;
    let seed = global_seed.or(cfg.seed).unwrap_or(0);
    cfg.seed = Some(seed);

    let sim_config = SimulationConfig {
        paths: cfg.paths,
        seed,
        antithetic: cfg.antithetic,
        grid_step_days,
        horizon: cfg.horizon,
    };
    let output_paths = cfg.output_paths;
    let quantiles = cfg.quantiles.clone();

    let model = CompositeModel::from_spec(&spec)?;
    let grid = simulation_grid(&model, &sim_config)?;
    echo_config(config, out)?;

    // One (rates, discounts) pair per path, in path order.
    let per_path: Vec<(Vec<f64>, Vec<f64>)> =
        simulate_map(&model, &sim_config, |_, path| -> Result<_> {
            let mut rates = Vec::with_capacity(path.len());
            let mut discounts = Vec::with_capacity(path.len());
            for (&t, state) in path.times().iter().zip(path.states()) {
                rates.push(model.short_rate(state, t)?);
                discounts.push(state.discount());
            }
            Ok((rates, discounts))
        })?
        .into_iter()
        .collect::<Result<_>>()?;

    let shown = output_paths.min(per_path.len());
    let mut path_rows = Vec::with_capacity(shown * grid.len());
    for (p, (rates, discounts)) in per_path.iter().take(shown).enumerate() {
        for ((&t, &rate), &discount) in grid.iter().zip(rates).zip(discounts) {
            path_rows.push(vec![
                p.to_string(),
                fmt_sig(t),
                fmt_sig(rate),
                fmt_sig(discount),
            ]);
        }
    }
    write_csv(
        &out.join("paths.csv"),
        &["path", "t", "rate", "discount"],
        &path_rows,
    )?;

    let quantile_labels: Vec<String> = quantiles.iter().map(|q| format!("q{q}")).collect();
    let mut header: Vec<&str> = vec!["t", "mean_rate"];
    header.extend(quantile_labels.iter().map(String::as_str));
    header.extend(["mean_discount", "se_discount", "bond_price", "within_3se"]);

    let initial = model.initial_state();
    let mut summary_rows = Vec::with_capacity(grid.len());
    let mut rates_at = vec![0.0; per_path.len()];
    let mut discounts_at = vec![0.0; per_path.len()];
    for (i, &t) in grid.iter().enumerate() {
        for (slot, (rates, _)) in rates_at.iter_mut().zip(&per_path) {
            *slot = rates[i];
        }
        for (slot, (_, discounts)) in discounts_at.iter_mut().zip(&per_path) {
            *slot = discounts[i];
        }
        let (mean_rate, _) = mean_and_se(&rates_at);
        let (mean_discount, se_discount) = mean_and_se(&discounts_at);
        let bond = model.bond_price(&initial, 0.0, t)?;
        // The rounding floor keeps deterministic stretches (standard error
        // at machine noise) from flagging one-ulp differences.
        let within = (mean_discount - bond).abs() <= 3.0 * se_discount + 1e-12;

        let mut sorted = rates_at.clone();
        sorted.sort_unstable_by(f64::total_cmp);
        let n = sorted.len();
        let mut row = vec![fmt_sig(t), fmt_sig(mean_rate)];
        for &q in &quantiles {
            let idx = ((q * (n - 1) as f64).round() as usize).min(n - 1);
            row.push(fmt_sig(sorted[idx]));
        }
        row.push(fmt_sig(mean_discount));
        row.push(fmt_sig(se_discount));
        row.push(fmt_sig(bond));
        row.push(within.to_string());
        summary_rows.push(row);
    }
    write_csv(&out.join("summary.csv"), &header, &summary_rows)
}
