//! Path simulation for the composite model.
//!
//! The simulator advances the joint state over a refined time grid that
//! contains every component event time (step dates, spike window starts and
//! ends), so factor freezing happens at the exact event instants and the
//! per-interval short-rate integrals stay exact. Randomness is organized as
//! one independent counter-based stream per (path, factor), which makes every
//! path reproducible in isolation and keeps results identical under any
//! parallel schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::composite::{CompositeModel, CompositeState};
use crate::error::{Error, Result};

/// Two grid points closer than this collapse into one, keeping the later.
const GRID_MERGE_TOL: f64 = 1e-12;

/// Factor indices are packed into the low bits of the stream id.
const FACTOR_BITS: u32 = 20;

#[derive(Clone, Copy, Debug)]
pub struct SimulationConfig {
    /// Number of simulated paths.
    pub paths: usize,
    /// Base seed; every (path, factor) stream derives from it.
    pub seed: u64,
    /// Pair consecutive paths with mirrored draws.
    pub antithetic: bool,
    /// Base grid spacing in days; event times are inserted on top.
    pub grid_step_days: u32,
    /// Final simulation time in years.
    pub horizon: f64,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::invalid("simulation needs at least one path"));
        }
        if self.paths as u64 >= 1 << (63 - FACTOR_BITS) {
            return Err(Error::invalid(format!(
                "path count {} exceeds the stream id budget",
                self.paths
            )));
        }
        if self.grid_step_days == 0 {
            return Err(Error::invalid("grid step must be at least one day"));
        }
        if !self.horizon.is_finite() || self.horizon <= 0.0 {
            return Err(Error::invalid(format!(
                "simulation horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// One simulated path: the time grid and the joint state at every grid
/// point, starting from the time-zero state.
#[derive(Clone, Debug)]
pub struct SimulatedPath {
    times: Vec<f64>,
    states: Vec<CompositeState>,
}

impl SimulatedPath {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[CompositeState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &CompositeState {
        self.states.last().expect("a path has at least the initial state")
    }
}

/// Per-path random source: one ChaCha stream per stochastic factor, with an
/// optional global sign flip for the odd member of an antithetic pair.
struct PathRng {
    streams: Vec<ChaCha8Rng>,
    sign: f64,
}

impl PathRng {
    fn new(seed: u64, path_index: usize, antithetic: bool, factors: usize) -> Result<Self> {
        if (factors as u64) >= 1 << FACTOR_BITS {
            return Err(Error::invalid(format!(
                "{factors} stochastic factors exceed the per-path stream budget"
            )));
        }
        let (base, sign) = if antithetic {
            ((path_index / 2) as u64, if path_index % 2 == 1 { -1.0 } else { 1.0 })
        } else {
            (path_index as u64, 1.0)
        };
        let streams = (0..factors)
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                // Offset by one so no path shares the seed's default stream 0.
                rng.set_stream(((base + 1) << FACTOR_BITS) | k as u64);
                rng
            })
            .collect();
        Ok(PathRng { streams, sign })
    }

    fn draw(&mut self, factor: usize) -> f64 {
        let n: f64 = StandardNormal.sample(&mut self.streams[factor]);
        self.sign * n
    }
}

/// Build the simulation grid: regular ticks every `grid_step_days` plus every
/// component event time, clipped to the horizon. The grid starts at 0, ends
/// exactly at the horizon, and is strictly increasing; points closer than the
/// merge tolerance collapse to the later one so events land exactly.
pub fn simulation_grid(model: &CompositeModel, config: &SimulationConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let dt = model.grid().days_to_years(config.grid_step_days as i64);
    let mut points = vec![0.0];
    let mut k: u64 = 1;
    loop {
        let t = k as f64 * dt;
        if t >= config.horizon {
            break;
        }
        points.push(t);
        k += 1;
    }
    points.push(config.horizon);
    for e in model.event_times() {
        if e > 0.0 && e <= config.horizon {
            points.push(e);
        }
    }
    points.sort_by(|a, b| a.partial_cmp(b).expect("grid points are finite"));

    let mut grid: Vec<f64> = Vec::with_capacity(points.len());
    for &p in &points {
        if let Some(last) = grid.last_mut() {
            if p - *last < GRID_MERGE_TOL {
                *last = p;
                continue;
            }
        }
        grid.push(p);
    }
    Ok(grid)
}

/// Simulate one path over a prebuilt grid.
fn run_path(
    model: &CompositeModel,
    grid: &[f64],
    config: &SimulationConfig,
    path_index: usize,
) -> Result<SimulatedPath> {
    let n_step = model.step().len();
    let n_spike = model.spike().len();
    let mut rng = PathRng::new(config.seed, path_index, config.antithetic, n_step + n_spike + 2)?;

    let mut step_draws = vec![0.0; n_step];
    let mut spike_draws = vec![0.0; n_spike];
    let mut states = Vec::with_capacity(grid.len());
    let mut state = model.initial_state();
    states.push(state.clone());

    for &target in &grid[1..] {
        for (j, slot) in step_draws.iter_mut().enumerate() {
            *slot = rng.draw(j);
        }
        for (j, slot) in spike_draws.iter_mut().enumerate() {
            *slot = rng.draw(n_step + j);
        }
        let r1 = rng.draw(n_step + n_spike);
        let r2 = rng.draw(n_step + n_spike + 1);
        state = model.advance(&state, target, &step_draws, &spike_draws, (r1, r2))?;
        states.push(state.clone());
    }

    Ok(SimulatedPath {
        times: grid.to_vec(),
        states,
    })
}

/// Simulate all paths in parallel and reduce each one with `f`. Results come
/// back in path order regardless of the parallel schedule.
pub fn simulate_map<T, F>(
    model: &CompositeModel,
    config: &SimulationConfig,
    f: F,
) -> Result<Vec<T>>
where
    F: Fn(usize, &SimulatedPath) -> T + Sync,
    T: Send,
{
    config.validate()?;
    let grid = simulation_grid(model, config)?;
    (0..config.paths)
        .into_par_iter()
        .map(|p| run_path(model, &grid, config, p).map(|path| f(p, &path)))
        .collect()
}

/// Simulate all paths and keep them whole.
pub fn simulate(model: &CompositeModel, config: &SimulationConfig) -> Result<Vec<SimulatedPath>> {
    simulate_map(model, config, |_, path| path.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composite::{tests::spec_fixture, ModelSpec};
    use crate::numerics::mean_and_se;
    use crate::residual::{ResidualParams, VasicekParams};
    use approx::assert_relative_eq;

    fn model() -> CompositeModel {
        CompositeModel::from_spec(&spec_fixture()).unwrap()
    }

    fn config(paths: usize) -> SimulationConfig {
        SimulationConfig {
            paths,
            seed: 7,
            antithetic: false,
            grid_step_days: 7,
            horizon: 0.6,
        }
    }

    #[test]
    fn grid_contains_all_events_and_endpoints() {
        let m = model();
        let cfg = config(1);
        let grid = simulation_grid(&m, &cfg).unwrap();
        assert_eq!(grid[0], 0.0);
        assert_eq!(*grid.last().unwrap(), cfg.horizon);
        assert!(grid.windows(2).all(|w| w[1] - w[0] >= GRID_MERGE_TOL));
        for e in m.event_times() {
            if e <= cfg.horizon {
                assert!(
                    grid.iter().any(|&g| g == e),
                    "event {e} missing from the grid"
                );
            }
        }
    }

    #[test]
    fn grid_merge_keeps_the_later_point() {
        // A horizon one part in 1e13 above a base tick collapses onto the
        // horizon, not the tick.
        let m = model();
        let mut cfg = config(1);
        let dt = m.grid().days_to_years(cfg.grid_step_days as i64);
        cfg.horizon = 10.0 * dt + 1e-13;
        let grid = simulation_grid(&m, &cfg).unwrap();
        assert_eq!(*grid.last().unwrap(), cfg.horizon);
        assert!(!grid.contains(&(10.0 * dt)));
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut cfg = config(0);
        assert!(cfg.validate().is_err());
        cfg.paths = 4;
        cfg.grid_step_days = 0;
        assert!(cfg.validate().is_err());
        cfg.grid_step_days = 7;
        cfg.horizon = -1.0;
        assert!(cfg.validate().is_err());
        cfg.horizon = f64::NAN;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn same_seed_reproduces_paths_bitwise() {
        let m = model();
        let cfg = config(4);
        let a = simulate(&m, &cfg).unwrap();
        let b = simulate(&m, &cfg).unwrap();
        assert_eq!(a.len(), b.len());
        for (pa, pb) in a.iter().zip(&b) {
            assert_eq!(pa.times(), pb.times());
            for (sa, sb) in pa.states().iter().zip(pb.states()) {
                assert_eq!(sa.integral().to_bits(), sb.integral().to_bits());
                assert_eq!(sa.residual_rate().to_bits(), sb.residual_rate().to_bits());
            }
        }
    }

    #[test]
    fn different_seeds_differ() {
        let m = model();
        let mut cfg = config(2);
        let a = simulate(&m, &cfg).unwrap();
        cfg.seed = 8;
        let b = simulate(&m, &cfg).unwrap();
        assert_ne!(
            a[0].final_state().integral().to_bits(),
            b[0].final_state().integral().to_bits()
        );
    }

    #[test]
    fn antithetic_partner_mirrors_a_centered_residual() {
        // Pure zero-mean OU residual: the state is linear in the draws, so
        // the odd path of a pair is the exact negation of the even path.
        let spec = ModelSpec {
            residual: ResidualParams::Vasicek(
                VasicekParams::new(0.0, 1.5, 0.02, 0.0).unwrap(),
            ),
            fomc_dates: vec![],
            xi: vec![],
            rho: vec![],
            f0_knots: vec![],
            f0_levels: vec![0.0],
            spike_dates: vec![],
            spike_widths_days: vec![],
            sigma_z: vec![],
            spike_levels: vec![],
            ..spec_fixture()
        };
        let m = CompositeModel::from_spec(&spec).unwrap();
        let mut cfg = config(2);
        cfg.antithetic = true;
        let paths = simulate(&m, &cfg).unwrap();
        assert_eq!(paths[0].states()[0].residual_rate(), 0.0);
        // Skip the shared t = 0 state: negating +0.0 yields -0.0.
        for (sa, sb) in paths[0].states().iter().zip(paths[1].states()).skip(1) {
            assert_eq!(
                sa.residual_rate().to_bits(),
                (-sb.residual_rate()).to_bits()
            );
            assert_eq!(sa.integral().to_bits(), (-sb.integral()).to_bits());
        }
    }

    #[test]
    fn zero_volatility_paths_recover_the_bond_exactly() {
        let mut spec = spec_fixture();
        spec.xi = vec![0.0, 0.0];
        spec.sigma_z = vec![0.0, 0.0];
        let m = CompositeModel::from_spec(&spec).unwrap();
        let cfg = config(3);
        let paths = simulate(&m, &cfg).unwrap();
        let state0 = m.initial_state();
        let bond = m.bond_price(&state0, 0.0, cfg.horizon).unwrap();
        for p in &paths {
            assert_relative_eq!(p.final_state().discount(), bond, max_relative = 1e-12);
        }
        // All paths identical.
        assert_eq!(
            paths[0].final_state().integral().to_bits(),
            paths[2].final_state().integral().to_bits()
        );
    }

    #[test]
    fn monte_carlo_discount_matches_the_closed_form_bond() {
        let spec = ModelSpec {
            residual: ResidualParams::Vasicek(
                VasicekParams::new(0.06, 1.2, 0.015, 0.0435).unwrap(),
            ),
            ..spec_fixture()
        };
        let m = CompositeModel::from_spec(&spec).unwrap();
        let cfg = SimulationConfig {
            paths: 40_000,
            seed: 20250102,
            antithetic: true,
            grid_step_days: 7,
            horizon: 0.6,
        };
        let discounts =
            simulate_map(&m, &cfg, |_, path| path.final_state().discount()).unwrap();
        let (est, se) = mean_and_se(&discounts);
        let state0 = m.initial_state();
        let bond = m.bond_price(&state0, 0.0, cfg.horizon).unwrap();
        assert!(
            (est - bond).abs() < 3.5 * se.max(1e-9),
            "MC discount {est} vs bond {bond} (se {se})"
        );
    }

    #[test]
    fn map_results_come_back_in_path_order() {
        let m = model();
        let cfg = config(32);
        let ids = simulate_map(&m, &cfg, |p, _| p).unwrap();
        assert_eq!(ids, (0..32).collect::<Vec<_>>());
    }
}
