//! Term-structure engine for a short rate driven by discontinuities at known
//! dates: a step component that moves only on policy-meeting dates, a spike
//! component active in short month-end windows, and a mean-reverting residual.
//! Includes closed-form bond and futures pricing, Monte Carlo simulation,
//! tolerance-band calibration to futures quotes, and empirical diagnostics.

pub mod calibration;
pub mod cli;
pub mod composite;
pub mod diagnostics;
pub mod error;
pub mod futures;
pub mod market;
pub mod numerics;
pub mod residual;
pub mod sim;
pub mod spike;
pub mod step;

pub use error::{Error, Result};
