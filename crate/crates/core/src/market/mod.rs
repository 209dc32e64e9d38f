//! Market-data plumbing shared by every model component: calendars, model
//! time, piecewise-flat curves, jump schedules and fixing series.

pub mod calendar;
pub mod curve;
pub mod daycount;
pub mod fixings;
pub mod schedule;

pub use calendar::BusinessCalendar;
pub use curve::{DatedCurve, PiecewiseFlatCurve};
pub use daycount::{DateGrid, DayCount};
pub use fixings::FixingSeries;
pub use schedule::{JumpKind, JumpSchedule};
