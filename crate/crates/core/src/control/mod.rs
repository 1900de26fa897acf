//! Pulse schedules, time evolution in the idle eigenbasis and CZ gate metrics.

mod fidelity;
mod model;
mod propagate;
mod pulse;

pub use fidelity::{compensated_trace, cz_fidelity, fidelity_at, leakage, reward, trace_weights, CzFidelity};
pub use model::{GateModel, Propagator};
pub use propagate::{propagate, propagate_smoothed, GateEvaluation, PopulationTrace};
pub use pulse::{smooth_pulse, PulseSchedule, ScheduleShape, SmoothedPulse, FULL_BOUNDS, RESTRICTED_BOUNDS};
