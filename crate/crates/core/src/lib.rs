//! Simulation and pulse optimization for a fast CZ gate between two transmons
//! coupled through a frequency-tunable transmon coupler.
//!
//! The crate is layered bottom-up:
//!
//! - [`numerics`]: dense complex eigendecomposition, `exp(-iHt)` and its
//!   Fréchet derivative.
//! - [`circuit`]: the three-transmon Hamiltonian, eigenstate labeling and
//!   static coupling diagnostics.
//! - [`control`]: piecewise-constant coupler pulses, propagation, CZ fidelity
//!   with virtual-Z compensation, leakage and the RL reward.
//! - [`gradopt`]: analytic pulse gradients and a bounded Adam refiner.
//! - [`rl`]: a from-scratch soft actor-critic agent and the gate environment.

pub mod circuit;
pub mod control;
pub mod error;
pub mod gradopt;
pub mod numerics;
pub mod rl;

pub use circuit::{CircuitParams, LevelLabel, TransmonParams};
pub use control::{GateEvaluation, GateModel, PulseSchedule, ScheduleShape, SmoothedPulse};
pub use error::{Error, Result};
