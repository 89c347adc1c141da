//! Exact linear-algebra substrate: pure states, mixed states, gate
//! application, computational-basis measurement and distance metrics.
//!
//! Qubit 0 is the most significant bit of an amplitude index, so the
//! two-qubit state `|q0 q1>` lives at index `2*q0 + q1`.

mod density;
pub mod gates;
pub(crate) mod kernel;
mod matrix;
mod metrics;
mod state;

pub use density::DensityMatrix;
pub use matrix::CMatrix;
pub use metrics::{fidelity, pure_trace_distance, statistical_distance, trace_distance, ProbTable};
pub use state::{measure_computational, Measurement, StateVector};

/// `(qubit, required value)` pair gating a controlled operation.
pub type Control = (usize, bool);
