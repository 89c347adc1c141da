//! Subset-reflection oracles and the oracle-aided circuit model.

mod circuit;
mod env;
mod subset;
mod text;

pub use circuit::{defer_measurements, run_circuit, Condition, Deferred, Gate, OracleAidedCircuit, RunOutput, RunResult};
pub use env::{apply_oracle, OracleEnv};
pub use subset::{all_subsets, sample_subset, subset_size, subset_states, SubsetSpec, SubsetStates, MAX_LAMBDA};
pub use text::{circuit_to_text, parse_circuit};
