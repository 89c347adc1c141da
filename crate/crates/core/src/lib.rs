//! Desk-scale simulation lab for reflection-oracle worlds.
//!
//! The crate builds, from the bottom up:
//!
//! * [`qcore`]: dense pure and mixed states, gate application, Born-rule
//!   measurement and exact distance metrics.
//! * [`symsub`]: projector and reflection about the symmetric subspace of a
//!   set of equally sized registers, realised by permutation averaging.
//! * [`oracle`]: random subset oracles `U_S = I - 2|1,S-><1,S-|`, the
//!   oracle-aided circuit model and its text format.
//! * [`qefid`]: the subset-state sampler pair, its exact statistical distance,
//!   the absolute-to-positive gap transform and the copy-aided trace-distance
//!   experiment.
//! * [`emulate`]: rewriting oracle queries into symmetric-subspace reflections
//!   over copies of the reflection axis, with an exact occupation-number backend
//!   that keeps large copy counts tractable.
//! * [`tomography`]: gentle search and per-key shadow estimation with exact
//!   baselines.
//! * [`attacks`]: the one-way state generator inverter, the statistical money
//!   forger and the candidate schemes they run against.
//!
//! Qubit 0 is always the most significant bit of an amplitude index.

pub mod attacks;
pub mod bits;
pub mod emulate;
pub mod error;
pub mod oracle;
pub mod policy;
pub mod qcore;
pub mod qefid;
pub mod rng;
pub mod symsub;
pub mod tomography;

pub use bits::Bits;
pub use error::{Error, Result};
pub use policy::{policy, NumericalPolicy};
pub use rng::Rng;

/// Complex amplitude type used throughout.
pub type C64 = num_complex::Complex64;
