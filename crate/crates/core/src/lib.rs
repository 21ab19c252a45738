//! Purification dynamics of quantum systems under repeated random measurements.
//!
//! The crate simulates four related models and checks each against closed-form
//! predictions:
//!
//! * [`manybody`]: density-matrix trajectories under Haar-random rank-N/2
//!   projective measurements, in Born-rule and post-selected modes.
//! * [`dyson`]: the low-rank eigenvalue diffusion that governs the ensemble
//!   average of spectral functions at order 1/N.
//! * [`fermion`]: Gaussian fermionic states under single-mode number
//!   measurements, with a dense Fock-space oracle for small systems.
//! * [`stabilizer`]: stabilizer mixed states under random Pauli measurements.
//!
//! [`moments`] holds the analytic averages and their Monte Carlo estimators,
//! [`randmat`] the Haar samplers, and [`harness`] the configuration, run and
//! verification plumbing behind the `purify` binary.
//!
//! Every random quantity is drawn from an [`RngStream`] identified by a
//! `(seed, stream_index)` pair, so results do not depend on thread count.

pub mod dyson;
pub mod error;
pub mod fermion;
pub mod harness;
pub mod linalg;
pub mod manybody;
pub mod moments;
pub mod parallel;
pub mod randmat;
pub mod rng;
pub mod stabilizer;

pub use error::{Error, Result};
pub use rng::RngStream;

/// Complex double used throughout.
pub use faer::c64;
