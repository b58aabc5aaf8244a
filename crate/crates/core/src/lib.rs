//! Drone virtual-array channel sounding for cell-free massive MIMO.
//!
//! The crate simulates the measurement procedure (a drone carrying a single
//! transmit antenna along a loop while a ground receiver acts as the UE) over
//! a synthetic ground-truth channel field, and evaluates the resulting data
//! the way a cell-free deployment study would:
//!
//! * per-link channel gain and the re-flight reproducibility error,
//! * single-user uplink SNR under maximal-ratio combining over random AP
//!   subsets,
//! * multi-user uplink SINR under optimum (generalized Rayleigh quotient) and
//!   maximal-ratio combining.
//!
//! Data-parallel loops (capture sampling, subset sweeps) run on rayon when the
//! `parallel` feature is enabled (the default) and sequentially otherwise.
//! Both paths produce bit-identical results.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod analysis;
pub mod channel;
pub mod combining;
pub mod config;
pub mod error;
pub mod exec;
pub mod field;
pub mod format;
pub mod geometry;
pub mod import;
pub mod linalg;
pub mod pipeline;
pub mod seed;
pub mod sounder;
pub mod stats;

pub use crate::error::{Error, Result};
pub use crate::geometry::Point3;
pub use num_complex::Complex64;
