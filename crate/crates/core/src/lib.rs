//! # swingguard
//!
//! Transient-instability detection engine built around a multi-machine
//! swing-equation simulator.
//!
//! The crate covers the full pipeline from a static network description to
//! an emergency-control start-up decision:
//!
//! - [`netmodel`] — network data, Kron reduction to machine internal nodes
//! - [`simulator`] — fixed-step RK4 integration through fault/clear/control
//!   event sequences
//! - [`smib`] — analytic single-machine-infinite-bus model and the
//!   equal-area critical clearing time oracle
//! - [`pmu`] — measurement sampling, derived channels, noise injection,
//!   moving-average filtering
//! - [`grouping`] — largest-angle-gap critical-machine identification and
//!   per-area coherency tests
//! - [`equivalence`] — two-layer (area COI + global) and direct SMIB
//!   equivalence, message-volume accounting
//! - [`detector`] — the concave-convex instability index `c` plus the
//!   comparison indexes `tau` and `mu`
//! - [`scheme`] — closed-loop orchestration of area centers, the global
//!   center, and timed generation shedding
//! - [`bench`] — wall-time and message-volume scaling study on synthetic
//!   fleets
//! - [`cases`] — bundled scenarios (analytic SMIB, WSCC 9-bus, synthetic
//!   multi-area systems)
//!
//! Angles are radians and speeds are the per-unit deviation convention of
//! the PMU derivation (`2*pi*(f - f0)/f0`) everywhere inside the crate;
//! degrees appear only at file-format boundaries.
//!
//! With the default `parallel` feature, per-area aggregation and
//! independent trial fan-out run on rayon; disabling the feature falls back
//! to equivalent sequential loops.

pub mod bench;
pub mod cases;
pub mod detector;
pub mod equivalence;
pub mod error;
pub mod grouping;
pub mod io;
pub mod netmodel;
pub mod pmu;
pub mod scheme;
pub mod simulator;
pub mod smib;
pub mod util;

pub use error::{Result, SwingError};
