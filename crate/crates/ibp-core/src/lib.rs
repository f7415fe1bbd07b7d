//! Engines for immortal branching processes.
//!
//! Four continuous-time processes are supported, selected by [`ProcessKind`]:
//!
//! - `Critical`: birth/death branching with equal unit rates, started from a
//!   single cell. Extinction is certain but the mean population is constant.
//! - `NoExtinction`: critical branching where the last remaining cell cannot
//!   die, so the population never reaches zero.
//! - `Immigration`: an immortal stem cell injects ordinary cells at rate β;
//!   the ordinary cells undergo critical branching.
//! - `TwoTypeSource`: a stem cell feeds progenitor cells that proliferate
//!   (rate r), differentiate (rates 1−2r and r), and produce post-mitotic
//!   cells removed at rate γ.
//!
//! Five independent engines compute population distributions and are meant to
//! be cross-checked against each other:
//!
//! - [`exact`] — closed-form distributions, moments, and asymptotic laws;
//! - [`mastereq`] — direct integration of the truncated master equations;
//! - [`mc`] — exact event-driven stochastic simulation with reproducible
//!   parallel ensembles;
//! - [`lapinv`] — Laplace-domain evaluation and numerical inversion for the
//!   no-extinction process;
//! - [`characteristics`] — the two-type generating function integrated along
//!   characteristics, with grid coefficient extraction.
//!
//! All engines consume the same [`ProcessSpec`] and produce
//! [`DistributionSnapshot`]s that are comparable index by index.

pub mod characteristics;
pub mod error;
pub mod exact;
pub mod lapinv;
pub mod mastereq;
pub mod mc;
pub mod moments;
pub mod process;
pub mod quad;
pub mod rk;
pub mod snapshot;
pub mod specfun;

pub use error::{Error, Result};
pub use moments::MomentSet;
pub use process::{ProcessKind, ProcessSpec};
pub use snapshot::{DistributionSnapshot, Engine, SnapshotData};
pub use specfun::Complex64;
