//! Simulation of chordal Loewner evolutions whose driver is a symmetric
//! alpha-stable process, a truncated variant with jumps capped at 1, or a
//! recombination of the two. The crate provides exact piecewise slit-map
//! arithmetic for the Loewner flow, driver samplers, backward-flow
//! diagnostics, and the hull geometry estimators used by the Monte Carlo
//! experiments in the companion CLI.
//!
//! All randomness flows through [`rng::PathRng`] streams derived from a
//! master seed by a per-path counter, so every experiment is reproducible
//! bit for bit regardless of how many worker threads run it.

pub mod error;
pub mod flow;
pub mod geometry;
pub mod io;
pub mod loewner;
pub mod quad;
pub mod report;
pub mod rng;
pub mod stable;
pub mod stats;

pub use error::{Error, Result};
pub use flow::{BackwardFlowRun, BackwardFlowState, FlowDirection, TimeChangeRecord};
pub use geometry::{DimensionFit, HullApprox};
pub use loewner::{Driver, MapChain, SlitStep, SwallowResult};
pub use report::ExperimentReport;
pub use rng::PathRng;
pub use stable::{JumpRecord, LevyPath, StableParams, TruncationConfig};
