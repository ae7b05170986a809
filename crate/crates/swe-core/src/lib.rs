//! 2D shallow water equations solver on a padded Cartesian grid, using an
//! augmented Roe edge solver with well-balanced bed source terms, together
//! with a performance harness: kernel cost models, empirical peak probing,
//! roofline normalization, scaling runs and performance-portability scores.

pub mod decomposition;
pub mod driver;
pub mod error;
pub mod grid;
pub mod perf;
pub mod ppmetrics;
pub mod riemann;
pub mod stoker;
pub mod timestepping;

pub use error::{Error, Result};
pub use grid::{FieldSet, GridSpec, ScenarioConfig, ScenarioKind};

/// Depth below which a cell is treated as dry.
pub const H_EPS: f64 = 1e-12;

/// Celerity below which an edge is degenerate (both sides effectively dry).
pub const C_EPS: f64 = 1e-12;
