//! Exact and numerical transport experiments on dyadic checkerboard vortex
//! fields.
//!
//! The crate builds a bounded divergence-free field made of nested
//! quarter-turning vortices, evolves checkerboard data through it exactly on
//! dyadic lattices, solves mollified versions numerically, and measures the
//! weak limits, residuals and norms of the resulting solutions.

pub mod advect;
pub mod config;
pub mod analysis;
pub mod dyadic;
pub mod error;
pub mod field;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod kv;
pub mod mollify;
pub mod output;
mod polygon;
pub mod quadrature;
pub mod scenario;

pub use dyadic::Dyadic;
pub use error::{Error, Result};
pub use field::{FieldSpec, Stage, Variant, VortexLayout};
pub use geometry::{checkerboard, CellField, DyadicSquare, Parity, Window};
