//! Transfer operators, pressure and counting statistics for Schottky groups
//! and their `ℤ^d` abelian covers.
//!
//! The numerical core is generic over [`scalar::Real`] (`f32`/`f64`); the
//! aliases below fix the double-precision instantiation used by the CLI.

// `!(x < tol)` rejects NaN; index loops mirror the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod census;
pub mod fixtures;
pub mod hyperbolic;
pub mod linalg;
pub mod scalar;
pub mod schottky;
pub mod shift;
pub mod stats;
pub mod transfer;

pub use scalar::{Cx, Real};

pub type MoebiusMap = hyperbolic::Moebius<f64>;
pub type SchottkyGroup = schottky::Schottky<f64>;
pub type MarkovShift = shift::MarkovShift<f64>;
pub type ParryChain = shift::ParryChain<f64>;
pub type OperatorSpec = transfer::OperatorSpec<f64>;
pub type SpectralResult = transfer::SpectralResult<f64>;
pub type PressureSurface = transfer::PressureSurface<f64>;
