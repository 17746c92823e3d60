//! Numerical curvature laboratory for oriented Riemannian 4-manifolds given on
//! a single coordinate chart.
//!
//! Everything is evaluated in truncated Taylor-jet arithmetic ([`jet::Jet`]), so
//! every geometric quantity (Christoffel symbols, curvature, the self-dual Weyl
//! operator and its spectral data) carries spare derivative orders that the
//! next stage of a computation can differentiate exactly.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, reports and the
//! command-line driver live in the `weylscope` crate.

#![no_std]
#![forbid(unsafe_code)]
// Tensor code indexes several arrays with one loop variable; `!(x > y)` guards are NaN-aware.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod catalog;
pub mod error;
pub mod expr;
pub mod forms;
pub mod geometry;
pub mod jet;
pub mod linalg;
pub mod pipeline;
pub mod verify;
pub mod weyl;

pub use error::{Error, Result};
pub use expr::Expression;
pub use geometry::{ChartDomain, ChartPoint, MetricField, ScalarField};
pub use jet::Jet;
pub use weyl::{CurvatureDecomposition, Orientation, WeylSpectrum};
