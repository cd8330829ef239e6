//! Reference computations for tests.
//!
//! Nothing in here is shared with the implementation under test: the Bessel
//! routines use power series and Miller's backward recurrence, the geometric
//! oracles use closed-form areas. Keep it that way.

pub mod arcs;
pub mod bessel;
pub mod geometry;

pub use arcs::{arc_fourier, simpson};
pub use bessel::{bessel_j, bessel_j0};
