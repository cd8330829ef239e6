//! Numerical lab for Fourier restriction and decoupling on the circle and the 2-sphere.

pub mod error;
pub mod geom;
pub mod extension_field;
pub mod sphere_caps;
pub mod shell_multiplier;
pub mod kakeya_tubes;
pub mod two_scale_chain;

pub use error::{LabError, Result};
