//! Time-domain enclosure method for the Maxwell system with a penetrable
//! obstacle.
//!
//! The crate covers the forward problem (a Yee FDTD solver with total-field
//! and scattered-field modes), closed-form Laplace-domain background fields,
//! the indicator functions built from single-shot data on a source ball, and
//! the recovery of the obstacle distance and material class from the
//! indicator's large-τ behaviour.

pub mod analytic;
pub mod asymptotics;
pub mod error;
pub mod fdtd;
pub mod indicator;
pub mod model;
pub mod numeric;
pub mod quadrature;
pub mod source;

pub use error::{Error, Result};

/// Points and vectors in ℝ³.
pub type Vec3 = nalgebra::Vector3<f64>;
