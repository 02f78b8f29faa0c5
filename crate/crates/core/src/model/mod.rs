//! Media, obstacle geometry, material classes and first-reflector geometry.

mod classify;
mod medium;
mod reflector;
mod shape;

pub use classify::{classify_material, condition_a1_lhs, condition_a2_lhs, region_membership, MaterialClass, MaterialClassification, Region};
pub use medium::{BackgroundMedium, MaterialField, ObstacleSpec};
pub use reflector::{dist_d_b, fd_curvatures, first_reflector, shape_operator, ReflectorFlags, ReflectorPoint, ReflectorReport};
pub use shape::{ellipsoid_closest_point, Shape};
