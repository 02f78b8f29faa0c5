use serde::{Deserialize, Serialize};

use super::medium::{BackgroundMedium, ObstacleSpec};
use crate::error::Result;

/// Jump-condition class of an obstacle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaterialClass {
    #[serde(rename = "A_I")]
    AI,
    #[serde(rename = "A_II")]
    AII,
    #[serde(rename = "neither")]
    Neither,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialClassification {
    pub class: MaterialClass,
    /// Infimum of the left-hand side of the satisfied condition (0 when
    /// neither holds).
    pub margin: f64,
}

/// Left-hand side of condition A.I at one point: `(1 − 1/ε_r) + (1 − μ_r)`.
pub fn condition_a1_lhs(eps_r: f64, mu_r: f64) -> f64 {
    (1.0 - 1.0 / eps_r) + (1.0 - mu_r)
}

/// Left-hand side of condition A.II at one point: `(1 − ε_r) + (1 − 1/μ_r)`.
pub fn condition_a2_lhs(eps_r: f64, mu_r: f64) -> f64 {
    (1.0 - eps_r) + (1.0 - 1.0 / mu_r)
}

/// Classifies an obstacle by the two pointwise jump conditions. Constant
/// fields are evaluated exactly; varying fields by their minimum over dense
/// quasi-random interior samples.
pub fn classify_material(
    obstacle: &ObstacleSpec,
    bg: &BackgroundMedium,
) -> Result<MaterialClassification> {
    obstacle.validate(bg)?;
    let mut inf1 = f64::INFINITY;
    let mut inf2 = f64::INFINITY;
    for x in obstacle.check_points() {
        let (er, mr) = (obstacle.eps_r(&x), obstacle.mu_r(&x));
        inf1 = inf1.min(condition_a1_lhs(er, mr));
        inf2 = inf2.min(condition_a2_lhs(er, mr));
    }
    Ok(if inf1 > 0.0 {
        MaterialClassification {
            class: MaterialClass::AI,
            margin: inf1,
        }
    } else if inf2 > 0.0 {
        MaterialClassification {
            class: MaterialClass::AII,
            margin: inf2,
        }
    } else {
        MaterialClassification {
            class: MaterialClass::Neither,
            margin: 0.0,
        }
    })
}

/// Position of a homogeneous material point relative to the two open regions
/// of the `(ε_r, μ_r)` quadrant on which the jump conditions hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    A1,
    A2,
    Boundary,
    OutsideBoth,
}

/// Region lookup for a homogeneous point.
///
/// `A1 = {0 < μ_r < 2, ε_r > 1/(2 − μ_r)}` and
/// `A2 = {μ_r > 1/2, ε_r < 2 − 1/μ_r}`; these are exactly the sets where
/// conditions A.I and A.II hold. Points on either boundary curve (which meet
/// only at (1, 1)) map to `Boundary`.
pub fn region_membership(eps_r: f64, mu_r: f64) -> Region {
    assert!(eps_r > 0.0 && mu_r > 0.0, "relative parameters must be positive");
    let in_a1 = mu_r < 2.0 && eps_r > 1.0 / (2.0 - mu_r);
    let in_a2 = mu_r > 0.5 && eps_r < 2.0 - 1.0 / mu_r;
    let on_a1 = mu_r < 2.0 && eps_r == 1.0 / (2.0 - mu_r);
    let on_a2 = mu_r > 0.5 && eps_r == 2.0 - 1.0 / mu_r;
    if in_a1 {
        Region::A1
    } else if in_a2 {
        Region::A2
    } else if on_a1 || on_a2 {
        Region::Boundary
    } else {
        Region::OutsideBoth
    }
}
