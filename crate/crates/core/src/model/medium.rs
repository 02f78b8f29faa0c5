use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::shape::Shape;
use crate::error::{Error, Result};
use crate::numeric::halton3;
use crate::Vec3;

/// Constant background medium `(ε₀, μ₀, σ₀)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackgroundMedium {
    pub eps0: f64,
    pub mu0: f64,
    pub sigma0: f64,
}

impl Default for BackgroundMedium {
    fn default() -> Self {
        Self {
            eps0: 1.0,
            mu0: 1.0,
            sigma0: 0.0,
        }
    }
}

impl BackgroundMedium {
    pub fn new(eps0: f64, mu0: f64, sigma0: f64) -> Result<Self> {
        let m = Self { eps0, mu0, sigma0 };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return Err(Error::InvalidMaterial(format!("eps0 = {} must be positive", self.eps0)));
        }
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return Err(Error::InvalidMaterial(format!("mu0 = {} must be positive", self.mu0)));
        }
        if !(self.sigma0 >= 0.0 && self.sigma0.is_finite()) {
            return Err(Error::InvalidMaterial(format!(
                "sigma0 = {} must be non-negative",
                self.sigma0
            )));
        }
        Ok(())
    }

    /// `c₀ = 1/√(ε₀μ₀)`.
    pub fn wave_speed(&self) -> f64 {
        1.0 / (self.eps0 * self.mu0).sqrt()
    }

    /// `√(μ₀ε₀)`, the slowness.
    pub fn slowness(&self) -> f64 {
        (self.eps0 * self.mu0).sqrt()
    }
}

/// A bounded real field over the obstacle.
#[derive(Clone)]
pub enum MaterialField {
    Constant(f64),
    Varying(Arc<dyn Fn(&Vec3) -> f64 + Send + Sync>),
}

impl MaterialField {
    pub fn eval(&self, x: &Vec3) -> f64 {
        match self {
            MaterialField::Constant(v) => *v,
            MaterialField::Varying(f) => f(x),
        }
    }

    pub fn constant(&self) -> Option<f64> {
        match self {
            MaterialField::Constant(v) => Some(*v),
            MaterialField::Varying(_) => None,
        }
    }
}

impl fmt::Debug for MaterialField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaterialField::Constant(v) => write!(f, "Constant({v})"),
            MaterialField::Varying(_) => write!(f, "Varying(<fn>)"),
        }
    }
}

impl From<f64> for MaterialField {
    fn from(v: f64) -> Self {
        MaterialField::Constant(v)
    }
}

/// Obstacle `D` with perturbations `e`, `m`, `h`:
/// `ε = ε₀(1 + e)`, `μ = μ₀(1 + m)`, `σ = σ₀ + h` inside `D`.
#[derive(Clone, Debug)]
pub struct ObstacleSpec {
    pub shape: Shape,
    pub e_pert: MaterialField,
    pub m_pert: MaterialField,
    pub h_pert: MaterialField,
}

/// Number of quasi-random interior samples used for varying fields.
pub const DEFAULT_MATERIAL_SAMPLES: usize = 10_000;

impl ObstacleSpec {
    /// Piecewise-constant obstacle from relative permittivity, relative
    /// permeability and conductivity excess.
    pub fn homogeneous(shape: Shape, eps_r: f64, mu_r: f64, h: f64) -> Self {
        Self {
            shape,
            e_pert: MaterialField::Constant(eps_r - 1.0),
            m_pert: MaterialField::Constant(mu_r - 1.0),
            h_pert: MaterialField::Constant(h),
        }
    }

    pub fn eps_r(&self, x: &Vec3) -> f64 {
        1.0 + self.e_pert.eval(x)
    }

    pub fn mu_r(&self, x: &Vec3) -> f64 {
        1.0 + self.m_pert.eval(x)
    }

    pub fn sigma(&self, bg: &BackgroundMedium, x: &Vec3) -> f64 {
        bg.sigma0 + self.h_pert.eval(x)
    }

    pub fn is_piecewise_constant(&self) -> bool {
        self.e_pert.constant().is_some()
            && self.m_pert.constant().is_some()
            && self.h_pert.constant().is_some()
    }

    /// `true` when all three perturbations are identically zero.
    pub fn is_trivial(&self) -> bool {
        [&self.e_pert, &self.m_pert, &self.h_pert]
            .iter()
            .all(|f| f.constant() == Some(0.0))
    }

    /// Quasi-random points inside `D` (Halton sequence in the bounding box,
    /// rejection on membership).
    pub fn interior_samples(&self, n: usize) -> Vec<Vec3> {
        let (lo, hi) = self.shape.bounding_box();
        let span = hi - lo;
        let mut out = Vec::with_capacity(n);
        let mut i = 1u64;
        // bounded attempts so a degenerate shape cannot spin forever
        while out.len() < n && i < 1000 * n as u64 + 1000 {
            let u = halton3(i);
            let x = lo + Vec3::new(u[0] * span.x, u[1] * span.y, u[2] * span.z);
            if self.shape.contains(&x) {
                out.push(x);
            }
            i += 1;
        }
        out
    }

    /// Evaluation points for infimum-type checks: the single representative
    /// point for constant fields, dense samples otherwise.
    pub(crate) fn check_points(&self) -> Vec<Vec3> {
        if self.is_piecewise_constant() {
            let (lo, hi) = self.shape.bounding_box();
            vec![(lo + hi) * 0.5]
        } else {
            self.interior_samples(DEFAULT_MATERIAL_SAMPLES)
        }
    }

    pub fn validate(&self, bg: &BackgroundMedium) -> Result<()> {
        self.shape.validate()?;
        for x in self.check_points() {
            let (er, mr, s) = (self.eps_r(&x), self.mu_r(&x), self.sigma(bg, &x));
            if !(er > 0.0 && er.is_finite()) {
                return Err(Error::InvalidMaterial(format!("eps_r = {er} at {x:?}")));
            }
            if !(mr > 0.0 && mr.is_finite()) {
                return Err(Error::InvalidMaterial(format!("mu_r = {mr} at {x:?}")));
            }
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidMaterial(format!("sigma = {s} at {x:?}")));
            }
        }
        Ok(())
    }
}
