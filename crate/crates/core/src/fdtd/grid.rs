use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

/// Outer boundary treatment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Perfect electric conductor: tangential E held at zero.
    Pec,
    /// First-order Mur absorbing condition for the background wave speed.
    Mur,
}

/// Uniform staggered grid over the box `[lo, lo + n·h]`.
///
/// Node `(i, j, k)` sits at `lo + h·(i, j, k)`. Component arrays all have
/// `(n[0]+1)(n[1]+1)(n[2]+1)` entries in x-fastest order; a component with a
/// half-index offset along an axis leaves the last layer along that axis unused.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub h: f64,
    pub lo: Vec3,
    pub n: [usize; 3],
    pub dt: f64,
    pub n_steps: usize,
    pub boundary: Boundary,
}

/// Default Courant number.
pub const DEFAULT_CFL: f64 = 0.5;

/// Staggering offsets (in cells) of Ex, Ey, Ez.
pub const E_OFFSET: [[f64; 3]; 3] = [[0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.5]];
/// Staggering offsets of Hx, Hy, Hz.
pub const H_OFFSET: [[f64; 3]; 3] = [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]];

impl GridSpec {
    /// Grid covering `[center − half_width, center + half_width]` (rounded
    /// outwards to whole cells) with the largest stable step that divides `T`
    /// evenly.
    pub fn cube(
        center: Vec3,
        half_width: f64,
        h: f64,
        t_final: f64,
        cfl: f64,
        c_max: f64,
        boundary: Boundary,
    ) -> Result<Self> {
        if !(h > 0.0 && half_width > 0.0 && t_final > 0.0) {
            return Err(Error::Configuration("grid step, extent and T must be positive".into()));
        }
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::Configuration(format!("CFL number {cfl} outside (0, 1]")));
        }
        let cells = (2.0 * half_width / h).ceil() as usize;
        let lo = center - Vec3::repeat(0.5 * cells as f64 * h);
        let dt_max = cfl * h / (3f64.sqrt() * c_max);
        let n_steps = (t_final / dt_max).ceil() as usize;
        Ok(Self {
            h,
            lo,
            n: [cells; 3],
            dt: t_final / n_steps as f64,
            n_steps,
            boundary,
        })
    }

    pub fn t_final(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    pub fn hi(&self) -> Vec3 {
        self.lo + Vec3::new(self.n[0] as f64, self.n[1] as f64, self.n[2] as f64) * self.h
    }

    pub fn len(&self) -> usize {
        (self.n[0] + 1) * (self.n[1] + 1) * (self.n[2] + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn strides(&self) -> (usize, usize) {
        let sy = self.n[0] + 1;
        (sy, sy * (self.n[1] + 1))
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let (sy, sz) = self.strides();
        i + sy * j + sz * k
    }

    pub fn unindex(&self, idx: usize) -> (usize, usize, usize) {
        let (sy, sz) = self.strides();
        (idx % sy, (idx % sz) / sy, idx / sz)
    }

    /// Physical position of a staggered site.
    pub fn position(&self, offset: &[f64; 3], i: usize, j: usize, k: usize) -> Vec3 {
        self.lo
            + Vec3::new(
                (i as f64 + offset[0]) * self.h,
                (j as f64 + offset[1]) * self.h,
                (k as f64 + offset[2]) * self.h,
            )
    }

    /// CFL check for wave speed `c_max`.
    pub fn check_cfl(&self, c_max: f64) -> Result<()> {
        let limit = self.h / (3f64.sqrt() * c_max);
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::Configuration(format!(
                "time step {} exceeds the stability limit {}",
                self.dt, limit
            )));
        }
        Ok(())
    }

    /// Distance from a point to the nearest wall (negative outside).
    pub fn wall_distance(&self, x: &Vec3) -> f64 {
        let hi = self.hi();
        (0..3)
            .map(|i| (x[i] - self.lo[i]).min(hi[i] - x[i]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Number of whole cells per axis: `ceil` index range of sites within a
    /// box, clamped to the grid.
    pub(crate) fn index_range(&self, lo: f64, hi: f64, axis: usize, offset: f64) -> (usize, usize) {
        let a = ((lo - self.lo[axis]) / self.h - offset).floor().max(0.0) as usize;
        let b = ((hi - self.lo[axis]) / self.h - offset).ceil().max(0.0) as usize;
        (a.min(self.n[axis]), b.min(self.n[axis]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_step_divides_t() {
        let g = GridSpec::cube(Vec3::zeros(), 1.0, 0.05, 3.0, 0.5, 1.0, Boundary::Pec).unwrap();
        assert_eq!(g.n, [40; 3]);
        assert!((g.t_final() - 3.0).abs() < 1e-12);
        assert!(g.check_cfl(1.0).is_ok());
        assert!(g.dt <= 0.5 * 0.05 / 3f64.sqrt() + 1e-15);
        assert!(g.check_cfl(3.0).is_err());
    }

    #[test]
    fn index_roundtrip() {
        let g = GridSpec::cube(Vec3::zeros(), 0.3, 0.1, 1.0, 0.5, 1.0, Boundary::Pec).unwrap();
        let idx = g.index(2, 5, 3);
        assert_eq!(g.unindex(idx), (2, 5, 3));
    }
}
