//! Obstacle geometry: signed distances, ray intervals, closest points and
//! implicit-surface derivatives for the supported shape variants.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

/// Bounded open obstacle region `D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Sphere { center: Vec3, radius: f64 },
    Ellipsoid { center: Vec3, semi_axes: Vec3 },
    Box { min: Vec3, max: Vec3 },
    Union { parts: Vec<Shape> },
}

impl Shape {
    pub fn sphere(center: Vec3, radius: f64) -> Self {
        Shape::Sphere { center, radius }
    }

    pub fn ellipsoid(center: Vec3, semi_axes: Vec3) -> Self {
        Shape::Ellipsoid { center, semi_axes }
    }

    pub fn cuboid(min: Vec3, max: Vec3) -> Self {
        Shape::Box { min, max }
    }

    pub fn union(parts: Vec<Shape>) -> Self {
        Shape::Union { parts }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Shape::Sphere { radius, .. } if !(*radius > 0.0) => {
                Err(Error::Geometry(format!("sphere radius {radius} must be positive")))
            }
            Shape::Ellipsoid { semi_axes, .. } if !semi_axes.iter().all(|&a| a > 0.0) => Err(
                Error::Geometry(format!("ellipsoid semi-axes {semi_axes:?} must be positive")),
            ),
            Shape::Box { min, max } if !(0..3).all(|i| max[i] > min[i]) => {
                Err(Error::Geometry("box max corner must exceed min corner".into()))
            }
            Shape::Union { parts } if parts.is_empty() => {
                Err(Error::Geometry("empty union".into()))
            }
            Shape::Union { parts } => parts.iter().try_for_each(Shape::validate),
            _ => Ok(()),
        }
    }

    /// Signed distance to `∂D`, negative inside. Exact outside for every
    /// variant; inside a union it is the usual `min` surrogate.
    pub fn signed_distance(&self, x: &Vec3) -> f64 {
        match self {
            Shape::Sphere { center, radius } => (x - center).norm() - radius,
            Shape::Ellipsoid { center, semi_axes } => {
                let y = x - center;
                let q = ellipsoid_closest_point(semi_axes, &y);
                let d = (y - q).norm();
                if ellipsoid_level(semi_axes, &y) < 1.0 {
                    -d
                } else {
                    d
                }
            }
            Shape::Box { min, max } => {
                let c = (min + max) * 0.5;
                let half = (max - min) * 0.5;
                let q = (x - c).abs() - half;
                let outside = q.map(|v| v.max(0.0)).norm();
                let inside = q.max().min(0.0);
                outside + inside
            }
            Shape::Union { parts } => parts
                .iter()
                .map(|s| s.signed_distance(x))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        match self {
            Shape::Sphere { center, radius } => (x - center).norm_squared() < radius * radius,
            Shape::Ellipsoid { center, semi_axes } => ellipsoid_level(semi_axes, &(x - center)) < 1.0,
            Shape::Box { min, max } => (0..3).all(|i| x[i] > min[i] && x[i] < max[i]),
            Shape::Union { parts } => parts.iter().any(|s| s.contains(x)),
        }
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        match self {
            Shape::Sphere { center, radius } => {
                let r = Vec3::repeat(*radius);
                (center - r, center + r)
            }
            Shape::Ellipsoid { center, semi_axes } => (center - semi_axes, center + semi_axes),
            Shape::Box { min, max } => (*min, *max),
            Shape::Union { parts } => {
                let mut lo = Vec3::repeat(f64::INFINITY);
                let mut hi = Vec3::repeat(f64::NEG_INFINITY);
                for p in parts {
                    let (a, b) = p.bounding_box();
                    lo = lo.inf(&a);
                    hi = hi.sup(&b);
                }
                (lo, hi)
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    /// Leaves of the union tree.
    pub fn leaves(&self) -> Vec<&Shape> {
        match self {
            Shape::Union { parts } => parts.iter().flat_map(|p| p.leaves()).collect(),
            s => vec![s],
        }
    }

    /// Parameter intervals `[t0, t1]`, `t ≥ 0`, where `origin + t·dir` lies in
    /// `D`. `dir` must be a unit vector. Union intervals are merged.
    pub fn ray_intervals(&self, origin: &Vec3, dir: &Vec3) -> Vec<(f64, f64)> {
        let mut out = match self {
            Shape::Sphere { center, radius } => {
                quadric_interval(&(origin - center), dir, &Vec3::repeat(*radius))
                    .into_iter()
                    .collect()
            }
            Shape::Ellipsoid { center, semi_axes } => {
                quadric_interval(&(origin - center), dir, semi_axes)
                    .into_iter()
                    .collect()
            }
            Shape::Box { min, max } => {
                let mut t0 = f64::NEG_INFINITY;
                let mut t1 = f64::INFINITY;
                for i in 0..3 {
                    if dir[i].abs() < 1e-300 {
                        if origin[i] <= min[i] || origin[i] >= max[i] {
                            return Vec::new();
                        }
                    } else {
                        let a = (min[i] - origin[i]) / dir[i];
                        let b = (max[i] - origin[i]) / dir[i];
                        t0 = t0.max(a.min(b));
                        t1 = t1.min(a.max(b));
                    }
                }
                if t1 > t0.max(0.0) {
                    vec![(t0.max(0.0), t1)]
                } else {
                    Vec::new()
                }
            }
            Shape::Union { parts } => parts
                .iter()
                .flat_map(|p| p.ray_intervals(origin, dir))
                .collect(),
        };
        out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(out.len());
        for iv in out {
            match merged.last_mut() {
                Some(last) if iv.0 <= last.1 => last.1 = last.1.max(iv.1),
                _ => merged.push(iv),
            }
        }
        merged
    }

    /// Closest boundary point to an exterior point `p` for a smooth convex
    /// leaf. Boxes and unions are not handled here.
    pub fn closest_point_smooth(&self, p: &Vec3) -> Result<Vec3> {
        match self {
            Shape::Sphere { center, radius } => {
                let d = p - center;
                let n = d.norm();
                if n == 0.0 {
                    return Err(Error::Geometry("point at sphere center".into()));
                }
                Ok(center + d * (radius / n))
            }
            Shape::Ellipsoid { center, semi_axes } => {
                Ok(center + ellipsoid_closest_point(semi_axes, &(p - center)))
            }
            _ => Err(Error::UnsupportedGeometry(
                "closest point requires a sphere or ellipsoid".into(),
            )),
        }
    }

    /// Gradient and Hessian of a defining function `F` (`F < 0` inside,
    /// `∇F` along the outward normal) for a smooth leaf.
    pub fn implicit_derivatives(&self, x: &Vec3) -> Result<(Vec3, Matrix3<f64>)> {
        match self {
            Shape::Sphere { center, .. } => {
                Ok((2.0 * (x - center), Matrix3::identity() * 2.0))
            }
            Shape::Ellipsoid { center, semi_axes } => {
                let inv2 = semi_axes.map(|a| 1.0 / (a * a));
                let y = x - center;
                Ok((2.0 * y.component_mul(&inv2), Matrix3::from_diagonal(&(2.0 * inv2))))
            }
            _ => Err(Error::UnsupportedGeometry(
                "curvature undefined for box faces, edges and corners".into(),
            )),
        }
    }

    /// Largest deviation from 1-Lipschitz behaviour of the signed distance,
    /// measured over `samples` pseudo-random point pairs in an enlarged
    /// bounding box. Returns `max |sd(x) − sd(y)| / |x − y|`.
    pub fn lipschitz_estimate(&self, samples: usize) -> f64 {
        let (lo, hi) = self.bounding_box();
        let pad = (hi - lo) * 0.5;
        let lo = lo - pad;
        let span = (hi + pad) - lo;
        let mut worst = 0.0f64;
        for i in 0..samples as u64 {
            let u = crate::numeric::halton3(2 * i + 1);
            let v = crate::numeric::halton3(2 * i + 2);
            let x = lo + Vec3::new(u[0] * span.x, u[1] * span.y, u[2] * span.z);
            let y = lo + Vec3::new(v[0] * span.x, v[1] * span.y, v[2] * span.z);
            let dist = (x - y).norm();
            if dist > 0.0 {
                worst = worst.max((self.signed_distance(&x) - self.signed_distance(&y)).abs() / dist);
            }
        }
        worst
    }
}

fn ellipsoid_level(axes: &Vec3, y: &Vec3) -> f64 {
    (0..3).map(|i| (y[i] / axes[i]).powi(2)).sum()
}

/// Interval of `t ≥ 0` inside the axis-aligned ellipsoid centred at the origin
/// for the ray `o + t·d`.
fn quadric_interval(o: &Vec3, d: &Vec3, axes: &Vec3) -> Option<(f64, f64)> {
    let os = o.component_div(axes);
    let ds = d.component_div(axes);
    let a = ds.norm_squared();
    let b = os.dot(&ds);
    let c = os.norm_squared() - 1.0;
    let disc = b * b - a * c;
    if disc <= 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // stable roots
    let q = -(b + b.signum() * sq);
    let (mut t0, mut t1) = if q != 0.0 { (q / a, c / q) } else { (-sq / a, sq / a) };
    if t0 > t1 {
        std::mem::swap(&mut t0, &mut t1);
    }
    if t1 <= 0.0 {
        return None;
    }
    Some((t0.max(0.0), t1))
}

/// Closest point on the ellipsoid `Σ x_i²/a_i² = 1` to `y` (origin-centred).
///
/// Solves the Lagrange condition `x_i = a_i² y_i / (a_i² + t)` for the root of
/// the decreasing function `F(t) = Σ (a_i y_i / (a_i² + t))² − 1` on
/// `t > −min a_i²`. Interior points in the plane of the shortest axis may
/// have no such root; their closest points come from the limit `t = −min a_i²`.
pub fn ellipsoid_closest_point(axes: &Vec3, y: &Vec3) -> Vec3 {
    let imin = axes.imin();
    let amin2 = axes[imin] * axes[imin];
    let a2 = axes.map(|a| a * a);
    let level = ellipsoid_level(axes, y);
    if level == 1.0 {
        return *y;
    }
    if level < 1.0 && y[imin] == 0.0 {
        let mut x = Vec3::zeros();
        let mut s = 0.0;
        for i in (0..3).filter(|&i| i != imin) {
            if a2[i] > amin2 {
                x[i] = a2[i] * y[i] / (a2[i] - amin2);
                s += (x[i] / axes[i]).powi(2);
            } else {
                // repeated shortest axis: fall through to the root search
                s = f64::INFINITY;
            }
        }
        if s < 1.0 {
            x[imin] = axes[imin] * (1.0 - s).sqrt();
            return x;
        }
    }
    let f = |t: f64| -> f64 {
        (0..3)
            .map(|i| (axes[i] * y[i] / (a2[i] + t)).powi(2))
            .sum::<f64>()
            - 1.0
    };
    let (mut lo, mut hi) = if level > 1.0 {
        (0.0, axes.max() * y.norm())
    } else {
        (-amin2, 0.0)
    };
    // bracketed Newton; F is convex and decreasing on the bracket
    let mut t = 0.5 * (lo + hi);
    for _ in 0..300 {
        let ft = f(t);
        if ft == 0.0 {
            break;
        }
        if ft > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let dft: f64 = (0..3)
            .map(|i| -2.0 * (axes[i] * y[i]).powi(2) / (a2[i] + t).powi(3))
            .sum();
        let newton = t - ft / dft;
        if (newton - t).abs() <= 4.0 * f64::EPSILON * (amin2 + t.abs()) {
            t = newton.clamp(lo, hi);
            break;
        }
        t = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * (amin2 + t.abs()) {
            break;
        }
    }
    Vec3::new(
        a2[0] * y[0] / (a2[0] + t),
        a2[1] * y[1] / (a2[1] + t),
        a2[2] * y[2] / (a2[2] + t),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_distance() {
        let s = Shape::sphere(Vec3::new(1.0, 0.0, 0.0), 0.25);
        assert!((s.signed_distance(&Vec3::zeros()) - 0.75).abs() < 1e-15);
        assert!(s.contains(&Vec3::new(1.1, 0.0, 0.0)));
    }

    #[test]
    fn box_distance_nearest_corner() {
        let b = Shape::cuboid(Vec3::repeat(1.0), Vec3::repeat(2.0));
        assert!((b.signed_distance(&Vec3::zeros()) - 3f64.sqrt()).abs() < 1e-15);
        assert!((b.signed_distance(&Vec3::repeat(1.5)) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn ellipsoid_closest_point_on_surface() {
        let axes = Vec3::new(2.0, 1.0, 0.5);
        for y in [
            Vec3::new(5.0, 0.0, 0.0),
            Vec3::new(1.0, 2.0, 3.0),
            Vec3::new(-0.3, 0.2, 0.1),
            Vec3::new(0.0, 0.0, 0.0),
        ] {
            let q = ellipsoid_closest_point(&axes, &y);
            assert!((ellipsoid_level(&axes, &q) - 1.0).abs() < 1e-10, "{q:?}");
        }
        let q = ellipsoid_closest_point(&axes, &Vec3::new(5.0, 0.0, 0.0));
        assert!((q - Vec3::new(2.0, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn ellipsoid_distance_beats_sampling() {
        // exact distance never exceeds the distance to any sampled surface point
        let e = Shape::ellipsoid(Vec3::zeros(), Vec3::new(2.0, 1.0, 0.7));
        let p = Vec3::new(1.7, 1.3, -0.9);
        let d = e.signed_distance(&p);
        let mut best = f64::INFINITY;
        for i in 0..200 {
            for j in 0..100 {
                let th = std::f64::consts::PI * (i as f64 + 0.5) / 200.0;
                let ph = 2.0 * std::f64::consts::PI * j as f64 / 100.0;
                let s = Vec3::new(2.0 * th.sin() * ph.cos(), th.sin() * ph.sin(), 0.7 * th.cos());
                best = best.min((p - s).norm());
            }
        }
        assert!(d <= best + 1e-12 && best - d < 1e-3);
    }

    #[test]
    fn lipschitz_by_sampling() {
        let shapes = [
            Shape::sphere(Vec3::zeros(), 1.0),
            Shape::ellipsoid(Vec3::zeros(), Vec3::new(2.0, 1.0, 1.0)),
            Shape::cuboid(Vec3::zeros(), Vec3::new(1.0, 2.0, 3.0)),
            Shape::union(vec![
                Shape::sphere(Vec3::zeros(), 1.0),
                Shape::sphere(Vec3::new(3.0, 0.0, 0.0), 0.5),
            ]),
        ];
        for s in shapes {
            assert!(s.lipschitz_estimate(2000) <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn ray_intervals_sphere_and_union() {
        let s = Shape::union(vec![
            Shape::sphere(Vec3::new(2.0, 0.0, 0.0), 0.5),
            Shape::sphere(Vec3::new(2.6, 0.0, 0.0), 0.5),
        ]);
        let iv = s.ray_intervals(&Vec3::zeros(), &Vec3::x());
        assert_eq!(iv.len(), 1);
        assert!((iv[0].0 - 1.5).abs() < 1e-12 && (iv[0].1 - 3.1).abs() < 1e-12);
        let b = Shape::cuboid(Vec3::repeat(1.0), Vec3::repeat(2.0));
        let dir = Vec3::repeat(1.0).normalize();
        let iv = b.ray_intervals(&Vec3::zeros(), &dir);
        assert!((iv[0].0 - 3f64.sqrt()).abs() < 1e-12);
    }
}
