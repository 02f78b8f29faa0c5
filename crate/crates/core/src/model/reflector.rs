use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use super::shape::Shape;
use crate::error::{Error, Result};
use crate::Vec3;

/// One nearest boundary point with its local geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflectorPoint {
    pub q: Vec3,
    /// Outward unit normal of `∂D` at `q`.
    pub nu: Vec3,
    pub gauss_curvature: f64,
    /// Mean curvature, positive for a sphere with its outward normal.
    pub mean_curvature: f64,
    /// `det(λI − S_q(∂D))` computed from the shape-operator matrix.
    pub det_diff: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectorFlags {
    /// Positive Gauss curvature at every point.
    pub b_i: bool,
    /// Positive `det_diff` at every point.
    pub b_ii: bool,
    /// Polarization not normal to the surface at some point.
    pub b_iii: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflectorReport {
    pub points: Vec<ReflectorPoint>,
    pub lambda: f64,
    pub dist_pd: f64,
    pub flags: ReflectorFlags,
}

const SEEDS_PER_LEAF: usize = 1000;

/// Shape operator of the level surface of `F` at a point, in an orthonormal
/// tangent basis, with respect to the normal `∇F/|∇F|`.
pub fn shape_operator(grad: &Vec3, hess: &Matrix3<f64>) -> (Vec3, Matrix2<f64>) {
    let g = grad.norm();
    let n = grad / g;
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = n.cross(&helper).normalize();
    let e2 = n.cross(&e1);
    let s = |a: &Vec3, b: &Vec3| a.dot(&(hess * b)) / g;
    (n, Matrix2::new(s(&e1, &e1), s(&e1, &e2), s(&e2, &e1), s(&e2, &e2)))
}

/// Gauss and mean curvature by central differences of the signed distance.
/// Used to cross-check the analytic values.
pub fn fd_curvatures(shape: &Shape, q: &Vec3, delta: f64) -> (f64, f64) {
    let f = |x: Vec3| shape.signed_distance(&x);
    let mut grad = Vec3::zeros();
    let mut hess = Matrix3::zeros();
    let e = [Vec3::x(), Vec3::y(), Vec3::z()];
    let f0 = f(*q);
    for i in 0..3 {
        let fp = f(q + e[i] * delta);
        let fm = f(q - e[i] * delta);
        grad[i] = (fp - fm) / (2.0 * delta);
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (delta * delta);
        for j in (i + 1)..3 {
            let v = (f(q + (e[i] + e[j]) * delta) - f(q + (e[i] - e[j]) * delta)
                - f(q + (e[j] - e[i]) * delta)
                + f(q - (e[i] + e[j]) * delta))
                / (4.0 * delta * delta);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let (_, s) = shape_operator(&grad, &hess);
    (s.determinant(), 0.5 * s.trace())
}

fn surface_seeds(leaf: &Shape, n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let dirs = (0..n).map(move |i| {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r = (1.0 - z * z).sqrt();
        let t = golden * i as f64;
        Vec3::new(r * t.cos(), r * t.sin(), z)
    });
    match leaf {
        Shape::Sphere { center, radius } => dirs.map(|u| center + u * *radius).collect(),
        Shape::Ellipsoid { center, semi_axes } => {
            dirs.map(|u| center + u.component_mul(semi_axes)).collect()
        }
        _ => Vec::new(),
    }
}

/// All nearest points of `∂D` to the exterior point `p`, with curvatures and
/// the non-degeneracy flags for polarization `a`.
///
/// Each smooth leaf is convex, so its exact projection is the only local
/// minimizer of `|q − p|` on that leaf; a surface sampling of every leaf
/// confirms that no candidate was missed. `tol` clusters candidates and
/// decides the polarization flag; it defaults to `1e−6 × diameter`.
pub fn first_reflector(
    shape: &Shape,
    p: &Vec3,
    a: &Vec3,
    tol: Option<f64>,
) -> Result<ReflectorReport> {
    shape.validate()?;
    let tol = tol.unwrap_or(1e-6 * shape.diameter());
    let sd = shape.signed_distance(p);
    if sd <= 0.0 || shape.contains(p) {
        return Err(Error::Geometry(format!("point {p:?} is not outside the obstacle")));
    }
    let leaves = shape.leaves();
    let mut dmin = f64::INFINITY;
    let mut candidates: Vec<(usize, Vec3, f64)> = Vec::new();
    for (i, leaf) in leaves.iter().enumerate() {
        match leaf {
            Shape::Box { .. } => {
                let d = leaf.signed_distance(p);
                dmin = dmin.min(d);
                candidates.push((i, Vec3::repeat(f64::NAN), d));
            }
            _ => {
                let q = leaf.closest_point_smooth(p)?;
                let d = (q - p).norm();
                dmin = dmin.min(d);
                candidates.push((i, q, d));
            }
        }
    }
    // sampling cross-check of global optimality
    for leaf in &leaves {
        for s in surface_seeds(leaf, SEEDS_PER_LEAF) {
            if shape.signed_distance(&s).abs() <= tol && (s - p).norm() < dmin - tol {
                return Err(Error::Accuracy(format!(
                    "surface sample {s:?} closer than the computed minimum {dmin}"
                )));
            }
        }
    }
    let mut points: Vec<ReflectorPoint> = Vec::new();
    for (i, q, d) in candidates {
        if d > dmin + tol {
            continue;
        }
        let leaf = leaves[i];
        if matches!(leaf, Shape::Box { .. }) {
            return Err(Error::UnsupportedGeometry(
                "nearest point lies on a box face, edge or corner".into(),
            ));
        }
        for (j, other) in leaves.iter().enumerate() {
            if j != i && other.signed_distance(&q) <= tol {
                return Err(Error::UnsupportedGeometry(format!(
                    "nearest point {q:?} lies where two components meet"
                )));
            }
        }
        if points.iter().any(|pt| (pt.q - q).norm() <= tol) {
            continue;
        }
        let (grad, hess) = leaf.implicit_derivatives(&q)?;
        let (nu, s) = shape_operator(&grad, &hess);
        let lambda = 1.0 / dmin;
        let det_diff = (Matrix2::identity() * lambda - s).determinant();
        points.push(ReflectorPoint {
            q,
            nu,
            gauss_curvature: s.determinant(),
            mean_curvature: 0.5 * s.trace(),
            det_diff,
        });
    }
    let flags = ReflectorFlags {
        b_i: points.iter().all(|pt| pt.gauss_curvature > 0.0),
        b_ii: points.iter().all(|pt| pt.det_diff > 0.0),
        b_iii: points.iter().any(|pt| a.cross(&pt.nu).norm() > tol),
    };
    Ok(ReflectorReport {
        points,
        lambda: 1.0 / dmin,
        dist_pd: dmin,
        flags,
    })
}

/// `dist(D, B) = dist({p}, ∂D) − η` for the ball `B(p, η)`.
pub fn dist_d_b(shape: &Shape, p: &Vec3, eta: f64) -> Result<f64> {
    let d = shape.signed_distance(p) - eta;
    if shape.contains(p) || d <= 0.0 {
        return Err(Error::Geometry(format!(
            "source ball B({p:?}, {eta}) meets the obstacle"
        )));
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_reflector() {
        let c = Vec3::new(1.0, 0.5, -0.2);
        let r = 0.3;
        let s = Shape::sphere(c, r);
        let p = Vec3::new(-0.4, 0.1, 0.3);
        let l = (p - c).norm();
        let rep = first_reflector(&s, &p, &Vec3::z(), None).unwrap();
        assert_eq!(rep.points.len(), 1);
        let pt = &rep.points[0];
        assert!(((pt.q - p).norm() + r - l).abs() < 1e-12);
        assert!((pt.gauss_curvature - 1.0 / (r * r)).abs() < 1e-9);
        assert!((pt.mean_curvature - 1.0 / r).abs() < 1e-9);
        let lam = 1.0 / (l - r);
        let want = lam * lam - 2.0 * lam / r + 1.0 / (r * r);
        assert!((pt.det_diff - want).abs() < 1e-10 * want.abs());
    }

    #[test]
    fn polarization_along_normal() {
        let s = Shape::sphere(Vec3::new(1.0, 0.0, 0.0), 0.25);
        let rep = first_reflector(&s, &Vec3::zeros(), &Vec3::x(), None).unwrap();
        assert!(!rep.flags.b_iii);
        let rep = first_reflector(&s, &Vec3::zeros(), &Vec3::y(), None).unwrap();
        assert!(rep.flags.b_iii && rep.flags.b_i && rep.flags.b_ii);
    }

    #[test]
    fn ellipsoid_vertex_curvature() {
        let e = Shape::ellipsoid(Vec3::zeros(), Vec3::new(2.0, 1.0, 1.0));
        let rep = first_reflector(&e, &Vec3::new(5.0, 0.0, 0.0), &Vec3::y(), None).unwrap();
        let pt = &rep.points[0];
        assert!((pt.q - Vec3::new(2.0, 0.0, 0.0)).norm() < 1e-9);
        // principal curvatures a/b² = a/c² = 2 at the long-axis vertex
        assert!((pt.gauss_curvature - 4.0).abs() < 1e-9);
        assert!((pt.mean_curvature - 2.0).abs() < 1e-9);
        let (k, h) = fd_curvatures(&e, &pt.q, 1e-4);
        assert!((k - 4.0).abs() < 1e-5 && (h - 2.0).abs() < 1e-5);
    }

    #[test]
    fn ellipsoid_generic_point_fd_agreement() {
        let e = Shape::ellipsoid(Vec3::new(0.1, 0.0, 0.0), Vec3::new(1.5, 1.0, 0.6));
        let p = Vec3::new(2.0, 1.5, 1.2);
        let rep = first_reflector(&e, &p, &Vec3::x(), None).unwrap();
        let pt = &rep.points[0];
        let (k, h) = fd_curvatures(&e, &pt.q, 1e-4);
        assert!((k - pt.gauss_curvature).abs() < 1e-5 * pt.gauss_curvature);
        assert!((h - pt.mean_curvature).abs() < 1e-5 * pt.mean_curvature);
        let lam = rep.lambda;
        let want = lam * lam - 2.0 * lam * pt.mean_curvature + pt.gauss_curvature;
        assert!((pt.det_diff - want).abs() < 1e-10 * want.abs().max(1.0));
    }

    #[test]
    fn symmetric_pair_gives_two_points() {
        let s = Shape::union(vec![
            Shape::sphere(Vec3::new(1.0, 1.0, 0.0), 0.3),
            Shape::sphere(Vec3::new(1.0, -1.0, 0.0), 0.3),
        ]);
        let rep = first_reflector(&s, &Vec3::zeros(), &Vec3::z(), None).unwrap();
        assert_eq!(rep.points.len(), 2);
    }

    #[test]
    fn rejections() {
        let s = Shape::sphere(Vec3::zeros(), 1.0);
        assert!(matches!(
            first_reflector(&s, &Vec3::new(0.5, 0.0, 0.0), &Vec3::x(), None),
            Err(Error::Geometry(_))
        ));
        let b = Shape::cuboid(Vec3::repeat(1.0), Vec3::repeat(2.0));
        assert!(matches!(
            first_reflector(&b, &Vec3::zeros(), &Vec3::x(), None),
            Err(Error::UnsupportedGeometry(_))
        ));
    }

    #[test]
    fn distances_to_ball() {
        let s = Shape::sphere(Vec3::new(1.0, 0.0, 0.0), 0.25);
        assert!((dist_d_b(&s, &Vec3::zeros(), 0.05).unwrap() - 0.70).abs() < 1e-15);
        let b = Shape::cuboid(Vec3::repeat(1.0), Vec3::repeat(2.0));
        assert!((dist_d_b(&b, &Vec3::zeros(), 0.1).unwrap() - (3f64.sqrt() - 0.1)).abs() < 1e-15);
        let u = Shape::union(vec![s.clone(), Shape::sphere(Vec3::new(0.0, 2.0, 0.0), 0.5)]);
        assert!((dist_d_b(&u, &Vec3::zeros(), 0.05).unwrap() - 0.70).abs() < 1e-15);
        assert!(dist_d_b(&s, &Vec3::zeros(), 0.8).is_err());
    }
}
