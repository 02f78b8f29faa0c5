//! Large-τ behaviour of weighted background-field energies over the obstacle.
//!
//! Integrals over `D` of `v² = e^{−2kr}/r²` and related densities drop by
//! `e^{−2kδ}` per extra distance δ from `p`, so they are computed along rays
//! from `p` with the polar axis pointing at the nearest point of `D`, and
//! reported as scaled values times `e^{−2k·dist(p, ∂D)}`.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::analytic::LaplaceParams;
use crate::error::{Error, Result};
use crate::model::{first_reflector, BackgroundMedium, ObstacleSpec, Shape};
use crate::numeric::{least_squares, LogValue};
use crate::quadrature::{integrate, Integral};
use crate::source::SourceSpec;
use crate::Vec3;

/// Integrated density over `D`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    /// `∫_D v² dx`
    #[serde(rename = "J_full")]
    JFull,
    /// `∫_D v² |a×n|² dx`
    #[serde(rename = "J_perp")]
    JPerp,
    /// `∫_D (ε̃₀/ε̃)(ε̃₀ − ε̃)|V_e⁰|² + (μ − μ₀)|V_m⁰|² dx`
    #[serde(rename = "upper_combo")]
    UpperCombo,
    /// `∫_D (ε̃₀ − ε̃)|V_e⁰|² + (μ₀/μ)(μ − μ₀)|V_m⁰|² dx`
    #[serde(rename = "lower_combo")]
    LowerCombo,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::JFull => "J_full",
            Quantity::JPerp => "J_perp",
            Quantity::UpperCombo => "upper_combo",
            Quantity::LowerCombo => "lower_combo",
        }
    }
}

/// Default relative tolerance for domain integrals.
pub const DEFAULT_REL_TOL: f64 = 1e-8;
const MAX_INTERVALS: usize = 4000;

/// `∫_D f dx` in spherical coordinates about `p` (outside `D`), polar axis
/// towards the nearest point of `D`.
///
/// A coarse pilot pass fixes absolute tolerances for the nested levels, so
/// grazing rays near the silhouette (whose chords carry relative rounding
/// noise) do not stall the refinement.
pub fn shell_integral<F: Fn(&Vec3) -> f64>(shape: &Shape, p: &Vec3, f: F, rel_tol: f64) -> Result<Integral> {
    let d0 = shape.signed_distance(p);
    if !(d0 > 0.0) {
        return Err(Error::Geometry(format!("point {p:?} is not outside the obstacle")));
    }
    let axis = nearest_direction(shape, p, d0);
    let theta_max = shape
        .leaves()
        .into_iter()
        .map(|leaf| cone_half_angle(leaf, p, &axis))
        .fold(0.0, f64::max);
    let pilot = nested(shape, p, &axis, theta_max, &f, rel_tol.max(1e-4), 0.0)?;
    let mut out = nested(shape, p, &axis, theta_max, &f, rel_tol, rel_tol * pilot.value.abs())?;
    out.evaluations += pilot.evaluations;
    Ok(out)
}

/// Polar angle about `axis` bounding a leaf as seen from `p`.
fn cone_half_angle(leaf: &Shape, p: &Vec3, axis: &Vec3) -> f64 {
    let (c, rad) = match leaf {
        Shape::Sphere { center, radius } => (*center, *radius),
        Shape::Ellipsoid { center, semi_axes } => (*center, semi_axes.max()),
        Shape::Box { min, max } => (0.5 * (min + max), 0.5 * (max - min).norm()),
        Shape::Union { .. } => unreachable!("leaves are not unions"),
    };
    let to_c = c - p;
    let dist = to_c.norm();
    if dist <= rad {
        return std::f64::consts::PI;
    }
    let off = axis.dot(&(to_c / dist)).clamp(-1.0, 1.0).acos();
    // slightly widened so the silhouette is inside the range
    (off + (rad / dist).asin() * (1.0 + 1e-9)).min(std::f64::consts::PI)
}

fn nested<F: Fn(&Vec3) -> f64>(
    shape: &Shape,
    p: &Vec3,
    axis: &Vec3,
    theta_max: f64,
    f: &F,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Integral> {
    let (e1, e2) = orthonormal_pair(axis);
    let two_pi = 2.0 * std::f64::consts::PI;
    let ring_abs = 0.1 * abs_tol / theta_max;
    let ray_abs = 0.01 * abs_tol / (two_pi * theta_max);
    // seeded partitions so narrow support windows are not stepped over
    let phi_breaks: Vec<f64> = (1..24).map(|i| two_pi * i as f64 / 24.0).collect();
    let theta_breaks: Vec<f64> = (1..16).map(|i| theta_max * i as f64 / 16.0).collect();
    let evaluations = std::cell::Cell::new(0usize);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let note = |r: Result<Integral>| -> f64 {
        match r {
            Ok(i) => {
                evaluations.set(evaluations.get() + i.evaluations);
                i.value
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let radial = |dir: &Vec3| -> f64 {
        shape
            .ray_intervals(p, dir)
            .into_iter()
            .map(|(t0, t1)| {
                let t0 = t0.max(0.0);
                if t1 <= t0 {
                    return 0.0;
                }
                note(integrate(|t| f(&(p + t * dir)) * t * t, t0, t1, &[], 0.01 * rel_tol, ray_abs, MAX_INTERVALS))
            })
            .sum()
    };
    let ring = |theta: f64| -> f64 {
        let (s, c) = theta.sin_cos();
        if s == 0.0 {
            return 0.0;
        }
        let v = note(integrate(
            |ph: f64| {
                let (sp, cp) = ph.sin_cos();
                radial(&(c * axis + s * (cp * e1 + sp * e2)))
            },
            0.0,
            two_pi,
            &phi_breaks,
            0.1 * rel_tol,
            ring_abs / s,
            MAX_INTERVALS,
        ));
        s * v
    };
    let mut out = integrate(ring, 0.0, theta_max, &theta_breaks, rel_tol, abs_tol, MAX_INTERVALS);
    if let Some(e) = failure.into_inner() {
        return Err(Error::Accuracy(format!("{e}; refine the shell decomposition")));
    }
    if let Ok(o) = out.as_mut() {
        o.evaluations += evaluations.get();
    }
    out
}

/// Unit vector from `p` towards its nearest point on `D`.
fn nearest_direction(shape: &Shape, p: &Vec3, d0: f64) -> Vec3 {
    let h = 1e-6 * d0.max(shape.diameter());
    let mut g = Vec3::zeros();
    for c in 0..3 {
        let mut e = Vec3::zeros();
        e[c] = h;
        g[c] = (shape.signed_distance(&(p + e)) - shape.signed_distance(&(p - e))) / (2.0 * h);
    }
    -g.normalize()
}

fn orthonormal_pair(n: &Vec3) -> (Vec3, Vec3) {
    let t = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = n.cross(&t).normalize();
    (e1, n.cross(&e1))
}

/// Pointwise coefficients of `|V_e⁰|²` and `|V_m⁰|²` in the two combinations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComboCoefficients {
    pub upper_e: f64,
    pub upper_m: f64,
    pub lower_e: f64,
    pub lower_m: f64,
}

/// Coefficients from `ε̃ = ε + σ/τ`, `μ` at one point.
pub fn combo_coefficients(eps0_t: f64, mu0: f64, eps_t: f64, mu: f64) -> ComboCoefficients {
    ComboCoefficients {
        upper_e: eps0_t / eps_t * (eps0_t - eps_t),
        upper_m: mu - mu0,
        lower_e: eps0_t - eps_t,
        lower_m: mu0 / mu * (mu - mu0),
    }
}

fn coefficients_at(obstacle: &ObstacleSpec, bg: &BackgroundMedium, params: &LaplaceParams, x: &Vec3) -> ComboCoefficients {
    let eps_t = bg.eps0 * obstacle.eps_r(x) + obstacle.sigma(bg, x) / params.tau;
    combo_coefficients(params.eps0_t, params.mu0, eps_t, bg.mu0 * obstacle.mu_r(x))
}

/// Scaled densities at `x`: everything divided by `K²f̃² e^{−2k d}`.
struct Densities {
    /// `e^{−2k(r−d)}/r²`
    w2: f64,
    cross2: f64,
    /// `|V_e⁰|²` scaled
    e2: f64,
    /// `|V_m⁰|²` scaled (exact curl)
    m2: f64,
}

fn densities(params: &LaplaceParams, p: &Vec3, a: &Vec3, d: f64, x: &Vec3) -> Densities {
    let dx = x - p;
    let r = dx.norm();
    let n = dx / r;
    let k = params.k;
    let w2 = (-2.0 * k * (r - d)).exp() / (r * r);
    let t = (1.0 / r + 1.0 / (k * r * r)) / k;
    let (ac, bc) = (1.0 + t, 1.0 + 3.0 * t);
    let cross2 = a.cross(&n).norm_squared();
    let dot2 = a.dot(&n).powi(2);
    let g = (k + 1.0 / r) / (params.tau * params.mu0);
    Densities {
        w2,
        cross2,
        e2: w2 * (ac * ac * cross2 + (bc - ac).powi(2) * dot2),
        m2: w2 * g * g * cross2,
    }
}

/// `∫_D` of the selected density, as a signed log value.
pub fn energy_integral_d(
    quantity: Quantity,
    obstacle: &ObstacleSpec,
    source: &SourceSpec,
    bg: &BackgroundMedium,
    tau: f64,
) -> Result<LogValue> {
    energy_integral_d_tol(quantity, obstacle, source, bg, tau, DEFAULT_REL_TOL)
}

pub fn energy_integral_d_tol(
    quantity: Quantity,
    obstacle: &ObstacleSpec,
    source: &SourceSpec,
    bg: &BackgroundMedium,
    tau: f64,
    rel_tol: f64,
) -> Result<LogValue> {
    let params = LaplaceParams::new(bg, tau)?;
    let p = source.p;
    let a = source.a;
    let d = obstacle.shape.signed_distance(&p);
    let ln_exp = -2.0 * params.k * d;
    let density = |x: &Vec3| densities(&params, &p, &a, d, x);
    let value = match quantity {
        Quantity::JFull => shell_integral(&obstacle.shape, &p, |x| density(x).w2, rel_tol)?.value,
        Quantity::JPerp => shell_integral(&obstacle.shape, &p, |x| {
            let s = density(x);
            s.w2 * s.cross2
        }, rel_tol)?
        .value,
        Quantity::UpperCombo | Quantity::LowerCombo => {
            let upper = quantity == Quantity::UpperCombo;
            let v = shell_integral(&obstacle.shape, &p, |x| {
                let s = density(x);
                let c = coefficients_at(obstacle, bg, &params, x);
                if upper {
                    c.upper_e * s.e2 + c.upper_m * s.m2
                } else {
                    c.lower_e * s.e2 + c.lower_m * s.m2
                }
            }, rel_tol)?
            .value;
            let f = source.f_tilde(tau);
            let ln_pre = 2.0 * (params.ln_k_tau(source.eta) + f.abs().ln());
            return Ok(LogValue::from_f64(v).scale_ln(ln_pre + ln_exp));
        }
    };
    Ok(LogValue::from_f64(value).scale_ln(ln_exp))
}

/// `∫_D |V_e⁰|²` and `∫_D |V_m⁰|²`, scaled by `K²f̃²e^{−2k·dist(p,∂D)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldEnergies {
    pub e2_scaled: f64,
    pub m2_scaled: f64,
    /// `ln(K² f̃² e^{−2k·dist(p,∂D)})`
    pub ln_scale: f64,
}

pub fn field_energies(
    shape: &Shape,
    source: &SourceSpec,
    params: &LaplaceParams,
    f_tilde: f64,
    rel_tol: f64,
) -> Result<FieldEnergies> {
    let p = source.p;
    let a = source.a;
    let d = shape.signed_distance(&p);
    let e2 = shell_integral(shape, &p, |x| densities(params, &p, &a, d, x).e2, rel_tol)?.value;
    let m2 = shell_integral(shape, &p, |x| densities(params, &p, &a, d, x).m2, rel_tol)?.value;
    Ok(FieldEnergies {
        e2_scaled: e2,
        m2_scaled: m2,
        ln_scale: 2.0 * (params.ln_k_tau(source.eta) + f_tilde.abs().ln()) - 2.0 * params.k * d,
    })
}

/// Least-squares fit of `ln J = rate·τ + power·ln τ + c (+ c₁/τ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub rate: f64,
    pub power: f64,
    pub intercept: f64,
    pub inverse_coefficient: Option<f64>,
    pub residual: f64,
}

/// Fits exponential rate and polynomial power. The optional `1/τ` column
/// absorbs the first correction to the power law, which otherwise leaks
/// into the fitted power over a short τ range.
pub fn fit_scaling(taus: &[f64], log_values: &[f64], with_inverse: bool) -> Result<ScalingFit> {
    if taus.len() != log_values.len() {
        return Err(Error::Configuration("τ and value lengths differ".into()));
    }
    if taus.len() < 8 {
        return Err(Error::InsufficientRange(format!("{} samples; at least 8 needed", taus.len())));
    }
    if taus.iter().chain(log_values).any(|v| !v.is_finite()) || taus.iter().any(|&t| t <= 0.0) {
        return Err(Error::InsufficientRange("non-finite sample or non-positive τ".into()));
    }
    let mut cols = vec![
        taus.to_vec(),
        taus.iter().map(|t| t.ln()).collect(),
        vec![1.0; taus.len()],
    ];
    if with_inverse {
        cols.push(taus.iter().map(|t| 1.0 / t).collect());
    }
    let (c, rms) = least_squares(&cols, log_values)?;
    Ok(ScalingFit {
        rate: c[0],
        power: c[1],
        intercept: c[2],
        inverse_coefficient: with_inverse.then(|| c[3]),
        residual: rms,
    })
}

/// One quantity sampled over τ with its fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub quantity: Quantity,
    pub taus: Vec<f64>,
    pub values: Vec<LogValue>,
    pub fitted_exponential_rate: f64,
    pub fitted_polynomial_power: f64,
    pub inverse_coefficient: Option<f64>,
    pub residual: f64,
    /// `−2√(μ₀ε₀)·dist(p, ∂D)`
    pub expected_rate: f64,
    pub kappa_expected: Option<u8>,
}

/// Samples `quantity` on `taus` and fits it.
pub fn scaling_report(
    quantity: Quantity,
    obstacle: &ObstacleSpec,
    source: &SourceSpec,
    bg: &BackgroundMedium,
    taus: &[f64],
) -> Result<ScalingReport> {
    let values = taus
        .iter()
        .map(|&t| energy_integral_d(quantity, obstacle, source, bg, t))
        .collect::<Result<Vec<_>>>()?;
    if values.iter().any(|v| v.is_zero()) {
        return Err(Error::InsufficientRange(format!("{} vanishes on part of the grid", quantity.name())));
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln_abs).collect();
    let fit = fit_scaling(taus, &logs, true)?;
    let d = obstacle.shape.signed_distance(&source.p);
    // κ = 2 when a has a tangential part at some first-reflector point, else 3
    let kappa_expected = first_reflector(&obstacle.shape, &source.p, &source.a, None)
        .ok()
        .map(|r| if r.flags.b_iii { 2 } else { 3 });
    Ok(ScalingReport {
        quantity,
        taus: taus.to_vec(),
        values,
        fitted_exponential_rate: fit.rate,
        fitted_polynomial_power: fit.power,
        inverse_coefficient: fit.inverse_coefficient,
        residual: fit.residual,
        expected_rate: -2.0 * (bg.mu0 * bg.eps0).sqrt() * d,
        kappa_expected,
    })
}

impl ScalingReport {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "tau,log_value,quantity")?;
        for (t, v) in self.taus.iter().zip(&self.values) {
            writeln!(out, "{t:.17e},{:.17e},{}", v.ln_abs, self.quantity.name())?;
        }
        Ok(())
    }
}

/// Trivial bound `(1/dist)∫_D e^{−s|x−p|}/|x−p| dx` with `s = 2τ√(ε₀μ₀)`,
/// scaled like [`energy_integral_d`].
pub fn trivial_bound(shape: &Shape, p: &Vec3, bg: &BackgroundMedium, tau: f64) -> Result<LogValue> {
    let d = shape.signed_distance(p);
    let s = 2.0 * tau * (bg.eps0 * bg.mu0).sqrt();
    let v = shell_integral(shape, p, |x| {
        let r = (x - p).norm();
        (-s * (r - d)).exp() / r
    }, DEFAULT_REL_TOL)?
    .value;
    Ok(LogValue::from_f64(v / d).scale_ln(-s * d))
}

/// Infima of the two pointwise combinations over `D`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinationMargins {
    /// `sup_D (ε₀/ε)(ε₀ − ε) + (μ − μ₀)ε₀/μ₀`; negative when the upper
    /// combination is uniformly negative.
    pub upper_lhs_sup: f64,
    /// `inf_D (ε₀ − ε) + (ε₀/μ)(μ − μ₀)`.
    pub lower_lhs_inf: f64,
}

impl CombinationMargins {
    /// Positive iff the upper combination is bounded away from zero below.
    pub fn upper_margin(&self) -> f64 {
        -self.upper_lhs_sup
    }

    pub fn lower_margin(&self) -> f64 {
        self.lower_lhs_inf
    }
}

/// Coefficient sum of the upper combination for constant contrast `(ε, μ)`.
pub fn upper_combo_lhs(eps0: f64, mu0: f64, eps: f64, mu: f64) -> f64 {
    eps0 / eps * (eps0 - eps) + (mu - mu0) * eps0 / mu0
}

/// Coefficient sum of the lower combination for constant contrast `(ε, μ)`.
pub fn lower_combo_lhs(eps0: f64, mu0: f64, eps: f64, mu: f64) -> f64 {
    (eps0 - eps) + eps0 / mu * (mu - mu0)
}

pub fn combination_margins(obstacle: &ObstacleSpec, bg: &BackgroundMedium) -> Result<CombinationMargins> {
    obstacle.validate(bg)?;
    let mut sup_u = f64::NEG_INFINITY;
    let mut inf_l = f64::INFINITY;
    for x in obstacle.check_points() {
        let eps = bg.eps0 * obstacle.eps_r(&x);
        let mu = bg.mu0 * obstacle.mu_r(&x);
        sup_u = sup_u.max(upper_combo_lhs(bg.eps0, bg.mu0, eps, mu));
        inf_l = inf_l.min(lower_combo_lhs(bg.eps0, bg.mu0, eps, mu));
    }
    Ok(CombinationMargins {
        upper_lhs_sup: sup_u,
        lower_lhs_inf: inf_l,
    })
}
