//! Closed-form Laplace-domain background fields for a constant medium.
//!
//! The source `f̃(τ) χ_B a` radiates into a homogeneous background. With
//! `k = τ√(μ₀ε̃₀)` the electric field is
//! `V_e = τμ₀ f̃ [Φ a − k⁻² ∇²Φ a]`, where `Φ` is the ball-averaged Yukawa
//! potential, `(Δ − k²)Φ = −χ_B`. Outside the ball this reduces to
//! `K f̃ v M a` with `v = e^{−kr}/r`.

use std::io::Write;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::model::BackgroundMedium;
use crate::numeric::{ln_phi, phi};
use crate::source::SourceSpec;
use crate::Vec3;

/// `τ`, the effective permittivity `ε̃₀ = ε₀ + σ₀/τ` and `k = τ√(μ₀ε̃₀)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaplaceParams {
    pub tau: f64,
    pub eps0_t: f64,
    pub mu0: f64,
    pub k: f64,
}

impl LaplaceParams {
    pub fn new(bg: &BackgroundMedium, tau: f64) -> Result<Self> {
        bg.validate()?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Configuration(format!("τ = {tau} must be positive")));
        }
        let eps0_t = bg.eps0 + bg.sigma0 / tau;
        Ok(Self {
            tau,
            eps0_t,
            mu0: bg.mu0,
            k: tau * (bg.mu0 * eps0_t).sqrt(),
        })
    }

    /// `K(τ) = μ₀ τ φ(kη) / k³`.
    pub fn k_tau(&self, eta: f64) -> f64 {
        self.mu0 * self.tau * phi(self.k * eta) / self.k.powi(3)
    }

    pub fn ln_k_tau(&self, eta: f64) -> f64 {
        self.mu0.ln() + self.tau.ln() + ln_phi(self.k * eta) - 3.0 * self.k.ln()
    }
}

/// Geometry and scalar coefficients of the exterior closed form at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FarFieldFrame {
    pub r: f64,
    pub n: Vec3,
    pub a_coef: f64,
    pub b_coef: f64,
    pub v: f64,
    pub k_tau: f64,
    pub f_tilde: f64,
}

impl FarFieldFrame {
    pub fn new(params: &LaplaceParams, source: &SourceSpec, x: &Vec3) -> Result<Self> {
        Self::with_f_tilde(params, source, x, source.f_tilde(params.tau))
    }

    pub fn with_f_tilde(params: &LaplaceParams, source: &SourceSpec, x: &Vec3, f_tilde: f64) -> Result<Self> {
        let d = x - source.p;
        let r = d.norm();
        if r <= source.eta {
            return Err(Error::WrongBranch(format!(
                "|x − p| = {r} is inside the source ball (η = {}); use the interior evaluation",
                source.eta
            )));
        }
        let k = params.k;
        let t = (1.0 / r + 1.0 / (k * r * r)) / k;
        Ok(Self {
            r,
            n: d / r,
            a_coef: 1.0 + t,
            b_coef: 1.0 + 3.0 * t,
            v: (-k * r).exp() / r,
            k_tau: params.k_tau(source.eta),
            f_tilde,
        })
    }

    /// `M = A I − B n⊗n`.
    pub fn m_matrix(&self) -> Matrix3<f64> {
        Matrix3::identity() * self.a_coef - self.n * self.n.transpose() * self.b_coef
    }

    /// `∇v = −(k + 1/r) v n`.
    pub fn grad_v(&self, k: f64) -> Vec3 {
        -(k + 1.0 / self.r) * self.v * self.n
    }
}

/// `Φ` and its radial derivatives at one radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialPotential {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    /// `Φ'(r)/r`, finite at the centre.
    pub d1_over_r: f64,
}

impl RadialPotential {
    /// `∇²Φ = Φ'' n⊗n + (Φ'/r)(I − n⊗n)`; `n` may be zero at the centre.
    pub fn hessian(&self, n: &Vec3) -> Matrix3<f64> {
        let nn = n * n.transpose();
        nn * self.d2 + (Matrix3::identity() - nn) * self.d1_over_r
    }
}

/// Power series `Σ_{m≥1} c_m ξ^{2m−2}` with `c_{m+1}/c_m` given by `ratio`.
fn even_series(x2: f64, c1: f64, ratio: impl Fn(f64) -> f64) -> f64 {
    let mut term = c1;
    let mut sum = 0.0;
    let mut m = 1.0;
    while m < 60.0 {
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        term *= x2 * ratio(m);
        m += 1.0;
    }
    sum
}

/// `1 − (1+s)e^{−s}`.
fn one_minus_d(s: f64) -> f64 {
    if s < 0.5 {
        // Σ_{n≥2} (−1)^n (n−1) s^n / n!
        let mut term = s * s / 2.0;
        let mut sum = 0.0;
        let mut n = 2.0;
        while n < 60.0 {
            sum += (n - 1.0) * term;
            term *= -s / (n + 1.0);
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
            n += 1.0;
        }
        sum
    } else {
        1.0 - (1.0 + s) * (-s).exp()
    }
}

/// `φ(ξ)/ξ³ = Σ 2m ξ^{2m−2}/(2m+1)!`.
fn phi_over_cube(x: f64) -> f64 {
    even_series(x * x, 1.0 / 3.0, |m| (m + 1.0) / (m * (2.0 * m + 2.0) * (2.0 * m + 3.0)))
}

/// `(ξ sinh ξ − 2φ(ξ)/ξ)/ξ² = Σ 2m(2m−1) ξ^{2m−2}/(2m+1)!`.
fn chi_over_sq(x: f64) -> f64 {
    even_series(x * x, 1.0 / 3.0, |m| {
        (m + 1.0) * (2.0 * m + 1.0) / (m * (2.0 * m - 1.0) * (2.0 * m + 2.0) * (2.0 * m + 3.0))
    })
}

/// `(sinh ξ/ξ − 1)/ξ² = Σ ξ^{2m−2}/(2m+1)!`.
fn sinhc_m1_over_sq(x: f64) -> f64 {
    even_series(x * x, 1.0 / 6.0, |m| 1.0 / ((2.0 * m + 2.0) * (2.0 * m + 3.0)))
}

const SERIES_CUTOFF: f64 = 1.0;

/// Interior branch (`r ≤ η`) of the ball-averaged Yukawa potential.
pub fn interior_potential(k: f64, eta: f64, r: f64) -> RadialPotential {
    let s = k * eta;
    let x = k * r;
    let k2 = k * k;
    let d = (1.0 + s) * (-s).exp();
    if x < SERIES_CUTOFF {
        let value = (one_minus_d(s) - d * x * x * sinhc_m1_over_sq(x)) / k2;
        let p3 = phi_over_cube(x);
        RadialPotential {
            value,
            d1: -d * p3 * x / k,
            d2: -d * chi_over_sq(x),
            d1_over_r: -d * p3,
        }
    } else {
        // e^{−s} sinh ξ and e^{−s} cosh ξ without overflow
        let es = 0.5 * ((x - s).exp() - (-x - s).exp());
        let ec = 0.5 * ((x - s).exp() + (-x - s).exp());
        let dphi = (1.0 + s) * (x * ec - es);
        let dchi = (1.0 + s) * (x * es) - 2.0 * dphi / x;
        RadialPotential {
            value: (1.0 - (1.0 + s) * es / x) / k2,
            d1: -dphi / (k * x * x),
            d2: -dchi / (x * x),
            d1_over_r: -dphi / (x * x * x),
        }
    }
}

/// `φ(s) e^{−ξ}` without overflow.
fn phi_scaled(s: f64, x: f64) -> f64 {
    if s < 0.5 {
        phi(s) * (-x).exp()
    } else {
        0.5 * ((s - 1.0) * (s - x).exp() + (s + 1.0) * (-s - x).exp())
    }
}

/// Exterior branch (`r ≥ η`): `Φ = φ(kη)/k³ · e^{−kr}/r`.
pub fn exterior_potential(k: f64, eta: f64, r: f64) -> RadialPotential {
    let cv = phi_scaled(k * eta, k * r) / (k.powi(3) * r);
    let d1 = -cv * (k + 1.0 / r);
    RadialPotential {
        value: cv,
        d1,
        d2: cv * (k * k + 2.0 * k / r + 2.0 / (r * r)),
        d1_over_r: d1 / r,
    }
}

/// `Φ` at distance `r` from the ball centre, choosing the branch.
pub fn potential(k: f64, eta: f64, r: f64) -> RadialPotential {
    if r < eta {
        interior_potential(k, eta, r)
    } else {
        exterior_potential(k, eta, r)
    }
}

/// Background field for one source and one τ, with `f̃(τ)` cached.
#[derive(Clone, Debug)]
pub struct BackgroundField {
    pub params: LaplaceParams,
    pub source: SourceSpec,
    pub f_tilde: f64,
}

impl BackgroundField {
    pub fn new(bg: &BackgroundMedium, source: &SourceSpec, tau: f64) -> Result<Self> {
        let params = LaplaceParams::new(bg, tau)?;
        Ok(Self::from_params(params, source))
    }

    pub fn from_params(params: LaplaceParams, source: &SourceSpec) -> Self {
        Self {
            params,
            f_tilde: source.f_tilde(params.tau),
            source: source.clone(),
        }
    }

    fn radial(&self, x: &Vec3) -> (f64, Vec3) {
        let d = x - self.source.p;
        let r = d.norm();
        (r, if r > 0.0 { d / r } else { Vec3::zeros() })
    }

    pub fn frame(&self, x: &Vec3) -> Result<FarFieldFrame> {
        FarFieldFrame::with_f_tilde(&self.params, &self.source, x, self.f_tilde)
    }

    /// Exterior closed form: `V_e = K f̃ v M a`, `V_m = −(τμ₀)⁻¹ K f̃ ∇v × (M a)`.
    pub fn fields_closed_form(&self, x: &Vec3) -> Result<(Vec3, Vec3)> {
        let fr = self.frame(x)?;
        let ma = fr.m_matrix() * self.source.a;
        let c = fr.k_tau * fr.f_tilde;
        let ve = c * fr.v * ma;
        let vm = -c / (self.params.tau * self.params.mu0) * fr.grad_v(self.params.k).cross(&ma);
        Ok((ve, vm))
    }

    /// `V_e` anywhere, from the potential and its Hessian.
    pub fn ve(&self, x: &Vec3) -> Vec3 {
        let (r, n) = self.radial(x);
        let pot = potential(self.params.k, self.source.eta, r);
        let a = self.source.a;
        let k2 = self.params.k * self.params.k;
        self.params.tau * self.params.mu0 * self.f_tilde * (pot.value * a - pot.hessian(&n) * a / k2)
    }

    /// `V_e` inside the ball.
    pub fn ve_interior(&self, x: &Vec3) -> Result<Vec3> {
        let r = (x - self.source.p).norm();
        if r >= self.source.eta {
            return Err(Error::WrongBranch(format!(
                "|x − p| = {r} is outside the source ball (η = {})",
                self.source.eta
            )));
        }
        Ok(self.ve(x))
    }

    /// `V_m = −(τμ₀)⁻¹ ∇×V_e = −f̃ Φ'(r) n × a`, valid everywhere.
    pub fn vm(&self, x: &Vec3) -> Vec3 {
        let (r, n) = self.radial(x);
        let pot = potential(self.params.k, self.source.eta, r);
        -self.f_tilde * pot.d1 * n.cross(&self.source.a)
    }

    /// `(|V_e|², |V_m|²)` from the closed-form norm identities (exterior).
    pub fn field_norms(&self, x: &Vec3) -> Result<(f64, f64)> {
        let fr = self.frame(x)?;
        let (cross2, dot2) = split_polarization(&self.source.a, &fr.n);
        let pre = (fr.k_tau * fr.f_tilde * fr.v).powi(2);
        let e2 = pre * (fr.a_coef.powi(2) * cross2 + (fr.b_coef - fr.a_coef).powi(2) * dot2);
        let g = (self.params.eps0_t / self.params.mu0).sqrt() + 1.0 / (self.params.tau * self.params.mu0 * fr.r);
        let m2 = pre * g * g * fr.a_coef.powi(2) * cross2;
        Ok((e2, m2))
    }

    /// Natural logarithms of the two norm identities; stays finite where
    /// `v²` or `K²` underflow. `|V_m|² = 0` gives `−∞`.
    pub fn field_log_norms(&self, x: &Vec3) -> Result<(f64, f64)> {
        let d = x - self.source.p;
        let r = d.norm();
        if r <= self.source.eta {
            return Err(Error::WrongBranch(format!("|x − p| = {r} is inside the source ball")));
        }
        let n = d / r;
        let k = self.params.k;
        let t = (1.0 / r + 1.0 / (k * r * r)) / k;
        let (a_c, b_c) = (1.0 + t, 1.0 + 3.0 * t);
        let (cross2, dot2) = split_polarization(&self.source.a, &n);
        let ln_pre = 2.0 * (self.params.ln_k_tau(self.source.eta) + self.f_tilde.abs().ln() - k * r - r.ln());
        let e2 = ln_pre + (a_c * a_c * cross2 + (b_c - a_c).powi(2) * dot2).ln();
        let g = (self.params.eps0_t / self.params.mu0).sqrt() + 1.0 / (self.params.tau * self.params.mu0 * r);
        let m2 = ln_pre + (g * g * a_c * a_c * cross2).ln();
        Ok((e2, m2))
    }

    /// Tabulate `Φ, Φ', Φ''` and `|V_e|` along the ray `p + r·dir`.
    pub fn write_radial_profile_csv<W: Write>(&self, dir: &Vec3, radii: &[f64], mut out: W) -> Result<()> {
        let dir = dir.normalize();
        writeln!(out, "r,phi,dphi,d2phi,abs_ve,abs_vm")?;
        for &r in radii {
            let pot = potential(self.params.k, self.source.eta, r);
            let x = self.source.p + r * dir;
            writeln!(
                out,
                "{r:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                pot.value,
                pot.d1,
                pot.d2,
                self.ve(&x).norm(),
                self.vm(&x).norm()
            )?;
        }
        Ok(())
    }
}

/// `(|a×n|², (a·n)²)`.
fn split_polarization(a: &Vec3, n: &Vec3) -> (f64, f64) {
    (a.cross(n).norm_squared(), a.dot(n).powi(2))
}

/// Exterior closed-form fields `(V_e⁰, V_m⁰)` at `x`.
pub fn eval_v0_fields(params: &LaplaceParams, source: &SourceSpec, x: &Vec3) -> Result<(Vec3, Vec3)> {
    BackgroundField::from_params(*params, source).fields_closed_form(x)
}

/// `V_e⁰` inside the source ball.
pub fn eval_v0_interior(params: &LaplaceParams, source: &SourceSpec, x: &Vec3) -> Result<Vec3> {
    BackgroundField::from_params(*params, source).ve_interior(x)
}

/// Closed-form `(|V_e⁰|², |V_m⁰|²)` at an exterior point.
pub fn field_norms(params: &LaplaceParams, source: &SourceSpec, x: &Vec3) -> Result<(f64, f64)> {
    BackgroundField::from_params(*params, source).field_norms(x)
}

/// `|grid_ve − V_e⁰(x)|` for a Laplace-transformed background sample.
pub fn background_residual(params: &LaplaceParams, source: &SourceSpec, x: &Vec3, grid_ve: &Vec3) -> f64 {
    (grid_ve - BackgroundField::from_params(*params, source).ve(x)).norm()
}
