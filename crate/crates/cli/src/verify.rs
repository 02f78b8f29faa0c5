//! `verify`: analytic and asymptotic invariants for the configured medium,
//! source and obstacle.

use enclosure::analytic::{exterior_potential, interior_potential, BackgroundField, LaplaceParams};
use enclosure::asymptotics::{lower_combo_lhs, scaling_report, upper_combo_lhs, Quantity};
use enclosure::indicator::indicator_bounds;
use enclosure::model::{condition_a1_lhs, condition_a2_lhs};
use enclosure::numeric::LogValue;
use enclosure::quadrature::integrate;
use enclosure::source::SourceSpec;
use enclosure::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::artifacts::{create_dir, write_json};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const REPORT: &str = "verify_report.json";

/// Test hooks. A nonzero `interior_phi_scale` multiplies the closed-form
/// interior potential by `1 + interior_phi_scale` before comparison.
#[derive(Clone, Copy, Debug, Default)]
pub struct VerifyOptions {
    pub interior_phi_scale: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed error (or count of failures for sign checks).
    pub metric: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub fingerprint: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub failures: usize,
}

fn check(name: &'static str, metric: f64, tolerance: f64, detail: String) -> Check {
    Check {
        name,
        passed: metric <= tolerance,
        metric,
        tolerance,
        detail,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

fn random_unit(rng: &mut ChaCha20Rng) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..1.0);
    let ph: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let s = (1.0 - z * z).sqrt();
    Vec3::new(s * ph.cos(), s * ph.sin(), z)
}

/// Norm identities against direct evaluation of the closed-form fields at
/// 1000 exterior points and 10 values of τ.
fn norm_identities(cfg: &ExperimentConfig, src: &SourceSpec, rng: &mut ChaCha20Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let tau = 1.0 + 4.0 * i as f64;
        let f = BackgroundField::new(&cfg.medium, src, tau)?;
        for _ in 0..100 {
            let r = src.eta * rng.random_range(1.01..20.0);
            let x = src.p + r * random_unit(rng);
            let (ve, vm) = f.fields_closed_form(&x)?;
            let (e2, m2) = f.field_norms(&x)?;
            worst = worst.max(rel(e2, ve.norm_squared())).max(rel(m2, vm.norm_squared()));
        }
    }
    Ok(check("field_norm_identities", worst, 1e-12, "1000 points × 10 τ".into()))
}

/// Sign agreement of the two pointwise combinations with the jump
/// conditions over random material pairs.
fn combination_signs(cfg: &ExperimentConfig, rng: &mut ChaCha20Rng) -> Check {
    let (eps0, mu0) = (cfg.medium.eps0, cfg.medium.mu0);
    let n = 100_000;
    let mut bad = 0usize;
    for _ in 0..n {
        let er: f64 = rng.random_range(0.05..5.0);
        let mr: f64 = rng.random_range(0.05..5.0);
        let (eps, mu) = (eps0 * er, mu0 * mr);
        let up = upper_combo_lhs(eps0, mu0, eps, mu) < 0.0;
        let lo = lower_combo_lhs(eps0, mu0, eps, mu) > 0.0;
        if up != (condition_a1_lhs(er, mr) > 0.0) || lo != (condition_a2_lhs(er, mr) > 0.0) {
            bad += 1;
        }
    }
    check("combination_sign_equivalence", bad as f64, 0.0, format!("{n} random (ε_r, μ_r) pairs"))
}

/// `(Φ, Φ', Φ'')` of the ball-averaged Yukawa potential by nested quadrature
/// in spherical coordinates centred at the evaluation point.
fn potential_by_quadrature(k: f64, eta: f64, r: f64) -> Result<[f64; 3]> {
    let big_f = |rr: f64| integrate(|s| s * (-k * s).exp(), 0.0, rr, &[], 1e-14, 0.0, 200).map_or(f64::NAN, |i| i.value);
    let geom = |th: f64| {
        let (s, c) = th.sin_cos();
        let root = (eta * eta - r * r * s * s).sqrt();
        let rr = -r * c + root;
        (s, rr, -c - r * s * s / root, -eta * eta * s * s / root.powi(3))
    };
    let outer = |g: &dyn Fn(f64) -> f64| integrate(g, 0.0, std::f64::consts::PI, &[], 1e-13, 0.0, 400).map(|i| i.value);
    let v = 0.5
        * outer(&|th| {
            let (s, rr, _, _) = geom(th);
            s * big_f(rr)
        })?;
    if !v.is_finite() {
        return Err(enclosure::Error::Accuracy("inner radial quadrature did not converge".into()).into());
    }
    let d1 = 0.5
        * outer(&|th| {
            let (s, rr, r1, _) = geom(th);
            s * rr * (-k * rr).exp() * r1
        })?;
    let d2 = 0.5
        * outer(&|th| {
            let (s, rr, r1, r2) = geom(th);
            s * (-k * rr).exp() * ((1.0 - k * rr) * r1 * r1 + rr * r2)
        })?;
    Ok([v, d1, d2])
}

fn interior_oracle(eta: f64, ks: &[f64], opts: &VerifyOptions, rng: &mut ChaCha20Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    let scale = 1.0 + opts.interior_phi_scale;
    for i in 0..100 {
        let k = ks[i % ks.len()];
        let u: f64 = rng.random_range(0.0..1.0);
        let r = eta * u.cbrt() * 0.999;
        let want = potential_by_quadrature(k, eta, r)?;
        let c = interior_potential(k, eta, r);
        for (got, w) in [c.value, c.d1, c.d2].into_iter().zip(want) {
            worst = worst.max(rel(scale * got, w));
        }
    }
    Ok(check("interior_potential_oracle", worst, 1e-6, "100 interior points, Φ, Φ′, Φ″".into()))
}

fn branch_continuity(eta: f64, ks: &[f64]) -> Check {
    let delta = 1e-8;
    let mut worst: f64 = 0.0;
    for &k in ks {
        let inner = interior_potential(k, eta, eta - delta);
        let outer = exterior_potential(k, eta, eta + delta);
        worst = worst.max(rel(inner.value + 2.0 * delta * inner.d1, outer.value));
        // Φ″ jumps by +1 across r = η
        worst = worst.max(rel(inner.d1 + delta * (2.0 * inner.d2 + 1.0), outer.d1));
    }
    check("branch_continuity", worst, 1e-9, format!("{} wavenumbers", ks.len()))
}

fn at_least(a: &LogValue, b: &LogValue) -> bool {
    let d = a.add(&LogValue::from_parts(b.ln_abs, -b.sign));
    d.sign >= 0
}

fn bounds_identity(cfg: &ExperimentConfig, src: &SourceSpec, taus: &[f64]) -> Result<Option<Check>> {
    let Some(o) = cfg.obstacle_spec() else { return Ok(None) };
    let mut worst: f64 = 0.0;
    let mut ordered = true;
    for &tau in taus {
        let b = indicator_bounds(src, &o, &cfg.medium, tau)?;
        worst = worst.max(b.identity_defect());
        ordered &= at_least(&b.upper, &b.lower);
    }
    let metric = if ordered { worst } else { f64::INFINITY };
    Ok(Some(check(
        "bounds_identity",
        metric,
        1e-12,
        format!("upper − lower = gap and upper ≥ lower at {} τ", taus.len()),
    )))
}

fn scaling_rate(cfg: &ExperimentConfig, src: &SourceSpec) -> Result<Option<Check>> {
    let Some(o) = cfg.obstacle_spec() else { return Ok(None) };
    let taus: Vec<f64> = (0..16).map(|i| 10.0 + 2.0 * i as f64).collect();
    let r = scaling_report(Quantity::JFull, &o, src, &cfg.medium, &taus)?;
    let err = rel(r.fitted_exponential_rate, r.expected_rate);
    Ok(Some(check(
        "exponential_rate",
        err,
        0.01,
        format!("rate {:.6} vs {:.6}, power {:.3}", r.fitted_exponential_rate, r.expected_rate, r.fitted_polynomial_power),
    )))
}

/// `ε̃₀ = ε₀ + σ₀/τ` and `k = τ√(μ₀ε̃₀)` as used by every closed form.
fn laplace_parameters(cfg: &ExperimentConfig) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for tau in [0.5, 3.0, 20.0] {
        let p = LaplaceParams::new(&cfg.medium, tau)?;
        let eps_t = cfg.medium.eps0 + cfg.medium.sigma0 / tau;
        worst = worst.max(rel(p.eps0_t, eps_t)).max(rel(p.k, tau * (cfg.medium.mu0 * eps_t).sqrt()));
    }
    Ok(check("effective_permittivity", worst, 1e-15, format!("σ₀ = {}", cfg.medium.sigma0)))
}

pub fn verify(cfg: &ExperimentConfig, opts: &VerifyOptions) -> Result<VerifyReport> {
    cfg.medium.validate()?;
    let grid = cfg.grid_spec()?;
    let src = cfg.source_spec(0, &grid);
    src.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let ks = [0.5, 6.0, 14.0, 60.0, 300.0];
    let mut checks = vec![
        laplace_parameters(cfg)?,
        norm_identities(cfg, &src, &mut rng)?,
        combination_signs(cfg, &mut rng),
        interior_oracle(src.eta, &ks, opts, &mut rng)?,
        branch_continuity(src.eta, &ks),
    ];
    checks.extend(bounds_identity(cfg, &src, &[2.0, 8.0, 20.0])?);
    checks.extend(scaling_rate(cfg, &src)?);
    let failures = checks.iter().filter(|c| !c.passed).count();
    let report = VerifyReport {
        fingerprint: cfg.fingerprint(),
        seed: cfg.seed,
        checks,
        failures,
    };
    create_dir(&cfg.output_dir)?;
    write_json(&cfg.output_dir.join(REPORT), &report)?;
    if failures > 0 {
        return Err(CliError::VerifyFailed(failures));
    }
    Ok(report)
}
