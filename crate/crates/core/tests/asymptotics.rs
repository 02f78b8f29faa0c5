use enclosure::asymptotics::{
    energy_integral_d, combination_margins, lower_combo_lhs, scaling_report, trivial_bound, upper_combo_lhs, Quantity,
};
use enclosure::model::{condition_a1_lhs, condition_a2_lhs, BackgroundMedium, ObstacleSpec, Shape};
use enclosure::source::{PulseSpec, SourceSpec};
use enclosure::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn source(a: Vec3) -> SourceSpec {
    SourceSpec {
        p: Vec3::zeros(),
        eta: 0.05,
        a,
        pulse: PulseSpec::default(),
        t_final: 4.0,
    }
}

/// Sphere at distance 0.95 from the origin along +x.
fn far_sphere() -> ObstacleSpec {
    ObstacleSpec::homogeneous(Shape::sphere(Vec3::new(1.2, 0.0, 0.0), 0.25), 3.0, 1.0, 0.0)
}

/// Monte Carlo estimate of `e^{2kd} ∫_D e^{−2kr}/r² w(n) dx` for a sphere seen
/// from the origin. Directions are uniform in the tangent cone; the radial
/// integral along each chord is done exactly. Returns `(mean, standard error)`.
fn monte_carlo(center: Vec3, radius: f64, k: f64, weight: impl Fn(&Vec3) -> f64, n: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let dist_c = center.norm();
    let d = dist_c - radius;
    let axis = center / dist_c;
    let e1 = axis.cross(&Vec3::z()).normalize();
    let e2 = axis.cross(&e1);
    let cos_max = (1.0 - (radius / dist_c).powi(2)).sqrt();
    let cone = 2.0 * std::f64::consts::PI * (1.0 - cos_max);
    let lam = 2.0 * k;
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let ct = rng.random_range(cos_max..1.0);
        let st = (1.0 - ct * ct).sqrt();
        let ph = rng.random_range(0.0..2.0 * std::f64::consts::PI);
        let dir = ct * axis + st * (ph.cos() * e1 + ph.sin() * e2);
        // chord of the ray with the sphere
        let b = dir.dot(&center);
        let disc = b * b - (dist_c * dist_c - radius * radius);
        let est = if disc > 0.0 {
            let (t0, t1) = (b - disc.sqrt(), b + disc.sqrt());
            // r² dr cancels the 1/r² of the density
            let radial = (-lam * (t0 - d)).exp() * (1.0 - (-lam * (t1 - t0)).exp()) / lam;
            weight(&dir) * radial * cone
        } else {
            0.0
        };
        s1 += est;
        s2 += est * est;
    }
    let mean = s1 / n as f64;
    let var = (s2 / n as f64 - mean * mean).max(0.0);
    (mean, (var / n as f64).sqrt())
}

#[test]
fn shell_quadrature_agrees_with_monte_carlo() {
    let bg = BackgroundMedium::default();
    let o = far_sphere();
    let d = 0.95;
    let tau = 20.0 / d;
    let a = Vec3::new(0.3, 0.5, 0.812403840463596).normalize();
    for (q, seed) in [(Quantity::JFull, 1u64), (Quantity::JPerp, 2)] {
        let v = energy_integral_d(q, &o, &source(a), &bg, tau).unwrap();
        let scaled = (v.ln_abs + 2.0 * tau * d).exp();
        let w = |n: &Vec3| if q == Quantity::JFull { 1.0 } else { a.cross(n).norm_squared() };
        let (mean, se) = monte_carlo(Vec3::new(1.2, 0.0, 0.0), 0.25, tau, w, 10_000_000, seed);
        assert!((scaled - mean).abs() < 3.0 * se, "{:?}: {scaled} vs {mean} ± {se}", q);
        assert!(se < 1e-3 * mean);
    }
}

fn taus() -> Vec<f64> {
    (0..16).map(|i| 10.0 + 2.0 * i as f64).collect()
}

#[test]
fn full_energy_scaling_exponents() {
    let bg = BackgroundMedium::default();
    let r = scaling_report(Quantity::JFull, &far_sphere(), &source(Vec3::z()), &bg, &taus()).unwrap();
    let expected = -2.0 * 0.95;
    assert!((r.expected_rate - expected).abs() < 1e-12);
    assert!(((r.fitted_exponential_rate - expected) / expected).abs() < 0.01, "rate {}", r.fitted_exponential_rate);
    assert!((r.fitted_polynomial_power + 2.0).abs() < 0.2, "power {}", r.fitted_polynomial_power);
}

#[test]
fn perpendicular_energy_on_axis_decays_one_power_faster() {
    let bg = BackgroundMedium::default();
    // polarization along the reflector normal
    let r = scaling_report(Quantity::JPerp, &far_sphere(), &source(Vec3::x()), &bg, &taus()).unwrap();
    assert_eq!(r.kappa_expected, Some(3));
    assert!((r.fitted_polynomial_power + 3.0).abs() < 0.3, "power {}", r.fitted_polynomial_power);
    assert!(((r.fitted_exponential_rate + 1.9) / 1.9).abs() < 0.01);
}

#[test]
fn perpendicular_energy_generic_direction() {
    let bg = BackgroundMedium::default();
    let a = Vec3::new(0.6, 0.0, 0.8);
    let ts = taus();
    let r = scaling_report(Quantity::JPerp, &far_sphere(), &source(a), &bg, &ts).unwrap();
    assert_eq!(r.kappa_expected, Some(2));
    assert!((-2.2..=-1.8).contains(&r.fitted_polynomial_power), "power {}", r.fitted_polynomial_power);
    // τ²·J_perp·e^{2τ·dist} stays bounded away from zero on the grid
    let scaled: Vec<f64> = ts
        .iter()
        .zip(&r.values)
        .map(|(t, v)| (v.ln_abs + 2.0 * t * 0.95 + 2.0 * t.ln()).exp())
        .collect();
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    assert!(lo > 0.2 * hi, "{lo} {hi}");
}

#[test]
fn trivial_bound_holds() {
    let bg = BackgroundMedium::default();
    let o = far_sphere();
    for t in [5.0, 15.0, 40.0] {
        let j = energy_integral_d(Quantity::JFull, &o, &source(Vec3::z()), &bg, t).unwrap();
        let b = trivial_bound(&o.shape, &Vec3::zeros(), &bg, t).unwrap();
        assert!(j.ln_abs <= b.ln_abs);
    }
}

#[test]
fn combination_signs_match_jump_conditions_on_random_materials() {
    let mut rng = ChaCha20Rng::seed_from_u64(33);
    for &(eps0, mu0) in &[(1.0, 1.0), (2.0, 0.7)] {
        let mut agree = 0;
        let n = 100_000;
        for _ in 0..n {
            let er: f64 = rng.random_range(0.05..5.0);
            let mr: f64 = rng.random_range(0.05..5.0);
            let (eps, mu) = (eps0 * er, mu0 * mr);
            let up = upper_combo_lhs(eps0, mu0, eps, mu);
            let lo = lower_combo_lhs(eps0, mu0, eps, mu);
            if (up < 0.0) == (condition_a1_lhs(er, mr) > 0.0) && (lo > 0.0) == (condition_a2_lhs(er, mr) > 0.0) {
                agree += 1;
            }
        }
        assert_eq!(agree, n);
    }
    // homogeneous obstacles: margins are ε₀ times the jump-condition margins
    let bg = BackgroundMedium::new(2.0, 1.0, 0.0).unwrap();
    let o = ObstacleSpec::homogeneous(Shape::sphere(Vec3::new(1.0, 0.0, 0.0), 0.2), 3.0, 0.8, 0.0);
    let m = combination_margins(&o, &bg).unwrap();
    assert!((m.upper_margin() - 2.0 * condition_a1_lhs(3.0, 0.8)).abs() < 1e-14);
    assert!((m.lower_margin() - 2.0 * condition_a2_lhs(3.0, 0.8)).abs() < 1e-14);
}
