//! Interior potential against direct quadrature of the Yukawa kernel over the ball.

use enclosure::analytic::{exterior_potential, interior_potential, potential};
use enclosure::numeric::halton3;
use enclosure::quadrature::integrate;

/// `Φ(r), Φ'(r), Φ''(r)` for `Φ(x) = ∫_B e^{−k|x−y|}/(4π|x−y|) dy`, `|x − p| = r < η`.
///
/// Spherical coordinates centred at `x`: `Φ = ½∫_0^π sin θ F(R(θ)) dθ` with
/// `F(R) = ∫_0^R ρ e^{−kρ} dρ` and `R(θ)` the distance to the sphere along
/// the ray at angle θ from the outward radial direction.
fn oracle(k: f64, eta: f64, r: f64) -> (f64, f64, f64) {
    let big_f = |rr: f64| integrate(|s| s * (-k * s).exp(), 0.0, rr, &[], 1e-14, 0.0, 200).unwrap().value;
    let geom = |th: f64| {
        let (s, c) = th.sin_cos();
        let root = (eta * eta - r * r * s * s).sqrt();
        let rr = -r * c + root;
        let d1 = -c - r * s * s / root;
        let d2 = -eta * eta * s * s / root.powi(3);
        (s, rr, d1, d2)
    };
    let outer = |g: &dyn Fn(f64) -> f64| {
        integrate(g, 0.0, std::f64::consts::PI, &[], 1e-13, 0.0, 400).unwrap().value
    };
    let v = 0.5 * outer(&|th| {
        let (s, rr, _, _) = geom(th);
        s * big_f(rr)
    });
    let d1 = 0.5 * outer(&|th| {
        let (s, rr, r1, _) = geom(th);
        s * rr * (-k * rr).exp() * r1
    });
    let d2 = 0.5 * outer(&|th| {
        let (s, rr, r1, r2) = geom(th);
        s * (-k * rr).exp() * ((1.0 - k * rr) * r1 * r1 + rr * r2)
    });
    (v, d1, d2)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn interior_closed_form_matches_quadrature() {
    let eta = 0.05;
    let ks = [0.5, 6.0, 14.0, 60.0, 300.0];
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let k = ks[i as usize % ks.len()];
        let u = halton3(i + 1);
        let r = eta * u[0].cbrt() * 0.999;
        let (v, d1, d2) = oracle(k, eta, r);
        let c = interior_potential(k, eta, r);
        for (got, want) in [(c.value, v), (c.d1, d1), (c.d2, d2)] {
            let e = rel(got, want);
            worst = worst.max(e);
            assert!(e < 1e-6, "k={k} r={r}: {got} vs {want}");
        }
    }
    eprintln!("worst relative error {worst:e}");
}

#[test]
fn branch_continuity_at_surface() {
    let eta = 0.05;
    let delta = 1e-8;
    for &k in &[0.5, 6.0, 14.0, 60.0, 300.0] {
        let inner = interior_potential(k, eta, eta - delta);
        let outer = exterior_potential(k, eta, eta + delta);
        // compare after a first-order shift across the 2δ gap
        let v_in = inner.value + 2.0 * delta * inner.d1;
        assert!(rel(v_in, outer.value) < 1e-9, "k={k}");
        // Φ'' jumps by +1 going outwards
        let d_in = inner.d1 + delta * (2.0 * inner.d2 + 1.0);
        assert!(rel(d_in, outer.d1) < 1e-9, "k={k}");
        let at = potential(k, eta, eta);
        assert!(rel(interior_potential(k, eta, eta).value, at.value) < 1e-12);
    }
}

#[test]
fn centre_value_matches_quadrature() {
    let eta = 0.05;
    for &k in &[1.0, 10.0, 100.0] {
        let (v, _, d2) = oracle(k, eta, 1e-9);
        let c = interior_potential(k, eta, 0.0);
        assert!(rel(c.value, v) < 1e-8);
        assert!(rel(c.d2, d2) < 1e-6);
        // isotropic Hessian at the centre
        assert!(rel(c.d1_over_r, c.d2) < 1e-14);
    }
}
