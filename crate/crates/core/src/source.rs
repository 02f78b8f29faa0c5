//! Source current `J = f(t) χ_B(x) a` and the Laplace transform of the pulse.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{laplace_piecewise_linear, least_squares};
use crate::Vec3;

/// Temporal pulse families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PulseSpec {
    /// `t^k` up to `t_rise`, then a quadratic that brings the slope to zero
    /// over another `t_rise`, then constant. No flattening when `t_rise` is
    /// `None`.
    PolyRamp { k: u32, t_rise: Option<f64> },
    /// `sin(ωt)` times the linear ramp `min(t/t_ramp, 1)`.
    RampedSine { omega: f64, t_ramp: f64 },
    /// `f ≡ value`. Only admissible for `value = 0`.
    Constant { value: f64 },
    /// Linear combination `Σ c_i f_i`.
    Combination { terms: Vec<(f64, PulseSpec)> },
}

impl Default for PulseSpec {
    fn default() -> Self {
        PulseSpec::PolyRamp {
            k: 1,
            t_rise: Some(0.5),
        }
    }
}

impl PulseSpec {
    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            PulseSpec::PolyRamp { k, t_rise } => {
                let k = *k as i32;
                match t_rise {
                    None => t.powi(k),
                    Some(tr) => {
                        let (c0, s) = (tr.powi(k), k as f64 * tr.powi(k - 1));
                        if t <= *tr {
                            t.powi(k)
                        } else if t <= 2.0 * tr {
                            let u = t - tr;
                            c0 + s * u - s * u * u / (2.0 * tr)
                        } else {
                            c0 + 0.5 * s * tr
                        }
                    }
                }
            }
            PulseSpec::RampedSine { omega, t_ramp } => (omega * t).sin() * (t / t_ramp).min(1.0),
            PulseSpec::Constant { value } => *value,
            PulseSpec::Combination { terms } => terms.iter().map(|(c, f)| c * f.eval(t)).sum(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PulseSpec::PolyRamp { k, t_rise } => {
                if *k < 1 {
                    return Err(Error::InvalidPulse("ramp degree must be at least 1".into()));
                }
                if let Some(tr) = t_rise {
                    if !(*tr > 0.0) {
                        return Err(Error::InvalidPulse("t_rise must be positive".into()));
                    }
                }
            }
            PulseSpec::RampedSine { omega, t_ramp } => {
                if !(omega.is_finite() && *t_ramp > 0.0) {
                    return Err(Error::InvalidPulse("ramped sine needs finite ω and t_ramp > 0".into()));
                }
            }
            PulseSpec::Constant { .. } => {}
            PulseSpec::Combination { terms } => terms.iter().try_for_each(|(_, f)| f.validate())?,
        }
        if self.eval(0.0) != 0.0 {
            return Err(Error::InvalidPulse(format!(
                "pulse must vanish at t = 0, got f(0) = {}",
                self.eval(0.0)
            )));
        }
        Ok(())
    }

    /// Exponent `γ` for which `τ^γ |f̃(τ)|` stays bounded away from zero.
    pub fn gamma_witness(&self) -> f64 {
        match self {
            PulseSpec::PolyRamp { k, .. } => *k as f64 + 1.0,
            PulseSpec::RampedSine { .. } => 3.0,
            PulseSpec::Constant { .. } => 0.0,
            PulseSpec::Combination { terms } => terms
                .iter()
                .filter(|(c, _)| *c != 0.0)
                .map(|(_, f)| f.gamma_witness())
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// `∫_0^w u^j e^{-τu} du` for real `τ > 0`, via the lower incomplete gamma
/// function in a cancellation-free form.
fn real_moment(j: u32, tau: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let x = tau * w;
    let a = j as f64 + 1.0;
    if x < a + 30.0 {
        // γ(a, x) = x^a e^{-x} Σ x^n / (a (a+1) ... (a+n))
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut n = 1.0;
        while term > 1e-17 * sum {
            term *= x / (a + n);
            sum += term;
            n += 1.0;
        }
        (a * x.ln() - x).exp() * sum / tau.powf(a)
    } else {
        // complement: j!/τ^a (1 − e^{-x} Σ_{i≤j} x^i/i!)
        let mut fact = 1.0;
        let mut partial = 0.0;
        let mut xi = 1.0;
        for i in 0..=j {
            if i > 0 {
                fact *= i as f64;
                xi *= x;
            }
            partial += xi / fact;
        }
        fact * (1.0 - (-x).exp() * partial) / tau.powf(a)
    }
}

/// `∫_0^w u^j e^{-su} du` for `j ∈ {0, 1}` and complex `s` with `Re s > 0`.
fn complex_moment(j: u32, s: Complex64, w: f64) -> Complex64 {
    if w <= 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let z = s * w;
    if z.norm() < 0.1 {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for n in 0..30 {
            sum += term / (j as f64 + 1.0 + n as f64);
            term *= -z / (n as f64 + 1.0);
        }
        return sum * w.powi(j as i32 + 1);
    }
    let e = (-z).exp();
    match j {
        0 => (1.0 - e) / s,
        _ => (1.0 - (1.0 + z) * e) / (s * s),
    }
}

/// `f̃(τ) = ∫_0^T e^{-τt} f(t) dt` in closed form.
pub fn laplace_pulse(pulse: &PulseSpec, t_final: f64, tau: f64) -> f64 {
    match pulse {
        PulseSpec::PolyRamp { k, t_rise } => {
            let k32 = *k as i32;
            match t_rise {
                None => real_moment(*k, tau, t_final),
                Some(tr) => {
                    let tr = *tr;
                    let mut v = real_moment(*k, tau, t_final.min(tr));
                    if t_final > tr {
                        let (c0, s) = (tr.powi(k32), *k as f64 * tr.powi(k32 - 1));
                        let w = t_final.min(2.0 * tr) - tr;
                        let inner = c0 * real_moment(0, tau, w) + s * real_moment(1, tau, w)
                            - s / (2.0 * tr) * real_moment(2, tau, w);
                        v += (-tau * tr).exp() * inner;
                    }
                    if t_final > 2.0 * tr {
                        let c = tr.powi(k32) + 0.5 * *k as f64 * tr.powi(k32);
                        v += (-2.0 * tau * tr).exp() * c * real_moment(0, tau, t_final - 2.0 * tr);
                    }
                    v
                }
            }
        }
        PulseSpec::RampedSine { omega, t_ramp } => {
            let s = Complex64::new(tau, -omega);
            let w1 = t_final.min(*t_ramp);
            let mut v = complex_moment(1, s, w1) / *t_ramp;
            if t_final > *t_ramp {
                v += (-s * *t_ramp).exp() * complex_moment(0, s, t_final - t_ramp);
            }
            v.im
        }
        PulseSpec::Constant { value } => value * real_moment(0, tau, t_final),
        PulseSpec::Combination { terms } => terms
            .iter()
            .map(|(c, f)| c * laplace_pulse(f, t_final, tau))
            .sum(),
    }
}

/// Laplace transform of the pulse sampled at `t_n = n·dt` and linearly
/// interpolated, matching the treatment of recorded traces.
pub fn laplace_pulse_sampled(pulse: &PulseSpec, t_final: f64, dt: f64, tau: f64) -> f64 {
    let n = (t_final / dt).round() as usize;
    let samples: Vec<f64> = (0..=n).map(|i| pulse.eval(i as f64 * dt)).collect();
    laplace_piecewise_linear(&samples, dt, tau)
}

/// Result of the large-τ decay check of `|f̃|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseDecayReport {
    /// Fitted log-log slope over the upper half of the grid.
    pub exponent: f64,
    /// `exponent ≤ −3/2 + 0.1`.
    pub consistent: bool,
    /// `min τ^γ|f̃(τ)|` over the grid with `γ` the pulse's witness exponent.
    pub gamma_witness_min: f64,
    pub gamma: f64,
}

pub fn verify_pulse_decay(pulse: &PulseSpec, t_final: f64, taus: &[f64]) -> Result<PulseDecayReport> {
    pulse.validate()?;
    if taus.windows(2).any(|w| w[1] <= w[0]) || taus.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Configuration("τ grid must be positive and ascending".into()));
    }
    let vals: Vec<f64> = taus.iter().map(|&t| laplace_pulse(pulse, t_final, t)).collect();
    if vals.iter().all(|v| *v == 0.0) {
        return Err(Error::DegeneratePulse);
    }
    let half = taus.len() / 2;
    let (x, y): (Vec<f64>, Vec<f64>) = taus[half..]
        .iter()
        .zip(&vals[half..])
        .filter(|(_, v)| **v != 0.0)
        .map(|(t, v)| (t.ln(), v.abs().ln()))
        .unzip();
    if x.len() < 2 {
        return Err(Error::InsufficientData("fewer than two nonzero transform values".into()));
    }
    let (coef, _) = least_squares(&[x.clone(), vec![1.0; x.len()]], &y)?;
    let gamma = pulse.gamma_witness();
    let gamma_witness_min = taus
        .iter()
        .zip(&vals)
        .map(|(t, v)| t.powf(gamma) * v.abs())
        .fold(f64::INFINITY, f64::min);
    Ok(PulseDecayReport {
        exponent: coef[0],
        consistent: coef[0] <= -1.5 + 0.1,
        gamma_witness_min,
        gamma,
    })
}

/// Writes `(t, f(t))` rows at `n + 1` equispaced times on `[0, T]`.
pub fn write_waveform_csv<W: Write>(pulse: &PulseSpec, t_final: f64, n: usize, mut out: W) -> Result<()> {
    writeln!(out, "t,f")?;
    for i in 0..=n {
        let t = t_final * i as f64 / n as f64;
        writeln!(out, "{:.17e},{:.17e}", t, pulse.eval(t))?;
    }
    Ok(())
}

/// Source ball `B(p, η)`, polarization `a`, pulse and record length `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub p: Vec3,
    pub eta: f64,
    pub a: Vec3,
    pub pulse: PulseSpec,
    pub t_final: f64,
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        if (self.a.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Configuration(format!("polarization {:?} is not a unit vector", self.a)));
        }
        if !(self.eta > 0.0) {
            return Err(Error::Configuration("ball radius must be positive".into()));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::Configuration("record length T must be positive".into()));
        }
        self.pulse.validate()
    }

    pub fn ball_volume(&self) -> f64 {
        4.0 / 3.0 * std::f64::consts::PI * self.eta.powi(3)
    }

    pub fn f_tilde(&self, tau: f64) -> f64 {
        laplace_pulse(&self.pulse, self.t_final, tau)
    }

    pub fn with_direction(&self, a: Vec3) -> Self {
        Self { a, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    fn oracle(p: &PulseSpec, t_final: f64, tau: f64, breaks: &[f64]) -> f64 {
        integrate(|t| (-tau * t).exp() * p.eval(t), 0.0, t_final, breaks, 1e-14, 0.0, 5000)
            .unwrap()
            .value
    }

    #[test]
    fn linear_ramp_closed_form() {
        let p = PulseSpec::PolyRamp { k: 1, t_rise: None };
        let (tau, t): (f64, f64) = (10.0, 10.0);
        let want = (1.0 - (1.0 + tau * t) * (-tau * t).exp()) / (tau * tau);
        assert!((laplace_pulse(&p, t, tau) - want).abs() < 1e-16);
        assert!((want - 0.01).abs() < 1e-6);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let pulses = [
            PulseSpec::default(),
            PulseSpec::PolyRamp { k: 3, t_rise: Some(0.4) },
            PulseSpec::PolyRamp { k: 2, t_rise: None },
            PulseSpec::RampedSine { omega: 2.0 * std::f64::consts::PI, t_ramp: 1.0 },
        ];
        for p in &pulses {
            for &t_final in &[0.3, 0.9, 4.0] {
                for &tau in &[0.05, 1.0, 6.0, 30.0, 120.0] {
                    let got = laplace_pulse(p, t_final, tau);
                    let want = oracle(p, t_final, tau, &[0.4, 0.5, 0.8, 1.0]);
                    assert!(
                        (got - want).abs() <= 1e-10 * want.abs() + 1e-300,
                        "{p:?} T={t_final} τ={tau}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_pulse_and_invalid_pulse() {
        let z = PulseSpec::Constant { value: 0.0 };
        assert_eq!(laplace_pulse(&z, 3.0, 2.0), 0.0);
        assert!(matches!(verify_pulse_decay(&z, 3.0, &[1.0, 2.0]), Err(Error::DegeneratePulse)));
        let c = PulseSpec::Constant { value: 1.0 };
        assert!(matches!(verify_pulse_decay(&c, 3.0, &[1.0, 2.0]), Err(Error::InvalidPulse(_))));
    }

    #[test]
    fn decay_exponents() {
        let taus: Vec<f64> = (0..16).map(|i| 5.0 * 1.2f64.powi(i)).collect();
        let r = verify_pulse_decay(&PulseSpec::default(), 4.0, &taus).unwrap();
        assert!((r.exponent + 2.0).abs() < 0.01 && r.consistent);
        assert!(r.gamma_witness_min > 0.5);
        let s = PulseSpec::RampedSine { omega: 2.0 * std::f64::consts::PI, t_ramp: 1.0 };
        let r = verify_pulse_decay(&s, 4.0, &taus).unwrap();
        assert!(r.consistent, "{r:?}");
    }

    #[test]
    fn linearity() {
        let f = PulseSpec::default();
        let g = PulseSpec::RampedSine { omega: 3.0, t_ramp: 0.7 };
        let h = PulseSpec::Combination { terms: vec![(2.5, f.clone()), (-1.5, g.clone())] };
        for tau in [0.5, 3.0, 20.0] {
            let lhs = laplace_pulse(&h, 4.0, tau);
            let rhs = 2.5 * laplace_pulse(&f, 4.0, tau) - 1.5 * laplace_pulse(&g, 4.0, tau);
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1e-300));
        }
    }

    #[test]
    fn sampled_transform_is_second_order() {
        let p = PulseSpec::RampedSine { omega: 5.0, t_ramp: 1.0 };
        let exact = laplace_pulse(&p, 4.0, 3.0);
        let e1 = (laplace_pulse_sampled(&p, 4.0, 0.02, 3.0) - exact).abs();
        let e2 = (laplace_pulse_sampled(&p, 4.0, 0.01, 3.0) - exact).abs();
        let ratio = e1 / e2;
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn default_pulse_is_c1() {
        let p = PulseSpec::default();
        assert_eq!(p.eval(0.0), 0.0);
        assert!((p.eval(1.0) - 0.75).abs() < 1e-15 && (p.eval(3.0) - 0.75).abs() < 1e-15);
        let d = 1e-7;
        for t in [0.5, 1.0] {
            let left = (p.eval(t) - p.eval(t - d)) / d;
            let right = (p.eval(t + d) - p.eval(t)) / d;
            assert!((left - right).abs() < 1e-5);
        }
    }
}
