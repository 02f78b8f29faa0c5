//! Indicator functions built from traces on the source ball, their
//! Laplace-domain bounds, distance extraction from the decay rate and the
//! sign-based material classification.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{BackgroundField, LaplaceParams};
use crate::asymptotics::{combo_coefficients, field_energies, DEFAULT_REL_TOL};
use crate::error::{Error, Result};
use crate::fdtd::{TraceMode, TraceRecord};
use crate::model::{BackgroundMedium, ObstacleSpec};
use crate::numeric::{compensated_sum, laplace_weights, least_squares, CompensatedSum, LogValue};
use crate::source::SourceSpec;
use crate::Vec3;

/// Smallest number of clean samples a distance fit accepts.
pub const MIN_FIT_SAMPLES: usize = 8;

/// Round-trip times above this fraction of the recording horizon `T` are
/// attributed to the truncation of the data at `T`, not to the obstacle.
pub const HORIZON_FRACTION: f64 = 0.9;

/// Laplace transform `W(x) = ∫_0^T e^{−τt} E(x, t) dt` of a trace at every
/// quadrature point.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplaceTrace {
    pub tau: f64,
    pub mode: TraceMode,
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub w: Vec<Vec3>,
    pub t_final: f64,
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Configuration(format!("τ = {tau} must be positive")))
    }
}

/// Exact transform of the piecewise-linear-in-time trace.
pub fn laplace_transform_trace(trace: &TraceRecord, tau: f64) -> Result<LaplaceTrace> {
    check_tau(tau)?;
    let np = trace.points.len();
    let kernel = laplace_weights(trace.n_samples(), trace.dt, tau);
    let w = (0..np)
        .map(|p| {
            let mut acc = [CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new()];
            for (n, kw) in kernel.iter().enumerate() {
                let o = (n * np + p) * 3;
                for (c, s) in acc.iter_mut().enumerate() {
                    s.add(kw * trace.series[o + c]);
                }
            }
            Vec3::new(acc[0].value(), acc[1].value(), acc[2].value())
        })
        .collect();
    Ok(LaplaceTrace {
        tau,
        mode: trace.mode,
        points: trace.points.clone(),
        weights: trace.weights.clone(),
        w,
        t_final: trace.t_final(),
    })
}

fn f_tilde_log(source: &SourceSpec, tau: f64) -> Result<LogValue> {
    let f = LogValue::from_f64(source.f_tilde(tau));
    if f.is_zero() {
        return Err(Error::DegeneratePulse);
    }
    Ok(f)
}

/// `f̃(τ) Σ w a·(W − V)`, with `V` taken from `background`. A scattered trace
/// already is `W − V` and takes no background.
pub fn indicator_i(total: &LaplaceTrace, background: Option<&LaplaceTrace>, source: &SourceSpec) -> Result<LogValue> {
    let a = source.a;
    let sum = match (total.mode, background) {
        (TraceMode::Scattered, None) => {
            compensated_sum(total.w.iter().zip(&total.weights).map(|(w, q)| q * a.dot(w)))
        }
        (TraceMode::Scattered, Some(_)) => {
            return Err(Error::Incompatible("a scattered trace already excludes the background".into()))
        }
        (_, None) => return Err(Error::Dependency("the indicator needs a background trace".into())),
        (_, Some(bg)) => {
            if bg.mode != TraceMode::Background {
                return Err(Error::Incompatible("second trace is not a background trace".into()));
            }
            if bg.tau != total.tau
                || bg.points != total.points
                || bg.weights != total.weights
                || bg.t_final != total.t_final
            {
                return Err(Error::Incompatible("traces differ in τ, sample points or time horizon".into()));
            }
            compensated_sum(
                total
                    .w
                    .iter()
                    .zip(&bg.w)
                    .zip(&total.weights)
                    .map(|((w, v), q)| q * a.dot(&(w - v))),
            )
        }
    };
    Ok(f_tilde_log(source, total.tau)?.mul(&LogValue::from_f64(sum)))
}

/// Same as [`indicator_i`] with the closed-form background field `V_e⁰` at
/// the quadrature points in place of a background run.
pub fn indicator_i_tilde(total: &LaplaceTrace, bg: &BackgroundMedium, source: &SourceSpec) -> Result<LogValue> {
    if total.mode == TraceMode::Scattered {
        return Err(Error::Incompatible("the analytic variant needs the total field".into()));
    }
    let field = BackgroundField::new(bg, source, total.tau)?;
    let a = source.a;
    let sum = compensated_sum(
        total
            .w
            .iter()
            .zip(&total.points)
            .zip(&total.weights)
            .map(|((w, x), q)| q * a.dot(&(w - field.ve(x)))),
    );
    Ok(f_tilde_log(source, total.tau)?.mul(&LogValue::from_f64(sum)))
}

/// Which indicator a curve holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "I")]
    I,
    #[serde(rename = "I_tilde")]
    ITilde,
    #[serde(rename = "I_bold")]
    IBold,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::I => "I",
            Variant::ITilde => "I_tilde",
            Variant::IBold => "I_bold",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "I" => Ok(Variant::I),
            "I_tilde" => Ok(Variant::ITilde),
            "I_bold" => Ok(Variant::IBold),
            _ => Err(Error::Configuration(format!("unknown indicator variant {s:?}"))),
        }
    }
}

/// Indicator values on an ascending τ grid.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorCurve {
    pub taus: Vec<f64>,
    pub values: Vec<LogValue>,
    pub variant: Variant,
    /// Polarization(s) the curve was built from.
    pub directions: Vec<Vec3>,
    pub t_final: f64,
    /// Opaque identifier of the inputs (grid, pulse, geometry).
    pub fingerprint: String,
}

fn check_grid(taus: &[f64]) -> Result<()> {
    if taus.is_empty() {
        return Err(Error::Configuration("empty τ grid".into()));
    }
    for t in taus {
        check_tau(*t)?;
    }
    if taus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Configuration("τ grid must be strictly ascending".into()));
    }
    Ok(())
}

/// `Σ_points w·a·(E − E₀)` at every time sample, differenced pointwise before
/// the sum.
fn projected_difference(total: &TraceRecord, background: Option<&TraceRecord>, a: &Vec3) -> Result<Vec<f64>> {
    match (total.mode, background) {
        (TraceMode::Scattered, None) => Ok(total.projected_series(a)),
        (TraceMode::Scattered, Some(_)) => {
            Err(Error::Incompatible("a scattered trace already excludes the background".into()))
        }
        (_, None) => Err(Error::Dependency("the indicator needs a background trace".into())),
        (_, Some(bg)) => {
            if bg.mode != TraceMode::Background {
                return Err(Error::Incompatible("second trace is not a background trace".into()));
            }
            if bg.points != total.points || bg.weights != total.weights || bg.dt != total.dt || bg.n_steps != total.n_steps
            {
                return Err(Error::Incompatible("traces differ in sample points or time grid".into()));
            }
            let np = total.points.len();
            Ok((0..total.n_samples())
                .map(|n| {
                    compensated_sum((0..np).map(|p| {
                        let o = (n * np + p) * 3;
                        let d = Vec3::new(
                            total.series[o] - bg.series[o],
                            total.series[o + 1] - bg.series[o + 1],
                            total.series[o + 2] - bg.series[o + 2],
                        );
                        total.weights[p] * a.dot(&d)
                    }))
                })
                .collect())
        }
    }
}

/// `I(τ)` on a τ grid from a scattered trace, or a total trace plus its
/// background.
pub fn indicator_curve(
    total: &TraceRecord,
    background: Option<&TraceRecord>,
    source: &SourceSpec,
    taus: &[f64],
    fingerprint: &str,
) -> Result<IndicatorCurve> {
    check_grid(taus)?;
    let series = projected_difference(total, background, &source.a)?;
    let values = taus
        .par_iter()
        .map(|&tau| {
            let kernel = laplace_weights(series.len(), total.dt, tau);
            let s = compensated_sum(kernel.iter().zip(&series).map(|(k, v)| k * v));
            Ok(f_tilde_log(source, tau)?.mul(&LogValue::from_f64(s)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IndicatorCurve {
        taus: taus.to_vec(),
        values,
        variant: Variant::I,
        directions: vec![source.a],
        t_final: total.t_final(),
        fingerprint: fingerprint.to_string(),
    })
}

/// `Ĩ(τ)` on a τ grid from a total-field trace.
pub fn indicator_tilde_curve(
    total: &TraceRecord,
    bg: &BackgroundMedium,
    source: &SourceSpec,
    taus: &[f64],
    fingerprint: &str,
) -> Result<IndicatorCurve> {
    check_grid(taus)?;
    let values = taus
        .par_iter()
        .map(|&tau| indicator_i_tilde(&laplace_transform_trace(total, tau)?, bg, source))
        .collect::<Result<Vec<_>>>()?;
    Ok(IndicatorCurve {
        taus: taus.to_vec(),
        values,
        variant: Variant::ITilde,
        directions: vec![source.a],
        t_final: total.t_final(),
        fingerprint: fingerprint.to_string(),
    })
}

/// `𝑰(τ) = I₁(τ) + I₂(τ)` for two linearly independent polarizations.
pub fn indicator_bold(first: &IndicatorCurve, second: &IndicatorCurve) -> Result<IndicatorCurve> {
    if first.variant != Variant::I || second.variant != Variant::I {
        return Err(Error::Incompatible("the two-direction sum takes single-direction I curves".into()));
    }
    let (a1, a2) = match (first.directions.as_slice(), second.directions.as_slice()) {
        ([a1], [a2]) => (*a1, *a2),
        _ => return Err(Error::Incompatible("each curve must carry exactly one direction".into())),
    };
    if a1.cross(&a2).norm() <= 1e-8 * a1.norm() * a2.norm() {
        return Err(Error::Configuration("the two polarizations are linearly dependent".into()));
    }
    if first.taus != second.taus || first.t_final != second.t_final {
        return Err(Error::Incompatible("curves differ in τ grid or time horizon".into()));
    }
    Ok(IndicatorCurve {
        taus: first.taus.clone(),
        values: first.values.iter().zip(&second.values).map(|(x, y)| x.add(y)).collect(),
        variant: Variant::IBold,
        directions: vec![a1, a2],
        t_final: first.t_final,
        fingerprint: first.fingerprint.clone(),
    })
}

fn fmt_vec(v: &Vec3) -> String {
    format!("{:e} {:e} {:e}", v.x, v.y, v.z)
}

impl IndicatorCurve {
    /// `e^{τT} I(τ)` when it is representable in `f64`.
    pub fn scaled_by_horizon(&self, i: usize) -> Option<f64> {
        let v = self.values[i].scale_ln(self.taus[i] * self.t_final).to_f64();
        v.is_finite().then_some(v)
    }

    /// CSV with a `#` metadata header and columns
    /// `tau,sign,log_abs_I,I_over_exp,variant`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# fingerprint: {}", self.fingerprint)?;
        writeln!(out, "# t_final: {:e}", self.t_final)?;
        let dirs: Vec<String> = self.directions.iter().map(fmt_vec).collect();
        writeln!(out, "# directions: {}", dirs.join("; "))?;
        writeln!(out, "tau,sign,log_abs_I,I_over_exp,variant")?;
        for (i, (t, v)) in self.taus.iter().zip(&self.values).enumerate() {
            let scaled = self.scaled_by_horizon(i).map(|s| format!("{s:e}")).unwrap_or_default();
            writeln!(out, "{t:e},{},{:e},{scaled},{}", v.sign, v.ln_abs, self.variant.name())?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let bad = |m: &str| Error::Configuration(format!("indicator CSV: {m}"));
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("bad number {s:?}")));
        let mut curve = IndicatorCurve {
            taus: Vec::new(),
            values: Vec::new(),
            variant: Variant::I,
            directions: Vec::new(),
            t_final: f64::NAN,
            fingerprint: String::new(),
        };
        let mut header = false;
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let (key, value) = meta.split_once(':').ok_or_else(|| bad("malformed metadata line"))?;
                let value = value.trim();
                match key.trim() {
                    "fingerprint" => curve.fingerprint = value.to_string(),
                    "t_final" => curve.t_final = num(value)?,
                    "directions" => {
                        for d in value.split(';').filter(|d| !d.trim().is_empty()) {
                            let c = d.split_whitespace().map(num).collect::<Result<Vec<_>>>()?;
                            if c.len() != 3 {
                                return Err(bad("direction needs three components"));
                            }
                            curve.directions.push(Vec3::new(c[0], c[1], c[2]));
                        }
                    }
                    _ => {}
                }
                continue;
            }
            if !header {
                if line != "tau,sign,log_abs_I,I_over_exp,variant" {
                    return Err(bad("unexpected column header"));
                }
                header = true;
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(bad("expected five columns"));
            }
            let sign: i8 = cols[1].trim().parse().map_err(|_| bad("bad sign"))?;
            if !(-1..=1).contains(&sign) {
                return Err(bad("sign outside {-1, 0, 1}"));
            }
            curve.taus.push(num(cols[0])?);
            curve.values.push(LogValue::from_parts(num(cols[2])?, sign));
            curve.variant = Variant::parse(cols[4].trim())?;
        }
        if !header || curve.taus.is_empty() {
            return Err(bad("no data rows"));
        }
        check_grid(&curve.taus)?;
        Ok(curve)
    }
}

/// What is regressed against what when extracting the distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `ln|I| = slope·τ + c`; the slope tends to `−2√(μ₀ε₀)·dist(D, B)`.
    Exponential,
    /// `ln|I| − ln(K²f̃²) = −2k(τ)·d + q·ln τ + c` with `d = dist(p, ∂D)`.
    /// Removes the known source prefactors and absorbs the remaining
    /// algebraic factor in `q`.
    Prefactor,
}

/// Result of a distance fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    /// Estimate of `dist(D, B)`.
    pub dist_est: f64,
    /// Fitted coefficient of the decay regressor (`τ` or `k(τ)`).
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of `ln τ` ([`FitModel::Prefactor`] only).
    pub power: Option<f64>,
    pub window: [f64; 2],
    /// RMS residual of the fit.
    pub residual: f64,
    /// First τ that was discarded as floor-dominated, if any.
    pub noise_floor_tau: Option<f64>,
    pub n_clean: usize,
    pub model: FitModel,
    /// `(τ, ln|I(τ)|/τ)` over the whole curve.
    pub slope_curve: Vec<[f64; 2]>,
}

/// Number of leading samples that form the clean window.
///
/// The window ends at the first zero or sign flip, or where the local slope
/// of `y` against `x` rises above half the median slope of the first third.
fn clean_window(x: &[f64], y: &[f64], signs: &[i8]) -> usize {
    let n = x.len();
    if n == 0 || signs[0] == 0 {
        return 0;
    }
    let same = signs.iter().take_while(|s| **s == signs[0]).count();
    if same < 3 {
        return same;
    }
    let slopes: Vec<f64> = (0..same - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let third = (n / 3).max(1).min(slopes.len());
    let mut head = slopes[..third].to_vec();
    head.sort_by(f64::total_cmp);
    let median = if third % 2 == 1 {
        head[third / 2]
    } else {
        0.5 * (head[third / 2 - 1] + head[third / 2])
    };
    if median >= 0.0 {
        return same;
    }
    match slopes.iter().position(|s| *s > 0.5 * median) {
        Some(i) => i + 1,
        None => same,
    }
}

/// Distance `dist(D, B)` from the decay of an indicator curve.
///
/// `source` is needed for [`FitModel::Prefactor`] only.
pub fn extract_distance(
    curve: &IndicatorCurve,
    bg: &BackgroundMedium,
    model: FitModel,
    source: Option<&SourceSpec>,
) -> Result<DistanceEstimate> {
    bg.validate()?;
    let slowness = bg.slowness();
    let n = curve.taus.len();
    let (x, y): (Vec<f64>, Vec<f64>) = match model {
        FitModel::Exponential => (curve.taus.clone(), curve.values.iter().map(|v| v.ln_abs).collect()),
        FitModel::Prefactor => {
            let src = source.ok_or_else(|| Error::Dependency("prefactor fit needs the source".into()))?;
            let mut x = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            for (t, v) in curve.taus.iter().zip(&curve.values) {
                let params = LaplaceParams::new(bg, *t)?;
                let f = src.f_tilde(*t).abs();
                let pre = if f > 0.0 { 2.0 * (params.ln_k_tau(src.eta) + f.ln()) } else { f64::NAN };
                x.push(params.k);
                y.push(v.ln_abs - pre);
            }
            (x, y)
        }
    };
    let signs: Vec<i8> = curve
        .values
        .iter()
        .zip(&y)
        .map(|(v, y)| if y.is_finite() { v.sign } else { 0 })
        .collect();
    let m = clean_window(&x, &y, &signs);
    if m < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{m} clean samples before the noise floor, need {MIN_FIT_SAMPLES}"
        )));
    }
    let ones = vec![1.0; m];
    let (coef, residual, power) = match model {
        FitModel::Exponential => {
            let (c, r) = least_squares(&[x[..m].to_vec(), ones], &y[..m])?;
            (c, r, None)
        }
        FitModel::Prefactor => {
            let logs = curve.taus[..m].iter().map(|t| t.ln()).collect();
            let (c, r) = least_squares(&[x[..m].to_vec(), logs, ones], &y[..m])?;
            let p = c[1];
            (vec![c[0], c[2]], r, Some(p))
        }
    };
    let slope = coef[0];
    let dist_est = match model {
        FitModel::Exponential => -slope / (2.0 * slowness),
        FitModel::Prefactor => -slope / 2.0 - source.map_or(0.0, |s| s.eta),
    };
    if !(slope < 0.0) || !(dist_est > 0.0) {
        return Err(Error::NoDecay(format!(
            "fitted slope {slope:.4e} gives no positive distance; T may be below 2√(μ₀ε₀)·dist(D,B)"
        )));
    }
    // Data recorded up to T cannot show a round trip longer than T: a decay
    // this fast comes from the end of the record.
    if 2.0 * slowness * dist_est >= HORIZON_FRACTION * curve.t_final {
        return Err(Error::NoDecay(format!(
            "decay rate {:.4} is set by the recording horizon T = {}; T may be below 2√(μ₀ε₀)·dist(D,B)",
            2.0 * slowness * dist_est,
            curve.t_final
        )));
    }
    // With the round trip inside the record, e^{τT}I grows without bound;
    // if it does not grow across the window the obstacle was not seen.
    let growth = |i: usize| curve.values[i].ln_abs + curve.taus[i] * curve.t_final;
    if growth(m - 1) <= growth(0) {
        return Err(Error::NoDecay(format!(
            "e^(τT)·I does not grow over [{}, {}]; T may be below 2√(μ₀ε₀)·dist(D,B)",
            curve.taus[0],
            curve.taus[m - 1]
        )));
    }
    Ok(DistanceEstimate {
        dist_est,
        slope,
        intercept: coef[1],
        power,
        window: [curve.taus[0], curve.taus[m - 1]],
        residual,
        noise_floor_tau: (m < n).then(|| curve.taus[m]),
        n_clean: m,
        model,
        slope_curve: curve.taus.iter().zip(&curve.values).map(|(t, v)| [*t, v.ln_abs / t]).collect(),
    })
}

/// Material class read off the sign of the indicator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignClass {
    /// Persistently negative.
    #[serde(rename = "A_I_like")]
    AILike,
    /// Persistently positive.
    #[serde(rename = "A_II_like")]
    AIILike,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

/// Sign of the curve over `window` (inclusive τ bounds), or over the whole
/// curve when no window is given.
pub fn classify_by_sign(curve: &IndicatorCurve, window: Option<[f64; 2]>) -> SignClass {
    let signs: Vec<i8> = curve
        .taus
        .iter()
        .zip(&curve.values)
        .filter(|(t, _)| window.is_none_or(|[lo, hi]| **t >= lo && **t <= hi))
        .map(|(_, v)| v.sign)
        .collect();
    if signs.is_empty() {
        SignClass::Inconclusive
    } else if signs.iter().all(|s| *s == -1) {
        SignClass::AILike
    } else if signs.iter().all(|s| *s == 1) {
        SignClass::AIILike
    } else {
        SignClass::Inconclusive
    }
}

/// Upper and lower bounds for the indicator at one τ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorBounds {
    pub tau: f64,
    pub upper: LogValue,
    pub lower: LogValue,
    /// `τ∫_D[(ε̃₀ − ε̃)²/ε̃·|V_e⁰|² + (μ − μ₀)²/μ·|V_m⁰|²]`, which equals
    /// `upper − lower` term by term.
    pub gap: LogValue,
}

impl IndicatorBounds {
    /// `|upper − lower − gap|` relative to the larger bound.
    pub fn identity_defect(&self) -> f64 {
        let diff = self.upper.add(&LogValue::from_parts(self.lower.ln_abs, -self.lower.sign));
        let defect = diff.add(&LogValue::from_parts(self.gap.ln_abs, -self.gap.sign));
        let scale = self.upper.ln_abs.max(self.lower.ln_abs);
        if defect.is_zero() {
            0.0
        } else {
            (defect.ln_abs - scale).exp()
        }
    }
}

/// Bounds on `I(τ)` from the closed-form background fields over a
/// homogeneous obstacle:
///
/// `upper = τ∫_D[(ε̃₀/ε̃)(ε̃₀ − ε̃)|V_e⁰|² + (μ − μ₀)|V_m⁰|²]`,
/// `lower = τ∫_D[(ε̃₀ − ε̃)|V_e⁰|² + (μ₀/μ)(μ − μ₀)|V_m⁰|²]`.
pub fn indicator_bounds(
    source: &SourceSpec,
    obstacle: &ObstacleSpec,
    bg: &BackgroundMedium,
    tau: f64,
) -> Result<IndicatorBounds> {
    obstacle.validate(bg)?;
    if !obstacle.is_piecewise_constant() {
        return Err(Error::UnsupportedMedium("bounds need constant material parameters in D".into()));
    }
    let params = LaplaceParams::new(bg, tau)?;
    let f = source.f_tilde(tau);
    if f == 0.0 {
        return Err(Error::DegeneratePulse);
    }
    let probe = obstacle.shape.bounding_box().0;
    let eps_t = bg.eps0 * obstacle.eps_r(&probe) + obstacle.sigma(bg, &probe) / tau;
    let mu = bg.mu0 * obstacle.mu_r(&probe);
    let c = combo_coefficients(params.eps0_t, params.mu0, eps_t, mu);
    let energies = field_energies(&obstacle.shape, source, &params, f, DEFAULT_REL_TOL)?;
    let ln_scale = energies.ln_scale + tau.ln();
    let combine = |ce: f64, cm: f64| {
        LogValue::from_f64(ce * energies.e2_scaled)
            .add(&LogValue::from_f64(cm * energies.m2_scaled))
            .scale_ln(ln_scale)
    };
    let de = params.eps0_t - eps_t;
    let dm = mu - params.mu0;
    Ok(IndicatorBounds {
        tau,
        upper: combine(c.upper_e, c.upper_m),
        lower: combine(c.lower_e, c.lower_m),
        gap: combine(de * de / eps_t, dm * dm / mu),
    })
}
