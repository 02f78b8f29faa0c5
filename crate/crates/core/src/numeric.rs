//! Small numerical kernels shared by every module: signed log-magnitude
//! arithmetic, compensated summation, the exact Laplace kernel for
//! piecewise-linear samples, `φ(ξ) = ξ cosh ξ − sinh ξ` and least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real number stored as `(ln|x|, sign)`.
///
/// Zero is `sign == 0` with `ln_abs == -inf`. Indicator values span many
/// decades over a τ sweep, so all indicator arithmetic goes through this type.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    pub ln_abs: f64,
    pub sign: i8,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        ln_abs: f64::NEG_INFINITY,
        sign: 0,
    };

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            LogValue {
                ln_abs: x.abs().ln(),
                sign: if x > 0.0 { 1 } else { -1 },
            }
        }
    }

    pub fn from_parts(ln_abs: f64, sign: i8) -> Self {
        if sign == 0 || ln_abs == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogValue {
                ln_abs,
                sign: sign.signum(),
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Back to `f64`; underflows to zero and overflows to ±inf.
    pub fn to_f64(&self) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            self.sign as f64 * self.ln_abs.exp()
        }
    }

    pub fn mul(&self, other: &LogValue) -> LogValue {
        if self.is_zero() || other.is_zero() {
            return Self::ZERO;
        }
        LogValue {
            ln_abs: self.ln_abs + other.ln_abs,
            sign: self.sign * other.sign,
        }
    }

    pub fn scale_ln(&self, ln_factor: f64) -> LogValue {
        if self.is_zero() {
            return Self::ZERO;
        }
        LogValue {
            ln_abs: self.ln_abs + ln_factor,
            sign: self.sign,
        }
    }

    /// Signed log-sum-exp.
    pub fn add(&self, other: &LogValue) -> LogValue {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let (big, small) = if self.ln_abs >= other.ln_abs {
            (self, other)
        } else {
            (other, self)
        };
        let ratio = (small.ln_abs - big.ln_abs).exp();
        if big.sign == small.sign {
            LogValue {
                ln_abs: big.ln_abs + ratio.ln_1p(),
                sign: big.sign,
            }
        } else if ratio == 1.0 {
            Self::ZERO
        } else {
            LogValue {
                ln_abs: big.ln_abs + (-ratio).ln_1p(),
                sign: big.sign,
            }
        }
    }

    pub fn log10_abs(&self) -> f64 {
        self.ln_abs / std::f64::consts::LN_10
    }
}

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Returns `(g0(u), g1(u))` with
/// `∫_0^Δ e^{-τs}(1 - s/Δ) ds = Δ g0(τΔ)` and `∫_0^Δ e^{-τs} s/Δ ds = Δ g1(τΔ)`.
pub fn linear_kernel(u: f64) -> (f64, f64) {
    if u < 1.0 {
        // g0 = Σ (−u)^n/(n+2)!, g1 = Σ (−u)^n (n+1)/(n+2)!
        let mut g0 = 0.0;
        let mut g1 = 0.0;
        let mut c = 0.5;
        for n in 0..20 {
            g0 += c;
            g1 += c * (n as f64 + 1.0);
            c *= -u / (n as f64 + 3.0);
        }
        (g0, g1)
    } else {
        let em = (-u).exp();
        let u2 = u * u;
        ((u - 1.0 + em) / u2, (1.0 - (1.0 + u) * em) / u2)
    }
}

/// Quadrature weights `w_n` such that `Σ w_n g(t_n)` is the exact integral of
/// `e^{-τt}` times the piecewise-linear interpolant of samples `g(t_n)`,
/// `t_n = n·dt`, `n = 0..n_samples`.
pub fn laplace_weights(n_samples: usize, dt: f64, tau: f64) -> Vec<f64> {
    let mut w = vec![0.0; n_samples];
    if n_samples < 2 {
        return w;
    }
    let (g0, g1) = linear_kernel(tau * dt);
    for n in 0..n_samples - 1 {
        let decay = (-tau * dt * n as f64).exp() * dt;
        w[n] += decay * g0;
        w[n + 1] += decay * g1;
    }
    w
}

/// Exact Laplace transform of a uniformly sampled piecewise-linear signal
/// over `[0, (n-1)·dt]`.
pub fn laplace_piecewise_linear(samples: &[f64], dt: f64, tau: f64) -> f64 {
    let w = laplace_weights(samples.len(), dt, tau);
    compensated_sum(w.iter().zip(samples).map(|(a, b)| a * b))
}

/// `φ(ξ) = ξ cosh ξ − sinh ξ`, series near zero to avoid cancellation.
pub fn phi(xi: f64) -> f64 {
    if xi.abs() < 0.5 {
        // Σ_{n≥1} 2n ξ^{2n+1} / (2n+1)!
        let x2 = xi * xi;
        let mut term = xi * x2 / 6.0; // ξ^3/3!
        let mut sum: f64 = 0.0;
        let mut n = 1.0;
        while term.abs() > 1e-18 * sum.abs().max(f64::MIN_POSITIVE) {
            sum += 2.0 * n * term;
            term *= x2 / ((2.0 * n + 2.0) * (2.0 * n + 3.0));
            n += 1.0;
            if n > 40.0 {
                break;
            }
        }
        sum
    } else {
        xi * xi.cosh() - xi.sinh()
    }
}

/// `ln φ(ξ)` for `ξ > 0`, stable for large ξ.
pub fn ln_phi(xi: f64) -> f64 {
    if xi < 20.0 {
        phi(xi).ln()
    } else {
        // φ = e^ξ ((ξ-1) + (ξ+1) e^{-2ξ}) / 2
        xi + ((xi - 1.0) + (xi + 1.0) * (-2.0 * xi).exp()).ln() - std::f64::consts::LN_2
    }
}

/// `sinh(x)/x` with the removable singularity handled.
pub fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}

/// Ordinary least squares `min ‖A c − y‖₂` via SVD.
///
/// Returns the coefficients and the RMS residual. Fails when the design
/// matrix is numerically rank deficient.
pub fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let m = y.len();
    let n = columns.len();
    if m < n || n == 0 {
        return Err(Error::InsufficientRange(format!(
            "{m} samples for {n} fit parameters"
        )));
    }
    // Column scaling keeps the conditioning test meaningful for mixed units.
    let scales: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE))
        .collect();
    let a = DMatrix::from_fn(m, n, |i, j| columns[j][i] / scales[j]);
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-11 * smax) {
        return Err(Error::InsufficientRange(format!(
            "design matrix rank deficient (σ_min/σ_max = {:.3e})",
            smin / smax
        )));
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::InsufficientRange(e.to_string()))?;
    let resid = &a * &x - &b;
    let rms = (resid.norm_squared() / m as f64).sqrt();
    let coef = x.iter().zip(&scales).map(|(c, s)| c / s).collect();
    Ok((coef, rms))
}

/// Van der Corput radical inverse in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// Point `index` of the 3D Halton sequence (bases 2, 3, 5) in the unit cube.
pub fn halton3(index: u64) -> [f64; 3] {
    [
        radical_inverse(index, 2),
        radical_inverse(index, 3),
        radical_inverse(index, 5),
    ]
}
