//! `indicator`: indicator curves from the traces listed in the manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use enclosure::fdtd::TraceRecord;
use enclosure::indicator::{
    extract_distance, indicator_bold, indicator_curve, indicator_tilde_curve, FitModel, IndicatorCurve,
};
use enclosure::numeric::LogValue;
use serde::Serialize;

use crate::artifacts::{create, load_trace, write_json, Manifest};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::schema;

/// Pilot grid used to place the τ window when the config leaves it open.
pub const PILOT_TAU: [f64; 2] = [1.0, 60.0];
const PILOT_COUNT: usize = 24;
/// Target value of `2√(μ₀ε₀)·τ_max·dist` for the automatic grid.
const AUTO_DECAY: f64 = 25.0;
/// `τ_max / τ_min` of the automatic grid.
const AUTO_SPAN: f64 = 4.0;

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct TauGridReport {
    pub taus: Vec<f64>,
    /// `config`, `pilot` or `pilot_failed`.
    pub origin: &'static str,
    pub pilot_dist: Option<f64>,
}

pub fn curve_name(variant: &str, j: Option<usize>) -> String {
    match j {
        Some(j) => format!("indicator_{variant}_d{j}.csv"),
        None => format!("indicator_{variant}.csv"),
    }
}

struct Traces {
    primary: Vec<TraceRecord>,
    background: Vec<Option<TraceRecord>>,
    /// Primary traces are total fields (not scattered).
    total: bool,
}

fn load(manifest: &Manifest, n: usize) -> Result<Traces> {
    let get = |role: String| -> Result<Option<TraceRecord>> { manifest.path(&role).map(load_trace).transpose() };
    let mut t = Traces {
        primary: Vec::new(),
        background: Vec::new(),
        total: false,
    };
    for j in 0..n {
        let bg = get(format!("background_d{j}"))?;
        if let Some(s) = get(format!("scattered_d{j}"))? {
            t.primary.push(s);
        } else if let Some(s) = get(format!("total_d{j}"))? {
            t.primary.push(s);
            t.total = true;
        } else if let Some(b) = &bg {
            // vacuum run: the indicator of the background against itself
            t.primary.push(b.clone());
            t.total = true;
        } else {
            return Err(CliError::Stale(format!("no trace recorded for direction {j}")));
        }
        t.background.push(bg);
    }
    Ok(t)
}

struct Builder<'a> {
    cfg: &'a ExperimentConfig,
    traces: Traces,
    fingerprint: String,
    grid: enclosure::fdtd::GridSpec,
}

impl Builder<'_> {
    fn source(&self, j: usize) -> enclosure::source::SourceSpec {
        self.cfg.source_spec(j, &self.grid)
    }

    /// `I` for direction `j` when the data allow it.
    fn curve_i(&self, j: usize, taus: &[f64]) -> Result<Option<IndicatorCurve>> {
        let p = &self.traces.primary[j];
        let bg = self.traces.background[j].as_ref();
        if self.traces.total && bg.is_none() {
            return Ok(None);
        }
        let bg = if self.traces.total { bg } else { None };
        Ok(Some(indicator_curve(p, bg, &self.source(j), taus, &self.fingerprint)?))
    }

    fn curve_tilde(&self, j: usize, taus: &[f64]) -> Result<Option<IndicatorCurve>> {
        if !self.traces.total {
            return Ok(None);
        }
        let c = indicator_tilde_curve(&self.traces.primary[j], &self.cfg.medium, &self.source(j), taus, &self.fingerprint)?;
        Ok(Some(c))
    }

    /// The curve the pilot fit and `extract` default to for direction 0.
    fn primary_curve(&self, taus: &[f64]) -> Result<IndicatorCurve> {
        match self.curve_i(0, taus)? {
            Some(c) => Ok(c),
            None => Ok(self.curve_tilde(0, taus)?.expect("total trace without background gives Ĩ")),
        }
    }

    fn tau_grid(&self) -> Result<TauGridReport> {
        let tg = &self.cfg.tau_grid;
        let slowness = self.cfg.medium.slowness();
        let explicit = |lo: f64, hi: f64, origin, pilot_dist| -> Result<TauGridReport> {
            if !(lo > 0.0 && hi > lo) {
                return Err(CliError::Config(format!("τ grid [{lo}, {hi}] is empty or non-positive")));
            }
            Ok(TauGridReport {
                taus: log_grid(lo, hi, tg.count),
                origin,
                pilot_dist,
            })
        };
        match (tg.min, tg.max) {
            (Some(lo), Some(hi)) => explicit(lo, hi, "config", None),
            (Some(lo), None) => explicit(lo, lo * AUTO_SPAN, "config", None),
            (None, Some(hi)) => explicit(hi / AUTO_SPAN, hi, "config", None),
            (None, None) => {
                let pilot = self.primary_curve(&log_grid(PILOT_TAU[0], PILOT_TAU[1], PILOT_COUNT))?;
                match extract_distance(&pilot, &self.cfg.medium, FitModel::Exponential, None) {
                    Ok(est) => {
                        let hi = AUTO_DECAY / (2.0 * slowness * est.dist_est);
                        explicit(hi / AUTO_SPAN, hi, "pilot", Some(est.dist_est))
                    }
                    Err(_) => explicit(PILOT_TAU[0], PILOT_TAU[1], "pilot_failed", None),
                }
            }
        }
    }
}

fn save_curve(dir: &Path, name: &str, c: &IndicatorCurve) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut w = create(&path)?;
    c.write_csv(&mut w)?;
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn relative_delta(i: &LogValue, t: &LogValue) -> (LogValue, f64) {
    let d = t.add(&LogValue::from_parts(i.ln_abs, -i.sign));
    let rel = if i.is_zero() { f64::INFINITY } else { (d.ln_abs - i.ln_abs).exp() };
    (d, rel)
}

fn save_delta(dir: &Path, j: usize, i: &IndicatorCurve, t: &IndicatorCurve) -> Result<PathBuf> {
    let path = dir.join(format!("indicator_delta_d{j}.csv"));
    let mut w = create(&path)?;
    let io = |e| CliError::io(&path, e);
    writeln!(w, "# fingerprint: {}", i.fingerprint).map_err(io)?;
    writeln!(w, "tau,sign_I,log_abs_I,sign_I_tilde,log_abs_I_tilde,log_abs_delta,rel_delta").map_err(io)?;
    for (k, tau) in i.taus.iter().enumerate() {
        let (a, b) = (i.values[k], t.values[k]);
        let (d, rel) = relative_delta(&a, &b);
        writeln!(w, "{tau:e},{},{:e},{},{:e},{:e},{rel:e}", a.sign, a.ln_abs, b.sign, b.ln_abs, d.ln_abs).map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(path)
}

/// Writes every curve the recorded traces support; returns their paths.
pub fn indicator(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    let manifest = Manifest::load_checked(out, cfg)?;
    let n = cfg.source.directions.len();
    let b = Builder {
        cfg,
        traces: load(&manifest, n)?,
        fingerprint: manifest.fingerprint.clone(),
        grid: cfg.grid_spec()?,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| {
        let grid = b.tau_grid()?;
        let taus = &grid.taus;
        let mut written = Vec::new();
        let mut plain = Vec::new();
        for j in 0..n {
            let i = b.curve_i(j, taus)?;
            if let Some(c) = &i {
                written.push(save_curve(out, &curve_name("I", Some(j)), c)?);
            }
            if cfg.mode == crate::config::Mode::AnalyticTilde {
                if let Some(t) = b.curve_tilde(j, taus)? {
                    written.push(save_curve(out, &curve_name("I_tilde", Some(j)), &t)?);
                    if let Some(c) = &i {
                        written.push(save_delta(out, j, c, &t)?);
                    }
                }
            }
            plain.push(i);
        }
        if let [Some(c1), Some(c2)] = plain.as_slice() {
            written.push(save_curve(out, &curve_name("I_bold", None), &indicator_bold(c1, c2)?)?);
        }
        write_json(&out.join("tau_grid.json"), &grid)?;
        schema::write(out)?;
        Ok(written)
    })
}
