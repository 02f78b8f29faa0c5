//! `extract`: distance and sign class from one indicator curve.

use std::io::BufReader;
use std::path::{Path, PathBuf};

use enclosure::indicator::{classify_by_sign, extract_distance, DistanceEstimate, FitModel, IndicatorCurve, SignClass};
use enclosure::model::{classify_material, MaterialClass};
use serde::Serialize;

use crate::artifacts::{open, write_json};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::indicate::curve_name;

pub const RESULTS: &str = "results.json";

#[derive(Clone, Debug, Serialize)]
pub struct GroundTruth {
    pub dist: Option<f64>,
    pub material_class: Option<MaterialClass>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Results {
    pub fingerprint: String,
    pub curve: String,
    pub variant: String,
    pub fit: FitModel,
    /// `ok`, `no_decay` or `insufficient_data`.
    pub status: &'static str,
    pub message: Option<String>,
    pub estimate: Option<DistanceEstimate>,
    pub dist_est: Option<f64>,
    pub sign_class: SignClass,
    pub ground_truth: GroundTruth,
}

/// `-` reads standard input.
pub fn read_curve(path: &Path) -> Result<IndicatorCurve> {
    if path.as_os_str() == "-" {
        let stdin = std::io::stdin();
        return Ok(IndicatorCurve::read_csv(BufReader::new(stdin.lock()))?);
    }
    Ok(IndicatorCurve::read_csv(open(path)?)?)
}

/// The two-direction sum when present, else the first plain curve, else the
/// first analytic-background curve.
pub fn default_curve(out: &Path) -> PathBuf {
    [curve_name("I_bold", None), curve_name("I", Some(0)), curve_name("I_tilde", Some(0))]
        .into_iter()
        .map(|n| out.join(n))
        .find(|p| p.exists())
        .unwrap_or_else(|| out.join(curve_name("I", Some(0))))
}

pub fn extract(cfg: &ExperimentConfig, curve_path: Option<&Path>, fit: Option<FitModel>) -> Result<Results> {
    cfg.medium.validate()?;
    let out = &cfg.output_dir;
    let path = curve_path.map(Path::to_path_buf).unwrap_or_else(|| default_curve(out));
    if path.as_os_str() != "-" && !path.exists() {
        return Err(CliError::Stale(format!("{} is missing; run `indicator` first", path.display())));
    }
    let curve = read_curve(&path)?;
    let fingerprint = cfg.fingerprint();
    if curve.fingerprint != fingerprint {
        return Err(CliError::Stale(format!(
            "{} was computed for config {} but the current config is {fingerprint}",
            path.display(),
            curve.fingerprint
        )));
    }
    let fit = fit.unwrap_or(cfg.extract.fit);
    let grid = cfg.grid_spec()?;
    let source = cfg.source_spec(0, &grid);
    let est = extract_distance(&curve, &cfg.medium, fit, Some(&source));
    let window = est.as_ref().ok().map(|e| e.window);
    let material_class = match cfg.obstacle_spec() {
        Some(o) => Some(classify_material(&o, &cfg.medium)?.class),
        None => None,
    };
    let (status, message) = match &est {
        Ok(_) => ("ok", None),
        Err(enclosure::Error::NoDecay(m)) => ("no_decay", Some(m.clone())),
        Err(enclosure::Error::InsufficientData(m)) => (
            "insufficient_data",
            Some(format!("{m}; T may be below 2√(μ₀ε₀)·dist(D,B)")),
        ),
        Err(e) => return Err(e.clone().into()),
    };
    let results = Results {
        fingerprint,
        curve: path.display().to_string(),
        variant: curve.variant.name().to_string(),
        fit,
        status,
        message,
        dist_est: est.as_ref().ok().map(|e| e.dist_est),
        estimate: est.as_ref().ok().cloned(),
        sign_class: classify_by_sign(&curve, window),
        ground_truth: GroundTruth {
            dist: cfg.true_distance(),
            material_class,
        },
    };
    crate::artifacts::create_dir(out)?;
    write_json(&out.join(RESULTS), &results)?;
    est?;
    Ok(results)
}
