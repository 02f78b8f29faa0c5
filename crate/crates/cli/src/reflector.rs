//! `reflector`: nearest boundary points of the obstacle and its material class.

use enclosure::model::{classify_material, dist_d_b, first_reflector, MaterialClassification, ReflectorReport};
use serde::Serialize;

use crate::artifacts::{create_dir, write_json};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

#[derive(Clone, Debug, Serialize)]
pub struct ReflectorSummary {
    pub fingerprint: String,
    pub dist_d_b: f64,
    pub material: MaterialClassification,
    /// One report per configured polarization.
    pub reflectors: Vec<ReflectorReport>,
}

pub fn reflector(cfg: &ExperimentConfig) -> Result<ReflectorSummary> {
    let obstacle = cfg
        .obstacle_spec()
        .ok_or_else(|| CliError::Config("reflector needs an [obstacle] section".into()))?;
    let p = cfg.source.p;
    let summary = ReflectorSummary {
        fingerprint: cfg.fingerprint(),
        dist_d_b: dist_d_b(&obstacle.shape, &p, cfg.source.eta)?,
        material: classify_material(&obstacle, &cfg.medium)?,
        reflectors: cfg
            .source
            .directions
            .iter()
            .map(|a| first_reflector(&obstacle.shape, &p, a, None))
            .collect::<enclosure::Result<_>>()?,
    };
    create_dir(&cfg.output_dir)?;
    write_json(&cfg.output_dir.join("reflector.json"), &summary)?;
    Ok(summary)
}
