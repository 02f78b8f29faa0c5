//! Experiment configuration (TOML) and its resolution into solver inputs.

use std::path::{Path, PathBuf};

use enclosure::fdtd::{max_wave_speed, pec_wall_clearance, Boundary, GridSpec, DEFAULT_CFL, DEFAULT_SUBSAMPLES};
use enclosure::indicator::FitModel;
use enclosure::model::{dist_d_b, BackgroundMedium, ObstacleSpec, Shape};
use enclosure::source::{PulseSpec, SourceSpec};
use enclosure::Vec3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Mode {
    /// Total-field run with the obstacle plus a background run.
    TotalPair,
    /// Background run with a stored footprint, then a scattered-field run.
    Scattered,
    /// Total-field run only, compared against the closed-form background.
    AnalyticTilde,
}

impl Default for Mode {
    fn default() -> Self {
        Mode::Scattered
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleConfig {
    pub shape: Shape,
    pub eps_r: f64,
    #[serde(default = "one")]
    pub mu_r: f64,
    /// Conductivity excess over the background.
    #[serde(default)]
    pub sigma: f64,
}

fn one() -> f64 {
    1.0
}

impl ObstacleConfig {
    pub fn spec(&self) -> ObstacleSpec {
        ObstacleSpec::homogeneous(self.shape.clone(), self.eps_r, self.mu_r, self.sigma)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(default = "Vec3::zeros")]
    pub p: Vec3,
    pub eta: f64,
    pub t_final: f64,
    #[serde(default)]
    pub pulse: PulseSpec,
    /// One or two polarizations; normalized on load.
    pub directions: Vec<Vec3>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    /// Derived from the causality margin when absent.
    pub half_width: Option<f64>,
    /// Source centre when absent.
    pub center: Option<Vec3>,
    #[serde(default = "pec")]
    pub boundary: Boundary,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_subsamples")]
    pub subsamples: usize,
}

fn pec() -> Boundary {
    Boundary::Pec
}

fn default_cfl() -> f64 {
    DEFAULT_CFL
}

fn default_subsamples() -> usize {
    DEFAULT_SUBSAMPLES
}

/// τ grid: explicit bounds, or bounds picked from a pilot fit when absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauGridConfig {
    pub min: Option<f64>,
    pub max: Option<f64>,
    #[serde(default = "default_tau_count")]
    pub count: usize,
}

fn default_tau_count() -> usize {
    16
}

impl Default for TauGridConfig {
    fn default() -> Self {
        Self {
            min: None,
            max: None,
            count: default_tau_count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractConfig {
    #[serde(default = "default_fit")]
    pub fit: FitModel,
}

fn default_fit() -> FitModel {
    FitModel::Prefactor
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self { fit: default_fit() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "one_thread")]
    pub threads: usize,
    #[serde(default)]
    pub medium: BackgroundMedium,
    pub obstacle: Option<ObstacleConfig>,
    pub source: SourceConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub tau_grid: TauGridConfig,
    #[serde(default)]
    pub extract: ExtractConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn one_thread() -> usize {
    1
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub mode: Option<Mode>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub tau_min: Option<f64>,
    pub tau_max: Option<f64>,
    pub tau_count: Option<usize>,
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        for a in &mut cfg.source.directions {
            let n = a.norm();
            if !(n > 0.0 && n.is_finite()) {
                return Err(CliError::Config("polarization directions must be nonzero".into()));
            }
            *a /= n;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.out {
            self.output_dir = v.clone();
        }
        if let Some(v) = o.mode {
            self.mode = v;
        }
        if let Some(v) = o.threads {
            self.threads = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.tau_min {
            self.tau_grid.min = Some(v);
        }
        if let Some(v) = o.tau_max {
            self.tau_grid.max = Some(v);
        }
        if let Some(v) = o.tau_count {
            self.tau_grid.count = v;
        }
    }

    pub fn obstacle_spec(&self) -> Option<ObstacleSpec> {
        self.obstacle.as_ref().map(ObstacleConfig::spec)
    }

    /// Source for direction `j`, with `T` snapped to the time grid.
    pub fn source_spec(&self, j: usize, grid: &GridSpec) -> SourceSpec {
        SourceSpec {
            p: self.source.p,
            eta: self.source.eta,
            a: self.source.directions[j],
            pulse: self.source.pulse.clone(),
            t_final: grid.t_final(),
        }
    }

    /// Resolved staggered grid.
    pub fn grid_spec(&self) -> Result<GridSpec> {
        let g = &self.grid;
        let center = g.center.unwrap_or(self.source.p);
        let obstacle = self.obstacle_spec();
        let c_max = max_wave_speed(&self.medium, obstacle.as_ref());
        let half = match g.half_width {
            Some(w) => w,
            None => {
                let reach = |x: &Vec3| (x - center).amax();
                let ball = reach(&self.source.p) + self.source.eta;
                let ball_need = match g.boundary {
                    Boundary::Pec => ball + pec_wall_clearance(&self.medium, obstacle.as_ref(), self.source.t_final),
                    Boundary::Mur => ball + 0.25,
                };
                let body_need = obstacle.as_ref().map_or(0.0, |o| {
                    let (lo, hi) = o.shape.bounding_box();
                    reach(&lo).max(reach(&hi))
                });
                ball_need.max(body_need) + 3.0 * g.h
            }
        };
        Ok(GridSpec::cube(center, half, g.h, self.source.t_final, g.cfl, c_max, g.boundary)?)
    }

    /// Checks every cross-module precondition before any compute.
    pub fn validate(&self) -> Result<()> {
        self.medium.validate()?;
        let n = self.source.directions.len();
        if !(1..=2).contains(&n) {
            return Err(CliError::Config(format!("expected one or two directions, got {n}")));
        }
        if n == 2 {
            let (a, b) = (self.source.directions[0], self.source.directions[1]);
            if a.cross(&b).norm() <= 1e-8 {
                return Err(CliError::Config("the two directions are linearly dependent".into()));
            }
        }
        if self.threads == 0 {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        if self.tau_grid.count < 2 {
            return Err(CliError::Config("τ grid needs at least two points".into()));
        }
        if let Some(o) = &self.obstacle {
            o.shape.validate()?;
            dist_d_b(&o.shape, &self.source.p, self.source.eta)?;
            o.spec().validate(&self.medium)?;
        }
        let grid = self.grid_spec()?;
        grid.check_cfl(max_wave_speed(&self.medium, self.obstacle_spec().as_ref()))?;
        self.source_spec(0, &grid).validate()?;
        Ok(())
    }

    /// Hash of everything that determines the traces.
    pub fn fingerprint(&self) -> String {
        let v = serde_json::json!({
            "medium": self.medium,
            "obstacle": self.obstacle,
            "source": self.source,
            "grid": self.grid,
            "mode": self.mode,
            "seed": self.seed,
        });
        sha256_hex(v.to_string().as_bytes())
    }

    /// Ground-truth `dist(D, B)` when an obstacle is configured.
    pub fn true_distance(&self) -> Option<f64> {
        self.obstacle
            .as_ref()
            .and_then(|o| dist_d_b(&o.shape, &self.source.p, self.source.eta).ok())
    }
}
