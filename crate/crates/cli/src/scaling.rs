//! `scaling`: energy integrals over the obstacle on a τ grid, with the fit.

use std::io::Write;

use enclosure::asymptotics::{scaling_report, Quantity, ScalingReport};

use crate::artifacts::{create, create_dir, write_json};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::indicate::log_grid;
use crate::schema;

/// τ range used when the config gives none.
pub const DEFAULT_SCALING_TAU: [f64; 2] = [10.0, 40.0];

pub fn scaling(cfg: &ExperimentConfig, quantity: Quantity) -> Result<ScalingReport> {
    cfg.validate()?;
    let obstacle = cfg
        .obstacle_spec()
        .ok_or_else(|| CliError::Config("scaling needs an [obstacle] section".into()))?;
    let src = cfg.source_spec(0, &cfg.grid_spec()?);
    let lo = cfg.tau_grid.min.unwrap_or(DEFAULT_SCALING_TAU[0]);
    let hi = cfg.tau_grid.max.unwrap_or(DEFAULT_SCALING_TAU[1]);
    let report = scaling_report(quantity, &obstacle, &src, &cfg.medium, &log_grid(lo, hi, cfg.tau_grid.count))?;
    let out = &cfg.output_dir;
    create_dir(out)?;
    let path = out.join(format!("scaling_{}.csv", quantity.name()));
    let mut w = create(&path)?;
    report.write_csv(&mut w)?;
    w.flush().map_err(|e| CliError::io(&path, e))?;
    write_json(&out.join(format!("scaling_{}.json", quantity.name())), &report)?;
    schema::write(out)?;
    Ok(report)
}
