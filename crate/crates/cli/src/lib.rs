//! Experiment driver: configuration, forward runs, indicator curves,
//! distance extraction and verification reports.
//!
//! Exit codes: 0 success, 1 other failure, 2 geometry, 3 stale inputs,
//! 4 no decay, 5 numerical accuracy or failed verification.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod extract;
pub mod indicate;
pub mod reflector;
pub mod scaling;
pub mod schema;
pub mod simulate;
pub mod verify;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use enclosure::asymptotics::Quantity;
use enclosure::indicator::FitModel;

pub use config::{ExperimentConfig, Mode, Overrides};
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "em-enclosure", version, about = "Enclosure-method experiments for the Maxwell system")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub tau_min: Option<f64>,
    #[arg(long)]
    pub tau_max: Option<f64>,
    #[arg(long)]
    pub tau_count: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Common {
    pub fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        cfg.apply(&Overrides {
            out: self.out.clone(),
            mode: self.mode,
            threads: self.threads,
            seed: self.seed,
            tau_min: self.tau_min,
            tau_max: self.tau_max,
            tau_count: self.tau_count,
        });
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum FitArg {
    Exponential,
    Prefactor,
}

impl From<FitArg> for FitModel {
    fn from(f: FitArg) -> Self {
        match f {
            FitArg::Exponential => FitModel::Exponential,
            FitArg::Prefactor => FitModel::Prefactor,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum QuantityArg {
    #[value(name = "J_full")]
    JFull,
    #[value(name = "J_perp")]
    JPerp,
    #[value(name = "upper_combo")]
    UpperCombo,
    #[value(name = "lower_combo")]
    LowerCombo,
}

impl From<QuantityArg> for Quantity {
    fn from(q: QuantityArg) -> Self {
        match q {
            QuantityArg::JFull => Quantity::JFull,
            QuantityArg::JPerp => Quantity::JPerp,
            QuantityArg::UpperCombo => Quantity::UpperCombo,
            QuantityArg::LowerCombo => Quantity::LowerCombo,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the forward solver and write traces plus a manifest.
    Simulate(Common),
    /// Build indicator curves from the traces in the output directory.
    Indicator(Common),
    /// Fit the distance and read the sign class off one curve.
    Extract {
        #[command(flatten)]
        common: Common,
        /// Curve CSV (`-` for standard input); defaults to the output directory's main curve.
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long, value_enum)]
        fit: Option<FitArg>,
    },
    /// Check analytic identities and asymptotic invariants.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true, default_value_t = 0.0)]
        perturb_interior_phi: f64,
    },
    /// Energy integrals over the obstacle against τ, with the fitted rates.
    Scaling {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "J_full")]
        quantity: QuantityArg,
    },
    /// Nearest boundary points, curvatures and the material class.
    Reflector(Common),
}

fn print_json<T: serde::Serialize>(v: &T) {
    if let Ok(s) = serde_json::to_string_pretty(v) {
        println!("{s}");
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => {
            let m = simulate::simulate(&c.load()?)?;
            for (role, f) in &m.files {
                println!("{role}\t{}", f.path.display());
            }
        }
        Command::Indicator(c) => {
            for p in indicate::indicator(&c.load()?)? {
                println!("{}", p.display());
            }
        }
        Command::Extract { common, curve, fit } => {
            let r = extract::extract(&common.load()?, curve.as_deref(), fit.map(Into::into))?;
            print_json(&r);
        }
        Command::Verify {
            common,
            perturb_interior_phi,
        } => {
            let opts = verify::VerifyOptions {
                interior_phi_scale: perturb_interior_phi,
            };
            let r = verify::verify(&common.load()?, &opts);
            match &r {
                Ok(rep) => rep.checks.iter().for_each(|c| println!("PASS {} ({:e})", c.name, c.metric)),
                Err(CliError::VerifyFailed(_)) => {
                    let path = common.load()?.output_dir.join(verify::REPORT);
                    eprintln!("see {}", path.display());
                }
                Err(_) => {}
            }
            r?;
        }
        Command::Scaling { common, quantity } => {
            let r = scaling::scaling(&common.load()?, quantity.into())?;
            println!(
                "rate {:.6} (expected {:.6}), power {:.4}",
                r.fitted_exponential_rate, r.expected_rate, r.fitted_polynomial_power
            );
        }
        Command::Reflector(c) => print_json(&reflector::reflector(&c.load()?)?),
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
