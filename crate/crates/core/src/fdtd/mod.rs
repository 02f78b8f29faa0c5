//! Staggered-grid (Yee) time-domain solver for the Maxwell system with
//! conductivity, in total-field and scattered-field form.

mod grid;
pub mod io;
mod material;
mod run;
mod solver;

pub use grid::{Boundary, GridSpec, DEFAULT_CFL, E_OFFSET, H_OFFSET};
pub use material::{
    ball_quadrature, ball_source_sites, e_coefficients, max_wave_speed, trilinear_stencil,
    BackgroundCoefficients, ESite, HSite, MaterialMap, SourceSite, Stencil, DEFAULT_SUBSAMPLES,
};
pub use run::{
    pec_wall_clearance, run_background_with_store, run_scattered, run_simulation, BackgroundStore, RunOptions,
    RunOutput, TraceMode, TraceRecord,
};
pub use solver::{discrete_energy, FieldState, Simulation};
