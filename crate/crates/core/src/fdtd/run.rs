//! Whole runs: total-field, background (with volume store) and
//! scattered-field traces on the source ball.

use serde::{Deserialize, Serialize};

use super::grid::{Boundary, GridSpec};
use super::material::{
    ball_quadrature, ball_source_sites, max_wave_speed, trilinear_stencil, MaterialMap, Stencil,
    DEFAULT_SUBSAMPLES,
};
use super::solver::Simulation;
use crate::error::{Error, Result};
use crate::model::{BackgroundMedium, ObstacleSpec};
use crate::source::SourceSpec;
use crate::Vec3;

/// What a trace contains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    TotalWithObstacle,
    Background,
    Scattered,
}

impl TraceMode {
    pub fn code(self) -> u32 {
        match self {
            TraceMode::TotalWithObstacle => 0,
            TraceMode::Background => 1,
            TraceMode::Scattered => 2,
        }
    }

    pub fn from_code(c: u32) -> Option<Self> {
        match c {
            0 => Some(TraceMode::TotalWithObstacle),
            1 => Some(TraceMode::Background),
            2 => Some(TraceMode::Scattered),
            _ => None,
        }
    }
}

/// Electric field samples over `[0, T]` at `n_steps + 1` instants.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub mode: TraceMode,
    /// Quadrature points inside the source ball.
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub dt: f64,
    pub n_steps: usize,
    /// Row-major `(step, point, component)`.
    pub series: Vec<f64>,
    /// Extra receiver points (anywhere in the grid).
    pub probes: Vec<Vec3>,
    /// Row-major `(step, probe, component)`.
    pub probe_series: Vec<f64>,
}

impl TraceRecord {
    pub fn n_samples(&self) -> usize {
        self.n_steps + 1
    }

    pub fn t_final(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    /// Time series of component `c` at point `p`.
    pub fn point_series(&self, p: usize, c: usize) -> Vec<f64> {
        let np = self.points.len();
        (0..self.n_samples()).map(|n| self.series[(n * np + p) * 3 + c]).collect()
    }

    pub fn probe_component_series(&self, p: usize, c: usize) -> Vec<f64> {
        let np = self.probes.len();
        (0..self.n_samples()).map(|n| self.probe_series[(n * np + p) * 3 + c]).collect()
    }

    /// Time series of `Σ_points w·a·E`, the only combination the indicator
    /// needs.
    pub fn projected_series(&self, a: &Vec3) -> Vec<f64> {
        let np = self.points.len();
        (0..self.n_samples())
            .map(|n| {
                crate::numeric::compensated_sum((0..np).map(|p| {
                    let o = (n * np + p) * 3;
                    self.weights[p]
                        * (a.x * self.series[o] + a.y * self.series[o + 1] + a.z * self.series[o + 2])
                }))
            })
            .collect()
    }

    /// Largest absolute difference of the ball series.
    pub fn max_abs_diff(&self, other: &TraceRecord) -> f64 {
        self.series
            .iter()
            .zip(&other.series)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.series.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Elementwise sum with another trace on the same points (scattered plus
    /// background gives the total field).
    pub fn add(&self, other: &TraceRecord, mode: TraceMode) -> Result<TraceRecord> {
        if self.points != other.points || self.n_steps != other.n_steps || self.dt != other.dt {
            return Err(Error::Incompatible("traces differ in points or time grid".into()));
        }
        let mut out = self.clone();
        out.mode = mode;
        for (a, b) in out.series.iter_mut().zip(&other.series) {
            *a += b;
        }
        for (a, b) in out.probe_series.iter_mut().zip(&other.probe_series) {
            *a += b;
        }
        Ok(out)
    }
}

/// Background fields recorded at the obstacle footprint for every step:
/// `E₀^n` for `n = 0..=N` and `H₀^{n−½}` for `n = 0..=N` (the first is zero).
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundStore {
    pub grid: GridSpec,
    pub e_sites: Vec<(u8, usize)>,
    pub h_sites: Vec<(u8, usize)>,
    pub e_series: Vec<f64>,
    pub h_series: Vec<f64>,
}

impl BackgroundStore {
    pub fn e_at(&self, n: usize) -> &[f64] {
        let m = self.e_sites.len();
        &self.e_series[n * m..(n + 1) * m]
    }

    pub fn h_at(&self, n: usize) -> &[f64] {
        let m = self.h_sites.len();
        &self.h_series[n * m..(n + 1) * m]
    }

    pub fn bytes(&self) -> usize {
        8 * (self.e_series.len() + self.h_series.len())
    }
}

/// Options shared by all run entry points.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub threads: usize,
    pub probes: Vec<Vec3>,
    pub subsamples: usize,
    /// Record the staggered energy every step (costs a copy of H).
    pub track_energy: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            threads: 1,
            probes: Vec::new(),
            subsamples: DEFAULT_SUBSAMPLES,
            track_energy: false,
        }
    }
}

/// Trace plus optional diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub trace: TraceRecord,
    pub energy: Vec<f64>,
    pub store: Option<BackgroundStore>,
}

struct Recorder {
    ball: Vec<[Stencil; 3]>,
    probes: Vec<[Stencil; 3]>,
    series: Vec<f64>,
    probe_series: Vec<f64>,
}

impl Recorder {
    fn new(grid: &GridSpec, points: &[Vec3], probes: &[Vec3]) -> Self {
        let st = |x: &Vec3| [0, 1, 2].map(|c| trilinear_stencil(grid, c, x));
        Self {
            ball: points.iter().map(st).collect(),
            probes: probes.iter().map(st).collect(),
            series: Vec::with_capacity(3 * points.len() * (grid.n_steps + 1)),
            probe_series: Vec::with_capacity(3 * probes.len() * (grid.n_steps + 1)),
        }
    }

    fn record(&mut self, e: &[Vec<f64>; 3]) {
        let eval = |st: &Stencil, a: &[f64]| st.iter().map(|(i, w)| w * a[*i]).sum::<f64>();
        for s in &self.ball {
            for c in 0..3 {
                self.series.push(eval(&s[c], &e[c]));
            }
        }
        for s in &self.probes {
            for c in 0..3 {
                self.probe_series.push(eval(&s[c], &e[c]));
            }
        }
    }
}

/// Distance from the source ball to a PEC wall below which a wall echo can
/// reach the ball before `t_final`. A round trip of length `2L` spends at most
/// `2·diam(D)` inside a faster obstacle.
pub fn pec_wall_clearance(bg: &BackgroundMedium, obstacle: Option<&ObstacleSpec>, t_final: f64) -> f64 {
    let c0 = bg.wave_speed();
    let c = max_wave_speed(bg, obstacle);
    let shortcut = match obstacle {
        Some(o) if c > c0 => o.shape.diameter() * (1.0 - c0 / c),
        _ => 0.0,
    };
    0.5 * c0 * t_final + shortcut
}

fn check_geometry(
    bg: &BackgroundMedium,
    obstacle: Option<&ObstacleSpec>,
    source: &SourceSpec,
    grid: &GridSpec,
) -> Result<()> {
    bg.validate()?;
    source.validate()?;
    if (grid.t_final() - source.t_final).abs() > 1e-9 * source.t_final {
        return Err(Error::Configuration(format!(
            "grid covers T = {} but the source records T = {}",
            grid.t_final(),
            source.t_final
        )));
    }
    let ball_wall = grid.wall_distance(&source.p) - source.eta;
    if ball_wall < 2.0 * grid.h {
        return Err(Error::Configuration("source ball too close to the grid boundary".into()));
    }
    if let Some(o) = obstacle {
        o.validate(bg)?;
        crate::model::dist_d_b(&o.shape, &source.p, source.eta)?;
        let (lo, hi) = o.shape.bounding_box();
        if grid.wall_distance(&lo) < 2.0 * grid.h || grid.wall_distance(&hi) < 2.0 * grid.h {
            return Err(Error::Configuration("obstacle too close to the grid boundary".into()));
        }
    }
    if grid.boundary == Boundary::Pec {
        let need = pec_wall_clearance(bg, obstacle, grid.t_final()) + grid.h;
        if ball_wall < need {
            return Err(Error::Configuration(format!(
                "walls at distance {ball_wall:.4} from the source ball; reflections return within T \
                 unless the distance is at least {need:.4}"
            )));
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    materials: MaterialMap,
    footprint: Option<&MaterialMap>,
    source: &SourceSpec,
    grid: &GridSpec,
    opts: &RunOptions,
    mode: TraceMode,
    scattered_from: Option<&BackgroundStore>,
) -> Result<RunOutput> {
    if opts.track_energy && scattered_from.is_some() {
        return Err(Error::Configuration(
            "energy tracking is only available for source-driven runs".into(),
        ));
    }
    let (points, weights) = ball_quadrature(grid, &source.p, source.eta, opts.subsamples);
    let src_sites = if scattered_from.is_some() {
        Vec::new()
    } else {
        ball_source_sites(grid, &source.p, source.eta, opts.subsamples)
    };
    // scattered-field sources at the footprint
    let equivalent = scattered_from.map(|store| {
        let bgc = materials.bg;
        let e_map: std::collections::HashMap<(u8, usize), (f64, f64)> = materials
            .e_sites
            .iter()
            .map(|s| ((s.comp, s.idx), (s.ca, s.cb)))
            .collect();
        let h_map: std::collections::HashMap<(u8, usize), f64> =
            materials.h_sites.iter().map(|s| ((s.comp, s.idx), s.db)).collect();
        let e_coef: Vec<(usize, u8, usize, f64, f64)> = store
            .e_sites
            .iter()
            .enumerate()
            .filter_map(|(m, key)| {
                let (ca, cb) = *e_map.get(key)?;
                let r = cb / bgc.cb;
                let c_old = ca - r * bgc.ca;
                let c_new = r - 1.0;
                (c_old != 0.0 || c_new != 0.0).then_some((m, key.0, key.1, c_old, c_new))
            })
            .collect();
        let h_coef: Vec<(usize, u8, usize, f64)> = store
            .h_sites
            .iter()
            .enumerate()
            .filter_map(|(m, key)| {
                let db = *h_map.get(key)?;
                let c = db / bgc.db - 1.0;
                (c != 0.0).then_some((m, key.0, key.1, c))
            })
            .collect();
        (e_coef, h_coef)
    });
    let mut sim = Simulation::new(grid.clone(), materials, &src_sites, &source.a, opts.threads)?;
    let mut rec = Recorder::new(grid, &points, &opts.probes);
    let mut energy = Vec::new();
    let mut store = footprint.map(|fp| BackgroundStore {
        grid: grid.clone(),
        e_sites: fp.e_sites.iter().map(|s| (s.comp, s.idx)).collect(),
        h_sites: fp.h_sites.iter().map(|s| (s.comp, s.idx)).collect(),
        e_series: Vec::with_capacity(fp.e_sites.len() * (grid.n_steps + 1)),
        h_series: vec![0.0; fp.h_sites.len()],
    });
    let capture_e = |store: &mut Option<BackgroundStore>, sim: &Simulation| {
        if let Some(st) = store.as_mut() {
            for &(c, idx) in &st.e_sites {
                st.e_series.push(sim.state.e[c as usize][idx]);
            }
        }
    };
    rec.record(&sim.state.e);
    capture_e(&mut store, &sim);
    let mut h_extra = Vec::new();
    let mut e_extra = Vec::new();
    for n in 0..grid.n_steps {
        let f = if scattered_from.is_some() {
            0.0
        } else {
            source.pulse.eval((n as f64 + 0.5) * grid.dt)
        };
        if let (Some(bs), Some((e_coef, h_coef))) = (scattered_from, &equivalent) {
            h_extra.clear();
            e_extra.clear();
            let (h_old, h_new) = (bs.h_at(n), bs.h_at(n + 1));
            for &(m, c, idx, k) in h_coef {
                h_extra.push((c, idx, k * (h_new[m] - h_old[m])));
            }
            let (e_old, e_new) = (bs.e_at(n), bs.e_at(n + 1));
            for &(m, c, idx, c_old, c_new) in e_coef {
                e_extra.push((c, idx, c_old * e_old[m] + c_new * e_new[m]));
            }
        }
        if opts.track_energy {
            energy.push(sim.step_with_energy(f)?);
        } else {
            sim.step_with(f, &h_extra, &e_extra)?;
        }
        rec.record(&sim.state.e);
        capture_e(&mut store, &sim);
        if let Some(st) = store.as_mut() {
            for &(c, idx) in &st.h_sites {
                st.h_series.push(sim.state.h[c as usize][idx]);
            }
        }
    }
    sim.check_finite()?;
    if rec.series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Instability { step: grid.n_steps });
    }
    Ok(RunOutput {
        trace: TraceRecord {
            mode,
            points,
            weights,
            dt: grid.dt,
            n_steps: grid.n_steps,
            series: rec.series,
            probes: opts.probes.clone(),
            probe_series: rec.probe_series,
        },
        energy,
        store,
    })
}

/// Total-field run with the obstacle, or background run without it.
pub fn run_simulation(
    bg: &BackgroundMedium,
    obstacle: Option<&ObstacleSpec>,
    source: &SourceSpec,
    grid: &GridSpec,
    opts: &RunOptions,
) -> Result<RunOutput> {
    check_geometry(bg, obstacle, source, grid)?;
    let (materials, mode) = match obstacle {
        Some(o) => (
            MaterialMap::new(bg, o, grid, opts.subsamples),
            TraceMode::TotalWithObstacle,
        ),
        None => (MaterialMap::empty(bg, grid), TraceMode::Background),
    };
    simulate(materials, None, source, grid, opts, mode, None)
}

/// Background run that also stores `E₀`, `H₀` on the footprint of `obstacle`
/// for a later scattered-field run. Only the obstacle's geometry is used.
pub fn run_background_with_store(
    bg: &BackgroundMedium,
    obstacle: &ObstacleSpec,
    source: &SourceSpec,
    grid: &GridSpec,
    opts: &RunOptions,
) -> Result<RunOutput> {
    check_geometry(bg, Some(obstacle), source, grid)?;
    let footprint = MaterialMap::new(bg, obstacle, grid, opts.subsamples);
    simulate(
        MaterialMap::empty(bg, grid),
        Some(&footprint),
        source,
        grid,
        opts,
        TraceMode::Background,
        None,
    )
}

/// Evolves `E − E₀`, `H − H₀` directly. The equivalent sources are the exact
/// discrete difference between the obstacle and background updates, so
/// scattered plus background reproduces the total-field run up to round-off.
pub fn run_scattered(
    bg: &BackgroundMedium,
    obstacle: &ObstacleSpec,
    source: &SourceSpec,
    grid: &GridSpec,
    store: Option<&BackgroundStore>,
    opts: &RunOptions,
) -> Result<RunOutput> {
    let store = store.ok_or_else(|| {
        Error::Dependency("scattered-field run needs a stored background run".into())
    })?;
    check_geometry(bg, Some(obstacle), source, grid)?;
    if store.grid != *grid {
        return Err(Error::Incompatible("background store was computed on another grid".into()));
    }
    let materials = MaterialMap::new(bg, obstacle, grid, opts.subsamples);
    let sites: Vec<(u8, usize)> = materials.e_sites.iter().map(|s| (s.comp, s.idx)).collect();
    let hs: Vec<(u8, usize)> = materials.h_sites.iter().map(|s| (s.comp, s.idx)).collect();
    if sites != store.e_sites || hs != store.h_sites {
        return Err(Error::Incompatible(
            "background store footprint does not match the obstacle geometry".into(),
        ));
    }
    simulate(materials, None, source, grid, opts, TraceMode::Scattered, Some(store))
}
