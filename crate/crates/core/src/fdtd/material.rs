//! Discretization of the obstacle, the source ball and the receiver
//! quadrature onto the staggered grid.

use super::grid::{GridSpec, E_OFFSET, H_OFFSET};
use crate::model::{BackgroundMedium, ObstacleSpec};
use crate::Vec3;

/// Default subsamples per axis for partial cells.
pub const DEFAULT_SUBSAMPLES: usize = 8;

/// Update coefficients of the background medium.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BackgroundCoefficients {
    pub eps: f64,
    pub mu: f64,
    pub sigma: f64,
    pub ca: f64,
    pub cb: f64,
    pub db: f64,
}

/// Semi-implicit conductive update factors
/// `ca = (1 − σΔt/2ε)/(1 + σΔt/2ε)`, `cb = Δt/ε/(1 + σΔt/2ε)`.
pub fn e_coefficients(eps: f64, sigma: f64, dt: f64) -> (f64, f64) {
    let r = sigma * dt / (2.0 * eps);
    ((1.0 - r) / (1.0 + r), dt / eps / (1.0 + r))
}

impl BackgroundCoefficients {
    pub fn new(bg: &BackgroundMedium, dt: f64) -> Self {
        let (ca, cb) = e_coefficients(bg.eps0, bg.sigma0, dt);
        Self {
            eps: bg.eps0,
            mu: bg.mu0,
            sigma: bg.sigma0,
            ca,
            cb,
            db: dt / bg.mu0,
        }
    }
}

/// Electric site whose averaged material differs (or may differ) from the
/// background.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ESite {
    pub comp: u8,
    pub idx: usize,
    pub eps: f64,
    pub sigma: f64,
    pub ca: f64,
    pub cb: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HSite {
    pub comp: u8,
    pub idx: usize,
    pub mu: f64,
    pub db: f64,
}

impl ESite {
    pub fn differs(&self, bg: &BackgroundCoefficients) -> bool {
        self.ca != bg.ca || self.cb != bg.cb
    }
}

impl HSite {
    pub fn differs(&self, bg: &BackgroundCoefficients) -> bool {
        self.db != bg.db
    }
}

/// Obstacle footprint: every staggered site whose dual cell may meet `D`,
/// with volume-averaged coefficients. The site list depends on the geometry
/// only, so runs with different contrasts share it.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialMap {
    pub bg: BackgroundCoefficients,
    pub e_sites: Vec<ESite>,
    pub h_sites: Vec<HSite>,
}

fn cube_subsamples(center: &Vec3, h: f64, s: usize) -> impl Iterator<Item = Vec3> + '_ {
    let step = h / s as f64;
    let base = center - Vec3::repeat(0.5 * h - 0.5 * step);
    (0..s * s * s).map(move |m| {
        let (a, b, c) = (m % s, (m / s) % s, m / (s * s));
        base + Vec3::new(a as f64, b as f64, c as f64) * step
    })
}

impl MaterialMap {
    /// Background-only map (no footprint).
    pub fn empty(bg: &BackgroundMedium, grid: &GridSpec) -> Self {
        Self {
            bg: BackgroundCoefficients::new(bg, grid.dt),
            e_sites: Vec::new(),
            h_sites: Vec::new(),
        }
    }

    /// Samples `obstacle` onto the grid. Sites whose dual cell lies entirely
    /// inside `D` take point values; cells cut by `∂D` are averaged over
    /// `subsamples³` points (arithmetic means of ε, σ and μ).
    pub fn new(
        bg: &BackgroundMedium,
        obstacle: &ObstacleSpec,
        grid: &GridSpec,
        subsamples: usize,
    ) -> Self {
        let coef = BackgroundCoefficients::new(bg, grid.dt);
        let shape = &obstacle.shape;
        let (blo, bhi) = shape.bounding_box();
        let h = grid.h;
        let reach = h; // > half cell diagonal
        let s = subsamples.max(1);
        let mut e_sites = Vec::new();
        let mut h_sites = Vec::new();
        for (is_e, offsets) in [(true, &E_OFFSET), (false, &H_OFFSET)] {
            for (comp, off) in offsets.iter().enumerate() {
                let (i0, i1) = grid.index_range(blo.x - reach, bhi.x + reach, 0, off[0]);
                let (j0, j1) = grid.index_range(blo.y - reach, bhi.y + reach, 1, off[1]);
                let (k0, k1) = grid.index_range(blo.z - reach, bhi.z + reach, 2, off[2]);
                for k in k0..=k1 {
                    for j in j0..=j1 {
                        for i in i0..=i1 {
                            let x = grid.position(off, i, j, k);
                            let sd = shape.signed_distance(&x);
                            if sd >= reach {
                                continue;
                            }
                            let sample = |y: &Vec3| -> (f64, f64, f64) {
                                if shape.contains(y) {
                                    (
                                        bg.eps0 * obstacle.eps_r(y),
                                        obstacle.sigma(bg, y),
                                        bg.mu0 * obstacle.mu_r(y),
                                    )
                                } else {
                                    (bg.eps0, bg.sigma0, bg.mu0)
                                }
                            };
                            let (eps, sigma, mu) = if sd <= -reach {
                                sample(&x)
                            } else {
                                let n = (s * s * s) as f64;
                                let mut acc = (0.0, 0.0, 0.0);
                                for y in cube_subsamples(&x, h, s) {
                                    let v = sample(&y);
                                    acc.0 += v.0;
                                    acc.1 += v.1;
                                    acc.2 += v.2;
                                }
                                (acc.0 / n, acc.1 / n, acc.2 / n)
                            };
                            let idx = grid.index(i, j, k);
                            if is_e {
                                let (ca, cb) = e_coefficients(eps, sigma, grid.dt);
                                e_sites.push(ESite {
                                    comp: comp as u8,
                                    idx,
                                    eps,
                                    sigma,
                                    ca,
                                    cb,
                                });
                            } else {
                                h_sites.push(HSite {
                                    comp: comp as u8,
                                    idx,
                                    mu,
                                    db: grid.dt / mu,
                                });
                            }
                        }
                    }
                }
            }
        }
        Self {
            bg: coef,
            e_sites,
            h_sites,
        }
    }

    /// Largest wave speed present, `1/√(min ε · min μ)`.
    pub fn c_max(&self) -> f64 {
        let emin = self.e_sites.iter().map(|s| s.eps).fold(self.bg.eps, f64::min);
        let mmin = self.h_sites.iter().map(|s| s.mu).fold(self.bg.mu, f64::min);
        1.0 / (emin * mmin).sqrt()
    }
}

/// Largest wave speed over background and obstacle values (sampled).
pub fn max_wave_speed(bg: &BackgroundMedium, obstacle: Option<&ObstacleSpec>) -> f64 {
    let mut emin = bg.eps0;
    let mut mmin = bg.mu0;
    if let Some(o) = obstacle {
        for x in o.interior_samples(if o.is_piecewise_constant() { 1 } else { 10_000 }) {
            emin = emin.min(bg.eps0 * o.eps_r(&x));
            mmin = mmin.min(bg.mu0 * o.mu_r(&x));
        }
    }
    1.0 / (emin * mmin).sqrt()
}

/// Electric site carrying part of the source current.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceSite {
    pub comp: u8,
    pub idx: usize,
    /// Fraction of the dual cell inside the ball.
    pub fraction: f64,
}

/// Fractions of dual cells of the E sites covered by the ball `B(p, η)`.
pub fn ball_source_sites(grid: &GridSpec, p: &Vec3, eta: f64, subsamples: usize) -> Vec<SourceSite> {
    let h = grid.h;
    let half_diag = 0.5 * 3f64.sqrt() * h;
    let s = subsamples.max(1);
    let mut out = Vec::new();
    for (comp, off) in E_OFFSET.iter().enumerate() {
        let (i0, i1) = grid.index_range(p.x - eta - h, p.x + eta + h, 0, off[0]);
        let (j0, j1) = grid.index_range(p.y - eta - h, p.y + eta + h, 1, off[1]);
        let (k0, k1) = grid.index_range(p.z - eta - h, p.z + eta + h, 2, off[2]);
        for k in k0..=k1 {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let x = grid.position(off, i, j, k);
                    let r = (x - p).norm();
                    let fraction = if r + half_diag <= eta {
                        1.0
                    } else if r - half_diag >= eta {
                        0.0
                    } else {
                        let inside = cube_subsamples(&x, h, s)
                            .filter(|y| (y - p).norm() < eta)
                            .count();
                        inside as f64 / (s * s * s) as f64
                    };
                    if fraction > 0.0 {
                        out.push(SourceSite {
                            comp: comp as u8,
                            idx: grid.index(i, j, k),
                            fraction,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Trilinear interpolation stencil of one E component at a point.
pub type Stencil = [(usize, f64); 8];

pub fn trilinear_stencil(grid: &GridSpec, comp: usize, x: &Vec3) -> Stencil {
    let off = E_OFFSET[comp];
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        let u = (x[a] - grid.lo[a]) / grid.h - off[a];
        let i = u.floor().clamp(0.0, (grid.n[a] - 1) as f64);
        base[a] = i as usize;
        frac[a] = u - i;
    }
    let mut st = [(0usize, 0.0); 8];
    for (m, slot) in st.iter_mut().enumerate() {
        let (a, b, c) = (m & 1, (m >> 1) & 1, (m >> 2) & 1);
        let w = (if a == 1 { frac[0] } else { 1.0 - frac[0] })
            * (if b == 1 { frac[1] } else { 1.0 - frac[1] })
            * (if c == 1 { frac[2] } else { 1.0 - frac[2] });
        *slot = (grid.index(base[0] + a, base[1] + b, base[2] + c), w);
    }
    st
}

/// Receiver quadrature over the ball: one point per cell meeting `B`, placed
/// at the centroid of the cell's part inside `B`, weighted by that part's
/// volume. Weights are rescaled so they sum to `4πη³/3` exactly.
pub fn ball_quadrature(grid: &GridSpec, p: &Vec3, eta: f64, subsamples: usize) -> (Vec<Vec3>, Vec<f64>) {
    let h = grid.h;
    let s = subsamples.max(1);
    let c = [0.5, 0.5, 0.5];
    let (i0, i1) = grid.index_range(p.x - eta - h, p.x + eta + h, 0, 0.5);
    let (j0, j1) = grid.index_range(p.y - eta - h, p.y + eta + h, 1, 0.5);
    let (k0, k1) = grid.index_range(p.z - eta - h, p.z + eta + h, 2, 0.5);
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for k in k0..=k1 {
        for j in j0..=j1 {
            for i in i0..=i1 {
                let x = grid.position(&c, i, j, k);
                let mut n_in = 0usize;
                let mut centroid = Vec3::zeros();
                for y in cube_subsamples(&x, h, s) {
                    if (y - p).norm() < eta {
                        n_in += 1;
                        centroid += y;
                    }
                }
                if n_in > 0 {
                    pts.push(centroid / n_in as f64);
                    wts.push(h.powi(3) * n_in as f64 / (s * s * s) as f64);
                }
            }
        }
    }
    let vol = 4.0 / 3.0 * std::f64::consts::PI * eta.powi(3);
    let total: f64 = wts.iter().sum();
    for w in &mut wts {
        *w *= vol / total;
    }
    (pts, wts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdtd::grid::Boundary;
    use crate::model::Shape;

    fn grid() -> GridSpec {
        GridSpec::cube(Vec3::zeros(), 0.5, 1.0 / 40.0, 1.0, 0.5, 1.0, Boundary::Pec).unwrap()
    }

    #[test]
    fn conductive_factors_reduce_to_scalar_ode() {
        // E' = −(σ/ε)E: one step multiplies by ca
        let (ca, cb) = e_coefficients(2.0, 3.0, 0.1);
        assert!((ca - (1.0 - 0.075) / (1.0 + 0.075)).abs() < 1e-15);
        assert!((cb - 0.05 / 1.075).abs() < 1e-15);
        let (ca, cb) = e_coefficients(1.0, 0.0, 0.1);
        assert_eq!((ca, cb), (1.0, 0.1));
    }

    #[test]
    fn ball_quadrature_volume_and_interior() {
        let g = grid();
        let p = Vec3::new(0.013, -0.02, 0.007);
        let (pts, w) = ball_quadrature(&g, &p, 0.05, 8);
        let vol = 4.0 / 3.0 * std::f64::consts::PI * 0.05f64.powi(3);
        assert!((w.iter().sum::<f64>() - vol).abs() < 1e-6 * vol);
        assert!(pts.iter().all(|x| (x - p).norm() < 0.05));
        // the raw overlap volume is already close to exact
        let raw: f64 = {
            let (_, w) = ball_quadrature(&g, &p, 0.05, 16);
            w.iter().sum()
        };
        assert!((raw - vol).abs() < 1e-6 * vol);
    }

    #[test]
    fn source_fractions_cover_ball_volume() {
        let g = grid();
        let p = Vec3::new(0.0, 0.01, 0.0);
        let sites = ball_source_sites(&g, &p, 0.1, 8);
        let vol = 4.0 / 3.0 * std::f64::consts::PI * 0.001;
        for comp in 0..3u8 {
            let v: f64 = sites.iter().filter(|s| s.comp == comp).map(|s| s.fraction).sum::<f64>()
                * g.h.powi(3);
            assert!((v - vol).abs() < 0.01 * vol, "comp {comp}: {v} vs {vol}");
        }
    }

    #[test]
    fn trivial_obstacle_matches_background() {
        let g = grid();
        let bg = BackgroundMedium::default();
        let o = ObstacleSpec::homogeneous(Shape::sphere(Vec3::zeros(), 0.2), 1.0, 1.0, 0.0);
        let m = MaterialMap::new(&bg, &o, &g, 8);
        assert!(!m.e_sites.is_empty());
        assert!(m.e_sites.iter().all(|s| !s.differs(&m.bg)));
        assert!(m.h_sites.iter().all(|s| !s.differs(&m.bg)));
    }

    #[test]
    fn averaged_permittivity_between_values() {
        let g = grid();
        let bg = BackgroundMedium::default();
        let o = ObstacleSpec::homogeneous(Shape::sphere(Vec3::zeros(), 0.2), 3.0, 1.0, 0.0);
        let m = MaterialMap::new(&bg, &o, &g, 8);
        assert!(m.e_sites.iter().all(|s| s.eps >= 1.0 && s.eps <= 3.0));
        // total excess ≈ (ε − ε₀)·vol(D) per component
        let vol = 4.0 / 3.0 * std::f64::consts::PI * 0.008;
        let excess: f64 = m.e_sites.iter().filter(|s| s.comp == 0).map(|s| s.eps - 1.0).sum::<f64>()
            * g.h.powi(3);
        assert!((excess - 2.0 * vol).abs() < 0.01 * 2.0 * vol);
    }

    #[test]
    fn stencil_reproduces_linear_fields() {
        let g = grid();
        let x = Vec3::new(0.0123, -0.2, 0.31);
        for comp in 0..3 {
            let st = trilinear_stencil(&g, comp, &x);
            let v: f64 = st
                .iter()
                .map(|(idx, w)| {
                    let (i, j, k) = g.unindex(*idx);
                    let y = g.position(&E_OFFSET[comp], i, j, k);
                    w * (1.0 + 2.0 * y.x - y.y + 0.5 * y.z)
                })
                .sum();
            assert!((v - (1.0 + 2.0 * x.x - x.y + 0.5 * x.z)).abs() < 1e-12);
        }
    }
}
