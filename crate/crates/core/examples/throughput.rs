use std::time::Instant;

use enclosure::fdtd::{ball_source_sites, Boundary, GridSpec, MaterialMap, Simulation};
use enclosure::model::BackgroundMedium;
use enclosure::Vec3;

fn main() {
    let h: f64 = std::env::args().nth(1).map_or(1.0 / 40.0, |s| 1.0 / s.parse::<f64>().unwrap());
    let half: f64 = std::env::args().nth(2).map_or(1.0, |s| s.parse().unwrap());
    let bg = BackgroundMedium::default();
    let g = GridSpec::cube(Vec3::zeros(), half, h, 1.0, 0.5, 1.0, Boundary::Pec).unwrap();
    let src = ball_source_sites(&g, &Vec3::zeros(), 0.05, 8);
    let mut sim = Simulation::new(g.clone(), MaterialMap::empty(&bg, &g), &src, &Vec3::y(), 1).unwrap();
    let steps = 50;
    let t0 = Instant::now();
    for n in 0..steps {
        sim.step((n as f64 + 0.5) * g.dt).unwrap();
    }
    let secs = t0.elapsed().as_secs_f64();
    let cells = g.len() as f64;
    println!("cells {cells:.3e}, {:.1} M cell-steps/s", cells * steps as f64 / secs / 1e6);
}
