//! Binary field snapshots and trace files (little-endian).

use std::io::{Read, Write};

use super::grid::{Boundary, GridSpec};
use super::run::{BackgroundStore, TraceMode, TraceRecord};
use super::solver::FieldState;
use crate::error::{Error, Result};
use crate::Vec3;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"EMSNAP1\0";
pub const TRACE_MAGIC: &[u8; 8] = b"EMTRACE1";
pub const STORE_MAGIC: &[u8; 8] = b"EMSTORE1";

fn put_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(get_u64(r)?))
}

fn put_f64s<W: Write>(w: &mut W, v: &[f64]) -> Result<()> {
    put_u64(w, v.len() as u64)?;
    let mut buf = Vec::with_capacity(8 * v.len());
    for x in v {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn get_f64s<R: Read>(r: &mut R) -> Result<Vec<f64>> {
    let n = get_u64(r)? as usize;
    let mut buf = vec![0u8; 8 * n];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of eight bytes")))
        .collect())
}

fn put_sites<W: Write>(w: &mut W, sites: &[(u8, usize)]) -> Result<()> {
    put_u64(w, sites.len() as u64)?;
    for (c, i) in sites {
        put_u64(w, *c as u64)?;
        put_u64(w, *i as u64)?;
    }
    Ok(())
}

fn get_sites<R: Read>(r: &mut R) -> Result<Vec<(u8, usize)>> {
    let n = get_u64(r)? as usize;
    (0..n)
        .map(|_| {
            let c = get_u64(r)?;
            if c > 2 {
                return Err(Error::Io("bad component in store".into()));
            }
            Ok((c as u8, get_u64(r)? as usize))
        })
        .collect()
}

/// Background volume store: grid header, site lists, then the `E₀` and `H₀`
/// series.
pub fn write_store<W: Write>(mut w: W, store: &BackgroundStore) -> Result<()> {
    let g = &store.grid;
    w.write_all(STORE_MAGIC)?;
    put_f64(&mut w, g.h)?;
    for c in 0..3 {
        put_f64(&mut w, g.lo[c])?;
    }
    for c in 0..3 {
        put_u64(&mut w, g.n[c] as u64)?;
    }
    put_f64(&mut w, g.dt)?;
    put_u64(&mut w, g.n_steps as u64)?;
    put_u64(&mut w, matches!(g.boundary, Boundary::Mur) as u64)?;
    put_sites(&mut w, &store.e_sites)?;
    put_sites(&mut w, &store.h_sites)?;
    put_f64s(&mut w, &store.e_series)?;
    put_f64s(&mut w, &store.h_series)?;
    Ok(())
}

pub fn read_store<R: Read>(mut r: R) -> Result<BackgroundStore> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != STORE_MAGIC {
        return Err(Error::Io("not a background store file".into()));
    }
    let h = get_f64(&mut r)?;
    let lo = Vec3::new(get_f64(&mut r)?, get_f64(&mut r)?, get_f64(&mut r)?);
    let n = [
        get_u64(&mut r)? as usize,
        get_u64(&mut r)? as usize,
        get_u64(&mut r)? as usize,
    ];
    let dt = get_f64(&mut r)?;
    let n_steps = get_u64(&mut r)? as usize;
    let boundary = if get_u64(&mut r)? == 1 { Boundary::Mur } else { Boundary::Pec };
    let e_sites = get_sites(&mut r)?;
    let h_sites = get_sites(&mut r)?;
    let e_series = get_f64s(&mut r)?;
    let h_series = get_f64s(&mut r)?;
    let steps = n_steps + 1;
    if e_series.len() != e_sites.len() * steps || h_series.len() != h_sites.len() * steps {
        return Err(Error::Io("store series length does not match its sites".into()));
    }
    Ok(BackgroundStore {
        grid: GridSpec {
            h,
            lo,
            n,
            dt,
            n_steps,
            boundary,
        },
        e_sites,
        h_sites,
        e_series,
        h_series,
    })
}

/// Header (magic, dims, h, t) then Ex, Ey, Ez, Hx, Hy, Hz in x-fastest order.
pub fn write_snapshot<W: Write>(mut w: W, grid: &GridSpec, state: &FieldState) -> Result<()> {
    w.write_all(SNAPSHOT_MAGIC)?;
    for n in grid.n {
        put_u64(&mut w, n as u64 + 1)?;
    }
    put_f64(&mut w, grid.h)?;
    put_f64(&mut w, state.t)?;
    for a in state.e.iter().chain(state.h.iter()) {
        for v in a {
            put_f64(&mut w, *v)?;
        }
    }
    Ok(())
}

/// Returns node dims, h, t and the six component arrays.
pub fn read_snapshot<R: Read>(mut r: R) -> Result<([usize; 3], f64, f64, [Vec<f64>; 6])> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Io("not a field snapshot".into()));
    }
    let dims = [get_u64(&mut r)? as usize, get_u64(&mut r)? as usize, get_u64(&mut r)? as usize];
    let h = get_f64(&mut r)?;
    let t = get_f64(&mut r)?;
    let n = dims.iter().product::<usize>();
    let mut arrays: [Vec<f64>; 6] = Default::default();
    for a in arrays.iter_mut() {
        *a = (0..n).map(|_| get_f64(&mut r)).collect::<Result<_>>()?;
    }
    Ok((dims, h, t, arrays))
}

/// Header (magic, n_points, n_steps, dt, mode), the `(step, point,
/// component)` samples, then the quadrature points and weights.
pub fn write_trace<W: Write>(mut w: W, trace: &TraceRecord) -> Result<()> {
    w.write_all(TRACE_MAGIC)?;
    put_u64(&mut w, trace.points.len() as u64)?;
    put_u64(&mut w, trace.n_steps as u64)?;
    put_f64(&mut w, trace.dt)?;
    put_u64(&mut w, trace.mode.code() as u64)?;
    for v in &trace.series {
        put_f64(&mut w, *v)?;
    }
    for (p, wt) in trace.points.iter().zip(&trace.weights) {
        for c in 0..3 {
            put_f64(&mut w, p[c])?;
        }
        put_f64(&mut w, *wt)?;
    }
    Ok(())
}

pub fn read_trace<R: Read>(mut r: R) -> Result<TraceRecord> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != TRACE_MAGIC {
        return Err(Error::Io("not a trace file".into()));
    }
    let np = get_u64(&mut r)? as usize;
    let n_steps = get_u64(&mut r)? as usize;
    let dt = get_f64(&mut r)?;
    let mode = TraceMode::from_code(get_u64(&mut r)? as u32)
        .ok_or_else(|| Error::Io("unknown trace mode".into()))?;
    let series = (0..np * 3 * (n_steps + 1))
        .map(|_| get_f64(&mut r))
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::with_capacity(np);
    let mut weights = Vec::with_capacity(np);
    for _ in 0..np {
        points.push(Vec3::new(get_f64(&mut r)?, get_f64(&mut r)?, get_f64(&mut r)?));
        weights.push(get_f64(&mut r)?);
    }
    Ok(TraceRecord {
        mode,
        points,
        weights,
        dt,
        n_steps,
        series,
        probes: Vec::new(),
        probe_series: Vec::new(),
    })
}
