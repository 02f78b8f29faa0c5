//! `simulate`: forward runs for every configured polarization.

use std::path::Path;

use enclosure::fdtd::{
    run_background_with_store, run_scattered, run_simulation, BackgroundStore, GridSpec, RunOptions, TraceRecord,
};
use enclosure::source::SourceSpec;
use serde_json::json;

use crate::artifacts::{create_dir, load_store, load_trace, save_atomic, save_store, save_trace, Manifest, RunCache};
use crate::config::{ExperimentConfig, Mode};
use crate::error::Result;
use crate::schema;

pub fn trace_name(kind: &str, j: usize) -> String {
    format!("{kind}_d{j}.emtrace")
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    grid: GridSpec,
    cache: RunCache,
    opts: RunOptions,
}

impl Runner<'_> {
    fn base_key(&self, src: &SourceSpec) -> serde_json::Value {
        json!({
            "medium": self.cfg.medium,
            "source": src,
            "grid": self.grid,
            "subsamples": self.opts.subsamples,
        })
    }

    fn with(&self, src: &SourceSpec, extra: serde_json::Value) -> serde_json::Value {
        let mut k = self.base_key(src);
        k["extra"] = extra;
        k
    }

    fn cached_trace(&self, path: &Path, run: impl FnOnce() -> Result<TraceRecord>) -> Result<TraceRecord> {
        if path.exists() {
            return load_trace(path);
        }
        let t = run()?;
        save_atomic(path, |p| save_trace(p, &t))?;
        Ok(t)
    }

    fn background_path(&self, src: &SourceSpec) -> std::path::PathBuf {
        self.cache.entry("background", &self.base_key(src), "emtrace")
    }

    fn background(&self, src: &SourceSpec) -> Result<TraceRecord> {
        let path = self.background_path(src);
        self.cached_trace(&path, || {
            Ok(run_simulation(&self.cfg.medium, None, src, &self.grid, &self.opts)?.trace)
        })
    }

    fn total(&self, src: &SourceSpec) -> Result<TraceRecord> {
        let obstacle = self.cfg.obstacle_spec().expect("total run needs an obstacle");
        let path = self.cache.entry("total", &self.with(src, json!(self.cfg.obstacle)), "emtrace");
        self.cached_trace(&path, || {
            Ok(run_simulation(&self.cfg.medium, Some(&obstacle), src, &self.grid, &self.opts)?.trace)
        })
    }

    /// Scattered trace and the path of the background store it was built on.
    fn scattered(&self, src: &SourceSpec) -> Result<(TraceRecord, std::path::PathBuf)> {
        let oc = self.cfg.obstacle.as_ref().expect("scattered run needs an obstacle");
        let obstacle = oc.spec();
        let store_path = self.cache.entry("store", &self.with(src, json!(oc.shape)), "emstore");
        let path = self.cache.entry("scattered", &self.with(src, json!(oc)), "emtrace");
        let mut store: Option<BackgroundStore> = None;
        if !store_path.exists() {
            let out = run_background_with_store(&self.cfg.medium, &obstacle, src, &self.grid, &self.opts)?;
            let bg_path = self.background_path(src);
            if !bg_path.exists() {
                save_atomic(&bg_path, |p| save_trace(p, &out.trace))?;
            }
            let s = out.store.expect("background run with store returns a store");
            save_atomic(&store_path, |p| save_store(p, &s))?;
            store = Some(s);
        }
        let trace = self.cached_trace(&path, || {
            let s = match store.take() {
                Some(s) => s,
                None => load_store(&store_path)?,
            };
            Ok(run_scattered(&self.cfg.medium, &obstacle, src, &self.grid, Some(&s), &self.opts)?.trace)
        })?;
        Ok((trace, store_path))
    }
}

/// Runs (or reuses) every trace the configured mode needs, writes them to
/// the output directory and records them in the manifest.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    create_dir(out)?;
    let runner = Runner {
        cfg,
        grid: cfg.grid_spec()?,
        cache: RunCache::for_output(out)?,
        opts: RunOptions {
            threads: cfg.threads,
            subsamples: cfg.grid.subsamples,
            ..Default::default()
        },
    };
    let mut manifest = Manifest::new(cfg);
    let mut emit = |kind: &str, j: usize, trace: &TraceRecord| -> Result<()> {
        let path = out.join(trace_name(kind, j));
        save_trace(&path, trace)?;
        manifest.add(&format!("{kind}_d{j}"), &path)
    };
    let mut stores = Vec::new();
    for j in 0..cfg.source.directions.len() {
        let src = cfg.source_spec(j, &runner.grid);
        match (&cfg.obstacle, cfg.mode) {
            (None, _) => emit("background", j, &runner.background(&src)?)?,
            (Some(_), Mode::TotalPair) => {
                emit("background", j, &runner.background(&src)?)?;
                emit("total", j, &runner.total(&src)?)?;
            }
            (Some(_), Mode::AnalyticTilde) => {
                // the background trace only feeds the I vs Ĩ comparison
                emit("total", j, &runner.total(&src)?)?;
                emit("background", j, &runner.background(&src)?)?;
            }
            (Some(_), Mode::Scattered) => {
                let (trace, store) = runner.scattered(&src)?;
                emit("scattered", j, &trace)?;
                stores.push((j, store));
            }
        }
    }
    for (j, store) in stores {
        manifest.add(&format!("background_store_d{j}"), &store)?;
    }
    schema::write(out)?;
    crate::artifacts::write_json(&out.join(crate::artifacts::MANIFEST), &manifest)?;
    Ok(manifest)
}
