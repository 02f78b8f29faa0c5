//! Output files, the run manifest and the content-addressed run cache.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use enclosure::fdtd::io::{read_store, read_trace, write_store, write_trace};
use enclosure::fdtd::{BackgroundStore, TraceRecord};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, sha256_hex, ExperimentConfig};
use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const CACHE_ENV: &str = "EM_ENCLOSURE_CACHE";
/// Bumped whenever cached file contents change meaning.
const CACHE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub fingerprint: String,
    pub config: serde_json::Value,
    /// Role (`scattered_d0`, `background_store_d0`, ...) to file.
    pub files: BTreeMap<String, FileEntry>,
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Config(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let mut r = open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = r.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}

pub fn save_trace(path: &Path, trace: &TraceRecord) -> Result<()> {
    let mut w = create(path)?;
    write_trace(&mut w, trace)?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn load_trace(path: &Path) -> Result<TraceRecord> {
    Ok(read_trace(open(path)?)?)
}

pub fn save_store(path: &Path, store: &BackgroundStore) -> Result<()> {
    let mut w = create(path)?;
    write_store(&mut w, store)?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn load_store(path: &Path) -> Result<BackgroundStore> {
    Ok(read_store(open(path)?)?)
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            fingerprint: cfg.fingerprint(),
            config: serde_json::to_value(cfg).unwrap_or_default(),
            files: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, role: &str, path: &Path) -> Result<()> {
        let sha256 = file_sha256(path)?;
        self.files.insert(
            role.to_string(),
            FileEntry {
                path: path.to_path_buf(),
                sha256,
            },
        );
        Ok(())
    }

    /// Reads the manifest in `dir` and checks it against `cfg` and the files
    /// on disk.
    pub fn load_checked(dir: &Path, cfg: &ExperimentConfig) -> Result<Self> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Err(CliError::Stale(format!("{} is missing; run `simulate` first", path.display())));
        }
        let m: Manifest = serde_json::from_reader(open(&path)?)
            .map_err(|e| CliError::Stale(format!("{}: {e}", path.display())))?;
        let want = cfg.fingerprint();
        if m.fingerprint != want {
            return Err(CliError::Stale(format!(
                "traces were produced for config {} but the current config is {want}",
                m.fingerprint
            )));
        }
        for (role, f) in &m.files {
            if !f.path.exists() {
                return Err(CliError::Stale(format!("{role}: {} is missing", f.path.display())));
            }
            if file_sha256(&f.path)? != f.sha256 {
                return Err(CliError::Stale(format!("{role}: {} changed since `simulate`", f.path.display())));
            }
        }
        Ok(m)
    }

    pub fn path(&self, role: &str) -> Option<&Path> {
        self.files.get(role).map(|f| f.path.as_path())
    }
}

/// Content-addressed store of finished runs.
#[derive(Clone, Debug)]
pub struct RunCache {
    pub dir: PathBuf,
}

impl RunCache {
    /// `$EM_ENCLOSURE_CACHE`, or `cache/` under the output directory.
    pub fn for_output(out: &Path) -> Result<Self> {
        let dir = std::env::var_os(CACHE_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| out.join("cache"));
        create_dir(&dir)?;
        Ok(Self { dir })
    }

    /// File name for a run identified by `key`, a JSON description of all
    /// of its inputs.
    pub fn entry(&self, kind: &str, key: &serde_json::Value, ext: &str) -> PathBuf {
        let tagged = serde_json::json!({ "v": CACHE_VERSION, "kind": kind, "key": key });
        let h = sha256_hex(tagged.to_string().as_bytes());
        self.dir.join(format!("{kind}_{}.{ext}", &h[..20]))
    }
}

/// Writes via a temporary name so an interrupted run leaves no partial
/// cache entry.
pub fn save_atomic(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("partial");
    write(&tmp)?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}
