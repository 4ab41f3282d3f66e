//! Run manifest and content-addressed stage caching.
//!
//! Each stage owns a fingerprint: a digest over the tool version, the
//! stage-relevant config slice, and the digests of its input files. A stage
//! whose fingerprint matches the previous run and whose recorded outputs
//! still hash identically is skipped. The run manifest lists every emitted
//! file with its digest, so two manifests agree on outputs exactly when the
//! files are byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex(&hasher.finalize())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path)
        .with_context(|| format!("cannot open {} for hashing", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buffer = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buffer)?;
        if n == 0 {
            break;
        }
        hasher.update(&buffer[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct StageRecord {
    pub name: String,
    pub fingerprint: String,
    pub cached: bool,
    pub duration_ms: u64,
    /// output path (relative to the out dir) -> content digest
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_digest: String,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn new(config_digest: String) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            config_digest,
            stages: Vec::new(),
        }
    }

    /// All output digests across stages; equality of two of these maps means
    /// the runs produced byte-identical files.
    pub fn output_digests(&self) -> BTreeMap<String, String> {
        let mut all = BTreeMap::new();
        for stage in &self.stages {
            for (path, digest) in &stage.outputs {
                all.insert(path.clone(), digest.clone());
            }
        }
        all
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read manifest {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Exclusive ownership of an output directory for the duration of a run.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(out_dir: &Path) -> Result<Self> {
        fs::create_dir_all(out_dir)?;
        let path = out_dir.join(".lock");
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                bail!(
                    "output directory {} is locked by another run \
                     (remove {} if that run is gone)",
                    out_dir.display(),
                    path.display()
                )
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Cached execution of one stage.
pub struct StageRunner<'a> {
    out_dir: &'a Path,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    fingerprint: String,
    outputs: BTreeMap<String, String>,
}

impl<'a> StageRunner<'a> {
    pub fn new(out_dir: &'a Path) -> Self {
        Self { out_dir }
    }

    fn cache_path(&self, stage: &str) -> PathBuf {
        self.out_dir.join("cache").join(format!("{stage}.json"))
    }

    /// Digest of the stage identity: version, config slice, input digests.
    pub fn fingerprint(&self, stage: &str, config_slice: &str, inputs: &[String]) -> String {
        let mut hasher = Sha256::new();
        hasher.update(TOOL_VERSION.as_bytes());
        hasher.update(b"\0");
        hasher.update(stage.as_bytes());
        hasher.update(b"\0");
        hasher.update(config_slice.as_bytes());
        for input in inputs {
            hasher.update(b"\0");
            hasher.update(input.as_bytes());
        }
        hex(&hasher.finalize())
    }

    /// Runs `produce` unless a valid cache entry exists. `produce` returns
    /// the list of output files (absolute or out-dir-relative).
    pub fn run(
        &self,
        stage: &str,
        fingerprint: String,
        produce: impl FnOnce() -> Result<Vec<PathBuf>>,
    ) -> Result<StageRecord> {
        let started = Instant::now();
        if let Some(outputs) = self.cached_outputs(stage, &fingerprint)? {
            return Ok(StageRecord {
                name: stage.to_string(),
                fingerprint,
                cached: true,
                duration_ms: started.elapsed().as_millis() as u64,
                outputs,
            });
        }

        let files = produce()?;
        let mut outputs = BTreeMap::new();
        for file in files {
            let digest = sha256_file(&file)?;
            outputs.insert(self.relative(&file), digest);
        }

        let cache_path = self.cache_path(stage);
        fs::create_dir_all(cache_path.parent().expect("cache dir"))?;
        let entry = CacheEntry {
            fingerprint: fingerprint.clone(),
            outputs: outputs.clone(),
        };
        fs::write(&cache_path, serde_json::to_string_pretty(&entry)?)?;

        Ok(StageRecord {
            name: stage.to_string(),
            fingerprint,
            cached: false,
            duration_ms: started.elapsed().as_millis() as u64,
            outputs,
        })
    }

    fn cached_outputs(
        &self,
        stage: &str,
        fingerprint: &str,
    ) -> Result<Option<BTreeMap<String, String>>> {
        let cache_path = self.cache_path(stage);
        if !cache_path.exists() {
            return Ok(None);
        }
        let entry: CacheEntry = match serde_json::from_str(&fs::read_to_string(&cache_path)?) {
            Ok(entry) => entry,
            Err(_) => return Ok(None), // stale or corrupt cache entry
        };
        if entry.fingerprint != fingerprint {
            return Ok(None);
        }
        // every recorded output must still exist with the recorded digest
        for (rel, digest) in &entry.outputs {
            let path = self.out_dir.join(rel);
            if !path.exists() || &sha256_file(&path)? != digest {
                return Ok(None);
            }
        }
        Ok(Some(entry.outputs))
    }

    fn relative(&self, path: &Path) -> String {
        path.strip_prefix(self.out_dir)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_caches_on_matching_fingerprint() {
        let dir = tempfile::tempdir().unwrap();
        let runner = StageRunner::new(dir.path());
        let fp = runner.fingerprint("demo", "slice", &["abc".to_string()]);
        let out_file = dir.path().join("demo.txt");

        let mut calls = 0;
        let record = runner
            .run("demo", fp.clone(), || {
                calls += 1;
                fs::write(&out_file, "payload")?;
                Ok(vec![out_file.clone()])
            })
            .unwrap();
        assert!(!record.cached);
        assert_eq!(calls, 1);

        let record2 = runner
            .run("demo", fp.clone(), || {
                calls += 1;
                Ok(vec![])
            })
            .unwrap();
        assert!(record2.cached);
        assert_eq!(calls, 1);
        assert_eq!(record.outputs, record2.outputs);

        // tampering with the output invalidates the cache
        fs::write(&out_file, "tampered").unwrap();
        let record3 = runner
            .run("demo", fp, || {
                calls += 1;
                fs::write(&out_file, "payload")?;
                Ok(vec![out_file.clone()])
            })
            .unwrap();
        assert!(!record3.cached);
        assert_eq!(calls, 2);
    }

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let lock = DirLock::acquire(dir.path()).unwrap();
        assert!(DirLock::acquire(dir.path()).is_err());
        drop(lock);
        assert!(DirLock::acquire(dir.path()).is_ok());
    }

    #[test]
    fn manifest_output_digests_merge_stages() {
        let mut manifest = RunManifest::new("cfg".to_string());
        manifest.stages.push(StageRecord {
            name: "a".into(),
            fingerprint: "f1".into(),
            cached: false,
            duration_ms: 1,
            outputs: [("x.csv".to_string(), "d1".to_string())].into(),
        });
        manifest.stages.push(StageRecord {
            name: "b".into(),
            fingerprint: "f2".into(),
            cached: true,
            duration_ms: 0,
            outputs: [("y.csv".to_string(), "d2".to_string())].into(),
        });
        let all = manifest.output_digests();
        assert_eq!(all.len(), 2);
        assert_eq!(all["y.csv"], "d2");
    }
}
