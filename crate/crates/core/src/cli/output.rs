//! Output directory, CSV tables, binary dumps and the manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{hex, ExperimentConfig};
use super::CliError;
use crate::lattice::SpectralField;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_VAR: &str = "SNLW_OUTPUT_ROOT";
pub const MANIFEST_NAME: &str = "manifest.json";

/// A CSV table built in memory; floats are written in shortest
/// round-trip form so equal values give equal bytes.
#[derive(Clone, Debug, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(io_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(io_err)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }
}

fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RngAccounting {
    pub generator: &'static str,
    pub base_seed: u64,
    pub replicas: usize,
    pub replica_seed_rule: &'static str,
    pub normals_per_mode_and_step: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub config: String,
    pub code_version: String,
    pub status: String,
    pub partial: bool,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub rng: RngAccounting,
    pub outputs: Vec<OutputRecord>,
}

/// Files written by one run, all listed in the manifest.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<OutputRecord>,
    start: Instant,
}

impl OutputDir {
    /// `--out` if given, else `$SNLW_OUTPUT_ROOT/<command>-<hash prefix>`
    /// (root defaults to `snlw-output`).
    pub fn resolve(cfg: &ExperimentConfig) -> PathBuf {
        cfg.out.clone().unwrap_or_else(|| {
            let root = std::env::var_os(OUTPUT_ROOT_VAR)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("snlw-output"));
            root.join(format!("{}-{}", cfg.command.name(), &cfg.hash()[..12]))
        })
    }

    pub fn create(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(OutputDir {
            dir,
            written: Vec::new(),
            start: Instant::now(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let p = self.dir.join(name);
        let mut f = fs::File::create(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        f.write_all(bytes).map_err(io_err)?;
        self.written.retain(|r| r.file != name);
        self.written.push(OutputRecord {
            file: name.to_string(),
            sha256: hex(&Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_table(&mut self, name: &str, t: &Table) -> Result<(), CliError> {
        self.write_bytes(name, &t.to_bytes()?)
    }

    pub fn write_dump(&mut self, name: &str, f: &SpectralField, grid: u32, t: f64) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f.write_dump(&mut buf, grid, t).map_err(io_err)?;
        self.write_bytes(name, &buf)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<(), CliError> {
        let bytes = serde_json::to_vec_pretty(v).map_err(io_err)?;
        self.write_bytes(name, &bytes)
    }

    /// Writes the manifest listing every file written so far.
    pub fn finish(
        self,
        cfg: &ExperimentConfig,
        status: &str,
        partial: bool,
    ) -> Result<PathBuf, CliError> {
        let m = Manifest {
            command: cfg.command.name().to_string(),
            config_hash: cfg.hash(),
            config: cfg.canonical(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            status: status.to_string(),
            partial,
            threads: rayon::current_num_threads(),
            wall_clock_seconds: self.start.elapsed().as_secs_f64(),
            rng: RngAccounting {
                generator: "ChaCha8, one stream per Fourier mode",
                base_seed: cfg.seed,
                replicas: cfg.replicas,
                replica_seed_rule: "splitmix64(seed + (r+1)*0x9e3779b97f4a7c15)",
                normals_per_mode_and_step: 6,
            },
            outputs: self.written,
        };
        let p = self.dir.join(MANIFEST_NAME);
        fs::write(&p, serde_json::to_vec_pretty(&m).map_err(io_err)?).map_err(io_err)?;
        Ok(p)
    }
}
