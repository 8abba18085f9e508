//! Run configuration: one JSON file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use rvsm_core::{KernelSpec, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{json, Error, Result};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "RVSM_SEED";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoPaths {
    pub cloud: Option<PathBuf>,
    pub dictionary: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub kernel: KernelSpec,
    pub train: TrainConfig,
    /// Fraction of every class kept before training.
    pub downsample_fraction: f64,
    /// Per-class training threads; defaults to the number of classes.
    pub jobs: Option<usize>,
    pub allow_new_classes: bool,
    /// Thresholds used for mean sensitivity.
    pub grid_points: usize,
    pub paths: IoPaths,
    /// Query counts timed by `bench`.
    pub bench_sizes: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kernel: KernelSpec::default(),
            train: TrainConfig::default(),
            downsample_fraction: 1.0,
            jobs: None,
            allow_new_classes: false,
            grid_points: rvsm_core::metrics::DEFAULT_GRID_POINTS,
            paths: IoPaths::default(),
            bench_sizes: vec![1_000, 10_000, 100_000],
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.train.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.downsample_fraction > 0.0 && self.downsample_fraction <= 1.0) {
            return Err(Error::Config(format!("downsample_fraction must be in (0, 1], got {}", self.downsample_fraction)));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be positive".into()));
        }
        if self.grid_points == 0 {
            return Err(Error::Config("grid_points must be positive".into()));
        }
        if self.bench_sizes.contains(&0) {
            return Err(Error::Config("bench sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: RunConfig = json::read_file(path).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Config from `path`, or the defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }

    /// SHA-256 over the settings that determine a trained map, recorded in
    /// model provenance. Thread count, paths and benchmark sizes are left out.
    pub fn digest(&self) -> String {
        let relevant = (&self.kernel, &self.train, self.downsample_fraction, self.allow_new_classes);
        hex_digest(&json::to_bytes(&relevant))
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Seed by precedence: flag, then the environment value, then the config.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, config: u64) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match env {
        Some(v) => v.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        None => Ok(config),
    }
}
