use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{read_text, to_toml};
use crate::error::{Error, Result};
use crate::hamiltonian::XxzSystem;
use crate::lattice::{Boundary, LatticeSpec, DEFAULT_MAX_DIMENSION};
use crate::optimizer::PipelineConfig;
use crate::protocol::DEFAULT_MIN_PULSE_WIDTH;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// `L`; the lattice has `M = L^2` sites.
    pub side_length: usize,
    pub boundary: Boundary,
    /// `C`, the number of up spins.
    pub occupants: usize,
    pub dedup_bonds: bool,
    pub max_dimension: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            side_length: 2,
            boundary: Boundary::Open,
            occupants: 2,
            dedup_bonds: false,
            max_dimension: DEFAULT_MAX_DIMENSION,
        }
    }
}

impl SystemConfig {
    pub fn lattice(&self) -> LatticeSpec {
        LatticeSpec { side_length: self.side_length, boundary: self.boundary, dedup_bonds: self.dedup_bonds }
    }

    pub fn build(&self) -> Result<XxzSystem> {
        XxzSystem::with_max_dimension(self.lattice(), self.occupants, self.max_dimension)
    }

    pub fn sites(&self) -> usize {
        self.side_length * self.side_length
    }

    pub fn label(&self) -> String {
        format!("M={} C={} {}", self.sites(), self.occupants, self.boundary)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub ln_r_min: f64,
    pub ln_r_max: f64,
    pub points: usize,
    /// Explicit axis values; overrides the uniform range when set.
    pub axis: Option<Vec<f64>>,
    /// Cells whose ground-state overlap exceeds this are skipped.
    pub skip_threshold: f64,
    /// Pulses or gaps narrower than this fraction of `tau` are ignored when
    /// counting pulses.
    pub min_pulse_width: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            ln_r_min: -2.2,
            ln_r_max: 2.2,
            points: 21,
            axis: None,
            skip_threshold: 0.999,
            min_pulse_width: DEFAULT_MIN_PULSE_WIDTH,
        }
    }
}

impl GridConfig {
    /// Axis values of `ln r`, strictly increasing.
    pub fn axis_values(&self) -> Result<Vec<f64>> {
        let values = match &self.axis {
            Some(v) => v.clone(),
            None if self.points == 1 => vec![self.ln_r_min],
            None => (0..self.points)
                .map(|i| self.ln_r_min + (self.ln_r_max - self.ln_r_min) * i as f64 / (self.points - 1) as f64)
                .collect(),
        };
        if values.is_empty() {
            return Err(Error::Config("grid axis is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("grid axis must be finite and strictly increasing".into()));
        }
        Ok(values)
    }
}

/// Per-invocation settings; excluded from the config hash.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub grid: GridConfig,
    pub pipeline: PipelineConfig,
    pub run: RunSection,
}

#[derive(Serialize)]
struct Hashed<'a> {
    system: &'a SystemConfig,
    grid: &'a GridConfig,
    pipeline: &'a PipelineConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, path: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse { path: path.into(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&read_text(path)?, &path.display().to_string())
    }

    /// The fully resolved config, defaults included.
    pub fn to_toml(&self) -> Result<String> {
        to_toml(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        self.grid.axis_values()?;
        if !(self.grid.skip_threshold > 0.0 && self.grid.skip_threshold <= 1.0) {
            return Err(Error::Config("skip_threshold must lie in (0, 1]".into()));
        }
        if !(self.grid.min_pulse_width >= 0.0 && self.grid.min_pulse_width < 0.5) {
            return Err(Error::Config("min_pulse_width must lie in [0, 0.5)".into()));
        }
        if self.run.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("seed must not exceed {}", i64::MAX)));
        }
        if self.run.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        crate::lattice::build_lattice(&self.system.lattice())?;
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the system, grid and pipeline sections.
    pub fn hash(&self) -> String {
        let text = to_toml(&Hashed { system: &self.system, grid: &self.grid, pipeline: &self.pipeline })
            .expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))[..16].to_string()
    }
}
