use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::driver::DriverSpec;
use crate::error::{Error, Result};
use crate::fiber::{FiberKind, GridSpec};
use crate::spectrum::{ComparisonTolerances, SpectrumConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Spectrum,
    Compare,
    Converge,
    Oracle,
    Bounds,
}

impl Experiment {
    pub fn label(self) -> &'static str {
        match self {
            Experiment::Spectrum => "spectrum",
            Experiment::Compare => "compare",
            Experiment::Converge => "converge",
            Experiment::Oracle => "oracle",
            Experiment::Bounds => "bounds",
        }
    }
}

fn default_fiber() -> FiberKind {
    FiberKind::C
}

fn default_samples() -> usize {
    100
}

fn default_oracle_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory for reports and the manifest; `--out` overrides it.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// File name prefix, defaulting to the experiment name.
    #[serde(default)]
    pub prefix: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub driver: DriverSpec,
    pub grid: GridSpec,
    pub spectrum: SpectrumConfig,
    /// Fiber for `spectrum`, `converge` and `oracle`.
    #[serde(default = "default_fiber")]
    pub fiber: FiberKind,
    /// Replaces both the driver seed and the probe seed when present.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerances: Option<ComparisonTolerances>,
    /// Largest accepted gap between estimates and oracle values.
    #[serde(default = "default_oracle_tol")]
    pub oracle_tolerance: f64,
    /// Random samples for the inequality audit of `bounds`.
    #[serde(default = "default_samples")]
    pub audit_samples: usize,
    #[serde(default)]
    pub output: Option<OutputSpec>,
}

impl ExperimentConfig {
    /// Applies a seed override to the driver and the probe block.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn effective_driver(&self) -> DriverSpec {
        let mut d = self.driver.clone();
        if let Some(s) = self.seed {
            d.seed = s;
        }
        d
    }

    pub fn effective_spectrum(&self) -> SpectrumConfig {
        let mut s = self.spectrum.clone();
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s
    }

    /// Hex SHA-256 of the canonical JSON form (output locations excluded).
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output = None;
        let bytes = serde_json::to_vec(&canon).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Invariant checks beyond the schema.
    pub fn check(&self) -> Result<()> {
        let diag = |field: &str, e: Error| Error::Config(format!("{field}: {e}"));
        GridSpec::new(self.grid.m).map_err(|e| diag("grid.m", e))?;
        let driver = self.effective_driver();
        driver.validate().map_err(|e| diag("driver", e))?;
        let dims: Vec<FiberKind> = match self.experiment {
            Experiment::Compare => vec![FiberKind::C, FiberKind::L],
            _ => vec![self.fiber],
        };
        for kind in dims {
            let dim = kind.ambient_dim(self.grid, driver.dimension);
            self.spectrum.validate(dim).map_err(|e| diag("spectrum", e))?;
        }
        if let Some(t) = &self.tolerances {
            if !(t.exponent > 0.0 && t.e_angle > 0.0 && t.f_angle > 0.0) {
                return Err(Error::Config("tolerances: all entries must be positive".into()));
            }
        }
        if !(self.oracle_tolerance > 0.0) {
            return Err(Error::Config("oracle_tolerance: must be positive".into()));
        }
        if self.audit_samples == 0 {
            return Err(Error::Config("audit_samples: must be at least 1".into()));
        }
        if self.experiment == Experiment::Oracle {
            super::run::oracle_kind(&driver).map_err(|e| diag("driver", e))?;
        }
        Ok(())
    }
}

/// Parses a JSON document, reporting the failing field path and position.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let field = if path == "." { "document".to_string() } else { path };
        Error::Config(format!("{field}: {inner}"))
    })?;
    Ok(cfg)
}

/// Schema and invariant check of a config file, without running it.
pub fn validate_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = parse_config(&text)?;
    cfg.check()?;
    Ok(cfg)
}
