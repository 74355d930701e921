use std::path::{Path, PathBuf};

use anyhow::Context;
use mvset::experiments::{PipelineConfig, SigmaGrid};
use mvset::geometry::{DEFAULT_MC_SAMPLES, MAX_VOLUME_DIM};
use mvset::{MassGrid, SplitSpec};
use serde::{Deserialize, Serialize};

/// Settings of a `fit` run. Every field has a default; a JSON file may set
/// any subset and command-line flags override the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub nu: f64,
    pub alpha: f64,
    /// Half-width of the mass grid around `alpha`.
    pub mass_half_width: f64,
    pub mass_count: usize,
    /// Masses calibrated in addition to the grid, e.g. a second target level.
    pub extra_masses: Vec<f64>,
    pub train_fraction: f64,
    #[serde(rename = "B")]
    pub members: usize,
    pub sigma: SigmaGrid,
    pub mc_samples: usize,
    pub seed: u64,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            nu: 0.4,
            alpha: 0.95,
            mass_half_width: 0.04,
            mass_count: 10,
            extra_masses: Vec::new(),
            train_fraction: SplitSpec::DEFAULT_TRAIN_FRACTION,
            members: 10,
            sigma: SigmaGrid {
                min: 0.1,
                max: 3.0,
                count: 20,
            },
            mc_samples: DEFAULT_MC_SAMPLES,
            seed: 0,
            input: None,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(mvset::Error::from)
            .with_context(|| format!("parsing {}", path.display()))?;
        Ok(cfg)
    }

    pub fn grid(&self) -> mvset::Result<MassGrid> {
        MassGrid::new(self.alpha, self.mass_half_width, self.mass_count)?.with_targets(&self.extra_masses)
    }

    /// Check every field before any computation.
    pub fn pipeline(&self) -> mvset::Result<PipelineConfig> {
        mvset::OcsvmConfig::new(self.nu, mvset::KernelBandwidth::new(1.0)?)?;
        SplitSpec::new(self.train_fraction, self.seed)?;
        if self.members == 0 {
            return Err(mvset::Error::invalid("B", "need at least one member"));
        }
        if self.mc_samples == 0 {
            return Err(mvset::Error::invalid("mc_samples", "must be positive"));
        }
        Ok(PipelineConfig {
            nu: self.nu,
            grid: self.grid()?,
            train_fraction: self.train_fraction,
            members: self.members,
            sigmas: self.sigma.values()?,
            mc_samples: self.mc_samples,
            seed: self.seed,
        })
    }

    pub fn check_dim(d: usize) -> mvset::Result<()> {
        if d > MAX_VOLUME_DIM {
            return Err(mvset::Error::DimensionTooHigh {
                max: MAX_VOLUME_DIM,
                found: d,
            });
        }
        Ok(())
    }
}
