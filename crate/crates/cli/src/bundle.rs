//! On-disk model bundle: `ensemble.json`, `summary.json`, the effective
//! `config.json`, and one `mv_curve_<sigma>.csv` (plus `.json` sidecar) per
//! candidate bandwidth.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use mvset::experiments::PipelineResult;
use mvset::geometry::{empirical_mass, CurveSidecar};
use mvset::{Ensemble, HyperRect};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaAmv {
    pub sigma: f64,
    pub amv: f64,
    /// Members fit at this bandwidth that left too few training outliers.
    pub warnings: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassEntry {
    pub beta: f64,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub sigma_opt: f64,
    pub amv_by_sigma: Vec<SigmaAmv>,
    /// Fraction of the input rows inside the selected set, per calibrated mass.
    pub empirical_masses: Vec<MassEntry>,
    /// Calibration warnings of the selected bandwidth's members.
    pub warnings: Vec<String>,
    pub bounding_box: HyperRect,
    pub mc_samples: usize,
    pub mc_seed: u64,
}

pub fn summarize(result: &PipelineResult, cfg: &RunConfig, x: &Array2<f64>) -> mvset::Result<Summary> {
    let selected = result.selected();
    let empirical_masses = selected
        .ensemble
        .grid()
        .masses()
        .iter()
        .map(|&beta| {
            Ok(MassEntry {
                beta,
                mass: empirical_mass(&selected.ensemble.level_set(beta)?, x)?,
            })
        })
        .collect::<mvset::Result<_>>()?;
    let pipeline = cfg.pipeline()?;
    Ok(Summary {
        sigma_opt: result.sigma_opt().sigma(),
        amv_by_sigma: result
            .candidates
            .iter()
            .map(|c| SigmaAmv {
                sigma: c.sigma.sigma(),
                amv: c.curve.amv(),
                warnings: c.warnings.len(),
            })
            .collect(),
        empirical_masses,
        warnings: selected
            .warnings
            .iter()
            .map(|(b, w)| format!("member {b}: {w}"))
            .collect(),
        bounding_box: result.rect.clone(),
        mc_samples: pipeline.mc_samples,
        mc_seed: pipeline.mc_seed(),
    })
}

pub fn curve_file_stem(sigma: f64) -> String {
    format!("mv_curve_{sigma}")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value).map_err(mvset::Error::from)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value = serde_json::from_str(&text)
        .map_err(mvset::Error::from)
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(value)
}

pub fn write_bundle(dir: &Path, cfg: &RunConfig, result: &PipelineResult, summary: &Summary) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_json(&dir.join("config.json"), cfg)?;
    write_json(&dir.join("ensemble.json"), result.ensemble())?;
    write_json(&dir.join("summary.json"), summary)?;
    let pipeline = cfg.pipeline()?;
    for c in &result.candidates {
        let stem = curve_file_stem(c.sigma.sigma());
        let path = dir.join(format!("{stem}.csv"));
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        c.curve.write_csv(&mut w)?;
        w.flush()?;
        let sidecar = CurveSidecar {
            amv: c.curve.amv(),
            sigma: c.sigma.sigma(),
            m: pipeline.mc_samples,
            seed: pipeline.mc_seed(),
        };
        write_json(&dir.join(format!("{stem}.json")), &sidecar)?;
    }
    Ok(())
}

pub struct Bundle {
    pub ensemble: Ensemble,
    pub summary: Summary,
}

impl Bundle {
    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        Ok(Self {
            ensemble: read_json(&dir.join("ensemble.json"))?,
            summary: read_json(&dir.join("summary.json"))?,
        })
    }
}
