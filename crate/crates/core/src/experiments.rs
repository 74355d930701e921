//! End-to-end runs: bandwidth selection over a grid of candidate ensembles,
//! and comparisons against the baselines on synthetic data with a known
//! minimum volume set.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::baselines::{default_kde_bandwidths, kde_bandwidth_cv, kde_plugin_set, standard_ocsvm_set, DEFAULT_CV_FOLDS};
use crate::calibration::{InsufficientOutliers, MassGrid, SplitSpec};
use crate::datagen::{sample_mixture, true_mv_level, GroundTruthSet, MixtureSpec};
use crate::ensemble::{build_ensembles, Ensemble, EnsembleSpec};
use crate::geometry::{
    empirical_mass, enclosing_hypercube, ensemble_mass_volume_curve, select_bandwidth, HyperRect, IndicatorSet,
    MassVolumeCurve, UniformSample, DEFAULT_MC_SAMPLES,
};
use crate::kernel::KernelBandwidth;
use crate::seeding::derive_seed;
use crate::{Error, Result};

/// `count` bandwidths equally spaced on `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl SigmaGrid {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        let g = Self { min, max, count };
        g.values()?;
        Ok(g)
    }

    pub fn values(&self) -> Result<Vec<KernelBandwidth>> {
        if self.count == 0 {
            return Err(Error::invalid("sigma grid", "count must be at least 1"));
        }
        if self.count > 1 && !(self.max > self.min) {
            return Err(Error::invalid("sigma grid", "max must exceed min"));
        }
        (0..self.count)
            .map(|i| {
                let s = if self.count == 1 {
                    self.min
                } else {
                    self.min + (self.max - self.min) * i as f64 / (self.count - 1) as f64
                };
                KernelBandwidth::new(s)
            })
            .collect()
    }

    pub fn step(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.max - self.min) / (self.count - 1) as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub nu: f64,
    pub grid: MassGrid,
    pub train_fraction: f64,
    pub members: usize,
    pub sigmas: Vec<KernelBandwidth>,
    pub mc_samples: usize,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(sigmas: Vec<KernelBandwidth>, members: usize, seed: u64) -> Self {
        Self {
            nu: 0.4,
            grid: MassGrid::default(),
            train_fraction: SplitSpec::DEFAULT_TRAIN_FRACTION,
            members,
            sigmas,
            mc_samples: DEFAULT_MC_SAMPLES,
            seed,
        }
    }

    /// Base seed of the member splits.
    pub fn split_seed(&self) -> u64 {
        derive_seed(self.seed, 1, 0)
    }

    /// Seed of the shared uniform sample.
    pub fn mc_seed(&self) -> u64 {
        derive_seed(self.seed, 2, 0)
    }
}

/// One bandwidth's ensemble and mass-volume curve.
#[derive(Clone, Debug)]
pub struct BandwidthCandidate {
    pub sigma: KernelBandwidth,
    pub ensemble: Ensemble,
    pub curve: MassVolumeCurve,
    /// Members whose training fit left too few outliers for the grid.
    pub warnings: Vec<(usize, InsufficientOutliers)>,
}

#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub candidates: Vec<BandwidthCandidate>,
    pub selected: usize,
    pub rect: HyperRect,
}

impl PipelineResult {
    pub fn sigma_opt(&self) -> KernelBandwidth {
        self.candidates[self.selected].sigma
    }

    pub fn selected(&self) -> &BandwidthCandidate {
        &self.candidates[self.selected]
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.selected().ensemble
    }
}

/// Build one ensemble per bandwidth, compute each mass-volume curve on a
/// shared uniform sample of the data's bounding box, and keep the bandwidth
/// with the smallest area.
pub fn run_pipeline(x: &Array2<f64>, cfg: &PipelineConfig) -> Result<PipelineResult> {
    let rect = enclosing_hypercube(x, 0.0)?;
    let sample = UniformSample::draw(&rect, cfg.mc_samples, cfg.mc_seed())?;
    let spec = EnsembleSpec {
        nu: cfg.nu,
        grid: cfg.grid.clone(),
        members: cfg.members,
        train_fraction: cfg.train_fraction,
        base_seed: cfg.split_seed(),
    };
    let ensembles = build_ensembles(x, &cfg.sigmas, &spec)?;
    let candidates = ensembles
        .into_iter()
        .zip(&cfg.sigmas)
        .map(|(ensemble, &sigma)| {
            let curve = ensemble_mass_volume_curve(&ensemble, &sample)?;
            let warnings = ensemble
                .members()
                .iter()
                .enumerate()
                .filter_map(|(b, m)| m.warning().map(|w| (b, w)))
                .collect();
            Ok(BandwidthCandidate {
                sigma,
                ensemble,
                curve,
                warnings,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(KernelBandwidth, MassVolumeCurve)> =
        candidates.iter().map(|c| (c.sigma, c.curve.clone())).collect();
    let best = select_bandwidth(&pairs)?;
    let selected = candidates.iter().position(|c| c.sigma == best).expect("selected from candidates");
    log::debug!("selected sigma = {best} (amv {})", candidates[selected].curve.amv());
    Ok(PipelineResult {
        candidates,
        selected,
        rect,
    })
}

/// Fraction of the rows of `x` inside the ensemble's set at `beta`.
pub fn ensemble_empirical_mass(e: &Ensemble, beta: f64, x: &Array2<f64>) -> Result<f64> {
    empirical_mass(&e.level_set(beta)?, x)
}

/// Which comparison methods to run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSelection {
    pub calibrated: bool,
    pub standard_ocsvm: bool,
    pub kde_plugin: bool,
    /// Also score the calibrated approach at every bandwidth, not only the
    /// AMV-selected one.
    pub calibrated_per_sigma: bool,
}

impl Default for MethodSelection {
    fn default() -> Self {
        Self {
            calibrated: true,
            standard_ocsvm: true,
            kde_plugin: false,
            calibrated_per_sigma: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    pub spec: MixtureSpec,
    pub n: usize,
    pub alpha: f64,
    pub nu: f64,
    pub grid: MassGrid,
    pub train_fraction: f64,
    pub members: usize,
    pub sigmas: SigmaGrid,
    pub repetitions: usize,
    pub seed: u64,
    /// Uniform points for the mass-volume curves.
    pub mc_samples: usize,
    /// Uniform points for the symmetric-difference metric.
    pub metric_samples: usize,
    /// Draws used to estimate the true level.
    pub quantile_samples: usize,
    pub methods: MethodSelection,
}

impl ComparisonConfig {
    /// Bimodal Gaussian mixture in dimension `d`, `n` = 1000, 20 bandwidths on `[0.1, 3]`.
    pub fn bimodal(d: usize) -> Self {
        Self {
            spec: MixtureSpec::bimodal(d),
            n: 1000,
            alpha: 0.95,
            nu: 0.4,
            grid: MassGrid::default(),
            train_fraction: SplitSpec::DEFAULT_TRAIN_FRACTION,
            members: 10,
            sigmas: SigmaGrid {
                min: 0.1,
                max: 3.0,
                count: 20,
            },
            repetitions: 20,
            seed: 0,
            mc_samples: DEFAULT_MC_SAMPLES,
            metric_samples: 100_000,
            quantile_samples: 1_000_000,
            methods: MethodSelection::default(),
        }
    }

    /// Bimodal mixture with 5% uniform outliers, 20 bandwidths on `[0.01, 3]`.
    pub fn contaminated() -> Self {
        Self {
            spec: MixtureSpec::bimodal_contaminated(),
            sigmas: SigmaGrid {
                min: 0.01,
                max: 3.0,
                count: 20,
            },
            ..Self::bimodal(2)
        }
    }

    /// KDE plug-in against the calibrated approach in dimension `d`.
    pub fn dimension_sweep(d: usize) -> Self {
        Self {
            n: 500,
            members: 5,
            methods: MethodSelection {
                calibrated: true,
                standard_ocsvm: false,
                kde_plugin: true,
                calibrated_per_sigma: false,
            },
            ..Self::bimodal(d)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.sigmas.values()?;
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions", "must be at least 1"));
        }
        if self.metric_samples == 0 || self.mc_samples == 0 || self.quantile_samples == 0 {
            return Err(Error::invalid("samples", "sample counts must be positive"));
        }
        if self.grid.position(self.alpha).is_none() {
            return Err(Error::invalid("alpha", "must be on the mass grid"));
        }
        Ok(())
    }
}

/// Symmetric-difference errors of one repetition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub calibrated_sigma: Option<f64>,
    pub calibrated_error: Option<f64>,
    pub calibrated_per_sigma: Vec<f64>,
    pub standard_per_sigma: Vec<f64>,
    pub standard_best_sigma: Option<f64>,
    pub standard_best_error: Option<f64>,
    pub kde_bandwidth: Option<f64>,
    pub kde_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub median: f64,
    pub mean: f64,
}

impl MethodSummary {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            median: median(values),
            mean: values.iter().sum::<f64>() / values.len() as f64,
        })
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub dim: usize,
    pub tau: f64,
    pub sigmas: Vec<f64>,
    pub repetitions: Vec<RepetitionResult>,
    pub calibrated: Option<MethodSummary>,
    pub standard_ocsvm: Option<MethodSummary>,
    pub kde_plugin: Option<MethodSummary>,
    /// Median over repetitions of the per-bandwidth errors.
    pub calibrated_median_by_sigma: Vec<f64>,
    pub standard_median_by_sigma: Vec<f64>,
}

fn error_against(sample: &UniformSample, truth: &[bool], set: &dyn IndicatorSet) -> Result<f64> {
    let inside = sample.indicators(set)?;
    let diff: Vec<bool> = inside.iter().zip(truth).map(|(a, b)| a != b).collect();
    Ok(sample.estimate_from_indicators(&diff).volume)
}

/// Repeated draws from `cfg.spec`; each method's set is scored by the volume
/// of its symmetric difference with the true minimum volume set, estimated on
/// a uniform sample of the data's bounding box.
pub fn compare(cfg: &ComparisonConfig) -> Result<ComparisonReport> {
    cfg.validate()?;
    let sigmas = cfg.sigmas.values()?;
    let truth = true_mv_level(&cfg.spec, cfg.alpha, cfg.quantile_samples, derive_seed(cfg.seed, 11, 0))?;
    let repetitions = (0..cfg.repetitions)
        .map(|r| run_repetition(cfg, &sigmas, &truth, r))
        .collect::<Result<Vec<_>>>()?;

    let collect = |f: &dyn Fn(&RepetitionResult) -> Option<f64>| -> Vec<f64> { repetitions.iter().filter_map(f).collect() };
    let by_sigma = |f: &dyn Fn(&RepetitionResult) -> &Vec<f64>| -> Vec<f64> {
        if repetitions.iter().any(|r| f(r).is_empty()) {
            return Vec::new();
        }
        (0..sigmas.len())
            .map(|s| median(&repetitions.iter().map(|r| f(r)[s]).collect::<Vec<_>>()))
            .collect()
    };
    Ok(ComparisonReport {
        dim: cfg.spec.dim(),
        tau: truth.tau,
        sigmas: sigmas.iter().map(|s| s.sigma()).collect(),
        calibrated: MethodSummary::of(&collect(&|r| r.calibrated_error)),
        standard_ocsvm: MethodSummary::of(&collect(&|r| r.standard_best_error)),
        kde_plugin: MethodSummary::of(&collect(&|r| r.kde_error)),
        calibrated_median_by_sigma: by_sigma(&|r| &r.calibrated_per_sigma),
        standard_median_by_sigma: by_sigma(&|r| &r.standard_per_sigma),
        repetitions,
    })
}

fn run_repetition(
    cfg: &ComparisonConfig,
    sigmas: &[KernelBandwidth],
    truth: &GroundTruthSet,
    r: usize,
) -> Result<RepetitionResult> {
    let r64 = r as u64;
    let x = sample_mixture(&cfg.spec, cfg.n, derive_seed(cfg.seed, 10, r64))?;
    let rect = enclosing_hypercube(&x, 0.0)?;
    let metric = UniformSample::draw(&rect, cfg.metric_samples, derive_seed(cfg.seed, 13, r64))?;
    let truth_inside = metric.indicators(truth)?;

    let mut out = RepetitionResult {
        repetition: r,
        calibrated_sigma: None,
        calibrated_error: None,
        calibrated_per_sigma: Vec::new(),
        standard_per_sigma: Vec::new(),
        standard_best_sigma: None,
        standard_best_error: None,
        kde_bandwidth: None,
        kde_error: None,
    };

    if cfg.methods.calibrated {
        let pipeline = PipelineConfig {
            nu: cfg.nu,
            grid: cfg.grid.clone(),
            train_fraction: cfg.train_fraction,
            members: cfg.members,
            sigmas: sigmas.to_vec(),
            mc_samples: cfg.mc_samples,
            seed: derive_seed(cfg.seed, 12, r64),
        };
        let result = run_pipeline(&x, &pipeline)?;
        let set = result.ensemble().level_set(cfg.alpha)?;
        out.calibrated_sigma = Some(result.sigma_opt().sigma());
        out.calibrated_error = Some(error_against(&metric, &truth_inside, &set)?);
        if cfg.methods.calibrated_per_sigma {
            out.calibrated_per_sigma = result
                .candidates
                .iter()
                .map(|c| error_against(&metric, &truth_inside, &c.ensemble.level_set(cfg.alpha)?))
                .collect::<Result<_>>()?;
        }
    }

    if cfg.methods.standard_ocsvm {
        out.standard_per_sigma = sigmas
            .iter()
            .map(|&s| error_against(&metric, &truth_inside, &standard_ocsvm_set(&x, cfg.alpha, s)?))
            .collect::<Result<_>>()?;
        // Best bandwidth chosen with the ground truth; ties to the larger one.
        let best = out
            .standard_per_sigma
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("non-empty grid");
        out.standard_best_sigma = Some(sigmas[best.0].sigma());
        out.standard_best_error = Some(*best.1);
    }

    if cfg.methods.kde_plugin {
        let s = kde_bandwidth_cv(&x, &default_kde_bandwidths(), DEFAULT_CV_FOLDS, derive_seed(cfg.seed, 14, r64))?;
        let set = kde_plugin_set(&x, cfg.alpha, s)?;
        out.kde_bandwidth = Some(s);
        out.kde_error = Some(error_against(&metric, &truth_inside, &set)?);
    }

    log::info!(
        "repetition {r}: calibrated {:?} (sigma {:?}), standard {:?}, kde {:?}",
        out.calibrated_error,
        out.calibrated_sigma,
        out.standard_best_error,
        out.kde_error
    );
    Ok(out)
}
