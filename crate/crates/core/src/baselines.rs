//! Comparison methods: the one-class SVM used directly with `nu = 1 - alpha`,
//! and a Gaussian kernel density estimate thresholded at its empirical
//! `(1 - alpha)` quantile.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate_offset, select_rows};
use crate::geometry::IndicatorSet;
use crate::kernel::{squared_distance, KernelBandwidth};
use crate::ocsvm::{check_finite, fit, OcsvmConfig, OcsvmModel};
use crate::{row, seeding, standard, Error, Result};

/// The estimated set `{f >= rho_nu}` of a one-class SVM fit with `nu = 1 - alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardOcsvmSet {
    pub model: OcsvmModel,
}

impl IndicatorSet for StandardOcsvmSet {
    fn dim(&self) -> usize {
        self.model.feature_dim()
    }

    fn contains(&self, x: &[f64]) -> bool {
        self.model.contains(x)
    }
}

pub fn standard_ocsvm_set(x: &Array2<f64>, alpha: f64, sigma: KernelBandwidth) -> Result<StandardOcsvmSet> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    let config = OcsvmConfig::new(1.0 - alpha, sigma)?;
    Ok(StandardOcsvmSet {
        model: fit(x, &config)?,
    })
}

/// Gaussian kernel density estimate with a common bandwidth `s` in every
/// direction and uniform weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeModel {
    samples: Array2<f64>,
    bandwidth: f64,
}

impl KdeModel {
    pub fn new(samples: &Array2<f64>, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::invalid("bandwidth", format!("must be > 0, got {bandwidth}")));
        }
        if samples.nrows() == 0 || samples.ncols() == 0 {
            return Err(Error::invalid("samples", "need at least one row and one column"));
        }
        check_finite(samples)?;
        Ok(Self {
            samples: standard(samples).into_owned(),
            bandwidth,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    fn log_norm(&self) -> f64 {
        let s2 = self.bandwidth * self.bandwidth;
        -0.5 * self.dim() as f64 * (2.0 * std::f64::consts::PI * s2).ln()
    }

    #[inline]
    fn density_unchecked(&self, x: &[f64]) -> f64 {
        let s2 = 2.0 * self.bandwidth * self.bandwidth;
        let norm = self.log_norm().exp();
        let sum: f64 = (0..self.samples.nrows())
            .map(|i| (-squared_distance(x, row(&self.samples, i)) / s2).exp())
            .sum();
        norm * sum / self.samples.nrows() as f64
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self.density_unchecked(x))
    }

    /// `ln h(x)` via log-sum-exp, finite even where `h(x)` underflows.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let s2 = 2.0 * self.bandwidth * self.bandwidth;
        let exps: Vec<f64> = (0..self.samples.nrows())
            .map(|i| -squared_distance(x, row(&self.samples, i)) / s2)
            .collect();
        let top = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = exps.iter().map(|e| (e - top).exp()).sum();
        Ok(self.log_norm() + top + sum.ln() - (self.samples.nrows() as f64).ln())
    }
}

pub fn kde_density(model: &KdeModel, x: &[f64]) -> Result<f64> {
    model.density(x)
}

/// The bandwidth candidates: 15 values equally spaced on `[0.1, 10]`.
pub fn default_kde_bandwidths() -> Vec<f64> {
    (0..15).map(|i| 0.1 + 9.9 * i as f64 / 14.0).collect()
}

pub const DEFAULT_CV_FOLDS: usize = 4;

/// Bandwidth maximizing the held-out mean log-likelihood over `folds`
/// seeded folds. Ties go to the larger bandwidth; a bandwidth with any
/// non-finite fold score is rejected.
pub fn kde_bandwidth_cv(x: &Array2<f64>, grid: &[f64], folds: usize, seed: u64) -> Result<f64> {
    let x = standard(x);
    let n = x.nrows();
    if n < 8 {
        return Err(Error::invalid("data", format!("need at least 8 rows, got {n}")));
    }
    if folds < 2 || folds > n {
        return Err(Error::invalid("folds", format!("need 2 <= folds <= n, got {folds}")));
    }
    if grid.is_empty() {
        return Err(Error::invalid("bandwidth grid", "need at least one candidate"));
    }
    let assignment = fold_assignment(n, folds, seed);
    let parts: Vec<(Array2<f64>, Array2<f64>)> = (0..folds)
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
            let held: Vec<usize> = (0..n).filter(|&i| assignment[i] == f).collect();
            (select_rows(&x, &train), select_rows(&x, &held))
        })
        .collect();

    let scores: Vec<Option<f64>> = grid
        .par_iter()
        .map(|&s| {
            let mut total = 0.0;
            for (train, held) in &parts {
                let kde = KdeModel::new(train, s).ok()?;
                let ll: f64 = (0..held.nrows())
                    .map(|i| kde.log_density(row(held, i)).unwrap_or(f64::NEG_INFINITY))
                    .sum::<f64>()
                    / held.nrows() as f64;
                if !ll.is_finite() {
                    return None;
                }
                total += ll;
            }
            Some(total / folds as f64)
        })
        .collect();

    let mut best: Option<(f64, f64)> = None;
    for (&s, score) in grid.iter().zip(&scores) {
        let Some(score) = *score else { continue };
        best = match best {
            Some((bs, bscore)) if score < bscore || (score == bscore && s < bs) => Some((bs, bscore)),
            _ => Some((s, score)),
        };
    }
    best.map(|b| b.0)
        .ok_or_else(|| Error::invalid("bandwidth grid", "every candidate produced a non-finite likelihood"))
}

/// Fold index of each row: a seeded shuffle dealt round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeding::rng(seed));
    let mut out = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        out[i] = pos % folds;
    }
    out
}

/// Plug-in estimate `{h_n >= tau_alpha}` of the minimum volume set.
#[derive(Clone, Debug, PartialEq)]
pub struct KdePluginSet {
    pub kde: KdeModel,
    pub tau: f64,
}

impl IndicatorSet for KdePluginSet {
    fn dim(&self) -> usize {
        self.kde.dim()
    }

    fn contains(&self, x: &[f64]) -> bool {
        self.kde.density_unchecked(x) >= self.tau
    }
}

/// Threshold the KDE at the order statistic of its in-sample values that
/// leaves a fraction `alpha` of the sample inside.
pub fn kde_plugin_set(x: &Array2<f64>, alpha: f64, s: f64) -> Result<KdePluginSet> {
    let kde = KdeModel::new(x, s)?;
    let in_sample: Vec<f64> = (0..kde.samples.nrows())
        .into_par_iter()
        .map(|i| kde.density_unchecked(row(&kde.samples, i)))
        .collect();
    let tau = calibrate_offset(&in_sample, alpha)?;
    Ok(KdePluginSet { kde, tau })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn density_at_single_sample() {
        let kde = KdeModel::new(&array![[1.0, -1.0]], 1.0).unwrap();
        let h = kde_density(&kde, &[1.0, -1.0]).unwrap();
        assert!((h - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert!(kde_density(&kde, &[100.0, 100.0]).unwrap() < 1e-300);
        assert!(kde_density(&kde, &[1.0]).is_err());
    }

    #[test]
    fn log_density_agrees_with_density() {
        let mut rng = seeding::rng(4);
        let x = Array2::from_shape_fn((40, 3), |_| rng.random_range(-1.0..1.0));
        let kde = KdeModel::new(&x, 0.7).unwrap();
        for p in [[0.0, 0.0, 0.0], [0.5, -0.2, 0.9]] {
            let a = kde.density(&p).unwrap().ln();
            let b = kde.log_density(&p).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        // Far away the plain density underflows but the log does not.
        assert!(kde.log_density(&[60.0, 0.0, 0.0]).unwrap().is_finite());
    }

    #[test]
    fn scaling_data_and_bandwidth_scales_density() {
        let mut rng = seeding::rng(5);
        let x = Array2::from_shape_fn((30, 2), |_| rng.random_range(-2.0..2.0));
        let lambda = 3.0;
        let a = KdeModel::new(&x, 0.5).unwrap();
        let b = KdeModel::new(&x.mapv(|v| v * lambda), 0.5 * lambda).unwrap();
        for _ in 0..5 {
            let p = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let q = [p[0] * lambda, p[1] * lambda];
            let ratio = b.density(&q).unwrap() / a.density(&p).unwrap();
            assert!((ratio - lambda.powi(-2)).abs() < 1e-12);
        }
    }

    #[test]
    fn default_grid_endpoints() {
        let g = default_kde_bandwidths();
        assert_eq!(g.len(), 15);
        assert_eq!(g[0], 0.1);
        assert!((g[14] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn cv_single_candidate_and_determinism() {
        let mut rng = seeding::rng(6);
        let x = Array2::from_shape_fn((40, 2), |_| rng.random_range(-1.0..1.0));
        assert_eq!(kde_bandwidth_cv(&x, &[0.7], 4, 1).unwrap(), 0.7);
        assert_eq!(fold_assignment(40, 4, 9), fold_assignment(40, 4, 9));
        assert_ne!(fold_assignment(40, 4, 9), fold_assignment(40, 4, 10));
        assert!(kde_bandwidth_cv(&x.slice(ndarray::s![..7, ..]).to_owned(), &[0.7], 4, 1).is_err());
    }

    #[test]
    fn plugin_in_sample_mass() {
        let mut rng = seeding::rng(7);
        let x = Array2::from_shape_fn((200, 2), |_| rng.random_range(-1.0..1.0));
        for alpha in [0.5, 0.9, 0.95] {
            let set = kde_plugin_set(&x, alpha, 0.3).unwrap();
            let inside = x.outer_iter().filter(|r| set.contains(r.as_slice().unwrap())).count() as f64 / 200.0;
            assert!(inside >= alpha - 1e-12 && inside < alpha + 1.0 / 200.0 + 1e-12);
        }
        let all = kde_plugin_set(&x, 0.999, 0.3).unwrap();
        assert!(x.outer_iter().all(|r| all.contains(r.as_slice().unwrap())));
    }

    #[test]
    fn standard_set_uses_one_minus_alpha() {
        let x = crate::datagen::sample_mixture(&crate::datagen::MixtureSpec::bimodal(2), 300, 2).unwrap();
        let set = standard_ocsvm_set(&x, 0.95, KernelBandwidth::new(1.0).unwrap()).unwrap();
        assert!((set.model.nu() - 0.05).abs() < 1e-15);
        assert!(standard_ocsvm_set(&x, 1.0, KernelBandwidth::new(1.0).unwrap()).is_err());
    }
}
