//! Offset calibration on a held-out split.
//!
//! The decision function is learnt on the training part of a random split.
//! For each target mass `beta` the offset is then chosen on the test part so
//! that `{f >= rho}` holds a fraction `beta` of the test points. Because the
//! empirical mass is a step function of `rho`, the offset is an order
//! statistic of the test scores rather than the output of a numeric search.
//!
//! Scores and offsets are stored relative to the solver offset, as
//! `f - rho_nu`. The sets are the same as on the raw scale, but points the
//! kernel cannot reach all tie at `-rho_nu` instead of being ordered by
//! values many orders of magnitude below `rho_nu`.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::kernel::{squared_distance_matrix, KernelBandwidth};
use crate::ocsvm::{fit_with_distances, OcsvmConfig, OcsvmModel};
use crate::{seeding, standard, Error, Result};

/// Tolerance when matching a requested mass against grid values.
pub const MASS_MATCH_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::invalid(
                "train_fraction",
                format!("must lie in (0, 1), got {train_fraction}"),
            ));
        }
        Ok(Self { train_fraction, seed })
    }

    pub fn with_seed(seed: u64) -> Self {
        Self {
            train_fraction: Self::DEFAULT_TRAIN_FRACTION,
            seed,
        }
    }

    /// `round(train_fraction * n)`, validated to leave both parts non-empty.
    pub fn train_size(&self, n: usize) -> Result<usize> {
        if n < 5 {
            return Err(Error::invalid("data", format!("need at least 5 rows to split, got {n}")));
        }
        let n_train = (self.train_fraction * n as f64).round() as usize;
        if n_train < 1 || n_train > n - 1 {
            return Err(Error::invalid(
                "train_fraction",
                format!("{} of {n} rows leaves an empty part", self.train_fraction),
            ));
        }
        Ok(n_train)
    }
}

/// Seeded uniform partition of `0..n` into sorted train and test indices.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_train = spec.train_size(n)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeding::rng(spec.seed));
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(x: &Array2<f64>, spec: &SplitSpec) -> Result<(Array2<f64>, Array2<f64>)> {
    let (train, test) = split_indices(x.nrows(), spec)?;
    Ok((select_rows(x, &train), select_rows(x, &test)))
}

pub(crate) fn select_rows(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx).as_standard_layout().into_owned()
}

/// Target masses: `count` equally spaced values on `[alpha - c, alpha + c]`
/// (the curve grid), plus `alpha` and any extra targets that also receive
/// calibrated offsets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassGrid {
    alpha: f64,
    c: f64,
    count: usize,
    curve: Vec<f64>,
    masses: Vec<f64>,
}

impl Default for MassGrid {
    fn default() -> Self {
        Self::new(0.95, 0.04, 10).expect("default grid is valid")
    }
}

impl MassGrid {
    pub fn new(alpha: f64, c: f64, count: usize) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid("c", format!("must be > 0, got {c}")));
        }
        if count == 0 {
            return Err(Error::invalid("mass grid count", "must be at least 1"));
        }
        let (lo, hi) = (alpha - c, alpha + c);
        if !(lo > 0.0 && hi < 1.0) {
            return Err(Error::invalid(
                "mass grid",
                format!("[{lo}, {hi}] must lie inside (0, 1)"),
            ));
        }
        let curve: Vec<f64> = if count == 1 {
            vec![alpha]
        } else {
            (0..count)
                .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                .collect()
        };
        let mut grid = Self {
            alpha,
            c,
            count,
            masses: curve.clone(),
            curve,
        };
        grid.insert(alpha);
        Ok(grid)
    }

    /// Also calibrate offsets for `targets`, outside the curve grid if needed.
    pub fn with_targets(mut self, targets: &[f64]) -> Result<Self> {
        for &t in targets {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::invalid("target mass", format!("must lie in (0, 1), got {t}")));
            }
            self.insert(t);
        }
        Ok(self)
    }

    fn insert(&mut self, beta: f64) {
        if self.position(beta).is_none() {
            self.masses.push(beta);
            self.masses.sort_by(f64::total_cmp);
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Equally spaced masses used for the mass-volume curve.
    pub fn curve(&self) -> &[f64] {
        &self.curve
    }

    /// Every mass with a calibrated offset, sorted increasingly.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn position(&self, beta: f64) -> Option<usize> {
        self.masses
            .iter()
            .position(|&m| (m - beta).abs() <= MASS_MATCH_TOLERANCE)
    }

    pub fn index_of(&self, beta: f64) -> Result<usize> {
        self.position(beta).ok_or_else(|| Error::MassNotInGrid {
            beta,
            available: self.masses.clone(),
        })
    }
}

/// Offset `rho` giving the smallest achievable test mass of at least `beta`.
///
/// With `n` scores sorted increasingly this is the `k`-th smallest score for
/// `k = floor((1 - beta) n) + 1`; the set `{f >= rho}` then holds at least
/// `beta` of the scores and, for distinct scores, less than `beta + 1/n`.
pub fn calibrate_offset(scores: &[f64], beta: f64) -> Result<f64> {
    let mut sorted = scores.to_vec();
    sort_scores(&mut sorted)?;
    offset_from_sorted(&sorted, beta)
}

pub(crate) fn sort_scores(scores: &mut [f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::invalid("scores", "need at least one score"));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::NonFinite { row: i, column: 0 });
    }
    scores.sort_by(f64::total_cmp);
    Ok(())
}

/// Order-statistic offset on scores already sorted increasingly.
pub fn offset_from_sorted(sorted: &[f64], beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid("beta", format!("must lie in (0, 1), got {beta}")));
    }
    if sorted.is_empty() {
        return Err(Error::invalid("scores", "need at least one score"));
    }
    let n = sorted.len();
    // The slack keeps e.g. (1 - 0.9) * 10 = 0.9999999999999998 from flooring to 0.
    let below = ((1.0 - beta) * n as f64 + 1e-9).floor() as usize;
    Ok(sorted[below.min(n - 1)])
}

/// Raised when the training fit leaves too few outliers for the grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InsufficientOutliers {
    /// Empirical training mass of `{f >= rho_nu}`.
    pub train_mass: f64,
    /// Largest admissible training mass, `alpha - c`.
    pub max_train_mass: f64,
    pub nu: f64,
}

impl std::fmt::Display for InsufficientOutliers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "training mass {:.4} exceeds alpha - c = {:.4}; consider a larger nu than {}",
            self.train_mass, self.max_train_mass, self.nu
        )
    }
}

/// A one-class SVM with offsets calibrated on its test split.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibratedModel {
    model: OcsvmModel,
    test_scores: Vec<f64>,
    offsets: Vec<(f64, f64)>,
    split: SplitSpec,
    warning: Option<InsufficientOutliers>,
}

impl CalibratedModel {
    pub fn model(&self) -> &OcsvmModel {
        &self.model
    }

    /// Centered decision values `f - rho_nu` on the test split, sorted increasingly.
    pub fn test_scores(&self) -> &[f64] {
        &self.test_scores
    }

    /// `(beta, rho_beta - rho_nu)` pairs sorted by `beta`.
    pub fn offsets(&self) -> &[(f64, f64)] {
        &self.offsets
    }

    pub fn split(&self) -> SplitSpec {
        self.split
    }

    pub fn warning(&self) -> Option<InsufficientOutliers> {
        self.warning
    }

    pub fn offset(&self, beta: f64) -> Result<f64> {
        self.offsets
            .iter()
            .find(|(b, _)| (b - beta).abs() <= MASS_MATCH_TOLERANCE)
            .map(|&(_, r)| r)
            .ok_or_else(|| Error::MassNotInGrid {
                beta,
                available: self.offsets.iter().map(|&(b, _)| b).collect(),
            })
    }

    /// Fraction of test points with `f >= rho_beta`.
    pub fn test_mass(&self, beta: f64) -> Result<f64> {
        let rho = self.offset(beta)?;
        let inside = self.test_scores.iter().filter(|&&s| s >= rho).count();
        Ok(inside as f64 / self.test_scores.len() as f64)
    }
}

/// Fit on the training split and calibrate every mass of `grid` on the test split.
pub fn calibrate(
    x: &Array2<f64>,
    nu: f64,
    sigma: KernelBandwidth,
    grid: &MassGrid,
    spec: SplitSpec,
) -> Result<CalibratedModel> {
    let x = standard(x);
    let (train_idx, test_idx) = split_indices(x.nrows(), &spec)?;
    let train = select_rows(&x, &train_idx);
    let test = select_rows(&x, &test_idx);
    let d2 = squared_distance_matrix(&train);
    let config = OcsvmConfig::new(nu, sigma)?;
    calibrate_on_split(&train, &d2, &test, &config, grid, spec)
}

/// Calibration on an explicit split; `d2` holds the squared distances of `train`.
pub(crate) fn calibrate_on_split(
    train: &Array2<f64>,
    d2: &Array2<f64>,
    test: &Array2<f64>,
    config: &OcsvmConfig,
    grid: &MassGrid,
    spec: SplitSpec,
) -> Result<CalibratedModel> {
    let model = fit_with_distances(train, d2, config)?;

    let train_scores = model.centered_values(train)?;
    let inside = train_scores.iter().filter(|&&s| s >= 0.0).count();
    let train_mass = inside as f64 / train_scores.len() as f64;
    let max_train_mass = grid.alpha() - grid.c();
    let warning = (train_mass > max_train_mass).then(|| {
        let w = InsufficientOutliers {
            train_mass,
            max_train_mass,
            nu: config.nu,
        };
        log::warn!("sigma = {}: {w}", config.sigma);
        w
    });

    let mut test_scores = model.centered_values(test)?;
    sort_scores(&mut test_scores)?;
    let offsets = grid
        .masses()
        .iter()
        .map(|&beta| offset_from_sorted(&test_scores, beta).map(|rho| (beta, rho)))
        .collect::<Result<Vec<_>>>()?;

    Ok(CalibratedModel {
        model,
        test_scores,
        offsets,
        split: spec,
        warning,
    })
}

// JSON: the model's fields plus offsets, split seed and train fraction.
#[derive(Serialize, Deserialize)]
struct CalibratedRepr {
    #[serde(flatten)]
    model: OcsvmModel,
    #[serde(serialize_with = "serialize_offsets", deserialize_with = "deserialize_offsets")]
    offsets: Vec<(f64, f64)>,
    split_seed: u64,
    train_fraction: f64,
    test_scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    warning: Option<InsufficientOutliers>,
}

fn serialize_offsets<S: Serializer>(offsets: &[(f64, f64)], s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut map = s.serialize_map(Some(offsets.len()))?;
    for (beta, rho) in offsets {
        map.serialize_entry(&beta.to_string(), rho)?;
    }
    map.end()
}

fn deserialize_offsets<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<(f64, f64)>, D::Error> {
    let raw = std::collections::BTreeMap::<String, f64>::deserialize(d)?;
    let mut out = raw
        .into_iter()
        .map(|(k, v)| {
            k.parse::<f64>()
                .map(|b| (b, v))
                .map_err(|e| serde::de::Error::custom(format!("bad mass key {k:?}: {e}")))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

impl Serialize for CalibratedModel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CalibratedRepr {
            model: self.model.clone(),
            offsets: self.offsets.clone(),
            split_seed: self.split.seed,
            train_fraction: self.split.train_fraction,
            test_scores: self.test_scores.clone(),
            warning: self.warning,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CalibratedModel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = CalibratedRepr::deserialize(d)?;
        Ok(Self {
            model: r.model,
            offsets: r.offsets,
            split: SplitSpec {
                train_fraction: r.train_fraction,
                seed: r.split_seed,
            },
            test_scores: r.test_scores,
            warning: r.warning,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ten_rows_split_eight_two() {
        let x = Array2::from_shape_fn((10, 2), |(i, j)| (i * 2 + j) as f64);
        let (a, b) = split(&x, &SplitSpec::with_seed(3)).unwrap();
        assert_eq!((a.nrows(), b.nrows()), (8, 2));
        let (a2, b2) = split(&x, &SplitSpec::with_seed(3)).unwrap();
        assert_eq!((a, b), (a2, b2));
    }

    #[test]
    fn split_needs_five_rows() {
        assert!(split_indices(4, &SplitSpec::with_seed(0)).is_err());
        assert!(split_indices(5, &SplitSpec::new(0.99, 0).unwrap()).is_err());
        assert!(SplitSpec::new(1.0, 0).is_err());
    }

    #[test]
    fn split_is_a_partition() {
        let (train, test) = split_indices(37, &SplitSpec::with_seed(8)).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..37).collect::<Vec<_>>());
    }

    #[test]
    fn order_statistic_on_one_to_ten() {
        let scores: Vec<f64> = (1..=10).map(f64::from).collect();
        let rho = calibrate_offset(&scores, 0.9).unwrap();
        assert_eq!(rho, 2.0);
        assert_eq!(scores.iter().filter(|&&s| s >= rho).count(), 9);
        assert_eq!(calibrate_offset(&scores, 1e-6).unwrap(), 10.0);
        assert_eq!(calibrate_offset(&scores, 0.999).unwrap(), 1.0);
    }

    #[test]
    fn default_grid() {
        let g = MassGrid::default();
        assert_eq!(g.curve().len(), 10);
        assert!((g.curve()[0] - 0.91).abs() < 1e-12 && (g.curve()[9] - 0.99).abs() < 1e-12);
        assert_eq!(g.masses().len(), 11);
        assert!(g.position(0.95).is_some());
        let odd = MassGrid::new(0.95, 0.04, 9).unwrap();
        assert_eq!(odd.masses().len(), 9);
        assert!(MassGrid::new(0.98, 0.04, 10).is_err());
        assert!(matches!(g.index_of(0.5), Err(Error::MassNotInGrid { .. })));
    }

    #[test]
    fn offset_rejects_bad_input() {
        assert!(calibrate_offset(&[], 0.5).is_err());
        assert!(calibrate_offset(&[1.0], 1.0).is_err());
        assert!(calibrate_offset(&[1.0, f64::NAN], 0.5).is_err());
    }

    proptest! {
        #[test]
        fn mass_contract(
            scores in proptest::collection::hash_set(-1_000_000i64..1_000_000, 1..200),
            beta in 0.01f64..0.99,
        ) {
            let scores: Vec<f64> = scores.into_iter().map(|v| v as f64 / 1000.0).collect();
            let n = scores.len() as f64;
            let rho = calibrate_offset(&scores, beta).unwrap();
            let mass = scores.iter().filter(|&&s| s >= rho).count() as f64 / n;
            prop_assert!(mass >= beta - 1e-12);
            prop_assert!(mass < beta + 1.0 / n + 1e-12);
        }

        #[test]
        fn equivariant_under_shift_and_scale(
            scores in proptest::collection::vec(-10.0f64..10.0, 1..100),
            beta in 0.01f64..0.99,
            shift in -5.0f64..5.0,
            scale in 0.1f64..10.0,
        ) {
            let rho = calibrate_offset(&scores, beta).unwrap();
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            let scaled: Vec<f64> = scores.iter().map(|s| s * scale).collect();
            prop_assert_eq!(calibrate_offset(&shifted, beta).unwrap(), rho + shift);
            prop_assert_eq!(calibrate_offset(&scaled, beta).unwrap(), rho * scale);
        }

        #[test]
        fn antitone_in_beta(
            scores in proptest::collection::vec(-10.0f64..10.0, 1..100),
            a in 0.01f64..0.99,
            b in 0.01f64..0.99,
        ) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(calibrate_offset(&scores, lo).unwrap() >= calibrate_offset(&scores, hi).unwrap());
        }
    }
}
