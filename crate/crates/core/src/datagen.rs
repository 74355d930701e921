//! Synthetic data, ground-truth minimum volume sets and preprocessing.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::calibration::{offset_from_sorted, sort_scores};
use crate::geometry::{HyperRect, IndicatorSet};
use crate::{io, seeding, Error, Result};

/// Isotropic unit-variance Gaussian component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
}

/// Uniform component over a box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformComponent {
    pub weight: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Mixture of identity-covariance Gaussians, optionally contaminated by a
/// uniform component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub components: Vec<GaussianComponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform: Option<UniformComponent>,
}

impl MixtureSpec {
    /// `1/2 N(2.5 * 1_d, I) + 1/2 N(7.5 * 1_d, I)`.
    pub fn bimodal(d: usize) -> Self {
        Self {
            components: vec![
                GaussianComponent {
                    weight: 0.5,
                    mean: vec![2.5; d],
                },
                GaussianComponent {
                    weight: 0.5,
                    mean: vec![7.5; d],
                },
            ],
            uniform: None,
        }
    }

    /// The two-dimensional bimodal mixture with 5% uniform outliers on
    /// `[-2, 12]^2`.
    pub fn bimodal_contaminated() -> Self {
        let mut spec = Self::bimodal(2);
        for c in &mut spec.components {
            c.weight = 0.475;
        }
        spec.uniform = Some(UniformComponent {
            weight: 0.05,
            lower: vec![-2.0, -2.0],
            upper: vec![12.0, 12.0],
        });
        spec
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.components
            .first()
            .map(|c| c.mean.len())
            .or_else(|| self.uniform.as_ref().map(|u| u.lower.len()))
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::invalid("mixture", "needs at least one component of dimension >= 1"));
        }
        let mut total = 0.0;
        for c in &self.components {
            if !(c.weight > 0.0) {
                return Err(Error::invalid("mixture", "weights must be positive"));
            }
            if c.mean.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: c.mean.len(),
                });
            }
            total += c.weight;
        }
        if let Some(u) = &self.uniform {
            if !(u.weight > 0.0) {
                return Err(Error::invalid("mixture", "weights must be positive"));
            }
            let rect = HyperRect::new(u.lower.clone(), u.upper.clone())?;
            if rect.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: rect.dim(),
                });
            }
            total += u.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("mixture", format!("weights sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        let d = x.len() as f64;
        let norm = (2.0 * std::f64::consts::PI).powf(-d / 2.0);
        let mut h: f64 = self
            .components
            .iter()
            .map(|c| c.weight * norm * (-0.5 * crate::kernel::squared_distance(x, &c.mean)).exp())
            .sum();
        if let Some(u) = &self.uniform {
            let inside = x
                .iter()
                .zip(u.lower.iter().zip(&u.upper))
                .all(|(v, (l, hi))| *l <= *v && *v <= *hi);
            if inside {
                let vol: f64 = u.lower.iter().zip(&u.upper).map(|(l, hi)| hi - l).product();
                h += u.weight / vol;
            }
        }
        h
    }
}

pub fn mixture_density(spec: &MixtureSpec, x: &[f64]) -> f64 {
    spec.density(x)
}

pub fn sample_mixture(spec: &MixtureSpec, n: usize, seed: u64) -> Result<Array2<f64>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let d = spec.dim();
    let mut rng = seeding::rng(seed);
    let mut out = Vec::with_capacity(n * d);
    for _ in 0..n {
        let mut u: f64 = rng.random();
        let mut drawn = false;
        for c in &spec.components {
            if u < c.weight {
                for m in &c.mean {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(m + z);
                }
                drawn = true;
                break;
            }
            u -= c.weight;
        }
        if !drawn {
            match &spec.uniform {
                Some(uc) => {
                    for (l, h) in uc.lower.iter().zip(&uc.upper) {
                        let t: f64 = rng.random();
                        out.push(l + t * (h - l));
                    }
                }
                // Rounding left u just above the last Gaussian weight.
                None => {
                    let c = spec.components.last().expect("validated");
                    for m in &c.mean {
                        let z: f64 = rng.sample(StandardNormal);
                        out.push(m + z);
                    }
                }
            }
        }
    }
    Ok(Array2::from_shape_vec((n, d), out).expect("shape"))
}

/// True minimum volume set `{h >= tau}` of a mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSet {
    pub spec: MixtureSpec,
    pub tau: f64,
    pub alpha: f64,
}

impl IndicatorSet for GroundTruthSet {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn contains(&self, x: &[f64]) -> bool {
        self.spec.density(x) >= self.tau
    }
}

/// Level `tau` such that `P(h(X) >= tau) = alpha`, estimated as the
/// `(1 - alpha)` empirical quantile of `h` over `m_quantile` draws.
pub fn true_mv_level(spec: &MixtureSpec, alpha: f64, m_quantile: usize, seed: u64) -> Result<GroundTruthSet> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    let sample = sample_mixture(spec, m_quantile, seed)?;
    let mut h: Vec<f64> = sample
        .outer_iter()
        .map(|r| spec.density(r.as_slice().expect("standard layout")))
        .collect();
    sort_scores(&mut h)?;
    let tau = offset_from_sorted(&h, alpha)?;
    Ok(GroundTruthSet {
        spec: spec.clone(),
        tau,
        alpha,
    })
}

/// Default noise scale of [`two_moons`].
pub const TWO_MOONS_NOISE: f64 = 0.1;

/// Two interleaving unit half-circles: the upper arc centred at the origin
/// and the lower arc centred at `(1, 0.5)`, with `n/2` evenly spaced points
/// on the first and the rest on the second, shuffled, plus isotropic
/// Gaussian noise of scale `noise`.
pub fn two_moons(n: usize, noise: f64, seed: u64) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::invalid("noise", format!("must be >= 0, got {noise}")));
    }
    let n_outer = n / 2;
    let n_inner = n - n_outer;
    let angle = |i: usize, count: usize| {
        if count <= 1 {
            0.0
        } else {
            std::f64::consts::PI * i as f64 / (count - 1) as f64
        }
    };
    let mut rows: Vec<[f64; 2]> = Vec::with_capacity(n);
    for i in 0..n_outer {
        let t = angle(i, n_outer);
        rows.push([t.cos(), t.sin()]);
    }
    for i in 0..n_inner {
        let t = angle(i, n_inner);
        rows.push([1.0 - t.cos(), 0.5 - t.sin()]);
    }
    let mut rng = seeding::rng(seed);
    rows.shuffle(&mut rng);
    let mut out = Vec::with_capacity(2 * n);
    for r in rows {
        for v in r {
            let z: f64 = rng.sample(StandardNormal);
            out.push(v + noise * z);
        }
    }
    Ok(Array2::from_shape_vec((n, 2), out).expect("shape"))
}

/// Column-wise centring and scaling to unit (population) variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardization {
    pub fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(x)?;
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| (v - self.means[j]) / self.scales[j]);
        }
        Ok(out.as_standard_layout().into_owned())
    }

    pub fn invert(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(x)?;
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| v * self.scales[j] + self.means[j]);
        }
        Ok(out.as_standard_layout().into_owned())
    }

    fn check(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                found: x.ncols(),
            });
        }
        Ok(())
    }
}

/// Standardize the columns of `x`; returns the data and the transform.
pub fn standardize(x: &Array2<f64>) -> Result<(Array2<f64>, Standardization)> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::invalid("data", "need at least one row"));
    }
    let mut means = Vec::with_capacity(x.ncols());
    let mut scales = Vec::with_capacity(x.ncols());
    for (j, col) in x.columns().into_iter().enumerate() {
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        if !(var > 0.0) {
            return Err(Error::ZeroVariance { index: j });
        }
        means.push(mean);
        scales.push(var.sqrt());
    }
    let t = Standardization { means, scales };
    Ok((t.apply(x)?, t))
}

const BOSTON_CSV: &str = include_str!("../data/boston_housing.csv");

/// Boston housing data (506 rows, 14 columns: the 13 features and MEDV).
pub fn boston_housing() -> Result<io::CsvMatrix> {
    io::read_csv_matrix(BOSTON_CSV.as_bytes())
}

/// The two Boston housing features `RM` (average rooms per dwelling) and
/// `LSTAT` (percentage lower status of the population).
pub fn boston_rooms_lstat() -> Result<Array2<f64>> {
    boston_housing()?.columns(&["RM", "LSTAT"])
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn density_at_first_mean() {
        // 0.5 / (2 pi) + 0.5 / (2 pi) * exp(-25), evaluated independently.
        let h = MixtureSpec::bimodal(2).density(&[2.5, 2.5]);
        let expected = 0.5 / (2.0 * std::f64::consts::PI) * (1.0 + (-25.0f64).exp());
        assert!((h - expected).abs() < 1e-15);
        assert!((h - 0.0796).abs() < 1e-4);
    }

    #[test]
    fn density_symmetric_at_midpoint() {
        let spec = MixtureSpec::bimodal(2);
        let x = [5.0, 5.0];
        let a = 0.5 / (2.0 * std::f64::consts::PI) * (-0.5 * 12.5f64).exp();
        assert!((spec.density(&x) - 2.0 * a).abs() < 1e-18);
    }

    #[test]
    fn contamination_adds_uniform_level() {
        let spec = MixtureSpec::bimodal_contaminated();
        let x = [10.0, -1.0];
        let gauss: f64 = spec
            .components
            .iter()
            .map(|c| c.weight / (2.0 * std::f64::consts::PI) * (-0.5 * crate::kernel::squared_distance(&x, &c.mean)).exp())
            .sum();
        assert!((spec.density(&x) - gauss - 0.05 / 196.0).abs() < 1e-15);
        let outside = [13.0, 0.0];
        let mut no_uniform = spec.clone();
        no_uniform.uniform = None;
        assert_eq!(spec.density(&outside), no_uniform.density(&outside));
    }

    #[test]
    fn rejects_bad_weights() {
        let mut spec = MixtureSpec::bimodal(2);
        spec.components[0].weight = 0.6;
        assert!(spec.validate().is_err());
        assert!(MixtureSpec::from_json(r#"{"components":[{"weight":1.0,"mean":[0.0]}]}"#).is_ok());
        assert!(MixtureSpec::from_json(r#"{"components":[{"weight":1.0,"mean":[0.0]}],"uniform":{"weight":0.1,"lower":[0],"upper":[1]}}"#).is_err());
    }

    #[test]
    fn component_balance() {
        let x = sample_mixture(&MixtureSpec::bimodal(2), 1000, 3).unwrap();
        let first = x.outer_iter().filter(|r| r[0] + r[1] < 10.0).count();
        assert!((first as f64 / 1000.0 - 0.5).abs() < 0.05);
    }

    #[test]
    fn contaminated_outlier_share() {
        let spec = MixtureSpec::bimodal_contaminated();
        let n = 20_000;
        let x = sample_mixture(&spec, n, 5).unwrap();
        // Uniform draws far from both means: estimate the uniform share from the
        // region at distance > 5 of both means, whose Gaussian mass is negligible.
        let far = x
            .outer_iter()
            .filter(|r| {
                let r = r.as_slice().unwrap();
                spec.components.iter().all(|c| crate::kernel::squared_distance(r, &c.mean) > 25.0)
            })
            .count() as f64
            / n as f64;
        // Area of C outside both radius-5 disks (the disks overlap C partially).
        let probe = crate::geometry::mc_volume(
            &crate::geometry::PredicateSet::new(2, |r: &[f64]| {
                spec.components.iter().all(|c| crate::kernel::squared_distance(r, &c.mean) > 25.0)
            }),
            &HyperRect::new(vec![-2.0, -2.0], vec![12.0, 12.0]).unwrap(),
            200_000,
            1,
        )
        .unwrap();
        let expected = 0.05 * probe.volume / 196.0;
        assert!((far - expected).abs() < 0.006, "{far} vs {expected}");
    }

    #[test]
    fn moons_without_noise_lie_on_arcs() {
        let x = two_moons(2000, 0.0, 1).unwrap();
        let mut upper = 0;
        for r in x.outer_iter() {
            let (a, b) = (r[0], r[1]);
            let d_upper = ((a * a + b * b).sqrt() - 1.0).abs();
            let d_lower = (((a - 1.0).powi(2) + (b - 0.5).powi(2)).sqrt() - 1.0).abs();
            if d_upper < 1e-12 && b >= -1e-12 {
                upper += 1;
            } else {
                assert!(d_lower < 1e-12 && b <= 0.5 + 1e-12, "({a}, {b})");
            }
        }
        assert_eq!(upper, 1000);
        let (lo, hi) = x.columns().into_iter().fold((vec![], vec![]), |(mut lo, mut hi), c| {
            lo.push(c.iter().cloned().fold(f64::INFINITY, f64::min));
            hi.push(c.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            (lo, hi)
        });
        assert!((lo[0] + 1.0).abs() < 1e-12 && (hi[0] - 2.0).abs() < 1e-12);
        // pi/2 is not on an even grid of 1000 points.
        assert!((lo[1] + 0.5).abs() < 1e-5 && (hi[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn two_point_standardization() {
        let (z, t) = standardize(&array![[0.0, 5.0], [2.0, 7.0]]).unwrap();
        assert_eq!(z, array![[-1.0, -1.0], [1.0, 1.0]]);
        assert_eq!(t.means, vec![1.0, 6.0]);
    }

    #[test]
    fn zero_variance_column() {
        assert!(matches!(
            standardize(&array![[1.0, 3.0], [2.0, 3.0]]),
            Err(Error::ZeroVariance { index: 1 })
        ));
    }

    #[test]
    fn standardize_round_trip_and_idempotence() {
        let mut rng = seeding::rng(2);
        let x = Array2::from_shape_fn((50, 3), |_| rng.random_range(-10.0..10.0));
        let (z, t) = standardize(&x).unwrap();
        for col in z.columns() {
            assert!(col.mean().unwrap().abs() < 1e-10);
            assert!((col.mapv(|v| v * v).mean().unwrap() - 1.0).abs() < 1e-10);
        }
        let back = t.invert(&z).unwrap();
        assert!(back.iter().zip(x.iter()).all(|(a, b)| (a - b).abs() < 1e-10));
        let (zz, tt) = standardize(&z).unwrap();
        assert!(zz.iter().zip(z.iter()).all(|(a, b)| (a - b).abs() < 1e-10));
        assert!(tt.scales.iter().all(|s| (s - 1.0).abs() < 1e-10));
    }

    #[test]
    fn boston_columns() {
        let b = boston_housing().unwrap();
        assert_eq!(b.data.dim(), (506, 14));
        let two = boston_rooms_lstat().unwrap();
        assert_eq!(two.dim(), (506, 2));
        assert_eq!(two.row(0).to_vec(), vec![6.575, 4.98]);
    }
}
