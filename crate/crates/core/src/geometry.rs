//! Volumes of estimated sets by uniform Monte Carlo sampling over the
//! enclosing box, mass-volume curves and bandwidth selection.
//!
//! Uniform samples are drawn in fixed-size blocks, block `b` coming from
//! substream `b` of the master seed, so a sample is identical whatever the
//! number of worker threads. Sharing one [`UniformSample`] across masses and
//! bandwidths gives common random numbers for every compared set.

use std::io::Write;

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::Ensemble;
use crate::kernel::KernelBandwidth;
use crate::{row, seeding, standard, Error, Result};

/// Volume estimates degrade exponentially with dimension; beyond this the
/// uniform proposal almost never lands in the set.
pub const MAX_VOLUME_DIM: usize = 10;

/// Default number of uniform points per volume estimate.
pub const DEFAULT_MC_SAMPLES: usize = 10_000;

const SAMPLE_BLOCK: usize = 4096;

/// Axis-aligned box `[lower, upper]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperRect {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl HyperRect {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::invalid("box", "needs at least one dimension"));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) {
                return Err(Error::NonFinite { row: 0, column: i });
            }
            if l >= u {
                return Err(Error::DegenerateCoordinate { index: i });
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }
}

/// Bounding box of the rows of `x`, widened by `margin` times the range on
/// each side.
pub fn enclosing_hypercube(x: &Array2<f64>, margin: f64) -> Result<HyperRect> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::invalid("data", "need at least one row and one column"));
    }
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::invalid("margin", format!("must be >= 0, got {margin}")));
    }
    let mut lower = Vec::with_capacity(x.ncols());
    let mut upper = Vec::with_capacity(x.ncols());
    for (j, col) in x.columns().into_iter().enumerate() {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (i, &v) in col.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, column: j });
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo >= hi {
            return Err(Error::DegenerateCoordinate { index: j });
        }
        let pad = margin * (hi - lo);
        lower.push(lo - pad);
        upper.push(hi + pad);
    }
    HyperRect::new(lower, upper)
}

/// A deterministic membership oracle.
pub trait IndicatorSet: Sync {
    fn dim(&self) -> usize;
    fn contains(&self, x: &[f64]) -> bool;
}

impl<T: IndicatorSet + ?Sized> IndicatorSet for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn contains(&self, x: &[f64]) -> bool {
        (**self).contains(x)
    }
}

/// An [`IndicatorSet`] backed by a closure.
pub struct PredicateSet<F> {
    dim: usize,
    predicate: F,
}

impl<F: Fn(&[f64]) -> bool + Sync> PredicateSet<F> {
    pub fn new(dim: usize, predicate: F) -> Self {
        Self { dim, predicate }
    }
}

impl<F: Fn(&[f64]) -> bool + Sync> IndicatorSet for PredicateSet<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn contains(&self, x: &[f64]) -> bool {
        (self.predicate)(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub volume: f64,
    pub std_error: f64,
    pub hits: usize,
    pub samples: usize,
}

impl VolumeEstimate {
    fn from_hits(hits: usize, samples: usize, box_volume: f64) -> Self {
        let p = hits as f64 / samples as f64;
        Self {
            volume: box_volume * p,
            std_error: box_volume * (p * (1.0 - p) / samples as f64).sqrt(),
            hits,
            samples,
        }
    }
}

/// `m` i.i.d. uniform points in a box.
#[derive(Clone, Debug)]
pub struct UniformSample {
    rect: HyperRect,
    points: Array2<f64>,
    seed: u64,
}

impl UniformSample {
    pub fn draw(rect: &HyperRect, m: usize, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("mc samples", "need at least one point"));
        }
        let d = rect.dim();
        if d > MAX_VOLUME_DIM {
            return Err(Error::DimensionTooHigh {
                max: MAX_VOLUME_DIM,
                found: d,
            });
        }
        let blocks = m.div_ceil(SAMPLE_BLOCK);
        let chunks: Vec<Vec<f64>> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let count = SAMPLE_BLOCK.min(m - b * SAMPLE_BLOCK);
                let mut rng = seeding::substream(seed, b as u64);
                let mut out = Vec::with_capacity(count * d);
                for _ in 0..count {
                    for (l, u) in rect.lower.iter().zip(&rect.upper) {
                        let t: f64 = rng.random();
                        out.push(l + t * (u - l));
                    }
                }
                out
            })
            .collect();
        let flat: Vec<f64> = chunks.into_iter().flatten().collect();
        Ok(Self {
            rect: rect.clone(),
            points: Array2::from_shape_vec((m, d), flat).expect("shape"),
            seed,
        })
    }

    pub fn rect(&self) -> &HyperRect {
        &self.rect
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.rect.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.rect.dim(),
                found: d,
            });
        }
        Ok(())
    }

    pub fn indicators<S: IndicatorSet + ?Sized>(&self, set: &S) -> Result<Vec<bool>> {
        self.check_dim(set.dim())?;
        Ok((0..self.len())
            .into_par_iter()
            .map(|i| set.contains(row(&self.points, i)))
            .collect())
    }

    pub fn estimate_from_indicators(&self, inside: &[bool]) -> VolumeEstimate {
        let hits = inside.iter().filter(|&&b| b).count();
        VolumeEstimate::from_hits(hits, self.len(), self.rect.volume())
    }

    pub fn volume<S: IndicatorSet + ?Sized>(&self, set: &S) -> Result<VolumeEstimate> {
        Ok(self.estimate_from_indicators(&self.indicators(set)?))
    }

    pub fn symmetric_difference<A, B>(&self, a: &A, b: &B) -> Result<VolumeEstimate>
    where
        A: IndicatorSet + ?Sized,
        B: IndicatorSet + ?Sized,
    {
        let ia = self.indicators(a)?;
        let ib = self.indicators(b)?;
        let diff: Vec<bool> = ia.iter().zip(&ib).map(|(x, y)| x != y).collect();
        Ok(self.estimate_from_indicators(&diff))
    }

    /// Volume at each mass, every set evaluated on this sample.
    pub fn mass_volume_curve(&self, sets: &[(f64, &dyn IndicatorSet)]) -> Result<MassVolumeCurve> {
        let points = sets
            .iter()
            .map(|(beta, set)| self.volume(*set).map(|v| (*beta, v.volume)))
            .collect::<Result<Vec<_>>>()?;
        MassVolumeCurve::new(points)
    }
}

pub fn mc_volume<S: IndicatorSet + ?Sized>(set: &S, rect: &HyperRect, m: usize, seed: u64) -> Result<VolumeEstimate> {
    UniformSample::draw(rect, m, seed)?.volume(set)
}

/// Volume of `A xor B`, both indicators evaluated on one shared sample.
pub fn symmetric_difference_volume<A, B>(a: &A, b: &B, rect: &HyperRect, m: usize, seed: u64) -> Result<VolumeEstimate>
where
    A: IndicatorSet + ?Sized,
    B: IndicatorSet + ?Sized,
{
    UniformSample::draw(rect, m, seed)?.symmetric_difference(a, b)
}

/// Trapezoidal area under a piecewise-linear curve through `points`
/// (sorted by abscissa; repeated abscissae contribute nothing).
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum()
}

/// Estimated volume against mass, with its area (AMV).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassVolumeCurve {
    points: Vec<(f64, f64)>,
    amv: f64,
}

impl MassVolumeCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("mass-volume curve", "need at least two masses"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("mass-volume curve", "masses must be strictly increasing"));
        }
        if points.iter().any(|p| !(p.1 >= 0.0)) {
            return Err(Error::invalid("mass-volume curve", "volumes must be nonnegative"));
        }
        let amv = trapezoid_area(&points);
        Ok(Self { points, amv })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn amv(&self) -> f64 {
        self.amv
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "beta,volume")?;
        for (b, v) in &self.points {
            writeln!(w, "{b},{v}")?;
        }
        Ok(())
    }
}

/// Metadata written next to an exported curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSidecar {
    pub amv: f64,
    pub sigma: f64,
    pub m: usize,
    pub seed: u64,
}

/// Curve of the sets `sets[i].1` at masses `sets[i].0` from one shared
/// sample of `m` uniform points.
pub fn mass_volume_curve(
    sets: &[(f64, &dyn IndicatorSet)],
    rect: &HyperRect,
    m: usize,
    seed: u64,
) -> Result<MassVolumeCurve> {
    UniformSample::draw(rect, m, seed)?.mass_volume_curve(sets)
}

/// Curve of an ensemble over its curve grid. Member scores are computed once
/// per sample point and reused for every mass.
pub fn ensemble_mass_volume_curve(e: &Ensemble, sample: &UniformSample) -> Result<MassVolumeCurve> {
    sample.check_dim(e.feature_dim())?;
    let scores = e.member_scores(sample.points())?;
    let points = e
        .grid()
        .curve()
        .iter()
        .map(|&beta| {
            let agg = e.aggregate(&scores, beta)?;
            let hits = agg.iter().filter(|&&f| f >= 0.0).count();
            Ok((beta, VolumeEstimate::from_hits(hits, sample.len(), sample.rect.volume()).volume))
        })
        .collect::<Result<Vec<_>>>()?;
    MassVolumeCurve::new(points)
}

/// Bandwidth with the smallest AMV; ties go to the larger bandwidth.
pub fn select_bandwidth(curves: &[(KernelBandwidth, MassVolumeCurve)]) -> Result<KernelBandwidth> {
    curves
        .iter()
        .min_by(|a, b| a.1.amv.total_cmp(&b.1.amv).then(b.0.sigma().total_cmp(&a.0.sigma())))
        .map(|c| c.0)
        .ok_or_else(|| Error::invalid("bandwidth candidates", "need at least one"))
}

/// Fraction of the rows of `x` inside `set`.
pub fn empirical_mass<S: IndicatorSet + ?Sized>(set: &S, x: &Array2<f64>) -> Result<f64> {
    if x.ncols() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            found: x.ncols(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::invalid("data", "need at least one row"));
    }
    let x = standard(x);
    let inside = (0..x.nrows())
        .into_par_iter()
        .filter(|&i| set.contains(row(&x, i)))
        .count();
    Ok(inside as f64 / x.nrows() as f64)
}
