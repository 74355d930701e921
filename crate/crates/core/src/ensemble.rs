//! Aggregation of calibrated models fit on independent train/test splits.
//!
//! The aggregated score at mass `beta` is
//! `F(x) = (1/B) sum_b (f_b(x) - rho_b(beta))` and the estimated set is
//! `{F >= 0}`. Offsets decrease with `beta` for every member, so the sets are
//! nested: a larger mass always gives a superset.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate_on_split, select_rows, split_indices, CalibratedModel, MassGrid, SplitSpec};
use crate::kernel::{squared_distance_matrix, KernelBandwidth};
use crate::ocsvm::OcsvmConfig;
use crate::{row, standard, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    #[serde(rename = "B")]
    size: usize,
    grid: MassGrid,
    members: Vec<CalibratedModel>,
}

impl Ensemble {
    /// Assemble members calibrated with a common bandwidth, `nu` and grid.
    pub fn from_members(members: Vec<CalibratedModel>, grid: MassGrid) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::invalid("ensemble", "needs at least one member"))?;
        let (sigma, nu, dim) = (first.model().sigma(), first.model().nu(), first.model().feature_dim());
        for m in &members {
            if m.model().sigma() != sigma || m.model().nu() != nu || m.model().feature_dim() != dim {
                return Err(Error::invalid("ensemble", "members must share sigma, nu and dimension"));
            }
            for &beta in grid.masses() {
                m.offset(beta)?;
            }
        }
        Ok(Self {
            size: members.len(),
            grid,
            members,
        })
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn members(&self) -> &[CalibratedModel] {
        &self.members
    }

    pub fn grid(&self) -> &MassGrid {
        &self.grid
    }

    pub fn sigma(&self) -> KernelBandwidth {
        self.members[0].model().sigma()
    }

    pub fn nu(&self) -> f64 {
        self.members[0].model().nu()
    }

    pub fn feature_dim(&self) -> usize {
        self.members[0].model().feature_dim()
    }

    /// Member offsets at `beta`, in member order.
    pub fn offsets_at(&self, beta: f64) -> Result<Vec<f64>> {
        self.grid.index_of(beta)?;
        self.members.iter().map(|m| m.offset(beta)).collect()
    }

    /// Centered decision values of every member at every query row: `B x m`.
    pub fn member_scores(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_dim(x.ncols())?;
        let x = standard(x);
        let rows: Vec<Vec<f64>> = self
            .members
            .iter()
            .map(|m| m.model().centered_values(&x))
            .collect::<Result<_>>()?;
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Ok(Array2::from_shape_vec((self.size, x.nrows()), flat).expect("shape"))
    }

    /// Aggregated scores at `beta` from precomputed [`member_scores`](Self::member_scores).
    pub fn aggregate(&self, member_scores: &Array2<f64>, beta: f64) -> Result<Vec<f64>> {
        let offsets = self.offsets_at(beta)?;
        if member_scores.nrows() != self.size {
            return Err(Error::DimensionMismatch {
                expected: self.size,
                found: member_scores.nrows(),
            });
        }
        let mut terms = vec![0.0; self.size];
        Ok((0..member_scores.ncols())
            .map(|j| {
                for (b, t) in terms.iter_mut().enumerate() {
                    *t = member_scores[[b, j]] - offsets[b];
                }
                mean_of_terms(&mut terms)
            })
            .collect())
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.feature_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim(),
                found: d,
            });
        }
        Ok(())
    }

    pub(crate) fn score_unchecked(&self, offsets: &[f64], x: &[f64]) -> f64 {
        let mut terms: Vec<f64> = self
            .members
            .iter()
            .zip(offsets)
            .map(|(m, rho)| m.model().centered_score(x) - rho)
            .collect();
        mean_of_terms(&mut terms)
    }

    /// Indicator of `{F_beta >= 0}`.
    pub fn level_set(&self, beta: f64) -> Result<EnsembleSet<'_>> {
        Ok(EnsembleSet {
            ensemble: self,
            offsets: self.offsets_at(beta)?,
        })
    }
}

/// Average of the member terms, summed in sorted order so the result does
/// not depend on member order.
fn mean_of_terms(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum::<f64>() / terms.len() as f64
}

/// Estimated set `{x : F_beta(x) >= 0}` of an ensemble.
#[derive(Clone, Debug)]
pub struct EnsembleSet<'a> {
    ensemble: &'a Ensemble,
    offsets: Vec<f64>,
}

impl crate::geometry::IndicatorSet for EnsembleSet<'_> {
    fn dim(&self) -> usize {
        self.ensemble.feature_dim()
    }

    fn contains(&self, x: &[f64]) -> bool {
        self.ensemble.score_unchecked(&self.offsets, x) >= 0.0
    }
}

pub fn ensemble_score(e: &Ensemble, beta: f64, x: &[f64]) -> Result<f64> {
    e.check_dim(x.len())?;
    let offsets = e.offsets_at(beta)?;
    Ok(e.score_unchecked(&offsets, x))
}

pub fn membership(e: &Ensemble, beta: f64, queries: &Array2<f64>) -> Result<Vec<bool>> {
    let offsets = e.offsets_at(beta)?;
    if queries.nrows() == 0 {
        return Ok(Vec::new());
    }
    e.check_dim(queries.ncols())?;
    let q = standard(queries);
    Ok((0..q.nrows())
        .into_par_iter()
        .map(|i| e.score_unchecked(&offsets, row(&q, i)) >= 0.0)
        .collect())
}

/// Seed of member `b`.
pub fn member_seed(base_seed: u64, b: usize) -> u64 {
    base_seed.wrapping_add(b as u64)
}

/// Settings shared by every member of an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub nu: f64,
    pub grid: MassGrid,
    pub members: usize,
    pub train_fraction: f64,
    pub base_seed: u64,
}

pub fn build_ensemble(
    x: &Array2<f64>,
    nu: f64,
    sigma: KernelBandwidth,
    grid: &MassGrid,
    members: usize,
    base_seed: u64,
) -> Result<Ensemble> {
    let spec = EnsembleSpec {
        nu,
        grid: grid.clone(),
        members,
        train_fraction: SplitSpec::DEFAULT_TRAIN_FRACTION,
        base_seed,
    };
    let mut out = build_ensembles(x, &[sigma], &spec)?;
    Ok(out.pop().expect("one bandwidth"))
}

/// One ensemble per bandwidth. Member `b` of every ensemble uses the same
/// split, whose pairwise distances are computed once and reused for all
/// bandwidths.
pub fn build_ensembles(x: &Array2<f64>, sigmas: &[KernelBandwidth], spec: &EnsembleSpec) -> Result<Vec<Ensemble>> {
    if spec.members == 0 {
        return Err(Error::invalid("B", "need at least one member"));
    }
    if sigmas.is_empty() {
        return Err(Error::invalid("sigma grid", "need at least one bandwidth"));
    }
    let x = standard(x);
    crate::ocsvm::check_finite(&x)?;
    let configs = sigmas
        .iter()
        .map(|&s| OcsvmConfig::new(spec.nu, s))
        .collect::<Result<Vec<_>>>()?;

    // per_member[b][s]
    let per_member: Vec<Vec<CalibratedModel>> = (0..spec.members)
        .into_par_iter()
        .map(|b| {
            let split = SplitSpec::new(spec.train_fraction, member_seed(spec.base_seed, b))?;
            let (train_idx, test_idx) = split_indices(x.nrows(), &split)?;
            let train = select_rows(&x, &train_idx);
            let test = select_rows(&x, &test_idx);
            let d2 = squared_distance_matrix(&train);
            configs
                .par_iter()
                .map(|cfg| {
                    calibrate_on_split(&train, &d2, &test, cfg, &spec.grid, split).map_err(|e| Error::Member {
                        member: b,
                        sigma: cfg.sigma.sigma(),
                        source: Box::new(e),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut by_sigma: Vec<Vec<CalibratedModel>> = vec![Vec::with_capacity(spec.members); sigmas.len()];
    for member in per_member {
        for (s, m) in member.into_iter().enumerate() {
            by_sigma[s].push(m);
        }
    }
    by_sigma
        .into_iter()
        .map(|members| Ensemble::from_members(members, spec.grid.clone()))
        .collect()
}
