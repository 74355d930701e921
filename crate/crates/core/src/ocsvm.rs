//! One-class SVM with a Gaussian kernel, trained through its dual
//!
//! ```text
//! min_g  1/2 sum_ij g_i g_j k(x_i, x_j)
//! s.t.   0 <= g_i <= 1 / (nu n),   sum_i g_i = 1
//! ```
//!
//! by sequential minimal optimization. Each step moves mass between the most
//! violating pair of coefficients, so the equality constraint holds throughout.
//! The resulting decision function is `f(x) = sum_i g_i k(x, x_i)` and the
//! estimated set is `{x : f(x) >= rho_nu}`.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernel::{kernel_from_distances, squared_distance, squared_distance_matrix, KernelBandwidth};
use crate::{row, standard, Error, Result};

const DEFAULT_KKT_TOLERANCE: f64 = 1e-6;
const DEFAULT_MAX_ITERATIONS: u64 = 10_000_000;
const MIN_CURVATURE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcsvmConfig {
    pub nu: f64,
    pub sigma: KernelBandwidth,
    pub kkt_tolerance: f64,
    pub max_iterations: u64,
}

impl OcsvmConfig {
    pub fn new(nu: f64, sigma: KernelBandwidth) -> Result<Self> {
        let config = Self {
            nu,
            sigma,
            kkt_tolerance: DEFAULT_KKT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_kkt_tolerance(mut self, tolerance: f64) -> Result<Self> {
        self.kkt_tolerance = tolerance;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_iterations(mut self, max_iterations: u64) -> Result<Self> {
        self.max_iterations = max_iterations;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::invalid("nu", format!("must lie in (0, 1), got {}", self.nu)));
        }
        if !(self.kkt_tolerance.is_finite() && self.kkt_tolerance > 0.0) {
            return Err(Error::invalid(
                "kkt_tolerance",
                format!("must be finite and > 0, got {}", self.kkt_tolerance),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations", "must be positive"));
        }
        Ok(())
    }
}

/// Raw output of the dual solver.
#[derive(Clone, Debug)]
pub struct DualSolution {
    pub gamma: Vec<f64>,
    /// `K gamma`, i.e. the decision function at every training point.
    pub gradient: Vec<f64>,
    pub upper_bound: f64,
    pub iterations: u64,
    pub violation: f64,
}

/// `1/2 gamma' K gamma`.
pub fn dual_objective(k: &Array2<f64>, gamma: &[f64]) -> f64 {
    let n = gamma.len();
    let mut total = 0.0;
    for i in 0..n {
        if gamma[i] == 0.0 {
            continue;
        }
        let mut acc = 0.0;
        for j in 0..n {
            acc += k[[i, j]] * gamma[j];
        }
        total += gamma[i] * acc;
    }
    0.5 * total
}

fn gradient_of(k: &Array2<f64>, gamma: &[f64]) -> Vec<f64> {
    let n = gamma.len();
    let mut grad = vec![0.0; n];
    for (j, &g) in gamma.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        for (i, out) in grad.iter_mut().enumerate() {
            *out += k[[i, j]] * g;
        }
    }
    grad
}

/// Largest KKT violation `max_{g_j > 0} f_j - min_{g_i < C} f_i`, clamped at 0.
///
/// A coefficient vector is optimal within `tol` iff this is at most `tol`:
/// then some `rho` separates zero, free and bounded coefficients as required.
pub fn kkt_violation(k: &Array2<f64>, gamma: &[f64], upper_bound: f64) -> f64 {
    let grad = gradient_of(k, gamma);
    violation_of(&grad, gamma, upper_bound).0
}

/// Returns (violation, index that should grow, index that should shrink).
fn violation_of(grad: &[f64], gamma: &[f64], upper: f64) -> (f64, usize, usize) {
    let mut grow = usize::MAX;
    let mut grow_val = f64::INFINITY;
    let mut shrink = usize::MAX;
    let mut shrink_val = f64::NEG_INFINITY;
    for (i, (&g, &c)) in grad.iter().zip(gamma).enumerate() {
        if c < upper && g < grow_val {
            grow = i;
            grow_val = g;
        }
        if c > 0.0 && g > shrink_val {
            shrink = i;
            shrink_val = g;
        }
    }
    if grow == usize::MAX || shrink == usize::MAX {
        return (0.0, grow, shrink);
    }
    ((shrink_val - grow_val).max(0.0), grow, shrink)
}

/// Solve the dual for a precomputed kernel matrix.
pub fn solve_dual(k: &Array2<f64>, nu: f64, tolerance: f64, max_iterations: u64) -> Result<DualSolution> {
    let n = k.nrows();
    if n == 0 || k.ncols() != n {
        return Err(Error::invalid("kernel matrix", "must be square and non-empty"));
    }
    let upper = 1.0 / (nu * n as f64);
    // Feasible start: uniform weight on the first ceil(nu n) points.
    let active = ((nu * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    let mut gamma = vec![0.0; n];
    for g in gamma.iter_mut().take(active) {
        *g = (1.0 / active as f64).min(upper);
    }
    let mut grad = gradient_of(k, &gamma);

    let mut iterations = 0u64;
    let mut best = f64::INFINITY;
    loop {
        let (violation, i, j) = violation_of(&grad, &gamma, upper);
        best = best.min(violation);
        if violation <= tolerance {
            break;
        }
        if iterations >= max_iterations {
            return Err(Error::NotConverged {
                iterations,
                violation: best,
            });
        }
        iterations += 1;

        let curvature = (k[[i, i]] + k[[j, j]] - 2.0 * k[[i, j]]).max(MIN_CURVATURE);
        let room_i = upper - gamma[i];
        let room_j = gamma[j];
        let step = (violation / curvature).min(room_i).min(room_j);
        if step == room_i {
            gamma[i] = upper;
        } else {
            gamma[i] += step;
        }
        if step == room_j {
            gamma[j] = 0.0;
        } else {
            gamma[j] -= step;
        }

        let ki = k.row(i);
        let kj = k.row(j);
        for ((g, a), b) in grad.iter_mut().zip(ki.iter()).zip(kj.iter()) {
            *g += step * (a - b);
        }
    }

    // Drop the incremental drift before anything reads the gradient.
    let grad = gradient_of(k, &gamma);
    let violation = violation_of(&grad, &gamma, upper).0;
    Ok(DualSolution {
        gamma,
        gradient: grad,
        upper_bound: upper,
        iterations,
        violation,
    })
}

/// Offset consistent with the KKT conditions of a dual solution.
///
/// Mean decision value over free support vectors; without any, the midpoint
/// between the largest value at a bounded coefficient and the smallest at a
/// zero coefficient.
pub fn recover_offset(gamma: &[f64], grad: &[f64], upper: f64) -> f64 {
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut bounded_max = f64::NEG_INFINITY;
    let mut zero_min = f64::INFINITY;
    for (&c, &g) in gamma.iter().zip(grad) {
        if c == 0.0 {
            zero_min = zero_min.min(g);
        } else if c >= upper {
            bounded_max = bounded_max.max(g);
        } else {
            free_sum += g;
            free_count += 1;
        }
    }
    if free_count > 0 {
        free_sum / free_count as f64
    } else if bounded_max.is_finite() && zero_min.is_finite() {
        0.5 * (bounded_max + zero_min)
    } else if bounded_max.is_finite() {
        bounded_max
    } else {
        zero_min
    }
}

/// A trained one-class SVM. Immutable once built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelRepr", try_from = "ModelRepr")]
pub struct OcsvmModel {
    nu: f64,
    sigma: KernelBandwidth,
    rho_nu: f64,
    support_indices: Vec<usize>,
    coefficients: Vec<f64>,
    support_vectors: Array2<f64>,
    train_size: usize,
}

impl OcsvmModel {
    fn from_solution(x: &Array2<f64>, nu: f64, sigma: KernelBandwidth, solution: &DualSolution) -> Self {
        let rho_nu = recover_offset(&solution.gamma, &solution.gradient, solution.upper_bound);
        Self::from_gamma(x, nu, sigma, &solution.gamma, rho_nu)
    }

    fn from_gamma(x: &Array2<f64>, nu: f64, sigma: KernelBandwidth, gamma: &[f64], rho_nu: f64) -> Self {
        let support_indices: Vec<usize> = (0..gamma.len()).filter(|&i| gamma[i] > 0.0).collect();
        let coefficients = support_indices.iter().map(|&i| gamma[i]).collect();
        let support_vectors = x.select(ndarray::Axis(0), &support_indices).as_standard_layout().into_owned();
        Self {
            nu,
            sigma,
            rho_nu,
            support_indices,
            coefficients,
            support_vectors,
            train_size: x.nrows(),
        }
    }

    /// The `nu = 1` model: every training point weighted `1/n`, so the
    /// decision function is the kernel smoother `(1/n) sum_i k(x, x_i)`.
    pub fn uniform(x: &Array2<f64>, sigma: KernelBandwidth) -> Result<Self> {
        let x = standard(x);
        check_finite(&x)?;
        let n = x.nrows();
        if n == 0 {
            return Err(Error::invalid("training data", "must have at least one row"));
        }
        let gamma = vec![1.0 / n as f64; n];
        let k = kernel_from_distances(&squared_distance_matrix(&x), sigma);
        let grad = gradient_of(&k, &gamma);
        let rho = recover_offset(&gamma, &grad, 1.0 / n as f64);
        Ok(Self::from_gamma(&x, 1.0, sigma, &gamma, rho))
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn sigma(&self) -> KernelBandwidth {
        self.sigma
    }

    pub fn rho_nu(&self) -> f64 {
        self.rho_nu
    }

    pub fn train_size(&self) -> usize {
        self.train_size
    }

    pub fn feature_dim(&self) -> usize {
        self.support_vectors.ncols()
    }

    pub fn support_indices(&self) -> &[usize] {
        &self.support_indices
    }

    pub fn support_vectors(&self) -> &Array2<f64> {
        &self.support_vectors
    }

    /// Dual coefficients of the support vectors, aligned with `support_indices`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Dual coefficients for all `train_size` training points.
    pub fn gamma(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.train_size];
        for (&i, &c) in self.support_indices.iter().zip(&self.coefficients) {
            g[i] = c;
        }
        g
    }

    pub fn upper_bound(&self) -> f64 {
        1.0 / (self.nu * self.train_size as f64)
    }

    /// Decision value without the dimension check.
    #[inline]
    pub(crate) fn score(&self, x: &[f64]) -> f64 {
        let d = self.feature_dim();
        let sv = self.support_vectors.as_slice().expect("standard layout");
        self.coefficients
            .iter()
            .zip(sv.chunks_exact(d.max(1)))
            .map(|(c, s)| c * self.sigma.eval_squared(squared_distance(x, s)))
            .sum()
    }

    pub fn decision_values(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.feature_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim(),
                found: x.ncols(),
            });
        }
        let x = standard(x);
        Ok((0..x.nrows()).into_par_iter().map(|i| self.score(row(&x, i))).collect())
    }

    /// `f(x) - rho_nu`, rounded in that order. Far from the support vectors
    /// `f` is below the precision of `rho_nu` and these values tie at
    /// `-rho_nu`.
    pub fn centered_values(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.feature_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim(),
                found: x.ncols(),
            });
        }
        let x = standard(x);
        Ok((0..x.nrows()).into_par_iter().map(|i| self.centered_score(row(&x, i))).collect())
    }

    pub(crate) fn centered_score(&self, x: &[f64]) -> f64 {
        self.score(x) - self.rho_nu
    }

    /// Whether `x` lies in `{f >= rho_nu}`.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.centered_score(x) >= 0.0
    }
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    nu: f64,
    sigma: f64,
    rho_nu: f64,
    support_vectors: Vec<Vec<f64>>,
    gamma: Vec<f64>,
    support_indices: Vec<usize>,
    train_size: usize,
    feature_dim: usize,
}

impl From<OcsvmModel> for ModelRepr {
    fn from(m: OcsvmModel) -> Self {
        Self {
            nu: m.nu,
            sigma: m.sigma.sigma(),
            rho_nu: m.rho_nu,
            support_vectors: m.support_vectors.outer_iter().map(|r| r.to_vec()).collect(),
            gamma: m.coefficients,
            support_indices: m.support_indices,
            train_size: m.train_size,
            feature_dim: m.support_vectors.ncols(),
        }
    }
}

impl TryFrom<ModelRepr> for OcsvmModel {
    type Error = Error;

    fn try_from(r: ModelRepr) -> Result<Self> {
        let sigma = KernelBandwidth::new(r.sigma)?;
        let count = r.gamma.len();
        if r.support_vectors.len() != count || r.support_indices.len() != count {
            return Err(Error::invalid(
                "model",
                "gamma, support_vectors and support_indices must have equal length",
            ));
        }
        let mut flat = Vec::with_capacity(count * r.feature_dim);
        for sv in &r.support_vectors {
            if sv.len() != r.feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: r.feature_dim,
                    found: sv.len(),
                });
            }
            flat.extend_from_slice(sv);
        }
        let support_vectors = Array2::from_shape_vec((count, r.feature_dim), flat)
            .map_err(|e| Error::invalid("support_vectors", e.to_string()))?;
        Ok(Self {
            nu: r.nu,
            sigma,
            rho_nu: r.rho_nu,
            support_indices: r.support_indices,
            coefficients: r.gamma,
            support_vectors,
            train_size: r.train_size,
        })
    }
}

pub(crate) fn check_finite(x: &Array2<f64>) -> Result<()> {
    for ((r, c), v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row: r, column: c });
        }
    }
    Ok(())
}

fn check_fit_inputs(x: &Array2<f64>, config: &OcsvmConfig) -> Result<()> {
    config.validate()?;
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid("training data", format!("need at least 2 rows, got {n}")));
    }
    if x.ncols() == 0 {
        return Err(Error::invalid("training data", "need at least one feature"));
    }
    if config.nu * (n as f64) < 1.0 - 1e-9 {
        return Err(Error::invalid(
            "nu",
            format!("nu * n must be >= 1 (nu = {}, n = {n})", config.nu),
        ));
    }
    check_finite(x)
}

pub fn fit(x: &Array2<f64>, config: &OcsvmConfig) -> Result<OcsvmModel> {
    let x = standard(x);
    check_fit_inputs(&x, config)?;
    fit_with_distances(&x, &squared_distance_matrix(&x), config)
}

/// Fit from precomputed pairwise squared distances of `x`, so that several
/// bandwidths can share one distance matrix.
pub fn fit_with_distances(x: &Array2<f64>, d2: &Array2<f64>, config: &OcsvmConfig) -> Result<OcsvmModel> {
    let x = standard(x);
    check_fit_inputs(&x, config)?;
    if d2.dim() != (x.nrows(), x.nrows()) {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: d2.nrows(),
        });
    }
    let k = kernel_from_distances(d2, config.sigma);
    let solution = solve_dual(&k, config.nu, config.kkt_tolerance, config.max_iterations)?;
    log::trace!(
        "ocsvm fit: n = {}, sigma = {}, {} iterations, violation {:e}",
        x.nrows(),
        config.sigma,
        solution.iterations,
        solution.violation
    );
    Ok(OcsvmModel::from_solution(&x, config.nu, config.sigma, &solution))
}

pub fn decision_function(model: &OcsvmModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.feature_dim(),
            found: x.len(),
        });
    }
    Ok(model.score(x))
}

/// Outlier and support-vector fractions on the training data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fractions {
    pub outlier_fraction: f64,
    pub sv_fraction: f64,
    pub nu: f64,
    pub rho_nu: f64,
}

impl Fractions {
    /// `outliers/n <= nu <= SV/n` up to `slack`; `None` when `rho_nu <= 0`,
    /// where the bound makes no claim.
    pub fn nu_bounds_hold(&self, slack: f64) -> Option<bool> {
        if self.rho_nu <= 0.0 {
            return None;
        }
        Some(self.outlier_fraction <= self.nu + slack && self.nu <= self.sv_fraction + slack)
    }
}

/// A training point is an outlier when `f - rho_nu < -DEFAULT_KKT_TOLERANCE`.
/// Free support vectors sit on the boundary only up to the solver tolerance,
/// so a strict `f < rho_nu` would count about half of them.
pub fn outlier_and_sv_fractions(model: &OcsvmModel, x_train: &Array2<f64>) -> Result<Fractions> {
    if x_train.nrows() != model.train_size() {
        return Err(Error::DimensionMismatch {
            expected: model.train_size(),
            found: x_train.nrows(),
        });
    }
    let scores = model.decision_values(x_train)?;
    let n = scores.len() as f64;
    let outliers = scores.iter().filter(|&&f| f - model.rho_nu < -DEFAULT_KKT_TOLERANCE).count();
    Ok(Fractions {
        outlier_fraction: outliers as f64 / n,
        sv_fraction: model.support_indices.len() as f64 / n,
        nu: model.nu,
        rho_nu: model.rho_nu,
    })
}

/// Result of checking a fitted model against the KKT conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktReport {
    pub violation: f64,
    /// The model's own offset separates the three coefficient classes
    /// within the tolerance.
    pub offset_consistent: bool,
}

/// Re-derive the KKT status of `model` on its training data.
pub fn verify_kkt(model: &OcsvmModel, x_train: &Array2<f64>, tolerance: f64) -> Result<KktReport> {
    let gamma = model.gamma();
    if gamma.len() != x_train.nrows() {
        return Err(Error::DimensionMismatch {
            expected: gamma.len(),
            found: x_train.nrows(),
        });
    }
    let scores = model.decision_values(x_train)?;
    let upper = model.upper_bound();
    let violation = violation_of(&scores, &gamma, upper).0;
    let rho = model.rho_nu;
    let offset_consistent = gamma.iter().zip(&scores).all(|(&g, &f)| {
        if g == 0.0 {
            f >= rho - tolerance
        } else if g >= upper {
            f <= rho + tolerance
        } else {
            (f - rho).abs() <= tolerance
        }
    });
    Ok(KktReport {
        violation,
        offset_consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::kernel_matrix;
    use ndarray::array;
    use rand::Rng;

    fn bw(s: f64) -> KernelBandwidth {
        KernelBandwidth::new(s).unwrap()
    }

    fn random_points(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = crate::seeding::rng(seed);
        Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn config_rejects_nu_outside_open_interval() {
        assert!(OcsvmConfig::new(0.0, bw(1.0)).is_err());
        assert!(OcsvmConfig::new(1.0, bw(1.0)).is_err());
        assert!(OcsvmConfig::new(0.5, bw(1.0)).unwrap().with_kkt_tolerance(0.0).is_err());
    }

    #[test]
    fn two_points_split_evenly() {
        let x = array![[0.0, 0.0], [1.0, 0.5]];
        for nu in [0.5, 0.7, 0.99] {
            let m = fit(&x, &OcsvmConfig::new(nu, bw(0.8)).unwrap()).unwrap();
            let g = m.gamma();
            assert!((g[0] - 0.5).abs() < 1e-9 && (g[1] - 0.5).abs() < 1e-9, "{g:?}");
        }
    }

    #[test]
    fn rejects_small_nu_n() {
        let x = random_points(4, 2, 1);
        let err = fit(&x, &OcsvmConfig::new(0.2, bw(1.0)).unwrap()).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "nu", .. }));
    }

    #[test]
    fn rejects_non_finite() {
        let mut x = random_points(10, 2, 1);
        x[[3, 1]] = f64::NAN;
        let err = fit(&x, &OcsvmConfig::new(0.5, bw(1.0)).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 3, column: 1 }));
    }

    #[test]
    fn reports_non_convergence() {
        let x = random_points(60, 2, 3);
        let cfg = OcsvmConfig::new(0.3, bw(0.5)).unwrap().with_max_iterations(2).unwrap();
        match fit(&x, &cfg).unwrap_err() {
            Error::NotConverged { iterations, violation } => {
                assert_eq!(iterations, 2);
                assert!(violation > 0.0);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn feasibility_and_kkt() {
        for (seed, nu, s) in [(1, 0.2, 0.3), (2, 0.5, 1.0), (3, 0.8, 2.0), (4, 0.05, 0.5)] {
            let x = random_points(120, 2, seed);
            let cfg = OcsvmConfig::new(nu, bw(s)).unwrap();
            let m = fit(&x, &cfg).unwrap();
            let g = m.gamma();
            let sum: f64 = g.iter().sum();
            assert!((sum - 1.0).abs() < 1e-8);
            let c = m.upper_bound();
            assert!(g.iter().all(|&v| (0.0..=c + 1e-12).contains(&v)));
            let report = verify_kkt(&m, &x, cfg.kkt_tolerance).unwrap();
            assert!(report.violation <= cfg.kkt_tolerance, "{report:?}");
            assert!(report.offset_consistent, "{report:?}");
        }
    }

    #[test]
    fn objective_no_worse_than_uniform_start() {
        let x = random_points(50, 3, 9);
        let cfg = OcsvmConfig::new(0.3, bw(0.7)).unwrap();
        let m = fit(&x, &cfg).unwrap();
        let k = kernel_matrix(&x, cfg.sigma);
        let active = 15;
        let mut start = vec![0.0; 50];
        start.iter_mut().take(active).for_each(|v| *v = 1.0 / active as f64);
        assert!(dual_objective(&k, &m.gamma()) <= dual_objective(&k, &start));
    }

    #[test]
    fn permutation_stable_decision_function() {
        let x = random_points(40, 2, 11);
        let cfg = OcsvmConfig::new(0.4, bw(0.6)).unwrap().with_kkt_tolerance(1e-11).unwrap();
        let m = fit(&x, &cfg).unwrap();
        let perm: Vec<usize> = (0..40).rev().collect();
        let xp = x.select(ndarray::Axis(0), &perm);
        let mp = fit(&xp, &cfg).unwrap();
        let probes = random_points(10, 2, 12);
        let a = m.decision_values(&probes).unwrap();
        let b = mp.decision_values(&probes).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-8, "{u} vs {v}");
        }
    }

    #[test]
    fn single_support_vector_scores_one_at_itself() {
        let m = OcsvmModel::uniform(&array![[1.5, -0.5]], bw(0.3)).unwrap();
        assert_eq!(decision_function(&m, &[1.5, -0.5]).unwrap(), 1.0);
    }

    #[test]
    fn uniform_model_is_kernel_smoother() {
        let x = random_points(30, 2, 5);
        let m = OcsvmModel::uniform(&x, bw(0.5)).unwrap();
        assert_eq!(m.support_indices().len(), 30);
        let probe = [0.2, -0.1];
        let smooth: f64 = (0..30)
            .map(|i| crate::kernel::gaussian_kernel(&probe, row(&x, i), bw(0.5)).unwrap())
            .sum::<f64>()
            / 30.0;
        assert!((decision_function(&m, &probe).unwrap() - smooth).abs() < 1e-14);
        let fr = outlier_and_sv_fractions(&m, &x).unwrap();
        assert_eq!(fr.sv_fraction, 1.0);
    }

    #[test]
    fn decision_function_checks_dimension() {
        let m = OcsvmModel::uniform(&array![[0.0, 0.0], [1.0, 1.0]], bw(1.0)).unwrap();
        assert!(matches!(
            decision_function(&m, &[0.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn offset_fallback_without_free_vectors() {
        let gamma = [0.5, 0.5, 0.0];
        let grad = [0.2, 0.4, 0.6];
        assert!((recover_offset(&gamma, &grad, 0.5) - 0.5).abs() < 1e-15);
        let gamma = [0.25, 0.5, 0.25];
        assert!((recover_offset(&gamma, &[0.3, 0.1, 0.5], 0.5) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let x = random_points(30, 2, 21);
        let m = fit(&x, &OcsvmConfig::new(0.4, bw(0.9)).unwrap()).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["nu", "sigma", "rho_nu", "support_vectors", "gamma", "train_size", "feature_dim"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let back: OcsvmModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
