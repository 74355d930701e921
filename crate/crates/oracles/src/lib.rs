//! Slow, independent reference computations used by the test suites.
//!
//! Nothing here shares code paths with the solver, calibration or Monte
//! Carlo routines in `mvset` beyond the `IndicatorSet` trait and the mixture
//! description.

use mvset::geometry::IndicatorSet;
use mvset::MixtureSpec;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Euclidean projection of `v` onto `{0 <= g <= cap, sum g = 1}`, by
/// bisection on the shift.
pub fn project_capped_simplex(v: &[f64], cap: f64) -> Vec<f64> {
    let total = |shift: f64| v.iter().map(|&x| (x - shift).clamp(0.0, cap)).sum::<f64>();
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (min - cap - 1.0, max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let shift = 0.5 * (lo + hi);
    v.iter().map(|&x| (x - shift).clamp(0.0, cap)).collect()
}

pub struct QpSolution {
    pub gamma: Vec<f64>,
    pub objective: f64,
}

fn quad(k: &Array2<f64>, g: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..g.len() {
        for j in 0..g.len() {
            s += g[i] * g[j] * k[[i, j]];
        }
    }
    0.5 * s
}

/// Accelerated projected gradient for `min 1/2 g'Kg` over the capped simplex
/// with cap `1 / (nu n)`. Intended for n of a handful of points.
pub fn qp_oracle(k: &Array2<f64>, nu: f64) -> QpSolution {
    let n = k.nrows();
    let cap = 1.0 / (nu * n as f64);
    // Gershgorin bound on the largest eigenvalue.
    let lipschitz = (0..n)
        .map(|i| (0..n).map(|j| k[[i, j]].abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1e-12);
    let step = 1.0 / lipschitz;
    let mut g = project_capped_simplex(&vec![1.0 / n as f64; n], cap);
    let mut y = g.clone();
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        let grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k[[i, j]] * y[j]).sum()).collect();
        let v: Vec<f64> = y.iter().zip(&grad).map(|(a, b)| a - step * b).collect();
        let next = project_capped_simplex(&v, cap);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        y = next.iter().zip(&g).map(|(a, b)| a + momentum * (a - b)).collect();
        let change = next.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        g = next;
        t = t_next;
        if change < 1e-15 {
            break;
        }
    }
    QpSolution {
        objective: quad(k, &g),
        gamma: g,
    }
}

/// `sum_i gamma_i exp(-|x_i - x|^2 / (2 sigma^2))`, one term at a time.
pub fn full_sum_score(train: &Array2<f64>, gamma: &[f64], sigma: f64, x: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, row) in train.outer_iter().enumerate() {
        let mut d2 = 0.0;
        for (a, b) in row.iter().zip(x) {
            d2 += (a - b) * (a - b);
        }
        s += gamma[i] * (-d2 / (2.0 * sigma * sigma)).exp();
    }
    s
}

/// Largest threshold `t` with at least a `beta` fraction of `scores` at or
/// above `t`, found by bisection on the threshold and snapped to a score.
pub fn bisection_offset(scores: &[f64], beta: f64) -> f64 {
    let n = scores.len() as f64;
    let frac = |t: f64| scores.iter().filter(|&&s| s >= t).count() as f64 / n;
    let mut lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if frac(hi) >= beta {
        return hi;
    }
    // frac(lo) = 1 >= beta, frac(hi) < beta.
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if frac(mid) >= beta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // The supremum is the smallest score at or above `lo` still meeting beta.
    scores
        .iter()
        .cloned()
        .filter(|&s| s >= lo && frac(s) >= beta)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Volume of the radius-`r` ball in dimension `d`.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    // V_d = 2 pi / d * V_{d-2}, V_0 = 1, V_1 = 2.
    let mut v = if d % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if d % 2 == 0 { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v * r.powi(d as i32)
}

/// Radius of the `alpha` highest-density disk of a standard bivariate normal.
pub fn gaussian_disk_radius(alpha: f64) -> f64 {
    (-2.0 * (1.0 - alpha).ln()).sqrt()
}

/// Draw from the mixture with a generator unrelated to `mvset`'s sampler.
pub fn sample_independent(spec: &MixtureSpec, m: usize, seed: u64) -> Array2<f64> {
    let d = spec.dim();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Array2::zeros((m, d));
    for mut row in out.outer_iter_mut() {
        let mut u: f64 = rng.random();
        let mut placed = false;
        if let Some(unif) = &spec.uniform {
            if u < unif.weight {
                for j in 0..d {
                    row[j] = unif.lower[j] + (unif.upper[j] - unif.lower[j]) * rng.random::<f64>();
                }
                placed = true;
            } else {
                u -= unif.weight;
            }
        }
        if !placed {
            let comp = spec
                .components
                .iter()
                .find(|c| {
                    if u < c.weight {
                        true
                    } else {
                        u -= c.weight;
                        false
                    }
                })
                .unwrap_or_else(|| spec.components.last().expect("at least one component"));
            for j in 0..d {
                // Box-Muller, one coordinate per pair of uniforms.
                let a: f64 = 1.0 - rng.random::<f64>();
                let b: f64 = rng.random();
                row[j] = comp.mean[j] + (-2.0 * a.ln()).sqrt() * (2.0 * std::f64::consts::PI * b).cos();
            }
        }
    }
    out
}

/// Fraction of fresh mixture draws inside `set`, with its binomial standard error.
pub fn fresh_mass_oracle<S: IndicatorSet + ?Sized>(set: &S, spec: &MixtureSpec, m: usize, seed: u64) -> (f64, f64) {
    let x = sample_independent(spec, m, seed);
    let hits = x.outer_iter().filter(|r| set.contains(r.as_slice().expect("row-major"))).count();
    let p = hits as f64 / m as f64;
    (p, (p * (1.0 - p) / m as f64).sqrt())
}

/// Cholesky of `k + jitter * I`; true when every pivot is positive.
pub fn is_psd(k: &Array2<f64>, jitter: f64) -> bool {
    let n = k.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = k[[i, j]] + if i == j { jitter } else { 0.0 };
            for p in 0..j {
                s -= l[[i, p]] * l[[j, p]];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    true
}

/// Uniform rate `p` and its standard error for `m` independent draws in a box.
pub fn box_hit_rate<F: Fn(&[f64]) -> bool>(lower: &[f64], upper: &[f64], m: usize, seed: u64, inside: F) -> (f64, f64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut x = vec![0.0; lower.len()];
    let mut hits = 0usize;
    for _ in 0..m {
        for j in 0..x.len() {
            x[j] = lower[j] + (upper[j] - lower[j]) * rng.random::<f64>();
        }
        if inside(&x) {
            hits += 1;
        }
    }
    let p = hits as f64 / m as f64;
    (p, (p * (1.0 - p) / m as f64).sqrt())
}
