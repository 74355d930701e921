//! Gaussian kernel `k(x, y) = exp(-|x - y|^2 / (2 sigma^2))`.
//!
//! The kernel is left unnormalized. Every entry of a kernel matrix is produced
//! by the same expression as [`gaussian_kernel`], so batch and pointwise
//! evaluations agree bit for bit.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{row, standard, Error, Result};

/// Bandwidth `sigma > 0` of the Gaussian kernel, in feature-space units.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct KernelBandwidth(f64);

impl KernelBandwidth {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(Self(sigma))
        } else {
            Err(Error::invalid("sigma", format!("must be finite and > 0, got {sigma}")))
        }
    }

    pub fn sigma(self) -> f64 {
        self.0
    }

    /// `exp(-d2 / (2 sigma^2))` for a precomputed squared distance.
    #[inline]
    pub fn eval_squared(self, d2: f64) -> f64 {
        (-d2 / (2.0 * self.0 * self.0)).exp()
    }
}

impl TryFrom<f64> for KernelBandwidth {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<KernelBandwidth> for f64 {
    fn from(value: KernelBandwidth) -> f64 {
        value.0
    }
}

impl std::fmt::Display for KernelBandwidth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[inline]
pub fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let t = a - b;
            t * t
        })
        .sum()
}

pub fn gaussian_kernel(x: &[f64], y: &[f64], sigma: KernelBandwidth) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(sigma.eval_squared(squared_distance(x, y)))
}

/// Pairwise squared distances between the rows of `x`.
///
/// Each unordered pair is computed once and mirrored, so the result is exactly
/// symmetric with a zero diagonal.
pub fn squared_distance_matrix(x: &Array2<f64>) -> Array2<f64> {
    let x = standard(x);
    let n = x.nrows();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = row(&x, i);
            (i + 1..n).map(|j| squared_distance(xi, row(&x, j))).collect()
        })
        .collect();
    let mut d2 = Array2::zeros((n, n));
    for (i, tail) in upper.into_iter().enumerate() {
        for (off, v) in tail.into_iter().enumerate() {
            let j = i + 1 + off;
            d2[[i, j]] = v;
            d2[[j, i]] = v;
        }
    }
    d2
}

/// Kernel matrix from precomputed squared distances.
pub fn kernel_from_distances(d2: &Array2<f64>, sigma: KernelBandwidth) -> Array2<f64> {
    d2.mapv(|v| sigma.eval_squared(v))
}

pub fn kernel_matrix(x: &Array2<f64>, sigma: KernelBandwidth) -> Array2<f64> {
    kernel_from_distances(&squared_distance_matrix(x), sigma)
}
