//! Minimum volume set estimation with offset-calibrated one-class SVMs.
//!
//! The estimator trains a Gaussian-kernel one-class SVM with a deliberately
//! large `nu`, then moves the offset of its decision function on a held-out
//! split until the estimated set carries a target probability mass. Models fit
//! on several random splits are averaged, and the kernel bandwidth is picked
//! by minimizing the area under the mass-volume curve.
//!
//! Module map:
//!
//! - [`kernel`]: Gaussian kernel and kernel matrices.
//! - [`ocsvm`]: SMO solver for the one-class SVM dual.
//! - [`calibration`]: train/test splits and order-statistic offsets.
//! - [`ensemble`]: aggregation of calibrated models.
//! - [`geometry`]: Monte Carlo volumes, mass-volume curves, bandwidth selection.
//! - [`baselines`]: standard one-class SVM and KDE plug-in comparison methods.
//! - [`datagen`]: synthetic generators, ground-truth level sets, standardization.
//! - [`experiments`]: end-to-end pipeline and method comparisons.

pub mod baselines;
pub mod calibration;
pub mod datagen;
pub mod ensemble;
mod error;
pub mod experiments;
pub mod geometry;
pub mod io;
pub mod kernel;
pub mod ocsvm;
pub mod seeding;

pub use error::{Error, Result};

pub use baselines::{kde_bandwidth_cv, kde_plugin_set, standard_ocsvm_set, KdeModel};
pub use calibration::{calibrate, calibrate_offset, split, CalibratedModel, MassGrid, SplitSpec};
pub use datagen::{mixture_density, sample_mixture, standardize, true_mv_level, two_moons, MixtureSpec};
pub use ensemble::{build_ensemble, ensemble_score, membership, Ensemble};
pub use geometry::{
    enclosing_hypercube, mass_volume_curve, mc_volume, select_bandwidth,
    symmetric_difference_volume, HyperRect, IndicatorSet, MassVolumeCurve,
};
pub use kernel::{gaussian_kernel, kernel_matrix, KernelBandwidth};
pub use ocsvm::{decision_function, fit, OcsvmConfig, OcsvmModel};

/// Borrow row `i` of a standard-layout matrix as a slice.
#[inline]
pub(crate) fn row(x: &ndarray::Array2<f64>, i: usize) -> &[f64] {
    let d = x.ncols();
    &x.as_slice().expect("standard layout")[i * d..(i + 1) * d]
}

/// Copy a matrix into standard (row-major, contiguous) layout if needed.
pub(crate) fn standard(x: &ndarray::Array2<f64>) -> std::borrow::Cow<'_, ndarray::Array2<f64>> {
    if x.is_standard_layout() {
        std::borrow::Cow::Borrowed(x)
    } else {
        std::borrow::Cow::Owned(x.as_standard_layout().into_owned())
    }
}
