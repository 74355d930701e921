//! Production routines checked against the brute-force references in
//! `mvset-oracles`.

use mvset::calibration::calibrate_offset;
use mvset::geometry::{mc_volume, symmetric_difference_volume, PredicateSet};
use mvset::ocsvm::{dual_objective, solve_dual};
use mvset::{decision_function, fit, kernel_matrix, HyperRect, KernelBandwidth, OcsvmConfig};
use mvset_oracles::{ball_volume, bisection_offset, full_sum_score, is_psd, qp_oracle};
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0))
}

#[test]
fn dual_objective_matches_qp_oracle_at_n6() {
    for seed in 0..10 {
        let x = random_points(6, 2, seed);
        let k = kernel_matrix(&x, KernelBandwidth::new(1.0).unwrap());
        for nu in [0.3, 0.5, 0.8] {
            let ours = solve_dual(&k, nu, 1e-10, 10_000_000).unwrap();
            let oracle = qp_oracle(&k, nu);
            let diff = (dual_objective(&k, &ours.gamma) - oracle.objective).abs();
            assert!(diff < 1e-6, "seed {seed} nu {nu}: {diff}");
        }
    }
}

#[test]
fn qp_oracle_boundary_cases() {
    let x = random_points(5, 3, 7);
    let k = kernel_matrix(&x, KernelBandwidth::new(0.7).unwrap());
    // nu = 1 pins every coefficient at the cap 1/n.
    for g in qp_oracle(&k, 1.0).gamma {
        assert!((g - 0.2).abs() < 1e-12);
    }
    let k2 = array![[1.0, 0.3], [0.3, 1.0]];
    let s = qp_oracle(&k2, 0.5);
    assert!((s.gamma[0] - 0.5).abs() < 1e-9 && (s.gamma[1] - 0.5).abs() < 1e-9);
}

#[test]
fn kernel_matrices_are_psd() {
    for seed in 0..5 {
        let x = random_points(40, 3, seed);
        let k = kernel_matrix(&x, KernelBandwidth::new(0.8).unwrap());
        assert!(is_psd(&k, 1e-10));
    }
}

#[test]
fn decision_function_matches_full_sum() {
    let x = random_points(60, 2, 3);
    let sigma = KernelBandwidth::new(0.6).unwrap();
    let model = fit(&x, &OcsvmConfig::new(0.4, sigma).unwrap()).unwrap();
    let gamma = model.gamma();
    for p in random_points(20, 2, 4).outer_iter() {
        let p = p.to_vec();
        let ours = decision_function(&model, &p).unwrap();
        let oracle = full_sum_score(&x, &gamma, 0.6, &p);
        assert!((ours - oracle).abs() < 1e-12, "{ours} vs {oracle}");
    }
}

#[test]
fn offset_matches_bisection_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let scores: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    let max_gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    for beta in [0.5, 0.91, 0.95, 0.99] {
        let ours = calibrate_offset(&scores, beta).unwrap();
        let oracle = bisection_offset(&scores, beta);
        assert!((ours - oracle).abs() <= max_gap, "beta {beta}: {ours} vs {oracle}");
        // With distinct scores the two agree exactly.
        assert_eq!(ours, oracle);
    }
}

#[test]
fn unit_disk_volume_within_three_standard_errors() {
    let disk = PredicateSet::new(2, |x: &[f64]| x[0] * x[0] + x[1] * x[1] <= 1.0);
    let rect = HyperRect::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    let est = mc_volume(&disk, &rect, 1_000_000, 5).unwrap();
    let pi = ball_volume(2, 1.0);
    assert!((est.volume - pi).abs() <= 3.0 * est.std_error, "{} +- {}", est.volume, est.std_error);
}

#[test]
fn half_square_symmetric_difference() {
    let rect = HyperRect::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let all = PredicateSet::new(2, |_: &[f64]| true);
    let left = PredicateSet::new(2, |x: &[f64]| x[0] < 0.5);
    let est = symmetric_difference_volume(&all, &left, &rect, 100_000, 9).unwrap();
    assert!((est.volume - 0.5).abs() <= 3.0 * est.std_error);
    let none = symmetric_difference_volume(&left, &left, &rect, 10_000, 9).unwrap();
    assert_eq!(none.volume, 0.0);
}
