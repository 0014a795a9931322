//! Dense transcriptions of the exact, PITC, PIC and ICF posteriors checked
//! against the crate's factor-and-solve implementations.

mod common;

use common::*;
use pgpr_core::exact::fgp_predict;
use pgpr_core::icf::{centralized_icf, icf_factor_serial};
use pgpr_core::partition::{partition_clustered, partition_even};
use pgpr_core::pitc::{centralized_pic, centralized_pitc};
use pgpr_core::{Dataset, Hyperparameters, InputPoint, SupportSet};

#[test]
fn fgp_matches_transcription() {
    for seed in 0..5 {
        let inst = instance(seed, 2, 32, 8);
        let got = fgp_predict(&inst.train, &inst.query, &inst.h, false).unwrap();
        let (mean, var) = fgp(&inst.train, &inst.query, &inst.h);
        assert!(max_abs_diff(&got.mean, &mean) <= 1e-10);
        assert!(max_abs_diff(&got.variances, &var) <= 1e-10);
    }
}

#[test]
fn fgp_full_covariance_diagonal_matches_marginals() {
    let inst = instance(3, 2, 40, 10);
    let full = fgp_predict(&inst.train, &inst.query, &inst.h, true).unwrap();
    let marg = fgp_predict(&inst.train, &inst.query, &inst.h, false).unwrap();
    let cov = full.covariance.as_ref().unwrap();
    assert_eq!(cov.diagonal(), full.variances);
    assert!(max_abs_diff(&full.variances, &marg.variances) <= 1e-12);
    assert!(cov.max_asymmetry() <= 1e-12);
}

#[test]
fn fgp_variance_bounded_by_prior_and_independent_of_outputs() {
    let inst = instance(11, 3, 60, 20);
    let p = fgp_predict(&inst.train, &inst.query, &inst.h, false).unwrap();
    let prior = inst.h.prior_variance();
    assert!(p.variances.iter().all(|v| *v <= prior + 1e-9));

    let other = inst
        .train
        .with_outputs(inst.train.outputs().iter().map(|y| 3.0 * y - 7.0).collect())
        .unwrap();
    let q = fgp_predict(&other, &inst.query, &inst.h, true).unwrap();
    let r = fgp_predict(&inst.train, &inst.query, &inst.h, true).unwrap();
    assert_eq!(q.variances, r.variances);
    assert_eq!(q.covariance, r.covariance);
}

#[test]
fn centralized_pitc_matches_transcription() {
    for seed in 0..4 {
        let inst = instance(seed, 2, 40, 9);
        let s = support(seed, 2, 8);
        let part = partition_even(&inst.train, &inst.query, 3).unwrap();
        let got = centralized_pitc(&inst.train, &part, &inst.query, &s, &inst.h, false).unwrap();
        let (mean, var) = pitc(part.blocks(), &inst.query, &s, &inst.h);
        assert!(max_abs_diff(&got.mean, &mean) <= 1e-10, "seed {seed}");
        assert!(max_abs_diff(&got.variances, &var) <= 1e-10, "seed {seed}");
    }
}

#[test]
fn centralized_pic_matches_transcription() {
    for seed in 0..4 {
        let inst = instance(seed + 20, 2, 40, 9);
        let s = support(seed, 2, 8);
        for part in [
            partition_even(&inst.train, &inst.query, 3).unwrap(),
            partition_clustered(&inst.train, &inst.query, 4, seed).unwrap(),
        ] {
            let got = centralized_pic(&inst.train, &part, &inst.query, &s, &inst.h, false).unwrap();
            let (mean, var) = pic(part.blocks(), part.query_blocks(), &s, &inst.h);
            let (mean, var) = (unstack(&mean, part.query_index()), unstack(&var, part.query_index()));
            assert!(max_abs_diff(&got.mean, &mean) <= 1e-10, "seed {seed}");
            assert!(max_abs_diff(&got.variances, &var) <= 1e-10, "seed {seed}");
        }
    }
}

#[test]
fn centralized_icf_matches_transcription() {
    for (seed, rank) in [(0, 5), (1, 12), (2, 30)] {
        let inst = instance(seed, 2, 30, 7);
        let f = icf_factor_serial(inst.train.inputs(), rank, &inst.h).unwrap();
        let got = centralized_icf(&inst.train, &f, &inst.query, &inst.h, false).unwrap();
        let (mean, var) = icf(&inst.train, &to_dense(&f.entries), &inst.query, &inst.h);
        assert!(max_abs_diff(&got.mean, &mean) <= 1e-10, "rank {rank}");
        assert!(max_abs_diff(&got.variances, &var) <= 1e-10, "rank {rank}");
    }
}

#[test]
fn single_block_pic_is_exact() {
    for seed in 0..3 {
        let inst = instance(seed, 2, 48, 12);
        let s = support(seed, 2, 10);
        let part = partition_even(&inst.train, &inst.query, 1).unwrap();
        let got = centralized_pic(&inst.train, &part, &inst.query, &s, &inst.h, false).unwrap();
        let exact = fgp_predict(&inst.train, &inst.query, &inst.h, false).unwrap();
        assert!(got.max_abs_diff(&exact) <= 1e-10);
    }
}

/// With no noise and queries placed on support inputs, `Γ_UD = Σ_UD` and a
/// single-block PITC model is the exact posterior.
#[test]
fn single_block_pitc_is_exact_when_queries_sit_on_support() {
    let h = Hyperparameters::new(1.0, 0.0, vec![1.0]).unwrap();
    let xs = [0.0, 1.5, 3.0, 4.5, 6.0, 7.5];
    let train = Dataset::new(
        xs.iter().enumerate().map(|(i, x)| InputPoint::new(i as u64, vec![*x])).collect(),
        vec![0.5, -0.2, 1.0, 0.3, -0.8, 0.1],
        0.1,
    )
    .unwrap();
    let sx = [0.7, 2.2, 5.1, 8.0];
    let s = SupportSet::new(sx.iter().enumerate().map(|(i, x)| InputPoint::new(100 + i as u64, vec![*x])).collect()).unwrap();
    let query: Vec<InputPoint> = sx.iter().enumerate().map(|(i, x)| InputPoint::new(200 + i as u64, vec![*x])).collect();
    let part = partition_even(&train, &query, 1).unwrap();
    let got = centralized_pitc(&train, &part, &query, &s, &h, false).unwrap();
    let exact = fgp_predict(&train, &query, &h, false).unwrap();
    assert!(got.max_abs_diff(&exact) <= 1e-8, "{}", got.max_abs_diff(&exact));
}

#[test]
fn pitc_mean_shifts_with_outputs_and_prior() {
    let inst = instance(5, 2, 36, 6);
    let s = support(5, 2, 6);
    let part = partition_even(&inst.train, &inst.query, 3).unwrap();
    let base = centralized_pitc(&inst.train, &part, &inst.query, &s, &inst.h, false).unwrap();
    let c = 2.5;
    let shifted = Dataset::new(
        inst.train.inputs().to_vec(),
        inst.train.outputs().iter().map(|y| y + c).collect(),
        inst.train.prior_mean() + c,
    )
    .unwrap();
    let spart = partition_even(&shifted, &inst.query, 3).unwrap();
    let moved = centralized_pitc(&shifted, &spart, &inst.query, &s, &inst.h, false).unwrap();
    for (a, b) in base.mean.iter().zip(&moved.mean) {
        assert!((b - a - c).abs() <= 1e-12);
    }
    assert_eq!(base.variances, moved.variances);
}

#[test]
fn pitc_and_pic_variances_are_nonnegative() {
    let inst = instance(8, 2, 64, 32);
    let s = support(8, 2, 16);
    let part = partition_clustered(&inst.train, &inst.query, 4, 1).unwrap();
    let a = centralized_pitc(&inst.train, &part, &inst.query, &s, &inst.h, true).unwrap();
    let b = centralized_pic(&inst.train, &part, &inst.query, &s, &inst.h, false).unwrap();
    assert!(a.variances.iter().chain(&b.variances).all(|v| *v >= -1e-9));
    assert!(a.covariance.unwrap().max_asymmetry() <= 1e-9);
}

#[test]
fn oracle_inverse_sanity() {
    let h = Hyperparameters::new(1.0, 0.1, vec![1.0]).unwrap();
    let pts: Vec<InputPoint> = (0..5).map(|i| InputPoint::new(i, vec![i as f64 * 0.4])).collect();
    let a = cov(&pts, &pts, &h);
    let prod = mul(&a, &inverse(&a), 5);
    let eye: Dense = (0..5).map(|i| (0..5).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    assert!(dense_max_abs_diff(&prod, &eye) <= 1e-12);
}
