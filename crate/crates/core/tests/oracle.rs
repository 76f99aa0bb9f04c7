mod common;

use common::*;
use maxent_debias_core::oracle::DualObjective;
use maxent_debias_core::{brute_force_dual, dual_value, Error};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn matches_enumeration_on_random_instances() {
    let mut r = rng(11);
    for case in 0..200 {
        let d = r.random_range(2..=10);
        let s = random_schema(&mut r, d);
        let n = r.random_range(1..=50);
        let c = [0.1, 0.5, 0.9][case % 3];
        let q = random_prior(&mut r, &s, n, c);
        let theta: Vec<f64> = (0..d).map(|_| r.random_range(0.05..0.95)).collect();
        let lambda = random_lambda(&mut r, d, 2.0);
        let fast = DualObjective::new(&q, &theta).unwrap().evaluate(&lambda, 2).unwrap();
        let slow = brute_force_dual(&q, &theta, &lambda, 2).unwrap();
        assert!(close(fast.value, slow.value, 1e-10), "case {case}: {} vs {}", fast.value, slow.value);
        for (a, b) in fast.gradient.iter().zip(&slow.gradient) {
            assert!(close(*a, *b, 1e-10), "case {case}: gradient {a} vs {b}");
        }
        let (hf, hs) = (fast.hessian.unwrap(), slow.hessian.unwrap());
        for (a, b) in hf.as_slice().iter().zip(hs.as_slice()) {
            assert!(close(*a, *b, 1e-10), "case {case}: hessian {a} vs {b}");
        }
        assert!(close(fast.log_partition, slow.log_partition, 1e-10));
    }
}

#[test]
fn shifted_and_unshifted_forms_agree() {
    let mut r = rng(12);
    for _ in 0..50 {
        let d = r.random_range(2..=8);
        let s = random_schema(&mut r, d);
        let q = random_prior(&mut r, &s, 10, 0.5);
        let theta: Vec<f64> = (0..d).map(|_| r.random_range(0.05..0.95)).collect();
        let lambda = random_lambda(&mut r, d, 5.0);
        let obj = DualObjective::new(&q, &theta).unwrap();
        let a = obj.value(&lambda).unwrap();
        let b = obj.unshifted_value(&lambda).unwrap();
        assert!(close(a, b, 1e-10), "{a} vs {b}");
    }
}

#[test]
fn extreme_lambda_is_finite() {
    let mut r = rng(13);
    let s = random_schema(&mut r, 8);
    let q = random_prior(&mut r, &s, 20, 0.1);
    let theta = vec![0.3; 8];
    let lambda: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 700.0 } else { -650.0 }).collect();
    let e = DualObjective::new(&q, &theta).unwrap().evaluate(&lambda, 2).unwrap();
    assert!(e.value.is_finite());
    assert!(e.gradient.iter().all(|g| g.is_finite()));
    assert!(e.hessian.unwrap().is_finite());
}

#[test]
fn enumeration_guard() {
    let mut r = rng(14);
    let s = random_schema(&mut r, 22);
    let q = random_prior(&mut r, &s, 3, 0.5);
    if s.domain_size() > (1u64 << 20) as f64 {
        assert!(matches!(
            brute_force_dual(&q, &vec![0.5; 22], &vec![0.0; 22], 0),
            Err(Error::DomainTooLarge { .. })
        ));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn value_at_origin_is_zero(seed in any::<u64>(), d in 2usize..9, c in 0.05f64..1.0) {
        let mut r = rng(seed);
        let s = random_schema(&mut r, d);
        let q = random_prior(&mut r, &s, 8, c);
        let theta: Vec<f64> = (0..d).map(|_| r.random_range(0.05..0.95)).collect();
        let v = dual_value(&q, &theta, &vec![0.0; d]).unwrap();
        prop_assert!(v.abs() < 1e-14);
    }

    #[test]
    fn convex_along_segments(seed in any::<u64>(), d in 2usize..9, t in 0.0f64..1.0) {
        let mut r = rng(seed);
        let s = random_schema(&mut r, d);
        let q = random_prior(&mut r, &s, 8, 0.5);
        let theta: Vec<f64> = (0..d).map(|_| r.random_range(0.05..0.95)).collect();
        let a = random_lambda(&mut r, d, 4.0);
        let b = random_lambda(&mut r, d, 4.0);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        let obj = DualObjective::new(&q, &theta).unwrap();
        let (fa, fb, fm) = (obj.value(&a).unwrap(), obj.value(&b).unwrap(), obj.value(&mid).unwrap());
        prop_assert!(fm <= t * fa + (1.0 - t) * fb + 1e-12);
    }

    #[test]
    fn gradient_is_mean_minus_theta(seed in any::<u64>(), d in 2usize..9) {
        let mut r = rng(seed);
        let s = random_schema(&mut r, d);
        let q = random_prior(&mut r, &s, 8, 0.5);
        let theta: Vec<f64> = (0..d).map(|_| r.random_range(0.05..0.95)).collect();
        let lambda = random_lambda(&mut r, d, 3.0);
        let g = DualObjective::new(&q, &theta).unwrap().gradient(&lambda).unwrap();
        let probs = enumerate_gibbs(&q, &lambda);
        for j in 0..d {
            let m: f64 = probs.iter().map(|(p, _, pr)| pr * p.bits()[j] as f64).sum();
            prop_assert!((g[j] - (m - theta[j])).abs() < 1e-10);
        }
    }
}
