#![allow(dead_code)]

use maxent_debias_core::{
    mix_prior, reweight, AttributeBlock, DataPoint, Dataset, DomainSchema, MixedPrior,
    ReweightedDistribution, Role,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Schema with exactly `d` coordinates: a label bit, a protected bit when
/// room allows, then a random mix of bits and one-hot blocks.
pub fn random_schema(r: &mut impl Rng, d: usize) -> DomainSchema {
    assert!(d >= 1);
    let mut blocks = vec![AttributeBlock::bit("y", Role::Label)];
    let mut used = 1;
    if d >= 2 {
        blocks.push(AttributeBlock::bit("z", Role::Protected));
        used += 1;
    }
    let mut i = 0;
    while used < d {
        let room = d - used;
        if room >= 2 && r.random_bool(0.4) {
            let k = r.random_range(2..=room.min(4));
            blocks.push(AttributeBlock::one_hot(&format!("c{i}"), k, Role::Feature));
            used += k;
        } else {
            blocks.push(AttributeBlock::bit(&format!("b{i}"), Role::Feature));
            used += 1;
        }
        i += 1;
    }
    DomainSchema::new(blocks).unwrap()
}

pub fn random_point(r: &mut impl Rng, s: &DomainSchema) -> DataPoint {
    let values: Vec<u32> = s
        .blocks()
        .iter()
        .map(|b| r.random_range(0..b.values() as u32))
        .collect();
    s.point_from_values(&values).unwrap()
}

pub fn random_dataset(r: &mut impl Rng, s: &DomainSchema, n: usize) -> Dataset {
    let mut ds = Dataset::new();
    for _ in 0..n {
        let p = random_point(r, s);
        ds.insert(p, r.random_range(1..4));
    }
    ds
}

/// Random support with random positive weights.
pub fn random_weights(r: &mut impl Rng, s: &DomainSchema, n: usize) -> ReweightedDistribution {
    let ds = random_dataset(r, s, n);
    let raw: Vec<f64> = (0..ds.len()).map(|_| r.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    ReweightedDistribution::from_parts(
        ds.points().to_vec(),
        raw.iter().map(|w| w / total).collect(),
        None,
    )
    .unwrap()
}

pub fn random_prior(r: &mut impl Rng, s: &DomainSchema, n: usize, c: f64) -> MixedPrior {
    mix_prior(s, c, random_weights(r, s, n)).unwrap()
}

/// A dataset in which every (label, group) cell is populated, so that
/// reweighting is defined.
pub fn random_fair_ready_dataset(r: &mut impl Rng, s: &DomainSchema, n: usize) -> Dataset {
    let yb = s.label_block().unwrap();
    let zb = s.protected_block().unwrap();
    loop {
        let mut ds = random_dataset(r, s, n);
        for y in 0..2 {
            for z in 0..2 {
                let mut v: Vec<u32> = s
                    .blocks()
                    .iter()
                    .map(|b| r.random_range(0..b.values() as u32))
                    .collect();
                v[yb] = y;
                v[zb] = z;
                ds.insert(s.point_from_values(&v).unwrap(), r.random_range(1..3));
            }
        }
        if reweight(&ds, s, 1.0).is_ok() {
            return ds;
        }
    }
}

/// Interior target: the mean of a random distribution with full support.
pub fn random_feasible_theta(r: &mut impl Rng, s: &DomainSchema) -> Vec<f64> {
    let w = random_weights(r, s, 6);
    let mean = w.mean();
    let mut theta = vec![0.0; s.dim()];
    for b in s.blocks() {
        let k = b.values() as f64;
        for j in b.coordinates() {
            let u = if b.width() == 1 { 0.5 } else { 1.0 / k };
            theta[j] = 0.7 * mean[j] + 0.3 * u;
        }
    }
    theta
}

pub fn random_lambda(r: &mut impl Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| r.random_range(-scale..scale)).collect()
}

/// `|a - b| <= tol * max(|b|, 1)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Every domain point with its probability under `q(alpha) exp(<lambda, alpha>) / Z`,
/// computed from the literal definition.
pub fn enumerate_gibbs(q: &MixedPrior, lambda: &[f64]) -> Vec<(DataPoint, f64, f64)> {
    let s = q.schema();
    let mut out = Vec::new();
    let mut logs = Vec::new();
    for values in s.enumerate(1e7).unwrap() {
        let p = s.point_from_values(&values).unwrap();
        let qm = maxent_debias_core::prior_mass(q, &p).unwrap();
        let dot: f64 = p.active().map(|i| lambda[i]).sum();
        logs.push(qm.ln() + dot);
        out.push((p, qm, 0.0));
    }
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logs.iter().map(|l| (l - m).exp()).sum();
    for (o, l) in out.iter_mut().zip(&logs) {
        o.2 = (l - m).exp() / z;
    }
    out
}
