//! Fairness-adjusted priors.
//!
//! [`reweight`] assigns each data point a weight so that, for every label
//! value `y`, the mass of the scaled protected group equals `tau` times the
//! mass of the other group. [`mix_prior`] blends those weights with the
//! uniform distribution on the whole domain, which gives every point a mass
//! of at least `C / |Omega|`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::domain::{DataPoint, Dataset, DomainSchema};
use crate::error::{Error, Result};
use crate::math;

/// A probability distribution supported on a finite set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct ReweightedDistribution {
    support: Vec<DataPoint>,
    weights: Vec<f64>,
    tau: Option<f64>,
    index: BTreeMap<DataPoint, usize>,
}

impl ReweightedDistribution {
    /// Assembles a distribution from explicit weights. Weights must be
    /// non-negative, the points distinct, and the total 1 within `1e-9`.
    pub fn from_parts(support: Vec<DataPoint>, weights: Vec<f64>, tau: Option<f64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                got: weights.len(),
            });
        }
        if support.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::NonFiniteInput("prior weights"));
        }
        let total = math::pairwise_sum(&weights);
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSchema(alloc::format!(
                "prior weights sum to {total}, expected 1"
            )));
        }
        let mut index = BTreeMap::new();
        for (i, p) in support.iter().enumerate() {
            if index.insert(p.clone(), i).is_some() {
                return Err(Error::InvalidSchema(alloc::format!(
                    "duplicate support point {p}"
                )));
            }
        }
        Ok(Self {
            support,
            weights,
            tau,
            index,
        })
    }

    /// Weights `n_alpha / N`, the plain empirical distribution.
    pub fn empirical(ds: &Dataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = ds.total() as f64;
        let weights = ds.frequencies().iter().map(|&f| f as f64 / n).collect();
        Self::from_parts(ds.points().to_vec(), weights, None)
    }

    pub fn support(&self) -> &[DataPoint] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The statistical-rate parameter, when built by [`reweight`].
    pub fn tau(&self) -> Option<f64> {
        self.tau
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Weight of `p`, zero off the support.
    pub fn weight_of(&self, p: &DataPoint) -> f64 {
        self.index.get(p).map_or(0.0, |&i| self.weights[i])
    }

    /// Weighted mean of the support points.
    pub fn mean(&self) -> Vec<f64> {
        let dim = self.support[0].dim();
        math::pairwise_vec_sum(0, self.support.len(), dim, &|i, out: &mut [f64]| {
            for c in self.support[i].active() {
                out[c] = self.weights[i];
            }
        })
    }
}

/// Reweights `ds` so that each label value has group masses in ratio `tau`.
///
/// Weight of `alpha` is `n_alpha * c(y) / c(y, z)` where the scaled group's
/// count is divided by `tau`, then normalized to sum to 1.
pub fn reweight(ds: &Dataset, schema: &DomainSchema, tau: f64) -> Result<ReweightedDistribution> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidTau(tau));
    }
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let zb = schema.protected_block()?;
    let yb = schema.label_block()?;
    let blocks = schema.blocks();
    if blocks[zb].values() != 2 {
        return Err(Error::NonBinaryProtected(blocks[zb].name.clone()));
    }
    let labels = blocks[yb].values();
    let scaled = schema.scaled_group() as usize;

    let mut cell = alloc::vec![[0u64; 2]; labels];
    let mut keys = Vec::with_capacity(ds.len());
    for (p, n) in ds.iter() {
        let values = schema.block_values(p)?;
        let (y, z) = (values[yb] as usize, values[zb] as usize);
        cell[y][z] += n;
        keys.push((y, z));
    }
    for (y, counts) in cell.iter().enumerate() {
        if counts[0] + counts[1] == 0 {
            continue;
        }
        for (z, &c) in counts.iter().enumerate() {
            if c == 0 {
                return Err(Error::EmptyCell {
                    label: y as u32,
                    group: z as u32,
                });
            }
        }
    }

    let raw: Vec<f64> = ds
        .frequencies()
        .iter()
        .zip(&keys)
        .map(|(&n, &(y, z))| {
            let c_y = (cell[y][0] + cell[y][1]) as f64;
            let c_yz = if z == scaled {
                cell[y][z] as f64 / tau
            } else {
                cell[y][z] as f64
            };
            n as f64 * c_y / c_yz
        })
        .collect();
    let total = math::pairwise_sum(&raw);
    let weights = raw.into_iter().map(|w| w / total).collect();
    ReweightedDistribution::from_parts(ds.points().to_vec(), weights, Some(tau))
}

/// The prior `C * uniform + (1 - C) * weighted`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedPrior {
    c: f64,
    weighted: ReweightedDistribution,
    schema: DomainSchema,
    log_domain_size: f64,
}

/// Mixes `w` with the uniform distribution on the domain of `schema`.
pub fn mix_prior(schema: &DomainSchema, c: f64, w: ReweightedDistribution) -> Result<MixedPrior> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::InvalidMixing(c));
    }
    for p in w.support() {
        schema.block_values(p)?;
    }
    Ok(MixedPrior {
        c,
        weighted: w,
        schema: schema.clone(),
        log_domain_size: schema.log_domain_size(),
    })
}

impl MixedPrior {
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn weighted(&self) -> &ReweightedDistribution {
        &self.weighted
    }

    pub fn schema(&self) -> &DomainSchema {
        &self.schema
    }

    pub fn dim(&self) -> usize {
        self.schema.dim()
    }

    pub fn log_domain_size(&self) -> f64 {
        self.log_domain_size
    }

    /// `ln C`, `-inf` when `C = 0`.
    pub fn ln_c(&self) -> f64 {
        math::ln_or_neg_inf(self.c)
    }

    /// `ln (1 - C)`, `-inf` when `C = 1`.
    pub fn ln_one_minus_c(&self) -> f64 {
        math::ln_or_neg_inf(1.0 - self.c)
    }

    /// Natural log of the prior mass at `p`.
    pub fn log_mass(&self, p: &DataPoint) -> Result<f64> {
        self.schema.block_values(p)?;
        let uniform = self.ln_c() - self.log_domain_size;
        let weighted = self.ln_one_minus_c() + math::ln_or_neg_inf(self.weighted.weight_of(p));
        Ok(math::log_add_exp(uniform, weighted))
    }
}

/// Prior mass `C / |Omega| + (1 - C) * w(alpha)`.
pub fn prior_mass(q: &MixedPrior, alpha: &DataPoint) -> Result<f64> {
    q.schema.block_values(alpha)?;
    let size = q.schema.domain_size();
    let uniform = if size <= 9.007_199_254_740_992e15 {
        q.c / size
    } else {
        q.c * math::exp(-q.log_domain_size)
    };
    Ok(uniform + (1.0 - q.c) * q.weighted.weight_of(alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AttributeBlock, Role};

    fn ylz_schema() -> DomainSchema {
        DomainSchema::new(alloc::vec![
            AttributeBlock::bit("x", Role::Feature),
            AttributeBlock::bit("y", Role::Label),
            AttributeBlock::bit("z", Role::Protected),
        ])
        .unwrap()
    }

    fn hand_traced() -> (DomainSchema, Dataset) {
        let s = ylz_schema();
        let mut ds = Dataset::new();
        for r in [[0, 1, 1], [1, 1, 1], [0, 1, 0], [0, 0, 1], [0, 0, 0]] {
            ds.insert(s.point_from_values(&r).unwrap(), 1);
        }
        (s, ds)
    }

    #[test]
    fn reweight_matches_hand_trace() {
        let (s, ds) = hand_traced();
        let w = reweight(&ds, &s, 1.0).unwrap();
        let expected = [0.15, 0.15, 0.3, 0.2, 0.2];
        for (got, want) in w.weights().iter().zip(expected) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
        assert_eq!(w.tau(), Some(1.0));
    }

    fn group_mass(s: &DomainSchema, w: &ReweightedDistribution, y: u32, z: u32) -> f64 {
        w.support()
            .iter()
            .zip(w.weights())
            .filter(|(p, _)| {
                let v = s.block_values(p).unwrap();
                v[1] == y && v[2] == z
            })
            .map(|(_, w)| w)
            .sum()
    }

    #[test]
    fn reweight_balances_cells_by_tau() {
        let (s, mut ds) = hand_traced();
        ds.insert(s.point_from_values(&[1, 0, 0]).unwrap(), 4);
        for tau in [0.3, 0.6, 1.0] {
            let w = reweight(&ds, &s, tau).unwrap();
            let total: f64 = w.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            for y in 0..2 {
                let z0 = group_mass(&s, &w, y, 0);
                let z1 = group_mass(&s, &w, y, 1);
                assert!((z0 - tau * z1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn balanced_dataset_is_a_fixed_point() {
        let s = ylz_schema();
        let mut ds = Dataset::new();
        for (r, n) in [([0, 1, 1], 2), ([1, 1, 0], 2), ([0, 0, 1], 3), ([1, 0, 0], 3)] {
            ds.insert(s.point_from_values(&r).unwrap(), n);
        }
        let w = reweight(&ds, &s, 1.0).unwrap();
        let emp = ReweightedDistribution::empirical(&ds).unwrap();
        for (a, b) in w.weights().iter().zip(emp.weights()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn reweight_errors() {
        let s = ylz_schema();
        let mut ds = Dataset::new();
        ds.insert(s.point_from_values(&[0, 1, 1]).unwrap(), 1);
        ds.insert(s.point_from_values(&[0, 0, 1]).unwrap(), 1);
        ds.insert(s.point_from_values(&[0, 0, 0]).unwrap(), 1);
        assert!(matches!(
            reweight(&ds, &s, 1.0),
            Err(Error::EmptyCell { label: 1, group: 0 })
        ));
        assert!(matches!(reweight(&ds, &s, 0.0), Err(Error::InvalidTau(_))));
        assert!(matches!(reweight(&ds, &s, 1.5), Err(Error::InvalidTau(_))));
    }

    #[test]
    fn scaled_group_polarity() {
        let (s, ds) = hand_traced();
        let s = s.with_scaled_group(1).unwrap();
        let w = reweight(&ds, &s, 0.5).unwrap();
        for y in 0..2 {
            let z0 = group_mass(&s, &w, y, 0);
            let z1 = group_mass(&s, &w, y, 1);
            assert!((z1 - 0.5 * z0).abs() < 1e-12);
        }
    }

    #[test]
    fn prior_mass_examples() {
        let (s, ds) = hand_traced();
        let support: Vec<DataPoint> = ds.points()[..2].to_vec();
        let w = ReweightedDistribution::from_parts(support.clone(), alloc::vec![0.3, 0.7], None).unwrap();

        let uniform = mix_prior(&s, 1.0, w.clone()).unwrap();
        assert_eq!(prior_mass(&uniform, &support[0]).unwrap(), 0.125);

        let half = mix_prior(&s, 0.5, w.clone()).unwrap();
        let off = s.point_from_values(&[1, 0, 0]).unwrap();
        assert_eq!(prior_mass(&half, &off).unwrap(), 0.0625);
        assert!((prior_mass(&half, &support[0]).unwrap() - 0.2125).abs() < 1e-15);
        assert!((half.log_mass(&support[0]).unwrap() - math::ln(0.2125)).abs() < 1e-14);

        let degenerate = mix_prior(&s, 0.0, w).unwrap();
        assert_eq!(prior_mass(&degenerate, &off).unwrap(), 0.0);
        assert_eq!(degenerate.log_mass(&off).unwrap(), f64::NEG_INFINITY);

        assert!(matches!(
            mix_prior(&s, 1.5, ReweightedDistribution::empirical(&ds).unwrap()),
            Err(Error::InvalidMixing(_))
        ));
    }

    #[test]
    fn prior_mass_sums_to_one_over_domain() {
        let (s, ds) = hand_traced();
        let q = mix_prior(&s, 0.3, reweight(&ds, &s, 0.7).unwrap()).unwrap();
        let mut total = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    total += prior_mass(&q, &s.point_from_values(&[a, b, c]).unwrap()).unwrap();
                }
            }
        }
        assert!((total - 1.0).abs() < 1e-14);
    }
}
