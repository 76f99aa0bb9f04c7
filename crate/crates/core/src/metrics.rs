//! Fairness and closeness measures on fitted models, priors and datasets.
//!
//! Group masses of a model come from restricted partitions, so the rates
//! reported for distributions are exact. Dataset rates use frequencies.

use alloc::vec::Vec;

use crate::domain::{BlockKind, DataPoint, Dataset, DomainSchema};
use crate::error::{Error, Result};
use crate::math;
use crate::prior::MixedPrior;
use crate::sampler::{PartialAssignment, Sampler};
use crate::solver::MaxEntModel;

/// Default smoothing mass for reference points with no observations.
pub const DEFAULT_KL_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportSource {
    ExactDistribution,
    EmpiricalDataset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessReport {
    pub representation_rate: f64,
    pub statistical_rate: f64,
    /// `P(Z = z)` indexed by group value.
    pub group_masses: Vec<f64>,
    /// `P(Y = y | Z = z)` indexed by group value.
    pub group_conditionals: Vec<f64>,
    pub label_value: u32,
    pub protected_block: usize,
    pub source: ReportSource,
}

/// Group masses `P(Z = z)` and joints `P(Y = y, Z = z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupTable {
    pub masses: Vec<f64>,
    pub joints: Vec<f64>,
}

/// `min_{i != j} x_i / x_j`, i.e. smallest over largest.
fn min_ratio(xs: &[f64]) -> f64 {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(0.0, f64::max);
    if hi == 0.0 {
        return 1.0;
    }
    lo / hi
}

impl GroupTable {
    pub fn representation_rate(&self) -> Result<f64> {
        if let Some(z) = self.masses.iter().position(|&m| !(m > 0.0)) {
            return Err(Error::ZeroGroupMass(z as u32));
        }
        Ok(min_ratio(&self.masses))
    }

    pub fn conditionals(&self) -> Result<Vec<f64>> {
        self.masses
            .iter()
            .zip(&self.joints)
            .enumerate()
            .map(|(z, (&m, &j))| {
                if !(m > 0.0) {
                    Err(Error::ZeroGroupMass(z as u32))
                } else {
                    Ok(j / m)
                }
            })
            .collect()
    }

    pub fn statistical_rate(&self, label: u32) -> Result<f64> {
        let cond = self.conditionals()?;
        if let Some(z) = self.joints.iter().position(|&j| !(j > 0.0)) {
            return Err(Error::ZeroJointMass {
                label,
                group: z as u32,
            });
        }
        Ok(min_ratio(&cond))
    }

    fn report(&self, schema: &DomainSchema, label: u32, source: ReportSource) -> Result<FairnessReport> {
        Ok(FairnessReport {
            representation_rate: self.representation_rate()?,
            statistical_rate: self.statistical_rate(label)?,
            group_masses: self.masses.clone(),
            group_conditionals: self.conditionals()?,
            label_value: label,
            protected_block: schema.protected_block()?,
            source,
        })
    }
}

fn check_label(schema: &DomainSchema, label: u32) -> Result<(usize, usize)> {
    let zb = schema.protected_block()?;
    let yb = schema.label_block()?;
    let lb = &schema.blocks()[yb];
    if label as usize >= lb.values() {
        return Err(Error::UnknownCategory {
            block: lb.name.clone(),
            value: label,
            cardinality: lb.values(),
        });
    }
    Ok((zb, yb))
}

/// Exact group table of a model.
pub fn group_table_exact(model: &MaxEntModel, label: u32) -> Result<GroupTable> {
    let schema = &model.schema;
    let (zb, yb) = check_label(schema, label)?;
    let sampler = Sampler::new(model)?;
    let groups = schema.blocks()[zb].values() as u32;
    let mut masses = Vec::with_capacity(groups as usize);
    let mut joints = Vec::with_capacity(groups as usize);
    for z in 0..groups {
        let pa = PartialAssignment::empty(schema).with(schema, zb, z)?;
        masses.push(sampler.marginal(&pa)?);
        joints.push(sampler.marginal(&pa.with(schema, yb, label)?)?);
    }
    Ok(GroupTable { masses, joints })
}

/// Empirical group table of a dataset.
pub fn group_table_empirical(schema: &DomainSchema, ds: &Dataset, label: u32) -> Result<GroupTable> {
    let (zb, yb) = check_label(schema, label)?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let groups = schema.blocks()[zb].values();
    let mut mass = alloc::vec![0u64; groups];
    let mut joint = alloc::vec![0u64; groups];
    for (p, n) in ds.iter() {
        let v = schema.block_values(p)?;
        let z = v[zb] as usize;
        mass[z] += n;
        if v[yb] == label {
            joint[z] += n;
        }
    }
    let total = ds.total() as f64;
    Ok(GroupTable {
        masses: mass.into_iter().map(|c| c as f64 / total).collect(),
        joints: joint.into_iter().map(|c| c as f64 / total).collect(),
    })
}

/// The prior viewed as a model with `lambda = 0`.
pub fn prior_model(q: &MixedPrior) -> Result<MaxEntModel> {
    let d = q.dim();
    MaxEntModel::new(q.clone(), alloc::vec![0.0; d], alloc::vec![0.0; d])
}

pub fn fairness_report_exact(model: &MaxEntModel, label: u32) -> Result<FairnessReport> {
    group_table_exact(model, label)?.report(&model.schema, label, ReportSource::ExactDistribution)
}

pub fn fairness_report_empirical(schema: &DomainSchema, ds: &Dataset, label: u32) -> Result<FairnessReport> {
    group_table_empirical(schema, ds, label)?.report(schema, label, ReportSource::EmpiricalDataset)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessBound {
    /// `max_z |p(Y = y, Z = z) - q(Y = y, Z = z)|`.
    pub delta: f64,
    /// `tau - 4 delta (1 + tau) / (C + 4 delta)`.
    pub tau_prime: f64,
    /// Target marginal of the group that reweighting leaves unscaled.
    pub theta_protected: f64,
    /// Whether `1/2 <= theta_protected <= 1/(1 + tau)`.
    pub hypothesis_holds: bool,
}

/// `tau - 4 delta (1 + tau) / (C + 4 delta)`.
pub fn tau_prime(tau: f64, c: f64, delta: f64) -> f64 {
    if delta == 0.0 {
        return tau;
    }
    tau - 4.0 * delta * (1.0 + tau) / (c + 4.0 * delta)
}

/// Target marginal of the protected group that reweighting does not scale.
pub fn unscaled_group_marginal(schema: &DomainSchema, theta: &[f64]) -> Result<f64> {
    let block = &schema.blocks()[schema.protected_block()?];
    if block.values() != 2 {
        return Err(Error::NonBinaryProtected(block.name.clone()));
    }
    let group = 1 - schema.scaled_group();
    Ok(match block.kind {
        BlockKind::Bit if group == 1 => theta[block.offset],
        BlockKind::Bit => 1.0 - theta[block.offset],
        BlockKind::OneHot { .. } => theta[block.offset + group as usize],
    })
}

/// Lower bound on the statistical rate of `model` implied by its distance
/// from the prior `q` it was fitted against.
pub fn fairness_bound(model: &MaxEntModel, q: &MixedPrior, label: u32, tau: f64) -> Result<FairnessBound> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidTau(tau));
    }
    if q.schema() != &model.schema {
        return Err(Error::SchemaMismatch);
    }
    let p = group_table_exact(model, label)?;
    let r = group_table_exact(&prior_model(q)?, label)?;
    let delta = p
        .joints
        .iter()
        .zip(&r.joints)
        .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()));
    let theta_protected = unscaled_group_marginal(&model.schema, &model.theta)?;
    let hypothesis_holds = theta_protected >= 0.5 && theta_protected <= 1.0 / (1.0 + tau);
    if !hypothesis_holds {
        log::warn!("target marginal {theta_protected} of the protected group is outside [1/2, 1/(1+tau)]");
    }
    Ok(FairnessBound {
        delta,
        tau_prime: tau_prime(tau, q.c(), delta),
        theta_protected,
        hypothesis_holds,
    })
}

/// Largest domain the KL divergence will enumerate.
pub const KL_ENUMERATION_LIMIT: f64 = (1u64 << 20) as f64;

/// `KL(p || r)` where `r` is the empirical distribution of `reference` with
/// every unobserved point given mass `floor` and then renormalized.
/// `log_p` returns the log probability of a point under `p`.
pub fn kl_divergence_smoothed<F>(schema: &DomainSchema, log_p: F, reference: &Dataset, floor: f64) -> Result<f64>
where
    F: Fn(&DataPoint) -> Result<f64>,
{
    if !(floor > 0.0 && floor < 1.0) {
        return Err(Error::InvalidConfig("KL floor must lie in (0, 1)"));
    }
    if reference.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = reference.total() as f64;
    let domain = schema.enumerate(KL_ENUMERATION_LIMIT)?;
    let unseen = schema.domain_size() - reference.len() as f64;
    let log_norm = math::ln(1.0 + floor * unseen);
    let mut terms = Vec::new();
    for values in domain {
        let pt = schema.point_from_values(&values)?;
        let lp = log_p(&pt)?;
        if lp == f64::NEG_INFINITY {
            continue;
        }
        let c = reference.frequency_of(&pt);
        let lr = if c == 0 { math::ln(floor) } else { math::ln(c as f64 / n) } - log_norm;
        terms.push(math::exp(lp) * (lp - lr));
    }
    Ok(math::pairwise_sum(&terms))
}

pub fn kl_model_vs_dataset(model: &MaxEntModel, reference: &Dataset, floor: f64) -> Result<f64> {
    reference.validate(&model.schema)?;
    let lz = model.log_partition();
    let lambda = &model.lambda;
    kl_divergence_smoothed(
        &model.schema,
        |p| {
            let s: f64 = p.active().map(|i| lambda[i]).sum();
            Ok(model.prior.log_mass(p)? + s - lz)
        },
        reference,
        floor,
    )
}

pub fn kl_dataset_vs_dataset(schema: &DomainSchema, ds: &Dataset, reference: &Dataset, floor: f64) -> Result<f64> {
    ds.validate(schema)?;
    reference.validate(schema)?;
    let n = ds.total() as f64;
    kl_divergence_smoothed(schema, |p| Ok(math::ln_or_neg_inf(ds.frequency_of(p) as f64 / n)), reference, floor)
}

/// Sample covariance of the decoded block values (category index, or 0/1
/// for bits), normalized by `N - 1`.
pub fn decoded_covariance(schema: &DomainSchema, ds: &Dataset) -> Result<Vec<f64>> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let k = schema.blocks().len();
    let mut rows = Vec::with_capacity(ds.len());
    for (p, n) in ds.iter() {
        let v: Vec<f64> = schema
            .block_values(p)
            .map_err(|_| Error::SchemaMismatch)?
            .into_iter()
            .map(f64::from)
            .collect();
        rows.push((v, n as f64));
    }
    let total = ds.total() as f64;
    let mut mean = alloc::vec![0.0; k];
    for (v, n) in &rows {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += n * x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    let mut cov = alloc::vec![0.0; k * k];
    for (v, n) in &rows {
        for i in 0..k {
            let di = v[i] - mean[i];
            for j in 0..k {
                cov[i * k + j] += n * di * (v[j] - mean[j]);
            }
        }
    }
    let denom = f64::max(total - 1.0, 1.0);
    cov.iter_mut().for_each(|c| *c /= denom);
    Ok(cov)
}

/// Frobenius norm of the difference of the decoded covariance matrices,
/// squared if asked.
pub fn covariance_difference_norm(schema: &DomainSchema, a: &Dataset, b: &Dataset, squared: bool) -> Result<f64> {
    let ca = decoded_covariance(schema, a)?;
    let cb = decoded_covariance(schema, b)?;
    let sq: f64 = ca.iter().zip(&cb).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(if squared { sq } else { math::sqrt(sq) })
}
