//! Exact marginals and sampling for a fitted model through restricted
//! partition sums.
//!
//! A restricted partition sums `q(alpha) exp(<lambda, alpha>)` over the
//! points that agree with a partial assignment of blocks. The uniform part
//! of `q` factorizes, so fixed blocks contribute one score each and free
//! blocks their log-sum-exp; the weighted part is a filtered sum over the
//! support. Sampling draws one block at a time from its exact conditional.

use alloc::string::ToString;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::domain::{BlockKind, DataPoint, Dataset, DomainSchema};
use crate::error::{Error, Result};
use crate::math;
use crate::solver::MaxEntModel;

/// Values chosen for a subset of the blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialAssignment {
    fixed: Vec<Option<u32>>,
}

impl PartialAssignment {
    pub fn empty(schema: &DomainSchema) -> Self {
        Self {
            fixed: alloc::vec![None; schema.blocks().len()],
        }
    }

    /// Assignment fixing every block to the values of `p`.
    pub fn full(schema: &DomainSchema, p: &DataPoint) -> Result<Self> {
        Ok(Self {
            fixed: schema.block_values(p)?.into_iter().map(Some).collect(),
        })
    }

    pub fn fix(&mut self, schema: &DomainSchema, block: usize, value: u32) -> Result<&mut Self> {
        let b = schema.blocks().get(block).ok_or_else(|| {
            Error::InconsistentAssignment(alloc::format!("no block with index {block}"))
        })?;
        if value as usize >= b.values() {
            return Err(Error::InconsistentAssignment(alloc::format!(
                "value {value} is out of range for block `{}`",
                b.name
            )));
        }
        if self.fixed.len() != schema.blocks().len() {
            return Err(Error::InconsistentAssignment("assignment built for another schema".to_string()));
        }
        if self.fixed[block].is_some() {
            return Err(Error::BlockAlreadyAssigned(block));
        }
        self.fixed[block] = Some(value);
        Ok(self)
    }

    /// Builder form of [`PartialAssignment::fix`].
    pub fn with(mut self, schema: &DomainSchema, block: usize, value: u32) -> Result<Self> {
        self.fix(schema, block, value)?;
        Ok(self)
    }

    pub fn get(&self, block: usize) -> Option<u32> {
        self.fixed.get(block).copied().flatten()
    }

    pub fn is_assigned(&self, block: usize) -> bool {
        self.get(block).is_some()
    }

    pub fn assigned_count(&self) -> usize {
        self.fixed.iter().filter(|v| v.is_some()).count()
    }
}

/// Precomputed block scores and support data for one model.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    model: &'a MaxEntModel,
    order: Vec<usize>,
    /// `scores[b][v] = <a_b(v), lambda_b>`.
    scores: Vec<Vec<f64>>,
    lse: Vec<f64>,
    uniform_base: f64,
    /// Block values of each support point.
    values: Vec<Vec<u32>>,
    /// `ln((1 - C) w(alpha)) + <lambda, alpha>`.
    point_log: Vec<f64>,
}

impl<'a> Sampler<'a> {
    pub fn new(model: &'a MaxEntModel) -> Result<Self> {
        let schema = &model.schema;
        if model.lambda.len() != schema.dim() {
            return Err(Error::DimensionMismatch {
                expected: schema.dim(),
                got: model.lambda.len(),
            });
        }
        let mut scores = Vec::with_capacity(schema.blocks().len());
        let mut lse = Vec::with_capacity(schema.blocks().len());
        for block in schema.blocks() {
            let s: Vec<f64> = match block.kind {
                BlockKind::Bit => alloc::vec![0.0, model.lambda[block.offset]],
                BlockKind::OneHot { .. } => model.lambda[block.coordinates()].to_vec(),
            };
            lse.push(math::log_sum_exp(&s));
            scores.push(s);
        }
        let w = model.prior.weighted();
        let ln_rest = model.prior.ln_one_minus_c();
        let mut values = Vec::with_capacity(w.len());
        let mut point_log = Vec::with_capacity(w.len());
        for (p, &wt) in w.support().iter().zip(w.weights()) {
            values.push(schema.block_values(p)?);
            let s: f64 = p.active().map(|i| model.lambda[i]).sum();
            point_log.push(ln_rest + math::ln_or_neg_inf(wt) + s);
        }
        Ok(Self {
            model,
            order: (0..schema.blocks().len()).collect(),
            scores,
            lse,
            uniform_base: model.prior.ln_c() - model.prior.log_domain_size(),
            values,
            point_log,
        })
    }

    /// Samples blocks in the given order instead of schema order.
    pub fn with_order(mut self, order: Vec<usize>) -> Result<Self> {
        let n = self.scores.len();
        let mut seen = alloc::vec![false; n];
        if order.len() != n || order.iter().any(|&b| b >= n || core::mem::replace(&mut seen[b], true)) {
            return Err(Error::InconsistentAssignment("block order is not a permutation".to_string()));
        }
        self.order = order;
        Ok(self)
    }

    pub fn model(&self) -> &MaxEntModel {
        self.model
    }

    fn check(&self, pa: &PartialAssignment) -> Result<()> {
        if pa.fixed.len() != self.scores.len() {
            return Err(Error::InconsistentAssignment("assignment built for another schema".to_string()));
        }
        for (b, v) in pa.fixed.iter().enumerate() {
            if let Some(v) = v {
                if *v as usize >= self.scores[b].len() {
                    return Err(Error::InconsistentAssignment(alloc::format!(
                        "value {v} is out of range for block {b}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn consistent(&self, pa: &PartialAssignment, i: usize) -> bool {
        pa.fixed
            .iter()
            .zip(&self.values[i])
            .all(|(f, v)| f.map_or(true, |f| f == *v))
    }

    fn uniform_term(&self, pa: &PartialAssignment) -> f64 {
        let mut t = self.uniform_base;
        for (b, f) in pa.fixed.iter().enumerate() {
            t += match f {
                Some(v) => self.scores[b][*v as usize],
                None => self.lse[b],
            };
        }
        t
    }

    /// `log sum_{alpha consistent with pa} q(alpha) exp(<lambda, alpha>)`.
    pub fn restricted_log_partition(&self, pa: &PartialAssignment) -> Result<f64> {
        self.check(pa)?;
        let mut logs = Vec::with_capacity(self.point_log.len() + 1);
        logs.push(self.uniform_term(pa));
        for (i, &l) in self.point_log.iter().enumerate() {
            if self.consistent(pa, i) {
                logs.push(l);
            }
        }
        Ok(math::log_sum_exp(&logs))
    }

    /// Probability under the model that the blocks take the values in `pa`.
    pub fn marginal(&self, pa: &PartialAssignment) -> Result<f64> {
        Ok(math::exp(self.restricted_log_partition(pa)? - self.model.log_partition()))
    }

    /// Distribution of block `j` given the blocks fixed in `pa`.
    pub fn conditional_block_distribution(&self, pa: &PartialAssignment, j: usize) -> Result<Vec<f64>> {
        self.check(pa)?;
        if j >= self.scores.len() {
            return Err(Error::InconsistentAssignment(alloc::format!("no block with index {j}")));
        }
        if pa.is_assigned(j) {
            return Err(Error::BlockAlreadyAssigned(j));
        }
        let base = self.uniform_term(pa) - self.lse[j];
        let indices: Vec<usize> = (0..self.point_log.len()).filter(|&i| self.consistent(pa, i)).collect();
        let logs = self.value_logs(base, j, &indices);
        Ok(normalize(&logs))
    }

    /// Per-value restricted log partitions of block `j`, given the uniform
    /// term with `j` removed and the consistent support points.
    fn value_logs(&self, uniform_without_j: f64, j: usize, indices: &[usize]) -> Vec<f64> {
        let k = self.scores[j].len();
        let mut max: Vec<f64> = self.scores[j].iter().map(|s| uniform_without_j + s).collect();
        for &i in indices {
            let v = self.values[i][j] as usize;
            max[v] = f64::max(max[v], self.point_log[i]);
        }
        let mut sums = alloc::vec![0.0; k];
        for v in 0..k {
            if max[v] > f64::NEG_INFINITY {
                sums[v] += math::exp(uniform_without_j + self.scores[j][v] - max[v]);
            }
        }
        for &i in indices {
            let v = self.values[i][j] as usize;
            if max[v] > f64::NEG_INFINITY {
                sums[v] += math::exp(self.point_log[i] - max[v]);
            }
        }
        (0..k)
            .map(|v| if max[v] == f64::NEG_INFINITY { max[v] } else { max[v] + math::ln(sums[v]) })
            .collect()
    }

    /// Draws one point using `rng`, fixing blocks in the sampler's order.
    pub fn draw<R: RngCore>(&self, rng: &mut R) -> Result<DataPoint> {
        let schema = &self.model.schema;
        let nb = self.scores.len();
        let mut chosen = alloc::vec![0u32; nb];
        let mut uniform = self.uniform_base + self.lse.iter().sum::<f64>();
        let mut indices: Vec<usize> = (0..self.point_log.len())
            .filter(|&i| self.point_log[i] > f64::NEG_INFINITY)
            .collect();
        for &j in &self.order {
            let base = uniform - self.lse[j];
            let probs = normalize(&self.value_logs(base, j, &indices));
            let v = pick(&probs, unit_draw(rng));
            chosen[j] = v as u32;
            uniform = base + self.scores[j][v];
            indices.retain(|&i| self.values[i][j] as usize == v);
        }
        schema.point_from_values(&chosen)
    }
}

fn normalize(logs: &[f64]) -> Vec<f64> {
    let total = math::log_sum_exp(logs);
    logs.iter().map(|l| math::exp(l - total)).collect()
}

/// Uniform double in `[0, 1)` from the top 53 bits.
fn unit_draw<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Index of the value whose cumulative interval contains `u`, skipping
/// zero-probability values.
fn pick(probs: &[f64], u: f64) -> usize {
    let total: f64 = probs.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (v, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = v;
        if target < acc {
            return v;
        }
    }
    last
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn restricted_log_partition(model: &MaxEntModel, pa: &PartialAssignment) -> Result<f64> {
    Sampler::new(model)?.restricted_log_partition(pa)
}

pub fn conditional_block_distribution(model: &MaxEntModel, pa: &PartialAssignment, j: usize) -> Result<Vec<f64>> {
    Sampler::new(model)?.conditional_block_distribution(pa, j)
}

/// One draw from the model on stream 0 of `seed`.
pub fn sample_point(model: &MaxEntModel, seed: u64) -> Result<DataPoint> {
    Sampler::new(model)?.draw(&mut stream_rng(seed, 0))
}

/// `count` independent draws in order; draw `i` uses stream `i` of `seed`,
/// so the result does not depend on how the work is split.
pub fn sample_points(model: &MaxEntModel, count: u64, seed: u64) -> Result<Vec<DataPoint>> {
    if count == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1"));
    }
    let sampler = Sampler::new(model)?;
    (0..count).map(|i| sampler.draw(&mut stream_rng(seed, i))).collect()
}

/// [`sample_points`] aggregated into a dataset.
pub fn sample_dataset(model: &MaxEntModel, count: u64, seed: u64) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1"));
    }
    let sampler = Sampler::new(model)?;
    let mut ds = Dataset::new();
    for i in 0..count {
        ds.insert(sampler.draw(&mut stream_rng(seed, i))?, 1);
    }
    Ok(ds)
}
