//! Value, gradient and Hessian oracles for the dual objective
//!
//! ```text
//! h(lambda) = log sum_alpha q(alpha) exp(<alpha - theta, lambda>)
//! ```
//!
//! with `q = C * uniform + (1 - C) * w`. The sum over the domain splits into
//! a uniform part, which factorizes over blocks, and a weighted part over
//! the finite support of `w`. All sums are carried out in log space with
//! shifted exponents `<alpha - theta, lambda>`, so the oracles stay finite
//! for any finite `lambda`.
//!
//! Normalizing the two parts by the partition sum turns the tilted prior
//! into a mixture: one product distribution over blocks (the tilted
//! uniform part) plus one point mass per support point. The gradient is the
//! mixture mean minus `theta` and the Hessian the mixture covariance, which
//! is assembled from the per-component covariances and the spread of the
//! component means. That costs `O(d^2 (N + d))` and involves no
//! cancellation between large raw moments.

use alloc::vec::Vec;

use crate::domain::{BlockKind, DomainSchema};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::prior::{prior_mass, MixedPrior};

/// Largest domain [`brute_force_dual`] will enumerate.
pub const ENUMERATION_LIMIT: f64 = (1u64 << 20) as f64;

#[derive(Debug, Clone, PartialEq)]
pub struct DualEvaluation {
    /// `h(lambda)`.
    pub value: f64,
    /// `E[alpha] - theta` under the tilted prior; empty for order 0.
    pub gradient: Vec<f64>,
    /// Covariance of `alpha` under the tilted prior, for order 2.
    pub hessian: Option<Matrix>,
    /// Unshifted `log sum_alpha q(alpha) exp(<alpha, lambda>)`, which equals
    /// `value + <theta, lambda>`.
    pub log_partition: f64,
}

/// Per-block log-space scores of the tilted uniform part.
#[derive(Debug, Clone)]
pub(crate) struct BlockScores {
    /// `scores[b][v] = <a_b(v) - theta_b, lambda_b>`.
    pub scores: Vec<Vec<f64>>,
    /// `log sum_v exp(scores[b][v])`.
    pub lse: Vec<f64>,
}

impl BlockScores {
    pub fn new(schema: &DomainSchema, theta: &[f64], lambda: &[f64]) -> Self {
        let mut scores = Vec::with_capacity(schema.blocks().len());
        let mut lse = Vec::with_capacity(schema.blocks().len());
        for block in schema.blocks() {
            let s = match block.kind {
                BlockKind::Bit => {
                    let j = block.offset;
                    alloc::vec![-theta[j] * lambda[j], (1.0 - theta[j]) * lambda[j]]
                }
                BlockKind::OneHot { .. } => {
                    let r = block.coordinates();
                    let centre = math::dot(&theta[r.clone()], &lambda[r.clone()]);
                    lambda[r].iter().map(|l| l - centre).collect()
                }
            };
            lse.push(math::log_sum_exp(&s));
            scores.push(s);
        }
        Self { scores, lse }
    }

    /// Probability of value `v` in block `b` under the tilted uniform part.
    pub fn prob(&self, b: usize, v: usize) -> f64 {
        math::exp(self.scores[b][v] - self.lse[b])
    }
}

/// The dual objective for a fixed prior and target marginal, with the
/// support-dependent data precomputed once.
#[derive(Debug, Clone)]
pub struct DualObjective<'a> {
    prior: &'a MixedPrior,
    theta: &'a [f64],
    active: Vec<Vec<u32>>,
    log_weight: Vec<f64>,
}

impl<'a> DualObjective<'a> {
    pub fn new(prior: &'a MixedPrior, theta: &'a [f64]) -> Result<Self> {
        let d = prior.dim();
        if theta.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: theta.len(),
            });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFiniteInput("theta"));
        }
        let w = prior.weighted();
        let ln_rest = prior.ln_one_minus_c();
        let active = w
            .support()
            .iter()
            .map(|p| p.active().map(|i| i as u32).collect())
            .collect();
        let log_weight = w
            .weights()
            .iter()
            .map(|&x| ln_rest + math::ln_or_neg_inf(x))
            .collect();
        Ok(Self {
            prior,
            theta,
            active,
            log_weight,
        })
    }

    pub fn prior(&self) -> &MixedPrior {
        self.prior
    }

    pub fn theta(&self) -> &[f64] {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    fn check_lambda(&self, lambda: &[f64]) -> Result<()> {
        if lambda.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: lambda.len(),
            });
        }
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFiniteInput("lambda"));
        }
        Ok(())
    }

    /// Shifted log weight of the uniform component and of each support point.
    fn component_logs(&self, lambda: &[f64], blocks: &BlockScores) -> (f64, Vec<f64>) {
        let theta_dot = math::dot(self.theta, lambda);
        let log_uniform = self.prior.ln_c() - self.prior.log_domain_size()
            + blocks.lse.iter().sum::<f64>();
        let support = self
            .active
            .iter()
            .zip(&self.log_weight)
            .map(|(act, &lw)| {
                let s: f64 = act.iter().map(|&i| lambda[i as usize]).sum();
                lw + s - theta_dot
            })
            .collect();
        (log_uniform, support)
    }

    pub fn value(&self, lambda: &[f64]) -> Result<f64> {
        Ok(self.evaluate(lambda, 0)?.value)
    }

    pub fn gradient(&self, lambda: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(lambda, 1)?.gradient)
    }

    pub fn hessian(&self, lambda: &[f64]) -> Result<Matrix> {
        Ok(self.evaluate(lambda, 2)?.hessian.expect("order 2 has a Hessian"))
    }

    /// Evaluates the objective and, for `order >= 1`, its gradient and, for
    /// `order >= 2`, its Hessian.
    pub fn evaluate(&self, lambda: &[f64], order: u8) -> Result<DualEvaluation> {
        self.check_lambda(lambda)?;
        let schema = self.prior.schema();
        let blocks = BlockScores::new(schema, self.theta, lambda);
        let (log_uniform, support) = self.component_logs(lambda, &blocks);

        let mut all = Vec::with_capacity(support.len() + 1);
        all.push(log_uniform);
        all.extend_from_slice(&support);
        let value = math::log_sum_exp(&all);
        if !value.is_finite() {
            return Err(Error::NumericalBreakdown("dual value"));
        }
        let log_partition = value + math::dot(self.theta, lambda);
        if order == 0 {
            return Ok(DualEvaluation {
                value,
                gradient: Vec::new(),
                hessian: None,
                log_partition,
            });
        }

        let d = self.dim();
        let pi_uniform = math::exp(log_uniform - value);
        let pi: Vec<f64> = support.iter().map(|&t| math::exp(t - value)).collect();

        let mut uniform_mean = alloc::vec![0.0; d];
        for (b, block) in schema.blocks().iter().enumerate() {
            match block.kind {
                BlockKind::Bit => uniform_mean[block.offset] = blocks.prob(b, 1),
                BlockKind::OneHot { cardinality } => {
                    for v in 0..cardinality {
                        uniform_mean[block.offset + v] = blocks.prob(b, v);
                    }
                }
            }
        }

        let support_mean = math::pairwise_vec_sum(0, pi.len(), d, &|i, out: &mut [f64]| {
            for &c in &self.active[i] {
                out[c as usize] = pi[i];
            }
        });
        let mean: Vec<f64> = uniform_mean
            .iter()
            .zip(&support_mean)
            .map(|(u, s)| pi_uniform * u + s)
            .collect();
        let gradient: Vec<f64> = mean.iter().zip(self.theta).map(|(m, t)| m - t).collect();

        let hessian = (order >= 2).then(|| {
            // Weighted point masses: sum_i pi_i (alpha_i - mean)(alpha_i - mean)^T.
            let flat = math::pairwise_vec_sum(0, pi.len(), d * d, &|i, out: &mut [f64]| {
                if pi[i] == 0.0 {
                    return;
                }
                let mut centred: Vec<f64> = mean.iter().map(|m| -m).collect();
                for &c in &self.active[i] {
                    centred[c as usize] += 1.0;
                }
                for r in 0..d {
                    let s = pi[i] * centred[r];
                    for (o, cv) in out[r * d..(r + 1) * d].iter_mut().zip(&centred) {
                        *o = s * cv;
                    }
                }
            });
            let mut h = Matrix::from_rows(d, flat);
            if pi_uniform > 0.0 {
                let shift: Vec<f64> = uniform_mean.iter().zip(&mean).map(|(u, m)| u - m).collect();
                h.add_outer(pi_uniform, &shift);
                // Within-component covariance of the product part is block
                // diagonal.
                for block in schema.blocks() {
                    match block.kind {
                        BlockKind::Bit => {
                            let j = block.offset;
                            let p = uniform_mean[j];
                            h[(j, j)] += pi_uniform * p * (1.0 - p);
                        }
                        BlockKind::OneHot { .. } => {
                            for i in block.coordinates() {
                                for j in block.coordinates() {
                                    let pij = if i == j { uniform_mean[i] } else { 0.0 };
                                    h[(i, j)] += pi_uniform * (pij - uniform_mean[i] * uniform_mean[j]);
                                }
                            }
                        }
                    }
                }
            }
            for i in 0..d {
                for j in i + 1..d {
                    let m = 0.5 * (h[(i, j)] + h[(j, i)]);
                    h[(i, j)] = m;
                    h[(j, i)] = m;
                }
            }
            h
        });

        Ok(DualEvaluation {
            value,
            gradient,
            hessian,
            log_partition,
        })
    }

    /// `h` computed from unshifted exponents `<alpha, lambda>` and corrected
    /// by `<theta, lambda>` at the end.
    pub fn unshifted_value(&self, lambda: &[f64]) -> Result<f64> {
        self.check_lambda(lambda)?;
        let zeros = alloc::vec![0.0; self.dim()];
        let blocks = BlockScores::new(self.prior.schema(), &zeros, lambda);
        let mut all = Vec::with_capacity(self.active.len() + 1);
        all.push(
            self.prior.ln_c() - self.prior.log_domain_size() + blocks.lse.iter().sum::<f64>(),
        );
        for (act, &lw) in self.active.iter().zip(&self.log_weight) {
            all.push(lw + act.iter().map(|&i| lambda[i as usize]).sum::<f64>());
        }
        Ok(math::log_sum_exp(&all) - math::dot(self.theta, lambda))
    }
}

pub fn dual_value(q: &MixedPrior, theta: &[f64], lambda: &[f64]) -> Result<f64> {
    DualObjective::new(q, theta)?.value(lambda)
}

pub fn dual_gradient(q: &MixedPrior, theta: &[f64], lambda: &[f64]) -> Result<Vec<f64>> {
    DualObjective::new(q, theta)?.gradient(lambda)
}

pub fn dual_hessian(q: &MixedPrior, theta: &[f64], lambda: &[f64]) -> Result<Matrix> {
    DualObjective::new(q, theta)?.hessian(lambda)
}

/// Reference oracle: literal enumeration of every domain point. Limited to
/// domains of at most 2^20 points.
pub fn brute_force_dual(q: &MixedPrior, theta: &[f64], lambda: &[f64], order: u8) -> Result<DualEvaluation> {
    let schema = q.schema();
    let d = schema.dim();
    for v in [theta, lambda] {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.len(),
            });
        }
    }
    let mut points = Vec::new();
    let mut logs = Vec::new();
    for values in schema.enumerate(ENUMERATION_LIMIT)? {
        let p = schema.point_from_values(&values)?;
        let x = p.as_f64();
        let shift: f64 = x.iter().zip(theta).zip(lambda).map(|((a, t), l)| (a - t) * l).sum();
        logs.push(math::ln_or_neg_inf(prior_mass(q, &p)?) + shift);
        points.push(x);
    }
    let value = math::log_sum_exp(&logs);
    let log_partition = value + math::dot(theta, lambda);
    if order == 0 {
        return Ok(DualEvaluation {
            value,
            gradient: Vec::new(),
            hessian: None,
            log_partition,
        });
    }
    let probs: Vec<f64> = logs.iter().map(|l| math::exp(l - value)).collect();
    let mut mean = alloc::vec![0.0; d];
    for (x, p) in points.iter().zip(&probs) {
        for (m, xi) in mean.iter_mut().zip(x) {
            *m += p * xi;
        }
    }
    let gradient = mean.iter().zip(theta).map(|(m, t)| m - t).collect();
    let hessian = (order >= 2).then(|| {
        let mut h = Matrix::zeros(d);
        for (x, p) in points.iter().zip(&probs) {
            let centred: Vec<f64> = x.iter().zip(&mean).map(|(a, m)| a - m).collect();
            h.add_outer(*p, &centred);
        }
        h
    });
    Ok(DualEvaluation {
        value,
        gradient,
        hessian,
        log_partition,
    })
}

/// Second directional derivative `y^T H(lambda) y` and a central finite
/// difference estimate of the third, `d/dt [y^T H(lambda + t y) y]` at 0.
pub fn directional_derivatives(
    q: &MixedPrior,
    theta: &[f64],
    lambda: &[f64],
    y: &[f64],
) -> Result<(f64, f64)> {
    let obj = DualObjective::new(q, theta)?;
    if y.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            got: y.len(),
        });
    }
    if math::norm_inf(y) == 0.0 {
        return Ok((0.0, 0.0));
    }
    let d2 = obj.hessian(lambda)?.quad_form(y);
    let step = 1e-4;
    let at = |t: f64| -> Result<f64> {
        let shifted: Vec<f64> = lambda.iter().zip(y).map(|(l, yi)| l + t * yi).collect();
        Ok(obj.hessian(&shifted)?.quad_form(y))
    };
    let d3 = (at(step)? - at(-step)?) / (2.0 * step);
    Ok((d2, d3))
}
