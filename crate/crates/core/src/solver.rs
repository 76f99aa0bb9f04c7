//! Minimization of the dual objective and construction of target marginals.
//!
//! Two modes are available. [`SolverMode::DampedNewton`] takes Newton
//! steps with a backtracking line search and stops on the gradient norm.
//! [`SolverMode::BoxNewton`] is the box-constrained Newton scheme with the
//! worst-case iteration budget `T = 16 d R ln(1/(C eps))`, each step solving
//! a small quadratic program inside an `l_inf` box of side `1/(8d)`; it also
//! stops as soon as the gradient tolerance is met.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::domain::{validate_interior, BlockKind, DataPoint, Dataset, DomainSchema, DEFAULT_ETA_MIN};
use crate::error::{Error, Result};
use crate::linalg::{regularized_solve, Matrix};
use crate::math;
use crate::oracle::{DualEvaluation, DualObjective};
use crate::prior::{MixedPrior, ReweightedDistribution};
use crate::qp::inner_qp_solve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMode {
    BoxNewton,
    #[default]
    DampedNewton,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Target accuracy of the dual value; sets `R` and `T` in box mode.
    pub epsilon: f64,
    pub mode: SolverMode,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub radius_override: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            mode: SolverMode::DampedNewton,
            max_iterations: 10_000,
            gradient_tolerance: 1e-9,
            radius_override: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig("epsilon must be positive"));
        }
        if !(self.gradient_tolerance > 0.0 && self.gradient_tolerance.is_finite()) {
            return Err(Error::InvalidConfig("gradient tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1"));
        }
        if let Some(r) = self.radius_override {
            if !(r > 0.0) {
                return Err(Error::InvalidConfig("radius override must be positive"));
            }
        }
        Ok(())
    }
}

/// The fitted distribution `p(alpha) ∝ q(alpha) exp(<lambda, alpha>)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntModel {
    pub schema: DomainSchema,
    pub prior: MixedPrior,
    pub theta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub dual_value: f64,
}

impl MaxEntModel {
    /// Rebuilds a model from stored parts, recomputing the dual value.
    pub fn new(prior: MixedPrior, theta: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        let dual_value = DualObjective::new(&prior, &theta)?.value(&lambda)?;
        Ok(Self {
            schema: prior.schema().clone(),
            prior,
            theta,
            lambda,
            dual_value,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// `log sum_alpha q(alpha) exp(<lambda, alpha>)`.
    pub fn log_partition(&self) -> f64 {
        self.dual_value + math::dot(&self.theta, &self.lambda)
    }

    pub fn log_prob(&self, p: &DataPoint) -> Result<f64> {
        let lq = self.prior.log_mass(p)?;
        let s: f64 = p.active().map(|i| self.lambda[i]).sum();
        Ok(lq + s - self.log_partition())
    }

    pub fn prob(&self, p: &DataPoint) -> Result<f64> {
        Ok(math::exp(self.log_prob(p)?))
    }

    pub fn evaluate(&self, order: u8) -> Result<DualEvaluation> {
        DualObjective::new(&self.prior, &self.theta)?.evaluate(&self.lambda, order)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub model: MaxEntModel,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub dual_trace: Vec<f64>,
    pub converged: bool,
}

/// `(d / eta) ln(1/C)`.
pub fn bounding_radius(d: usize, eta: f64, c: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 0.5) {
        return Err(Error::InvalidEta(eta));
    }
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::InvalidMixing(c));
    }
    if c == 0.0 {
        return Err(Error::UnboundedRadius);
    }
    Ok(d as f64 / eta * -math::ln(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalKind {
    /// Data mean.
    Empirical,
    /// Mean of the reweighted distribution.
    Reweighted,
    /// Data mean with the protected block set to equal group shares.
    Balanced,
}

pub fn target_marginal(
    schema: &DomainSchema,
    ds: &Dataset,
    w: &ReweightedDistribution,
    kind: MarginalKind,
) -> Result<Vec<f64>> {
    let theta = match kind {
        MarginalKind::Empirical => crate::domain::empirical_marginal(ds)?,
        MarginalKind::Reweighted => {
            if w.is_empty() {
                return Err(Error::EmptyDataset);
            }
            w.mean()
        }
        MarginalKind::Balanced => {
            let mut t = crate::domain::empirical_marginal(ds)?;
            let block = &schema.blocks()[schema.protected_block()?];
            let share = 1.0 / block.values() as f64;
            match block.kind {
                BlockKind::Bit => t[block.offset] = share,
                BlockKind::OneHot { .. } => t[block.coordinates()].iter_mut().for_each(|x| *x = share),
            }
            t
        }
    };
    if theta.len() != schema.dim() {
        return Err(Error::DimensionMismatch {
            expected: schema.dim(),
            got: theta.len(),
        });
    }
    validate_interior(&theta, DEFAULT_ETA_MIN)?;
    Ok(theta)
}

/// Removes the per-block mean of one-hot coordinates. The dual is flat
/// along those directions, so this changes nothing but the representative.
fn project_gauge(schema: &DomainSchema, v: &mut [f64]) {
    for block in schema.blocks() {
        if let BlockKind::OneHot { cardinality } = block.kind {
            let r = block.coordinates();
            let mean = v[r.clone()].iter().sum::<f64>() / cardinality as f64;
            v[r].iter_mut().for_each(|x| *x -= mean);
        }
    }
}

fn check_target(schema: &DomainSchema, theta: &[f64]) -> Result<f64> {
    if theta.len() != schema.dim() {
        return Err(Error::DimensionMismatch {
            expected: schema.dim(),
            got: theta.len(),
        });
    }
    let eta = validate_interior(theta, DEFAULT_ETA_MIN)?;
    for block in schema.blocks() {
        if let BlockKind::OneHot { .. } = block.kind {
            let s: f64 = theta[block.coordinates()].iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig("one-hot block of the target must sum to 1"));
            }
        }
    }
    Ok(eta)
}

/// Minimizes the dual objective starting from `lambda = 0`.
pub fn solve(q: &MixedPrior, theta: &[f64], cfg: &SolverConfig) -> Result<SolverResult> {
    cfg.validate()?;
    if q.c() == 0.0 {
        return Err(Error::UnboundedRadius);
    }
    check_target(q.schema(), theta)?;
    let obj = DualObjective::new(q, theta)?;
    let (lambda, iterations, trace, converged) = match cfg.mode {
        SolverMode::DampedNewton => damped_newton(&obj, cfg)?,
        SolverMode::BoxNewton => box_newton(&obj, cfg)?,
    };
    let last = obj.evaluate(&lambda, 1)?;
    let result = SolverResult {
        model: MaxEntModel {
            schema: q.schema().clone(),
            prior: q.clone(),
            theta: theta.to_vec(),
            lambda,
            dual_value: last.value,
        },
        iterations,
        final_gradient_norm: math::norm_inf(&last.gradient),
        dual_trace: trace,
        converged,
    };
    if converged {
        Ok(result)
    } else {
        Err(Error::NotConverged(Box::new(result)))
    }
}

type Outcome = (Vec<f64>, usize, Vec<f64>, bool);

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Backtracking along `dir`. Accepts the Armijo condition or, once the
/// decrease predicted by the model drops below rounding level, any step
/// that does not raise the value and shrinks the gradient.
fn line_search(
    obj: &DualObjective<'_>,
    lambda: &[f64],
    current: &DualEvaluation,
    dir: &[f64],
) -> Result<Option<(Vec<f64>, DualEvaluation)>> {
    let slope = math::dot(&current.gradient, dir);
    if !(slope < 0.0) {
        return Ok(None);
    }
    let noise = 4.0 * f64::EPSILON * f64::max(1.0, current.value.abs());
    let gnorm = math::norm_inf(&current.gradient);
    let mut t = 1.0;
    for _ in 0..MAX_HALVINGS {
        let cand: Vec<f64> = lambda.iter().zip(dir).map(|(l, p)| l + t * p).collect();
        if let Ok(e) = obj.evaluate(&cand, 2) {
            let armijo = e.value <= current.value + ARMIJO * t * slope;
            let flat = -slope * t <= noise
                && e.value <= current.value + noise
                && math::norm_inf(&e.gradient) < gnorm;
            if armijo || flat {
                return Ok(Some((cand, e)));
            }
        }
        t *= 0.5;
    }
    Ok(None)
}

fn damped_newton(obj: &DualObjective<'_>, cfg: &SolverConfig) -> Result<Outcome> {
    let schema = obj.prior().schema();
    let d = obj.dim();
    let mut lambda = alloc::vec![0.0; d];
    let mut current = obj.evaluate(&lambda, 2)?;
    let mut trace = alloc::vec![current.value];
    for it in 0..cfg.max_iterations {
        if math::norm_inf(&current.gradient) <= cfg.gradient_tolerance {
            return Ok((lambda, it, trace, true));
        }
        let h = current.hessian.as_ref().expect("order 2");
        let neg_g: Vec<f64> = current.gradient.iter().map(|x| -x).collect();
        let mut step = None;
        if let Some(mut dir) = regularized_solve(h, &neg_g) {
            project_gauge(schema, &mut dir);
            step = line_search(obj, &lambda, &current, &dir)?;
        }
        if step.is_none() {
            log::debug!("newton step rejected at iteration {it}, taking a gradient step");
            let l = f64::max(h.trace(), 1e-12);
            let mut dir: Vec<f64> = neg_g.iter().map(|x| x / l).collect();
            project_gauge(schema, &mut dir);
            step = line_search(obj, &lambda, &current, &dir)?;
        }
        match step {
            Some((next, e)) => {
                lambda = next;
                current = e;
                trace.push(current.value);
            }
            None => {
                // No representable descent left.
                let ok = math::norm_inf(&current.gradient) <= cfg.gradient_tolerance;
                return Ok((lambda, it, trace, ok));
            }
        }
    }
    let ok = math::norm_inf(&current.gradient) <= cfg.gradient_tolerance;
    Ok((lambda, cfg.max_iterations, trace, ok))
}

/// `R = 8 d ln(1/(C eps))` and `T = 16 d R ln(1/(C eps))`.
pub fn box_newton_budget(d: usize, c: f64, epsilon: f64) -> (f64, f64) {
    let log_term = f64::max(-math::ln(c * epsilon), 0.0);
    let r = 8.0 * d as f64 * log_term;
    (r, 16.0 * d as f64 * r * log_term)
}

fn box_newton(obj: &DualObjective<'_>, cfg: &SolverConfig) -> Result<Outcome> {
    let d = obj.dim();
    let (r_default, t_budget) = box_newton_budget(d, obj.prior().c(), cfg.epsilon);
    let radius = cfg.radius_override.unwrap_or(r_default);
    let box_size = 1.0 / (8.0 * d as f64);
    let qp_tol = f64::max(cfg.epsilon / (8.0 * d as f64 * f64::max(radius, 1.0)), 1e-15);
    let budget = if t_budget.is_finite() && t_budget < cfg.max_iterations as f64 {
        libm::ceil(t_budget) as usize
    } else {
        cfg.max_iterations
    };
    let e2 = core::f64::consts::E * core::f64::consts::E;

    let mut lambda = alloc::vec![0.0; d];
    let mut current = obj.evaluate(&lambda, 2)?;
    let mut trace = alloc::vec![current.value];
    for it in 0..budget {
        if math::norm_inf(&current.gradient) <= cfg.gradient_tolerance {
            return Ok((lambda, it, trace, true));
        }
        let h: &Matrix = current.hessian.as_ref().expect("order 2");
        let y = inner_qp_solve(&current.gradient, h, box_size, &lambda, radius, qp_tol)?;
        for (l, yi) in lambda.iter_mut().zip(&y) {
            *l += yi / e2;
        }
        current = obj.evaluate(&lambda, 2)?;
        trace.push(current.value);
    }
    // Running the full budget is what the accuracy guarantee asks for.
    let ok = math::norm_inf(&current.gradient) <= cfg.gradient_tolerance
        || (budget as f64) >= t_budget;
    Ok((lambda, budget, trace, ok))
}
