//! Box-constrained convex quadratic programs of the form
//!
//! ```text
//! minimize  <g, y> + (1 / (2e)) y^T H y
//! s.t.      |y_i| <= box,  |center_i + y_i| <= R
//! ```
//!
//! solved by projected coordinate descent. Each sweep visits the
//! coordinates in a fresh random order; the loop stops once the
//! Frank-Wolfe duality gap certifies the requested accuracy.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const SWEEP_SEED: u64 = 0x5eed_0fc0de;
const MAX_SWEEPS: usize = 200_000;

/// Objective `<g, y> + (1/(2e)) y^T H y`.
pub fn qp_objective(g: &[f64], h: &Matrix, y: &[f64]) -> f64 {
    crate::math::dot(g, y) + h.quad_form(y) / (2.0 * core::f64::consts::E)
}

/// Returns a feasible `y` whose objective is within `tol` of the minimum.
/// `R` may be infinite.
pub fn inner_qp_solve(
    g: &[f64],
    h: &Matrix,
    box_size: f64,
    center: &[f64],
    radius: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    let d = g.len();
    if h.n() != d || center.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if h.n() != d { h.n() } else { center.len() },
        });
    }
    if !(box_size > 0.0) || !(tol > 0.0) || radius.is_nan() {
        return Err(Error::InvalidConfig("QP needs box > 0, tol > 0"));
    }
    if g.iter().chain(center).chain(h.as_slice()).any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput("QP data"));
    }

    let mut lo = Vec::with_capacity(d);
    let mut hi = Vec::with_capacity(d);
    for &c in center {
        let l = f64::max(-box_size, -radius - c);
        let u = f64::min(box_size, radius - c);
        if l > u {
            return Err(Error::InvalidConfig("QP box and radius constraints are disjoint"));
        }
        lo.push(l);
        hi.push(u);
    }

    let inv_e = 1.0 / core::f64::consts::E;
    let mut y = alloc::vec![0.0; d];
    for i in 0..d {
        // keep the start feasible when the centre sits on the radius
        y[i] = 0.0f64.clamp(lo[i], hi[i]);
    }
    let mut hy = h.mul_vec(&y);
    let mut order: Vec<usize> = (0..d).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SWEEP_SEED);

    let mut gap = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        gap = fw_gap(g, &hy, &y, &lo, &hi, inv_e);
        if gap <= tol {
            return Ok(y);
        }
        for i in (1..d).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            order.swap(i, j);
        }
        for &i in &order {
            let grad = g[i] + inv_e * hy[i];
            let a = inv_e * h[(i, i)];
            let target = if a > 0.0 {
                y[i] - grad / a
            } else if grad > 0.0 {
                lo[i]
            } else if grad < 0.0 {
                hi[i]
            } else {
                y[i]
            };
            let next = target.clamp(lo[i], hi[i]);
            let delta = next - y[i];
            if delta != 0.0 {
                y[i] = next;
                for (k, hk) in hy.iter_mut().enumerate() {
                    *hk += h[(k, i)] * delta;
                }
            }
        }
    }
    Err(Error::QpNotConverged { gap, tol })
}

/// `max_{s feasible} <grad f(y), y - s>`, an upper bound on the
/// suboptimality of `y`.
fn fw_gap(g: &[f64], hy: &[f64], y: &[f64], lo: &[f64], hi: &[f64], inv_e: f64) -> f64 {
    let mut gap = 0.0;
    for i in 0..y.len() {
        let grad = g[i] + inv_e * hy[i];
        let s = if grad > 0.0 { lo[i] } else { hi[i] };
        gap += grad * (y[i] - s);
    }
    gap
}
