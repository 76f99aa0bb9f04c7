//! Scalar helpers shared by the oracles and the sampler.
//!
//! Everything goes through `libm` so results do not depend on whether the
//! platform `std` math library is linked.

use alloc::vec::Vec;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

const PAIRWISE_BASE: usize = 8;

/// Sum with a fixed binary-tree reduction order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BASE {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of `f(i)` for `i` in `range`, where each term is a vector of
/// length `dim` written into the provided buffer.
pub fn pairwise_vec_sum<F>(start: usize, end: usize, dim: usize, f: &F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]),
{
    let mut acc = alloc::vec![0.0; dim];
    if end - start <= PAIRWISE_BASE {
        let mut term = alloc::vec![0.0; dim];
        for i in start..end {
            term.iter_mut().for_each(|t| *t = 0.0);
            f(i, &mut term);
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
        }
        return acc;
    }
    let mid = start + (end - start) / 2;
    let left = pairwise_vec_sum(start, mid, dim, f);
    let right = pairwise_vec_sum(mid, end, dim, f);
    for ((a, l), r) in acc.iter_mut().zip(&left).zip(&right) {
        *a = l + r;
    }
    acc
}

/// `log(sum(exp(xs)))`, stable for any finite or `-inf` entries.
/// Returns `-inf` for an empty slice or when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let shifted: Vec<f64> = xs.iter().map(|&x| exp(x - max)).collect();
    max + ln(pairwise_sum(&shifted))
}

/// `log(exp(a) + exp(b))`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ln_1p(exp(lo - hi))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

pub fn norm2(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum())
}

/// Natural log that maps 0 to `-inf` instead of producing a NaN path.
#[inline]
pub fn ln_or_neg_inf(x: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        ln(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_large_and_empty_inputs() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + core::f64::consts::LN_2)).abs() < 1e-12);
        assert!((log_add_exp(0.0, 0.0) - core::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, -3.0), -3.0);
    }

    #[test]
    fn pairwise_sums_match_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
        let v = pairwise_vec_sum(0, 100, 2, &|i, out: &mut [f64]| {
            out[0] = i as f64;
            out[1] = 1.0;
        });
        assert_eq!(v, alloc::vec![4950.0, 100.0]);
    }
}
