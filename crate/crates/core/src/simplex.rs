//! Solvers for the constrained minimizations behind every FTRL and OGD
//! update.
//!
//! Both reduce to a separable problem over the capped simplex
//!
//! ```text
//! minimize   sum_i (A_i / 2) x_i^2 - b_i x_i
//! subject to 0 <= x_i <= 1,  sum_i x_i = k
//! ```
//!
//! whose KKT conditions give `x_i(mu) = clip((b_i - mu) / A_i, 0, 1)` for
//! `A_i > 0` and a threshold rule for `A_i = 0`. The fill `sum_i x_i(mu)` is
//! nonincreasing in the dual variable `mu`, so `mu` is found by bisection.

use crate::error::{check_len, Error, Result};
use crate::model::CacheState;

/// Maximum number of bisection halvings.
pub const MAX_ITERATIONS: usize = 200;
/// Stopping tolerance on `|sum_i x_i(mu) - k|`, per file.
pub const FILL_TOL: f64 = 1e-10;

/// Separable diagonal quadratic with a linear pull over the capped simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalQp {
    quad: Vec<f64>,
    lin: Vec<f64>,
    capacity: usize,
}

impl DiagonalQp {
    pub fn new(quad: Vec<f64>, lin: Vec<f64>, capacity: usize) -> Result<Self> {
        check_len(quad.len(), lin.len())?;
        if quad.is_empty() {
            return Err(Error::InvalidParameter("empty problem".into()));
        }
        if capacity == 0 || capacity > quad.len() {
            return Err(Error::InvalidParameter(format!("capacity {capacity} is not in 1..={}", quad.len())));
        }
        if let Some(i) = quad.iter().position(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "curvature A[{i}] = {} must be finite and nonnegative",
                quad[i]
            )));
        }
        if let Some(i) = lin.iter().position(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter(format!("linear term b[{i}] is not finite")));
        }
        Ok(Self { quad, lin, capacity })
    }

    pub fn quad(&self) -> &[f64] {
        &self.quad
    }

    pub fn lin(&self) -> &[f64] {
        &self.lin
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.quad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quad.is_empty()
    }

    /// `sum_i (A_i / 2) x_i^2 - b_i x_i`
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.quad.iter().zip(&self.lin).zip(x).map(|((a, b), x)| 0.5 * a * x * x - b * x).sum()
    }

    /// Primal response to the dual variable. Zero-curvature coordinates
    /// sitting exactly at `mu` are reported as 0.
    pub fn allocation_at(&self, mu: f64, out: &mut [f64]) {
        for ((o, &a), &b) in out.iter_mut().zip(&self.quad).zip(&self.lin) {
            *o = response(a, b, mu);
        }
    }

    /// `sum_i x_i(mu)`
    pub fn fill_at(&self, mu: f64) -> f64 {
        self.quad.iter().zip(&self.lin).map(|(&a, &b)| response(a, b, mu)).sum()
    }
}

#[inline]
fn response(a: f64, b: f64, mu: f64) -> f64 {
    if a > 0.0 {
        ((b - mu) / a).clamp(0.0, 1.0)
    } else if b > mu {
        1.0
    } else {
        0.0
    }
}

/// Euclidean projection of `y` onto the capped simplex of capacity `k`.
pub fn project_capped_simplex(y: &[f64], k: usize) -> Result<CacheState> {
    let qp = DiagonalQp::new(vec![1.0; y.len()], y.to_vec(), k)?;
    solve_diag_qp(&qp)
}

/// Minimizes a [`DiagonalQp`] exactly up to the fill tolerance.
///
/// Zero-curvature coordinates whose linear term ties with the optimal dual
/// variable share the leftover capacity in ascending index order, the last
/// one possibly fractional.
pub fn solve_diag_qp(qp: &DiagonalQp) -> Result<CacheState> {
    let n = qp.len();
    let k = qp.capacity as f64;
    if qp.capacity == n {
        return Ok(CacheState::from_raw(vec![1.0; n]));
    }
    let tol = FILL_TOL * n as f64;

    let mut lo = qp.quad.iter().zip(&qp.lin).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
    let mut hi = qp.lin.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    expand_bracket(qp, k, &mut lo, &mut hi)?;

    let mut x = vec![0.0; n];
    for _ in 0..MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fill = qp.fill_at(mid);
        if (fill - k).abs() <= tol {
            qp.allocation_at(mid, &mut x);
            polish(qp, &mut x);
            return Ok(CacheState::from_raw(x));
        }
        if fill > k {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    finish_from_bracket(qp, lo, hi, &mut x);
    let residual = x.iter().sum::<f64>() - k;
    if residual.abs() > tol {
        return Err(Error::SolverFailure { residual: residual.abs() });
    }
    Ok(CacheState::from_raw(x))
}

fn expand_bracket(qp: &DiagonalQp, k: f64, lo: &mut f64, hi: &mut f64) -> Result<()> {
    let mut step = lo.abs().max(1.0);
    while qp.fill_at(*lo) < k {
        *lo -= step;
        step *= 2.0;
        if !lo.is_finite() {
            return Err(Error::SolverFailure { residual: k - qp.fill_at(*lo) });
        }
    }
    let mut step = hi.abs().max(1.0);
    while qp.fill_at(*hi) > k {
        *hi += step;
        step *= 2.0;
        if !hi.is_finite() {
            return Err(Error::SolverFailure { residual: qp.fill_at(*hi) - k });
        }
    }
    Ok(())
}

/// Builds the primal point once the bracket `[lo, hi]` has collapsed around a
/// jump of the fill (zero-curvature ties) or to float resolution.
fn finish_from_bracket(qp: &DiagonalQp, lo: f64, hi: f64, x: &mut [f64]) {
    let k = qp.capacity as f64;
    let mut tied = Vec::new();
    for (i, (&a, &b)) in qp.quad.iter().zip(&qp.lin).enumerate() {
        x[i] = if a > 0.0 {
            ((b - hi) / a).clamp(0.0, 1.0)
        } else if b > hi {
            1.0
        } else if b < lo {
            0.0
        } else {
            tied.push(i);
            0.0
        };
    }

    let mut remaining = k - x.iter().sum::<f64>();
    for &i in &tied {
        if remaining <= 0.0 {
            break;
        }
        x[i] = remaining.min(1.0);
        remaining -= x[i];
    }

    polish(qp, x);
}

/// Moves the residual `k - sum x` left by the float resolution of the dual
/// variable onto positive-curvature coordinates, as a small shift of `mu`.
/// Interior coordinates take it when there are any.
fn polish(qp: &DiagonalQp, x: &mut [f64]) {
    let k = qp.capacity as f64;
    for _ in 0..4 {
        let residual = k - x.iter().sum::<f64>();
        if residual == 0.0 {
            break;
        }
        let interior = x.iter().zip(&qp.quad).any(|(&xi, &a)| a > 0.0 && xi > 0.0 && xi < 1.0);
        let movable = |xi: f64, a: f64| {
            a > 0.0
                && if interior {
                    xi > 0.0 && xi < 1.0
                } else if residual > 0.0 {
                    xi < 1.0
                } else {
                    xi > 0.0
                }
        };
        let weight: f64 = x.iter().zip(&qp.quad).filter(|(&xi, &a)| movable(xi, a)).map(|(_, a)| 1.0 / a).sum();
        if weight == 0.0 {
            break;
        }
        let shift = residual / weight;
        for (xi, &a) in x.iter_mut().zip(&qp.quad) {
            if movable(*xi, a) {
                *xi = (*xi + shift / a).clamp(0.0, 1.0);
            }
        }
    }
}
