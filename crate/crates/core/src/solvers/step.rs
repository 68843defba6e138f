//! Step-size rules shared by every ISTA variant.
//!
//! `L` plays the role of an inverse step: a trial point is
//! `T_{mu/L}(X - grad/L)` and it is accepted when the quadratic model with
//! curvature `L` majorizes `E_0` at that point.

use nalgebra::DMatrix;

use super::shrink::shrink;
use crate::energy::{e0_increment, grad_e0, OrbitalMatrix};
use crate::error::{OmmError, Result};
use crate::operator::HermitianOperator;

/// Below this the secant denominator is treated as zero.
pub const SECANT_FLOOR: f64 = 1e-300;

pub fn prox_step(h: &HermitianOperator, x: &DMatrix<f64>, l: f64, mu: f64) -> Result<OrbitalMatrix> {
    if !(l > 0.0) {
        return Err(OmmError::InvalidParameter(format!("L must be positive, got {l}")));
    }
    let g = grad_e0(h, x)?;
    shrink(&(x - g / l), mu / l)
}

/// The majorization test, with `<=` so that a zero step passes.
#[inline]
pub(crate) fn majorized(delta_e0: f64, linear: f64, l: f64, step_sq: f64) -> bool {
    delta_e0 <= linear + 0.5 * l * step_sq
}

/// `E_0(X_new) <= E_0(X_old) + grad . (X_new - X_old) + L/2 |X_new - X_old|^2`.
pub fn sufficient_decrease(
    h: &HermitianOperator,
    x_old: &DMatrix<f64>,
    x_new: &DMatrix<f64>,
    grad_old: &DMatrix<f64>,
    l: f64,
) -> Result<bool> {
    let d = x_new - x_old;
    if grad_old.shape() != d.shape() {
        return Err(OmmError::DimensionMismatch("gradient shape differs from step".into()));
    }
    let delta = e0_increment(h, x_old, x_new)?;
    Ok(majorized(delta, grad_old.dot(&d), l, d.norm_squared()))
}

/// `c1 |g_{k-1} - g_{k-2}|_F / |X_{k-1} - X_{k-2}|_F`, or `None` when the
/// estimate is degenerate (vanishing denominator, zero or non-finite value).
pub(crate) fn secant_estimate(grad_diff_sq: f64, step_sq: f64, c1: f64) -> Option<f64> {
    let denom = step_sq.sqrt();
    if denom < SECANT_FLOOR {
        return None;
    }
    let est = c1 * grad_diff_sq.sqrt() / denom;
    (est.is_finite() && est > 0.0).then_some(est)
}

/// Secant initial `L` with fallback to `previous_l`.
pub fn dynamic_initial_l(
    grad_k1: &DMatrix<f64>,
    grad_k2: &DMatrix<f64>,
    x_k1: &DMatrix<f64>,
    x_k2: &DMatrix<f64>,
    c1: f64,
    previous_l: f64,
) -> f64 {
    secant_estimate((grad_k1 - grad_k2).norm_squared(), (x_k1 - x_k2).norm_squared(), c1)
        .unwrap_or(previous_l)
}

/// `c2 * 2 [dE_0 - grad . dX] / |dX|^2`: the curvature at which the failed
/// test would hold with equality, inflated by `c2`.
#[inline]
pub(crate) fn solved_l(delta_e0: f64, linear: f64, step_sq: f64, c2: f64) -> f64 {
    c2 * 2.0 * (delta_e0 - linear) / step_sq
}

pub fn dynamic_backtrack_l(
    h: &HermitianOperator,
    x_old: &DMatrix<f64>,
    x_new: &DMatrix<f64>,
    grad_old: &DMatrix<f64>,
    c2: f64,
) -> Result<f64> {
    let d = x_new - x_old;
    let step_sq = d.norm_squared();
    if step_sq == 0.0 {
        return Err(OmmError::InvalidParameter("backtracking needs a nonzero step".into()));
    }
    let delta = e0_increment(h, x_old, x_new)?;
    Ok(solved_l(delta, grad_old.dot(&d), step_sq, c2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{e0, grad_e0};
    use crate::test_util::{assert_close, diag, random_matrix, random_negative_definite, rng};

    fn col(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(values.len(), 1, values)
    }

    #[test]
    fn prox_at_critical_point() {
        let h = diag(&[-1.0, -2.0]);
        let p = prox_step(&h, &col(&[0.0, 1.0]), 1.0, 0.2).unwrap();
        assert_close(p[0], 0.0, 0.0);
        assert_close(p[1], 0.8, 1e-15);
        assert_eq!(p.nnz(), 1);
    }

    #[test]
    fn prox_zero_and_full_threshold() {
        let h = diag(&[-1.0, -2.0]);
        assert_eq!(*prox_step(&h, &DMatrix::zeros(2, 1), 1.0, 0.0).unwrap(), DMatrix::zeros(2, 1));
        let x = col(&[0.3, -0.7]);
        let y = &x - grad_e0(&h, &x).unwrap();
        let huge = y.amax();
        assert_eq!(*prox_step(&h, &x, 1.0, huge).unwrap(), DMatrix::zeros(2, 1));
        assert!(prox_step(&h, &x, 0.0, 0.1).is_err());
    }

    #[test]
    fn decrease_holds_for_zero_step() {
        let h = diag(&[-1.0, -2.0]);
        let x = col(&[0.3, 0.4]);
        let g = grad_e0(&h, &x).unwrap();
        assert!(sufficient_decrease(&h, &x, &x, &g, 1e-9).unwrap());
    }

    #[test]
    fn decrease_holds_for_large_l() {
        // Brute-force curvature bound along random steps on a 3x2 instance.
        let mut r = rng(5);
        let h = random_negative_definite(&mut r, 3);
        for _ in 0..20 {
            let x = random_matrix(&mut r, 3, 2) * 0.5;
            let d = random_matrix(&mut r, 3, 2) * 0.1;
            let g = grad_e0(&h, &x).unwrap();
            let mut curvature: f64 = 0.0;
            for s in 1..=100 {
                let t = s as f64 / 100.0;
                let xt = &x + &d * t;
                let resid = e0(&h, &xt).unwrap() - e0(&h, &x).unwrap() - t * g.dot(&d);
                curvature = curvature.max(2.0 * resid / (t * t * d.norm_squared()));
            }
            let l = 10.0 * curvature.max(1e-3);
            assert!(sufficient_decrease(&h, &x, &(&x + &d), &g, l).unwrap());
        }
    }

    #[test]
    fn decrease_fails_for_uphill_overshoot() {
        // E_0(t e1) = t^4 - 2t^2; from t = 1 (a minimum) jump to t = 3.
        let h = diag(&[-1.0, -2.0]);
        let x = col(&[1.0, 0.0]);
        let g = grad_e0(&h, &x).unwrap();
        // LHS: E(3) = 63 vs E(1) = -1; RHS: -1 + 0 + L/2 * 4
        assert!(!sufficient_decrease(&h, &x, &col(&[3.0, 0.0]), &g, 1e-6).unwrap());
        assert!(sufficient_decrease(&h, &x, &col(&[3.0, 0.0]), &g, 32.0).unwrap());
        assert!(!sufficient_decrease(&h, &x, &col(&[3.0, 0.0]), &g, 31.999).unwrap());
    }

    #[test]
    fn secant_fallbacks() {
        let g = col(&[1.0, 2.0]);
        let x1 = col(&[0.0, 1.0]);
        let x2 = col(&[0.5, 1.0]);
        assert_eq!(dynamic_initial_l(&g, &g, &x1, &x2, 1.5, 7.0), 7.0);
        assert_eq!(dynamic_initial_l(&g, &(&g * 2.0), &x1, &x1, 1.5, 7.0), 7.0);
    }

    #[test]
    fn secant_on_quadratic() {
        // gradient of 2 x^2 is 4x: secant is exactly 4
        let (xa, xb) = (col(&[0.7]), col(&[-0.2]));
        let l = dynamic_initial_l(&(&xa * 4.0), &(&xb * 4.0), &xa, &xb, 1.5, 1.0);
        assert_close(l, 6.0, 1e-14);
        for s in [1e-3, 0.5, 10.0] {
            let ls = dynamic_initial_l(&(&xa * (4.0 * s)), &(&xb * (4.0 * s)), &(&xa * s), &(&xb * s), 1.5, 1.0);
            assert_close(ls, 6.0, 1e-13);
        }
    }

    #[test]
    fn solved_l_on_quadratic() {
        // E(x + d) - E(x) - g.d = kappa/2 |d|^2 for a quadratic
        let kappa = 3.0;
        let d2 = 0.04;
        let delta = 0.1 + 0.5 * kappa * d2;
        assert_close(solved_l(delta, 0.1, d2, 2.0), 2.0 * kappa, 1e-13);
    }

    #[test]
    fn backtrack_exceeds_failed_l_and_c2_one_is_boundary() {
        let h = diag(&[-1.0, -2.0]);
        let x = col(&[1.0, 0.0]);
        let xn = col(&[3.0, 0.0]);
        let g = grad_e0(&h, &x).unwrap();
        let l_fail = 1.0;
        assert!(!sufficient_decrease(&h, &x, &xn, &g, l_fail).unwrap());
        let l_new = dynamic_backtrack_l(&h, &x, &xn, &g, 2.0).unwrap();
        assert!(l_new > l_fail);
        let boundary = dynamic_backtrack_l(&h, &x, &xn, &g, 1.0).unwrap();
        assert_close(boundary, 32.0, 1e-12);
        let d = &xn - &x;
        let lhs = e0(&h, &xn).unwrap() - e0(&h, &x).unwrap();
        assert_close(lhs, g.dot(&d) + 0.5 * boundary * d.norm_squared(), 1e-12);
        assert!(dynamic_backtrack_l(&h, &x, &x, &g, 2.0).is_err());
    }
}
