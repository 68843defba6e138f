//! Accuracy measures against the exact minimizer set and convergence orders.
//!
//! The minimizers of `E_0` are `S_0 = { UG : G orthogonal }`, where `U` holds
//! the `m` lowest eigenvectors. Everything here works with `m x m` blocks
//! (`U'X`, `X'X`, `X'HX`), so nothing of size `N x N` is formed.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::energy::l1_norm;
use crate::error::{OmmError, Result};
use crate::operator::{HermitianOperator, SpectralData};
use crate::solvers::IterateTrace;

pub const CONVERGENCE_CSV_HEADER: &str = "mu,min_gap_Emu,order1,e0_excess,order2,dist,order3";

/// The exact eigenspace of the `m` lowest eigenvalues.
#[derive(Clone, Debug)]
pub struct EigenspaceReference {
    /// `N x m`, orthonormal columns.
    pub basis: DMatrix<f64>,
    pub min_e0: f64,
    /// `lambda_{m+1} - lambda_m`.
    pub gap: f64,
    /// Set when the gap vanishes; `S_0` is then larger than one orbit of `U`.
    pub degenerate: bool,
}

/// Relative size below which the gap is treated as zero.
const DEGENERATE_GAP: f64 = 1e-12;

pub fn make_reference(spec: &SpectralData, m: usize) -> Result<EigenspaceReference> {
    let n = spec.len();
    if m == 0 || m >= n {
        return Err(OmmError::InvalidParameter(format!("need 0 < m < N, got m = {m}, N = {n}")));
    }
    let gap = spec.eigenvalues[m] - spec.eigenvalues[m - 1];
    let scale = spec.eigenvalues.amax().max(1.0);
    Ok(EigenspaceReference {
        basis: spec.eigenvectors.columns(0, m).into_owned(),
        min_e0: spec.lowest_sum(m),
        gap,
        degenerate: gap.abs() <= DEGENERATE_GAP * scale,
    })
}

fn check_shape(x: &DMatrix<f64>, r: &EigenspaceReference) -> Result<()> {
    if x.shape() != r.basis.shape() {
        return Err(OmmError::DimensionMismatch(format!(
            "X is {:?} but the reference basis is {:?}",
            x.shape(),
            r.basis.shape()
        )));
    }
    Ok(())
}

/// The orthogonal `G` minimizing `|X - UG|_F`: the polar factor of `U'X`.
pub fn procrustes_rotation(x: &DMatrix<f64>, r: &EigenspaceReference) -> Result<DMatrix<f64>> {
    check_shape(x, r)?;
    let a = r.basis.tr_mul(x);
    let svd = a.svd(true, true);
    // Both factors are full orthogonal matrices for a square input, so the
    // directions belonging to zero singular values are completed for free.
    let p = svd.u.ok_or_else(|| OmmError::MissingData("SVD left factor".into()))?;
    let qt = svd.v_t.ok_or_else(|| OmmError::MissingData("SVD right factor".into()))?;
    Ok(p * qt)
}

/// `min_G |X - UG|_F` over orthogonal `G`.
pub fn distance_to_s0(x: &DMatrix<f64>, r: &EigenspaceReference) -> Result<f64> {
    let g = procrustes_rotation(x, r)?;
    Ok((x - &r.basis * g).norm())
}

/// `|X'X - I|_F`.
pub fn orthogonality_error(x: &DMatrix<f64>) -> f64 {
    let mut s = x.tr_mul(x);
    for i in 0..s.nrows() {
        s[(i, i)] -= 1.0;
    }
    s.norm()
}

/// `(|XX' - P_0|_F, |X(X'X)^{-1}X' - P_0|_F)`. The second is `None` when
/// `X'X` is not positive definite.
pub fn density_errors(x: &DMatrix<f64>, r: &EigenspaceReference) -> Result<(f64, Option<f64>)> {
    check_shape(x, r)?;
    let m = x.ncols() as f64;
    let s = x.tr_mul(x);
    let a = r.basis.tr_mul(x);
    let a_sq = a.norm_squared();
    let tilde = (s.norm_squared() - 2.0 * a_sq + m).max(0.0).sqrt();
    let proj = s.cholesky().map(|c| {
        let ata = a.tr_mul(&a);
        let t = c.solve(&ata).trace();
        (2.0 * m - 2.0 * t).max(0.0).sqrt()
    });
    Ok((tilde, proj))
}

/// `tr[(X'X)^{-1} X'HX]`.
pub fn rayleigh_energy(h: &HermitianOperator, x: &DMatrix<f64>) -> Result<f64> {
    let hx = h.apply(x)?;
    let s = x.tr_mul(x);
    let m = x.tr_mul(&hx);
    let c = s.cholesky().ok_or(OmmError::RankDeficient)?;
    Ok(c.solve(&m).trace())
}

/// `mu * |UG*|_1` with `G*` the Procrustes rotation of `X`: the penalty paid
/// by the nearest exact minimizer, which bounds `min E_mu - min E_0`.
pub fn penalty_bound(x: &DMatrix<f64>, r: &EigenspaceReference, mu: f64) -> Result<f64> {
    let g = procrustes_rotation(x, r)?;
    Ok(mu * l1_norm(&(&r.basis * g)))
}

/// Subgradient optimality residuals of `E_mu` at `X`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stationarity {
    /// `max (|dE_0/dx| - mu)_+` over zero entries.
    pub zero_excess: f64,
    /// `max |dE_0/dx + mu sign(x)|` over nonzero entries.
    pub nonzero_residual: f64,
    pub grad_norm: f64,
    /// `mu sqrt(Nm)`, the bound on `grad_norm` at a minimizer.
    pub grad_bound: f64,
}

impl Stationarity {
    /// Both entrywise residuals within `tol` and the gradient norm within
    /// the relative slack `rel`.
    pub fn holds(&self, tol: f64, rel: f64) -> bool {
        self.zero_excess <= tol && self.nonzero_residual <= tol && self.grad_norm <= self.grad_bound * (1.0 + rel)
    }
}

pub fn stationarity(h: &HermitianOperator, x: &DMatrix<f64>, mu: f64) -> Result<Stationarity> {
    let g = crate::energy::grad_e0(h, x)?;
    let mut zero_excess: f64 = 0.0;
    let mut nonzero_residual: f64 = 0.0;
    for (gi, xi) in g.iter().zip(x.iter()) {
        if *xi == 0.0 {
            zero_excess = zero_excess.max(gi.abs() - mu);
        } else {
            nonzero_residual = nonzero_residual.max((gi + mu * xi.signum()).abs());
        }
    }
    Ok(Stationarity {
        zero_excess,
        nonzero_residual,
        grad_norm: g.norm(),
        grad_bound: mu * ((x.nrows() * x.ncols()) as f64).sqrt(),
    })
}

/// One row of a mu-halving convergence table. Orders sit on the row of the
/// smaller `mu` and compare it with the row above.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub mu: f64,
    pub min_gap_emu: f64,
    pub e0_excess: f64,
    pub dist: f64,
    pub orders: [Option<f64>; 3],
}

impl ConvergenceRow {
    pub fn new(mu: f64, min_gap_emu: f64, e0_excess: f64, dist: f64) -> Self {
        Self { mu, min_gap_emu, e0_excess, dist, orders: [None; 3] }
    }

    fn values(&self) -> [f64; 3] {
        [self.min_gap_emu, self.e0_excess, self.dist]
    }
}

/// `log2(v(mu) / v(mu/2))` for each column.
pub fn convergence_orders(rows: &mut [ConvergenceRow]) -> Result<()> {
    for i in 1..rows.len() {
        let ratio = rows[i - 1].mu / rows[i].mu;
        if (ratio - 2.0).abs() > 1e-12 {
            return Err(OmmError::InvalidParameter(format!(
                "mu ladder must halve: {} then {}",
                rows[i - 1].mu,
                rows[i].mu
            )));
        }
        let (prev, cur) = (rows[i - 1].values(), rows[i].values());
        for c in 0..3 {
            let order = (prev[c] / cur[c]).log2();
            rows[i].orders[c] = order.is_finite().then_some(order);
        }
    }
    if let Some(first) = rows.first_mut() {
        first.orders = [None; 3];
    }
    Ok(())
}

pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], mut out: W) -> Result<()> {
    let order = |o: Option<f64>| o.map_or_else(String::new, |v| format!("{v:.6}"));
    writeln!(out, "{CONVERGENCE_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{:.15e},{:.15e},{},{:.15e},{},{:.15e},{}",
            r.mu,
            r.min_gap_emu,
            order(r.orders[0]),
            r.e0_excess,
            order(r.orders[1]),
            r.dist,
            order(r.orders[2])
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparsityStats {
    /// Iterations after which each entry was nonzero.
    pub counts: DMatrix<u32>,
    pub iterations: usize,
    pub final_nnz: usize,
    pub peak_nnz: usize,
}

pub fn sparsity_stats(trace: &IterateTrace) -> Result<SparsityStats> {
    let counts = trace
        .entry_counts
        .clone()
        .ok_or_else(|| OmmError::MissingData("trace was recorded without per-entry counters".into()))?;
    Ok(SparsityStats {
        counts,
        iterations: trace.len(),
        final_nnz: trace.last().map_or(0, |r| r.nnz),
        peak_nnz: trace.records.iter().map(|r| r.nnz).max().unwrap_or(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::eigendecomposition;
    use crate::test_util::{assert_close, diag, random_matrix, random_negative_definite, rng};

    fn toy_ref() -> EigenspaceReference {
        make_reference(&eigendecomposition(&diag(&[-1.0, -2.0])).unwrap(), 1).unwrap()
    }

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn toy_reference() {
        let r = toy_ref();
        assert_eq!(r.basis, col(&[0.0, 1.0]));
        assert_eq!(r.min_e0, -2.0);
        assert_eq!(r.gap, 1.0);
        assert!(!r.degenerate);
        let spec = eigendecomposition(&diag(&[-1.0, -2.0])).unwrap();
        assert!(make_reference(&spec, 2).is_err());
        let flat = eigendecomposition(&diag(&[-1.0, -1.0, -3.0])).unwrap();
        assert!(make_reference(&flat, 2).unwrap().degenerate);
    }

    #[test]
    fn toy_distances() {
        let r = toy_ref();
        assert_close(distance_to_s0(&r.basis, &r).unwrap(), 0.0, 1e-15);
        assert_close(distance_to_s0(&col(&[0.0, 0.5]), &r).unwrap(), 0.5, 1e-15);
        assert_close(distance_to_s0(&col(&[0.0, -0.5]), &r).unwrap(), 0.5, 1e-15);
        assert_close(distance_to_s0(&col(&[1.0, 0.0]), &r).unwrap(), 2f64.sqrt(), 1e-15);
    }

    #[test]
    fn distance_matches_grid_search_over_rotations() {
        let mut g = rng(5);
        let h = random_negative_definite(&mut g, 5);
        let r = make_reference(&eigendecomposition(&h).unwrap(), 2).unwrap();
        let x = random_matrix(&mut g, 5, 2);
        // O(2) is two circles: rotations and reflections.
        let mut best = f64::INFINITY;
        let steps = 20_000;
        for k in 0..steps {
            let t = 2.0 * std::f64::consts::PI * k as f64 / steps as f64;
            let (s, c) = t.sin_cos();
            for gm in [
                DMatrix::from_row_slice(2, 2, &[c, -s, s, c]),
                DMatrix::from_row_slice(2, 2, &[c, s, s, -c]),
            ] {
                best = best.min((&x - &r.basis * gm).norm());
            }
        }
        assert_close(distance_to_s0(&x, &r).unwrap(), best, 1e-3);
    }

    #[test]
    fn orthogonality_cases() {
        assert_close(orthogonality_error(&DMatrix::identity(4, 2)), 0.0, 0.0);
        assert_close(orthogonality_error(&col(&[1.0, 1.0])), 1.0, 1e-15);
        assert_close(orthogonality_error(&DMatrix::zeros(5, 3)), 3f64.sqrt(), 1e-15);
    }

    #[test]
    fn density_toys() {
        let r = toy_ref();
        let (t, p) = density_errors(&r.basis, &r).unwrap();
        assert_close(t, 0.0, 1e-15);
        assert_close(p.unwrap(), 0.0, 1e-7);
        let (t, p) = density_errors(&(&r.basis * 2.0), &r).unwrap();
        assert_close(t, 3.0, 1e-14);
        assert_close(p.unwrap(), 0.0, 1e-7);
        let (_, p) = density_errors(&DMatrix::zeros(2, 1), &r).unwrap();
        assert!(p.is_none());
    }

    #[test]
    fn density_matches_dense_oracle() {
        let mut g = rng(9);
        let h = random_negative_definite(&mut g, 7);
        let r = make_reference(&eigendecomposition(&h).unwrap(), 3).unwrap();
        let x = random_matrix(&mut g, 7, 3);
        let p0 = &r.basis * r.basis.transpose();
        let tilde = (&x * x.transpose() - &p0).norm();
        let s_inv = x.tr_mul(&x).try_inverse().unwrap();
        let proj = (&x * s_inv * x.transpose() - &p0).norm();
        let (t, p) = density_errors(&x, &r).unwrap();
        assert_close(t, tilde, 1e-10);
        assert_close(p.unwrap(), proj, 1e-10);
    }

    #[test]
    fn rayleigh_cases() {
        let mut g = rng(2);
        let h = random_negative_definite(&mut g, 6);
        let spec = eigendecomposition(&h).unwrap();
        let r = make_reference(&spec, 2).unwrap();
        let e = rayleigh_energy(&h, &r.basis).unwrap();
        assert_close(e, spec.lowest_sum(2), 1e-12);
        assert_close(rayleigh_energy(&h, &(&r.basis * 5.0)).unwrap(), e, 1e-12);
        assert_close(crate::energy::e0(&h, &r.basis).unwrap(), e, 1e-12);
        assert!(matches!(rayleigh_energy(&h, &DMatrix::zeros(6, 2)), Err(OmmError::RankDeficient)));
    }

    #[test]
    fn order_cases() {
        let mut rows = vec![
            ConvergenceRow::new(0.5, 4e-1, 4e-4, 1.0),
            ConvergenceRow::new(0.25, 2e-1, 1e-4, 1.0),
        ];
        convergence_orders(&mut rows).unwrap();
        assert_eq!(rows[0].orders, [None; 3]);
        assert_close(rows[1].orders[0].unwrap(), 1.0, 1e-15);
        assert_close(rows[1].orders[1].unwrap(), 2.0, 1e-15);
        assert_close(rows[1].orders[2].unwrap(), 0.0, 1e-15);
        rows[1].mu = 0.2;
        assert!(convergence_orders(&mut rows).is_err());
    }

    #[test]
    fn order_from_published_table_entries() {
        let mut rows = vec![
            ConvergenceRow::new(2f64.powi(-8), 2.4412e-1, 1.0, 1.0),
            ConvergenceRow::new(2f64.powi(-9), 1.2208e-1, 1.0, 1.0),
        ];
        convergence_orders(&mut rows).unwrap();
        assert_close(rows[1].orders[0].unwrap(), 0.99976, 5e-4);
    }

    #[test]
    fn sparsity_requires_counters() {
        let mut t = IterateTrace::default();
        assert!(sparsity_stats(&t).is_err());
        t.entry_counts = Some(DMatrix::zeros(3, 2));
        let s = sparsity_stats(&t).unwrap();
        assert_eq!(s.iterations, 0);
        assert_eq!(s.peak_nnz, 0);
        assert!(s.counts.iter().all(|c| *c == 0));
    }

    #[test]
    fn convergence_csv_layout() {
        let mut rows = vec![ConvergenceRow::new(0.5, 0.4, 0.4, 0.4), ConvergenceRow::new(0.25, 0.2, 0.1, 0.2)];
        convergence_orders(&mut rows).unwrap();
        let mut buf = Vec::new();
        write_convergence_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CONVERGENCE_CSV_HEADER);
        assert_eq!(lines[1].split(',').nth(2), Some(""));
        assert_eq!(lines[2].split(',').nth(4), Some("2.000000"));
    }
}
