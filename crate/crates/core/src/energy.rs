//! Energy kernels for `E_0(X) = tr[(2I - X'X) X'HX]` and `E_mu = E_0 + mu |X|_1`.
//!
//! All kernels work from the three products `W = HX`, `S = X'X` and
//! `M = X'W`; nothing of size `N x N` is ever formed. With those,
//!
//! ```text
//! E_0      = 2 tr(M) - tr(S M)
//! grad E_0 = 4W - 2 X M - 2 W S
//! ```

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};

use crate::error::{OmmError, Result};
use crate::operator::HermitianOperator;

/// Entry pattern used by support-restricted solvers.
pub type SupportMask = DMatrix<bool>;

/// An `N x m` orbital matrix with a maintained nonzero count.
///
/// Read access goes through `Deref<Target = DMatrix<f64>>`; every mutating
/// method recounts nonzeros so [`OrbitalMatrix::nnz`] never goes stale.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitalMatrix {
    entries: DMatrix<f64>,
    nnz: usize,
    support_mask: Option<SupportMask>,
}

impl OrbitalMatrix {
    pub fn new(entries: DMatrix<f64>) -> Self {
        let nnz = count_nonzeros(&entries);
        Self { entries, nnz, support_mask: None }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(DMatrix::zeros(rows, cols))
    }

    pub fn with_support_mask(mut self, mask: SupportMask) -> Result<Self> {
        if mask.shape() != self.entries.shape() {
            return Err(OmmError::DimensionMismatch(format!(
                "mask {:?} vs matrix {:?}",
                mask.shape(),
                self.entries.shape()
            )));
        }
        self.support_mask = Some(mask);
        Ok(self)
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    pub fn support_mask(&self) -> Option<&SupportMask> {
        self.support_mask.as_ref()
    }

    /// Boolean pattern of the current nonzeros.
    pub fn nonzero_pattern(&self) -> SupportMask {
        self.entries.map(|v| v != 0.0)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn set_entries(&mut self, entries: DMatrix<f64>) {
        self.nnz = count_nonzeros(&entries);
        self.entries = entries;
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let was = self.entries[(row, col)] != 0.0;
        let now = value != 0.0;
        self.entries[(row, col)] = value;
        match (was, now) {
            (false, true) => self.nnz += 1,
            (true, false) => self.nnz -= 1,
            _ => {}
        }
    }

    pub fn set_column(&mut self, col: usize, values: &DVector<f64>) {
        let before = self.entries.column(col).iter().filter(|v| **v != 0.0).count();
        let after = values.iter().filter(|v| **v != 0.0).count();
        self.entries.set_column(col, values);
        self.nnz = self.nnz - before + after;
    }
}

impl Deref for OrbitalMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

impl From<DMatrix<f64>> for OrbitalMatrix {
    fn from(entries: DMatrix<f64>) -> Self {
        Self::new(entries)
    }
}

pub(crate) fn count_nonzeros(x: &DMatrix<f64>) -> usize {
    x.iter().filter(|v| **v != 0.0).count()
}

/// `tr(A B)` without forming the product.
pub(crate) fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Cached `W = HX`, `S = X'X`, `M = X'HX` for one iterate.
#[derive(Clone, Debug)]
pub(crate) struct Products {
    pub hx: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub m: DMatrix<f64>,
}

impl Products {
    pub fn new(h: &HermitianOperator, x: &DMatrix<f64>) -> Self {
        let mut hx = DMatrix::zeros(x.nrows(), x.ncols());
        for c in 0..x.ncols() {
            h.apply_slice(x.column(c).as_slice(), hx.column_mut(c).as_mut_slice());
        }
        let s = x.tr_mul(x);
        let m = x.tr_mul(&hx);
        Self { hx, s, m }
    }

    pub fn e0(&self) -> f64 {
        energy_from_blocks(&self.s, &self.m)
    }

    pub fn gradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut g = &self.hx * 4.0;
        g.gemm(-2.0, x, &self.m, 1.0);
        g.gemm(-2.0, &self.hx, &self.s, 1.0);
        g
    }

    /// Column `b` of the gradient, `4 W_b - 2 X M_b - 2 W S_b`.
    pub fn block_gradient(&self, x: &DMatrix<f64>, b: usize) -> DVector<f64> {
        let mut g = self.hx.column(b) * 4.0;
        g.gemv(-2.0, x, &self.m.column(b), 1.0);
        g.gemv(-2.0, &self.hx, &self.s.column(b), 1.0);
        g
    }

    /// `E_0(X + D) - E_0(X)` assembled from products that involve `D`, so the
    /// difference keeps full relative accuracy even when it is tiny compared
    /// with `E_0` itself.
    pub fn increment(&self, h: &HermitianOperator, x: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
        let hd = Products::new(h, d);
        let xd = x.tr_mul(d);
        let wd = self.hx.tr_mul(d);
        let ds = &xd + xd.transpose() + &hd.s;
        let dm = &wd + wd.transpose() + &hd.m;
        increment_from_blocks(&self.s, &self.m, &ds, &dm)
    }
}

pub(crate) fn energy_from_blocks(s: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    2.0 * m.trace() - trace_of_product(s, m)
}

/// `E_0` change when `S -> S + dS`, `M -> M + dM`.
pub(crate) fn increment_from_blocks(s: &DMatrix<f64>, m: &DMatrix<f64>, ds: &DMatrix<f64>, dm: &DMatrix<f64>) -> f64 {
    2.0 * dm.trace() - trace_of_product(s, dm) - trace_of_product(ds, m) - trace_of_product(ds, dm)
}

fn check_rows(h: &HermitianOperator, x: &DMatrix<f64>) -> Result<()> {
    if x.nrows() != h.dim() {
        return Err(OmmError::DimensionMismatch(format!(
            "operator dimension {} but X has {} rows",
            h.dim(),
            x.nrows()
        )));
    }
    Ok(())
}

pub fn e0(h: &HermitianOperator, x: &DMatrix<f64>) -> Result<f64> {
    check_rows(h, x)?;
    Ok(Products::new(h, x).e0())
}

pub fn l1_norm(x: &DMatrix<f64>) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub fn l0_count(x: &DMatrix<f64>) -> usize {
    count_nonzeros(x)
}

pub fn e_mu(h: &HermitianOperator, x: &DMatrix<f64>, mu: f64) -> Result<f64> {
    if !(mu >= 0.0) {
        return Err(OmmError::InvalidParameter(format!("mu must be non-negative, got {mu}")));
    }
    Ok(e0(h, x)? + mu * l1_norm(x))
}

pub fn grad_e0(h: &HermitianOperator, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_rows(h, x)?;
    Ok(Products::new(h, x).gradient(x))
}

/// Gradient with respect to column `b` (0-based) with the other columns frozen.
pub fn block_grad_e0(h: &HermitianOperator, x: &DMatrix<f64>, b: usize) -> Result<DVector<f64>> {
    check_rows(h, x)?;
    if b >= x.ncols() {
        return Err(OmmError::IndexOutOfRange { index: b, len: x.ncols() });
    }
    // O(N m): only column b of W, M and S is needed.
    let xb = x.column(b).into_owned();
    let hxb = h.apply_vec(&xb);
    let mb = x.tr_mul(&hxb);
    let sb = x.tr_mul(&xb);
    let hx_sb = h.apply_vec(&(x * sb));
    let mut g = hxb * 4.0;
    g.gemv(-2.0, x, &mb, 1.0);
    g.axpy(-2.0, &hx_sb, 1.0);
    Ok(g)
}

/// `E_0(X_new) - E_0(X_old)` without cancellation against the absolute energy.
pub fn e0_increment(h: &HermitianOperator, x_old: &DMatrix<f64>, x_new: &DMatrix<f64>) -> Result<f64> {
    check_rows(h, x_old)?;
    if x_old.shape() != x_new.shape() {
        return Err(OmmError::DimensionMismatch(format!("{:?} vs {:?}", x_old.shape(), x_new.shape())));
    }
    Ok(Products::new(h, x_old).increment(h, x_old, &(x_new - x_old)))
}

/// Entrywise inner product `sum_ij A_ij B_ij`.
pub fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(OmmError::DimensionMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(a.dot(b))
}

/// Coefficients of `E_0(tU) = c1 t^4 + c2 t^2` for a unit-norm direction `U`.
pub fn line_coefficients(h: &HermitianOperator, u: &DMatrix<f64>) -> Result<(f64, f64)> {
    check_rows(h, u)?;
    let norm = u.norm();
    if norm == 0.0 {
        return Err(OmmError::InvalidParameter("direction must be nonzero".into()));
    }
    if (norm - 1.0).abs() > 1e-8 {
        return Err(OmmError::InvalidParameter(format!("direction must have unit Frobenius norm, got {norm}")));
    }
    let p = Products::new(h, u);
    Ok((-trace_of_product(&p.s, &p.m), 2.0 * p.m.trace()))
}

/// Perturbation `x_i = z_i + sum_j c_j^(i) y_j` around a critical point whose
/// columns are either the eigenvector `y_i` (`occupancy[i]`) or zero.
///
/// `coefficients[(i, j)]` is the weight of eigen-direction `j` in column `i`;
/// `eigenvalues[j]` belongs to direction `j` in the chosen (not necessarily
/// sorted) eigenbasis ordering.
#[derive(Clone, Debug)]
pub struct PerturbationSpec {
    pub occupancy: Vec<bool>,
    pub coefficients: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

impl PerturbationSpec {
    pub fn new(occupancy: Vec<bool>, coefficients: DMatrix<f64>, eigenvalues: Vec<f64>) -> Result<Self> {
        let m = occupancy.len();
        let n = eigenvalues.len();
        if coefficients.shape() != (m, n) || m > n {
            return Err(OmmError::DimensionMismatch(format!(
                "coefficients {:?} must be {m}x{n} with m <= N",
                coefficients.shape()
            )));
        }
        Ok(Self { occupancy, coefficients, eigenvalues })
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self { coefficients: &self.coefficients * t, ..self.clone() }
    }

    /// `(Z, X)` in the original coordinates, given eigenvectors whose column
    /// `j` matches `eigenvalues[j]`.
    pub fn realize(&self, eigenvectors: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let m = self.occupancy.len();
        let n = eigenvectors.nrows();
        let mut z = DMatrix::zeros(n, m);
        for (i, &occ) in self.occupancy.iter().enumerate() {
            if occ {
                z.set_column(i, &eigenvectors.column(i));
            }
        }
        let x = &z + eigenvectors * self.coefficients.transpose();
        (z, x)
    }
}

/// Second-order prediction of `E_0(X) - E_0(Z)`, term by term.
pub fn expansion_delta(spec: &PerturbationSpec) -> f64 {
    let c = &spec.coefficients;
    let lam = &spec.eigenvalues;
    let m = spec.occupancy.len();
    let n = lam.len();
    let chi = |i: usize| if spec.occupancy[i] { 1.0 } else { 0.0 };

    let mut outside = 0.0;
    for i in 0..m {
        for k in m..n {
            outside += c[(i, k)].powi(2) * (2.0 * lam[k] - (lam[k] + lam[i]) * chi(i));
        }
    }

    let mut diagonal = 0.0;
    for i in 0..m {
        let cii = c[(i, i)];
        diagonal += ((1.0 - chi(i)) * cii * cii - 2.0 * cii * cii * chi(i)) * lam[i];
    }
    diagonal *= 2.0;

    // c_i^(j) is c[(j, i)]; c_j^(i) is c[(i, j)]
    let mut cross = 0.0;
    for i in 0..m {
        for j in (0..m).filter(|&j| j != i) {
            let cij = c[(j, i)];
            let cji = c[(i, j)];
            cross += cij * cji * lam[i] * chi(i) * chi(j)
                + cij * cji * lam[j] * chi(i) * chi(j)
                + cij * cij * lam[i] * chi(i)
                + cji * cji * lam[j] * chi(j)
                - cji * cji * (2.0 * lam[j] - (lam[j] + lam[i]) * chi(i));
        }
    }

    outside + diagonal - cross
}
