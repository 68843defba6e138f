//! The discretized periodic Schrodinger operator and its exact spectrum.
//!
//! `H = -1/2 d^2/dx^2 + V(x) - eta` on a periodic interval, discretized with
//! the three-point centered difference. The matrix is kept twice: a
//! compressed sparse row view used by every solver kernel and a dense view
//! used by the eigensolver and by cross-checks.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{OmmError, Result};

/// Uniform periodic grid `x_i = i * h`, `i = 0..N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub domain_length: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub fn new(domain_length: f64, n_points: usize) -> Result<Self> {
        if !(domain_length > 0.0) || !domain_length.is_finite() {
            return Err(OmmError::InvalidParameter(format!(
                "domain length must be positive, got {domain_length}"
            )));
        }
        if n_points == 0 {
            return Err(OmmError::InvalidParameter("grid needs at least one point".into()));
        }
        Ok(Self { domain_length, n_points })
    }

    pub fn spacing(&self) -> f64 {
        self.domain_length / self.n_points as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// Grid index closest to `x`, wrapped into `0..N`.
    pub fn nearest_index(&self, x: f64) -> usize {
        let n = self.n_points as i64;
        let i = (x / self.spacing()).round() as i64;
        i.rem_euclid(n) as usize
    }
}

/// Sum of Gaussian wells `V(x) = alpha * sum_j exp(-(x - r_j)^2 / (2 beta^2))`.
///
/// Periodic images of the wells are not summed; with the default width the
/// nearest image contributes a factor `exp(-50)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPotential {
    pub alpha: f64,
    pub beta: f64,
    pub centers: Vec<f64>,
}

impl GaussianPotential {
    pub fn new(alpha: f64, beta: f64, centers: Vec<f64>) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(OmmError::InvalidParameter(format!("well width must be positive, got {beta}")));
        }
        Ok(Self { alpha, beta, centers })
    }

    /// Ten wells of width 0.1 centered at `0.5, 1.5, ..., 9.5`.
    pub fn ten_wells(alpha: f64) -> Self {
        Self {
            alpha,
            beta: 0.1,
            centers: (0..10).map(|j| j as f64 + 0.5).collect(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let denom = 2.0 * self.beta * self.beta;
        self.alpha
            * self
                .centers
                .iter()
                .map(|r| (-(x - r) * (x - r) / denom).exp())
                .sum::<f64>()
    }
}

/// How the constant `eta` in `H <- H - eta I` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ShiftPolicy {
    /// `eta = lambda_max(H0) + margin`, so the largest shifted eigenvalue is `-margin`.
    AutoMargin(f64),
    /// A fixed `eta`; rejected if the shifted operator is not negative definite.
    Explicit(f64),
}

impl Default for ShiftPolicy {
    fn default() -> Self {
        ShiftPolicy::AutoMargin(1.0)
    }
}

/// Real symmetric operator with a sparse (CSR) and a dense view.
#[derive(Clone, Debug)]
pub struct HermitianOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    dense: DMatrix<f64>,
    shift: f64,
}

impl HermitianOperator {
    /// Builds the operator from a dense matrix. Symmetry must hold exactly.
    pub fn from_dense(dense: DMatrix<f64>) -> Result<Self> {
        Self::from_dense_shifted(dense, 0.0)
    }

    fn from_dense_shifted(dense: DMatrix<f64>, shift: f64) -> Result<Self> {
        let n = dense.nrows();
        if dense.ncols() != n {
            return Err(OmmError::DimensionMismatch(format!(
                "operator must be square, got {}x{}",
                n,
                dense.ncols()
            )));
        }
        if n == 0 {
            return Err(OmmError::InvalidParameter("operator dimension must be positive".into()));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            for j in 0..n {
                let v = dense[(i, j)];
                if v != dense[(j, i)] {
                    return Err(OmmError::NotSymmetric { row: i, col: j });
                }
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { dim: n, row_ptr, col_idx, values, dense, shift })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The `eta` already subtracted from the diagonal.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn dense(&self) -> &DMatrix<f64> {
        &self.dense
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn trace(&self) -> f64 {
        self.dense.diagonal().sum()
    }

    /// Frobenius norm, used to scale tolerances.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Number of distinct periodic diagonals `(col - row) mod N` carrying nonzeros.
    pub fn band_count(&self) -> usize {
        let mut offsets = BTreeSet::new();
        for i in 0..self.dim {
            for &j in &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]] {
                offsets.insert((j + self.dim - i) % self.dim);
            }
        }
        offsets.len()
    }

    /// `HX` using the sparse view.
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.dim {
            return Err(OmmError::DimensionMismatch(format!(
                "operator is {0}x{0} but X has {1} rows",
                self.dim,
                x.nrows()
            )));
        }
        if x.ncols() == 0 {
            return Err(OmmError::DimensionMismatch("X must have at least one column".into()));
        }
        let mut out = DMatrix::zeros(self.dim, x.ncols());
        for c in 0..x.ncols() {
            self.apply_slice(x.column(c).as_slice(), out.column_mut(c).as_mut_slice());
        }
        Ok(out)
    }

    /// `y = H x` for a single column; no shape checks.
    pub(crate) fn apply_slice(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            *yi = self.col_idx[lo..hi]
                .iter()
                .zip(&self.values[lo..hi])
                .map(|(&j, v)| v * x[j])
                .sum();
        }
    }

    pub(crate) fn apply_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.dim);
        self.apply_slice(x.as_slice(), y.as_mut_slice());
        y
    }

    /// Writes the plain-text triplet format: header `N bands`, then one
    /// `row col value` line per stored nonzero (0-based indices).
    pub fn write_triplets<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {}", self.dim, self.band_count())?;
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                writeln!(out, "{} {} {:.17e}", i, self.col_idx[k], self.values[k])?;
            }
        }
        Ok(())
    }

    pub fn read_triplets<R: BufRead>(input: R) -> Result<Self> {
        let (n, bands, triplets) = read_triplet_body(input)?;
        let mut dense = DMatrix::zeros(n, n);
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(OmmError::Parse { line: 0, message: format!("entry ({i}, {j}) outside {n}x{n}") });
            }
            dense[(i, j)] = v;
        }
        let op = Self::from_dense(dense)?;
        if op.band_count() != bands {
            return Err(OmmError::Parse {
                line: 1,
                message: format!("header declares {bands} bands but entries span {}", op.band_count()),
            });
        }
        Ok(op)
    }
}

/// Parses `rows second` followed by `row col value` lines.
pub(crate) fn read_triplet_body<R: BufRead>(input: R) -> Result<(usize, usize, Vec<(usize, usize, f64)>)> {
    let mut lines = input.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let (line_no, header) = lines
        .next()
        .ok_or_else(|| OmmError::Parse { line: 1, message: "empty input".into() })?;
    let header = header?;
    let mut fields = header.split_whitespace();
    let parse_usize = |s: Option<&str>, line: usize| -> Result<usize> {
        s.and_then(|s| s.parse().ok())
            .ok_or_else(|| OmmError::Parse { line, message: format!("malformed header `{header}`") })
    };
    let n = parse_usize(fields.next(), line_no)?;
    let second = parse_usize(fields.next(), line_no)?;
    let mut triplets = Vec::new();
    for (line_no, line) in lines {
        let line = line?;
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || OmmError::Parse { line: line_no, message: format!("malformed triplet `{line}`") };
        if f.len() != 3 {
            return Err(bad());
        }
        let i: usize = f[0].parse().map_err(|_| bad())?;
        let j: usize = f[1].parse().map_err(|_| bad())?;
        let v: f64 = f[2].parse().map_err(|_| bad())?;
        triplets.push((i, j, v));
    }
    Ok((n, second, triplets))
}

/// Triplet form of a dense `N x m` matrix: header `N m`, nonzeros only.
pub fn write_matrix_triplets<W: Write>(x: &DMatrix<f64>, mut out: W) -> Result<()> {
    let mut buf = String::new();
    writeln!(buf, "{} {}", x.nrows(), x.ncols()).unwrap();
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let v = x[(i, j)];
            if v != 0.0 {
                writeln!(buf, "{i} {j} {v:.17e}").unwrap();
            }
        }
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

pub fn read_matrix_triplets<R: BufRead>(input: R) -> Result<DMatrix<f64>> {
    let (n, m, triplets) = read_triplet_body(input)?;
    let mut x = DMatrix::zeros(n, m);
    for (i, j, v) in triplets {
        if i >= n || j >= m {
            return Err(OmmError::Parse { line: 0, message: format!("entry ({i}, {j}) outside {n}x{m}") });
        }
        x[(i, j)] = v;
    }
    Ok(x)
}

/// Ascending eigenvalues with matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralData {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `lambda_{m+1} - lambda_m` (1-based), i.e. the gap above the lowest `m`.
    pub fn gap(&self, m: usize) -> Option<f64> {
        if m == 0 || m >= self.len() {
            return None;
        }
        Some(self.eigenvalues[m] - self.eigenvalues[m - 1])
    }

    /// Sum of the lowest `m` eigenvalues, the minimum of `E_0`.
    pub fn lowest_sum(&self, m: usize) -> f64 {
        self.eigenvalues.iter().take(m).sum()
    }

    fn shifted(mut self, eta: f64) -> Self {
        self.eigenvalues.add_scalar_mut(-eta);
        self
    }
}

const EIGEN_MAX_ITERS: usize = 100_000;

/// Dense symmetric eigendecomposition (Householder tridiagonalization with
/// implicit-shift QR), sorted ascending. Each eigenvector is signed so its
/// largest-magnitude entry is positive, which makes the output reproducible.
pub fn eigendecomposition(h: &HermitianOperator) -> Result<SpectralData> {
    eigendecomposition_dense(h.dense())
}

pub(crate) fn eigendecomposition_dense(a: &DMatrix<f64>) -> Result<SpectralData> {
    let eig = SymmetricEigen::try_new(a.clone(), f64::EPSILON, EIGEN_MAX_ITERS)
        .ok_or(OmmError::EigenNoConvergence { iterations: EIGEN_MAX_ITERS })?;
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let pivot = col.iter().copied().fold(0.0_f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        eigenvectors.set_column(dst, &(col * sign));
    }
    Ok(SpectralData { eigenvalues, eigenvectors })
}

/// Unshifted `H0 = -1/2 D2 + V` with periodic centered differences.
pub fn unshifted_matrix(grid: &GridSpec, pot: &GaussianPotential) -> Result<DMatrix<f64>> {
    let n = grid.n_points;
    if n < 3 {
        return Err(OmmError::InvalidParameter(format!("need at least 3 grid points, got {n}")));
    }
    let h = grid.spacing();
    let diag = 1.0 / (h * h);
    let off = -0.5 / (h * h);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = diag + pot.eval(grid.point(i));
        let next = (i + 1) % n;
        a[(i, next)] = off;
        a[(next, i)] = off;
    }
    Ok(a)
}

/// Assembles the shifted operator and its spectrum.
pub fn build_hamiltonian(
    grid: &GridSpec,
    pot: &GaussianPotential,
    shift_policy: ShiftPolicy,
) -> Result<(HermitianOperator, SpectralData)> {
    let h0 = unshifted_matrix(grid, pot)?;
    let spectrum0 = eigendecomposition_dense(&h0)?;
    let largest = spectrum0.eigenvalues[spectrum0.len() - 1];
    let eta = match shift_policy {
        ShiftPolicy::AutoMargin(margin) => {
            if !(margin > 0.0) {
                return Err(OmmError::InvalidParameter(format!("shift margin must be positive, got {margin}")));
            }
            largest + margin
        }
        ShiftPolicy::Explicit(eta) => {
            if largest - eta >= 0.0 {
                return Err(OmmError::NotNegativeDefinite { largest: largest - eta });
            }
            eta
        }
    };
    let mut shifted = h0;
    for i in 0..grid.n_points {
        shifted[(i, i)] -= eta;
    }
    let op = HermitianOperator::from_dense_shifted(shifted, eta)?;
    Ok((op, spectrum0.shifted(eta)))
}
