//! Sparse representations of the low-lying eigenspace of a Hermitian,
//! negative-definite operator.
//!
//! The crate minimizes the l1-penalized orbital minimization functional
//!
//! ```text
//! E_mu(X) = tr[(2I - X'X) X'HX] + mu * |X|_1
//! ```
//!
//! over `N x m` orbital matrices `X`. Minimizers of the unpenalized part
//! `E_0` are exactly the orthonormal bases of the span of the `m` lowest
//! eigenvectors of `H`; the penalty trades a small, controlled loss of
//! accuracy for sparse (localized) columns.
//!
//! Modules, bottom-up:
//!
//! * [`operator`]: the periodic finite-difference Schrodinger operator,
//!   sparse application and a dense eigendecomposition used as the exact
//!   reference.
//! * [`energy`]: `E_0`, `E_mu`, gradients, line restrictions and the
//!   second-order expansion around critical points.
//! * [`solvers`]: shrinkage, ISTA with traditional and dynamic
//!   backtracking, the column-block variant and a truncated steepest
//!   descent baseline.
//! * [`metrics`]: distances to the exact minimizer set, density-matrix
//!   errors and empirical convergence orders.
//! * [`experiments`]: reproducible drivers that write CSV/JSON artifacts.
//!
//! ```
//! use sparse_omm::operator::{build_hamiltonian, GaussianPotential, GridSpec, ShiftPolicy};
//! use sparse_omm::solvers::{random_initial_condition, solve, suggested_l0, SolverConfig};
//!
//! let grid = GridSpec::new(10.0, 60).unwrap();
//! let pot = GaussianPotential::ten_wells(-100.0);
//! let (h, spectrum) = build_hamiltonian(&grid, &pot, ShiftPolicy::default()).unwrap();
//! let x0 = random_initial_condition(&grid, &pot.centers, 2, 10, 7).unwrap();
//! let config = SolverConfig { tol: 1e-8, l0: suggested_l0(&h), ..SolverConfig::default() };
//! let result = solve(&h, x0.matrix(), &config).unwrap();
//! assert!(result.converged);
//! let min_e0: f64 = spectrum.eigenvalues.iter().take(10).sum();
//! assert!(result.trace.last().unwrap().e0 - min_e0 < 1e-3);
//! ```

pub mod energy;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod operator;
pub mod solvers;

pub use error::{OmmError, Result};

#[cfg(test)]
pub(crate) mod test_util;
