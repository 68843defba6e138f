//! Iterative minimizers of `E_mu` and the support-restricted baseline.

mod block;
mod config;
mod init;
mod ista;
mod schedule;
mod shrink;
mod step;
mod trace;

use nalgebra::DMatrix;

pub use block::{BlockCache, BlockCacheEntry};
pub use config::{SolverConfig, Variant};
pub use init::random_initial_condition;
pub use schedule::{BlockSchedule, BlockScheduler, MuSchedule};
pub use shrink::{shrink, soft_threshold, soft_threshold_complex};
pub use step::{dynamic_backtrack_l, dynamic_initial_l, prox_step, sufficient_decrease};
pub use trace::{IterateRecord, IterateTrace, SolveResult, TRACE_CSV_HEADER};

use crate::energy::SupportMask;
use crate::error::{OmmError, Result};
use crate::operator::HermitianOperator;
use ista::{Proximal, StepRule};

fn check_start(h: &HermitianOperator, x0: &DMatrix<f64>) -> Result<()> {
    if x0.nrows() != h.dim() {
        return Err(OmmError::DimensionMismatch(format!(
            "operator dimension {} but X0 has {} rows",
            h.dim(),
            x0.nrows()
        )));
    }
    if x0.ncols() == 0 {
        return Err(OmmError::InvalidParameter("X0 has no columns".into()));
    }
    Ok(())
}

/// Minimize `E_mu` from `x0` with the configured variant.
///
/// Hitting `max_iters` is not an error: the result comes back with
/// `converged == false`.
pub fn solve(h: &HermitianOperator, x0: &DMatrix<f64>, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    check_start(h, x0)?;
    match cfg.variant {
        Variant::IstaBacktrack => {
            ista::run(h, x0, cfg, StepRule::Traditional { eta: cfg.eta_bt }, Proximal::Shrink)
        }
        Variant::IstaDynamic => {
            ista::run(h, x0, cfg, StepRule::Dynamic { c1: cfg.c1, c2: cfg.c2 }, Proximal::Shrink)
        }
        Variant::BlockDynamic => block::run(h, x0, cfg),
    }
}

/// Gradient descent on `E_0` restricted to a fixed support, with the dynamic
/// step rule. The `mu` schedule and variant in `cfg` are ignored.
pub fn solve_truncated_sd(
    h: &HermitianOperator,
    x0: &DMatrix<f64>,
    mask: &SupportMask,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    cfg.validate()?;
    check_start(h, x0)?;
    if mask.shape() != x0.shape() {
        return Err(OmmError::DimensionMismatch(format!(
            "mask {:?} vs X0 {:?}",
            mask.shape(),
            x0.shape()
        )));
    }
    if x0.iter().zip(mask.iter()).any(|(v, keep)| *v != 0.0 && !keep) {
        return Err(OmmError::InvalidParameter("X0 has nonzeros outside the support mask".into()));
    }
    let mut result =
        ista::run(h, x0, cfg, StepRule::Dynamic { c1: cfg.c1, c2: cfg.c2 }, Proximal::Project(mask))?;
    result.x = result.x.with_support_mask(mask.clone())?;
    Ok(result)
}

/// A starting `L0` on the scale of the curvature of `E_0` near unit-norm
/// iterates: four times the largest absolute row sum of `H`, which bounds
/// `4 |lambda_1|`.
///
/// With a tiny `L0` the first dynamic backtrack solves for the curvature of a
/// huge quartic overshoot, lands many orders of magnitude too high, and the
/// resulting sub-tolerance step ends the run at iteration 1.
pub fn suggested_l0(h: &HermitianOperator) -> f64 {
    let dense = h.dense();
    let row_sum = dense.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    4.0 * row_sum
}

/// Block index (0-based) for iteration `k >= 1`, advancing `scheduler`.
pub fn block_schedule_next(scheduler: &mut BlockScheduler, k: usize) -> usize {
    scheduler.next_block(k)
}
