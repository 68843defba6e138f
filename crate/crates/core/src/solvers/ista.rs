//! Full-matrix iterations: ISTA with traditional or dynamic backtracking, and
//! the support-projected gradient descent used as the truncated baseline.

use nalgebra::DMatrix;

use super::config::SolverConfig;
use super::shrink::shrink_in_place;
use super::step::{majorized, secant_estimate, solved_l};
use super::trace::{bump_entry_counts, IterateRecord, IterateTrace, SolveResult};
use crate::energy::{l1_norm, OrbitalMatrix, Products, SupportMask};
use crate::error::{OmmError, Result};
use crate::operator::HermitianOperator;

pub(crate) const MAX_BACKTRACKS: usize = 200;

#[derive(Clone, Copy, Debug)]
pub(crate) enum StepRule {
    Traditional { eta: f64 },
    Dynamic { c1: f64, c2: f64 },
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Proximal<'a> {
    /// `T_{mu/L}`, with `mu` read from the schedule.
    Shrink,
    /// Zero everything outside the mask; `mu` is fixed at 0.
    Project(&'a SupportMask),
}

/// Next inverse step after a failed majorization test.
pub(crate) fn grow_l(rule: StepRule, l: f64, delta: f64, linear: f64, step_sq: f64) -> f64 {
    let next = match rule {
        StepRule::Traditional { eta } => eta * l,
        StepRule::Dynamic { c2, .. } => solved_l(delta, linear, step_sq, c2),
    };
    // A failed test implies next > l in exact arithmetic; keep it that way.
    if next.is_finite() && next > l {
        next
    } else {
        2.0 * l
    }
}

pub(crate) fn run(
    h: &HermitianOperator,
    x0: &DMatrix<f64>,
    cfg: &SolverConfig,
    rule: StepRule,
    prox: Proximal<'_>,
) -> Result<SolveResult> {
    let mut x = x0.clone();
    let mut prod = Products::new(h, &x);
    let mut e0 = prod.e0();
    let mut grad = prod.gradient(&x);
    let mut history: Option<(DMatrix<f64>, DMatrix<f64>)> = None;
    let mut l_prev = cfg.l0;
    let mut trace = IterateTrace {
        initial_e0: e0,
        initial_l1: l1_norm(&x),
        records: Vec::new(),
        entry_counts: cfg.track_entries.then(|| DMatrix::zeros(x.nrows(), x.ncols())),
    };
    let mut converged = false;

    for k in 1..=cfg.max_iters {
        let mu = match prox {
            Proximal::Shrink => cfg.mu_schedule.mu_at(k),
            Proximal::Project(_) => 0.0,
        };
        let mut l = match (rule, &history) {
            (StepRule::Dynamic { c1, .. }, Some((x_old, g_old))) => {
                secant_estimate((&grad - g_old).norm_squared(), (&x - x_old).norm_squared(), c1)
                    .unwrap_or(l_prev)
            }
            _ => l_prev,
        };

        let mut backtracks = 0;
        let (trial, step_sq) = loop {
            let mut trial = &x - &grad * (1.0 / l);
            match prox {
                Proximal::Shrink => shrink_in_place(&mut trial, mu / l),
                Proximal::Project(mask) => trial.zip_apply(mask, |v, keep| {
                    if !keep {
                        *v = 0.0;
                    }
                }),
            }
            let d = &trial - &x;
            let step_sq = d.norm_squared();
            if step_sq == 0.0 {
                break (trial, 0.0);
            }
            let delta = prod.increment(h, &x, &d);
            let linear = grad.dot(&d);
            if majorized(delta, linear, l, step_sq) {
                break (trial, step_sq);
            }
            backtracks += 1;
            if backtracks >= MAX_BACKTRACKS {
                return Err(OmmError::BacktrackExhausted { iteration: k, attempts: backtracks });
            }
            l = grow_l(rule, l, delta, linear, step_sq);
        };

        if step_sq > 0.0 {
            let new_prod = Products::new(h, &trial);
            let new_grad = new_prod.gradient(&trial);
            let old_x = std::mem::replace(&mut x, trial);
            let old_grad = std::mem::replace(&mut grad, new_grad);
            history = Some((old_x, old_grad));
            prod = new_prod;
            e0 = prod.e0();
        }
        l_prev = l;

        let l1 = l1_norm(&x);
        let step_norm = step_sq.sqrt();
        trace.records.push(IterateRecord {
            iter: k,
            e0,
            emu: e0 + mu * l1,
            l1,
            l_used: l,
            backtracks,
            nnz: crate::energy::count_nonzeros(&x),
            step_norm,
            mu,
        });
        bump_entry_counts(&mut trace.entry_counts, &x);

        if step_norm < cfg.tol {
            converged = true;
            break;
        }
    }

    let iterations = trace.len();
    Ok(SolveResult { x: OrbitalMatrix::new(x), trace, converged, iterations })
}
