//! Column-block ISTA with dynamic backtracking.
//!
//! Each iteration updates one column. `W = HX`, `S = X'X` and `M = X'HX` are
//! updated in `O(Nm)` per iteration and rebuilt from scratch at the end of
//! every sweep of `m` iterations, which is also where the stopping test
//! (sweep displacement below `tol`) is applied.

use nalgebra::{DMatrix, DVector};

use super::config::SolverConfig;
use super::ista::{grow_l, StepRule, MAX_BACKTRACKS};
use super::schedule::BlockScheduler;
use super::shrink::soft_threshold;
use super::step::{majorized, secant_estimate};
use super::trace::{bump_entry_counts, IterateRecord, IterateTrace, SolveResult};
use crate::energy::{energy_from_blocks, increment_from_blocks, l1_norm, OrbitalMatrix, Products};
use crate::error::{OmmError, Result};
use crate::operator::HermitianOperator;

/// State of block `b` when it was last updated: the column before the update
/// and the block gradient that drove it.
#[derive(Clone, Debug)]
pub struct BlockCacheEntry {
    pub iteration: usize,
    pub column_before: DVector<f64>,
    pub gradient: DVector<f64>,
}

/// `p(b)` bookkeeping; `None` until block `b` is first updated.
#[derive(Clone, Debug)]
pub struct BlockCache {
    entries: Vec<Option<BlockCacheEntry>>,
}

impl BlockCache {
    pub fn new(m: usize) -> Self {
        Self { entries: vec![None; m] }
    }

    /// Iteration of the last update of `b`, 0 if never updated.
    pub fn last_update(&self, b: usize) -> usize {
        self.entries[b].as_ref().map_or(0, |e| e.iteration)
    }

    pub fn get(&self, b: usize) -> Option<&BlockCacheEntry> {
        self.entries[b].as_ref()
    }

    fn store(&mut self, b: usize, entry: BlockCacheEntry) {
        self.entries[b] = Some(entry);
    }
}

/// Rank-two-plus-diagonal changes of `S` and `M` when column `b` moves by `delta`.
fn column_update(
    x: &DMatrix<f64>,
    hx: &DMatrix<f64>,
    b: usize,
    delta: &DVector<f64>,
    h_delta: &DVector<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = x.ncols();
    let v = x.tr_mul(delta);
    let u = hx.tr_mul(delta);
    let a = delta.dot(delta);
    let c = delta.dot(h_delta);
    let mut ds = DMatrix::zeros(m, m);
    let mut dm = DMatrix::zeros(m, m);
    for j in 0..m {
        ds[(b, j)] += v[j];
        ds[(j, b)] += v[j];
        dm[(b, j)] += u[j];
        dm[(j, b)] += u[j];
    }
    ds[(b, b)] += a;
    dm[(b, b)] += c;
    (ds, dm)
}

pub(crate) fn run(h: &HermitianOperator, x0: &DMatrix<f64>, cfg: &SolverConfig) -> Result<SolveResult> {
    let (c1, c2) = (cfg.c1, cfg.c2);
    let rule = StepRule::Dynamic { c1, c2 };
    let m = x0.ncols();
    let mut x = OrbitalMatrix::new(x0.clone());
    let mut prod = Products::new(h, &x);
    let mut e0 = prod.e0();
    let mut col_l1: Vec<f64> = (0..m).map(|j| x.column(j).iter().map(|v| v.abs()).sum()).collect();
    let mut cache = BlockCache::new(m);
    let mut scheduler = BlockScheduler::new(cfg.block_schedule, m, cfg.seed)?;
    let mut last_l: Option<f64> = None;
    let mut sweep_start = x.matrix().clone();
    let mut trace = IterateTrace {
        initial_e0: e0,
        initial_l1: l1_norm(&x),
        records: Vec::new(),
        entry_counts: cfg.track_entries.then(|| DMatrix::zeros(x.nrows(), m)),
    };
    let mut converged = false;

    for k in 1..=cfg.max_iters {
        let b = scheduler.next_block(k);
        let mu = cfg.mu_schedule.mu_at(k);
        let g = prod.block_gradient(&x, b);
        let xb = x.column(b).into_owned();
        let fallback = last_l.unwrap_or(cfg.l0);
        let mut l = match cache.get(b) {
            Some(e) => secant_estimate((&g - &e.gradient).norm_squared(), (&xb - &e.column_before).norm_squared(), c1)
                .unwrap_or(fallback),
            None => fallback,
        };

        let mut backtracks = 0;
        let accepted = loop {
            let mut y = &xb - &g * (1.0 / l);
            let alpha = mu / l;
            if alpha > 0.0 {
                y.apply(|v| *v = soft_threshold(*v, alpha));
            }
            let delta = &y - &xb;
            let step_sq = delta.norm_squared();
            if step_sq == 0.0 {
                break None;
            }
            let h_delta = h.apply_vec(&delta);
            let (ds, dm) = column_update(&x, &prod.hx, b, &delta, &h_delta);
            let de = increment_from_blocks(&prod.s, &prod.m, &ds, &dm);
            let linear = g.dot(&delta);
            if majorized(de, linear, l, step_sq) {
                break Some((y, delta, h_delta, ds, dm, de, step_sq));
            }
            backtracks += 1;
            if backtracks >= MAX_BACKTRACKS {
                return Err(OmmError::BacktrackExhausted { iteration: k, attempts: backtracks });
            }
            l = grow_l(rule, l, de, linear, step_sq);
        };

        let mut step_norm = 0.0;
        if let Some((y, _delta, h_delta, ds, dm, de, step_sq)) = accepted {
            cache.store(b, BlockCacheEntry { iteration: k, column_before: xb, gradient: g });
            col_l1[b] = y.iter().map(|v| v.abs()).sum();
            x.set_column(b, &y);
            let mut wb = prod.hx.column_mut(b);
            wb += &h_delta;
            prod.s += ds;
            prod.m += dm;
            e0 += de;
            step_norm = step_sq.sqrt();
        }
        last_l = Some(l);

        let end_of_sweep = k % m == 0;
        let mut sweep_norm = f64::INFINITY;
        if end_of_sweep {
            sweep_norm = (x.matrix() - &sweep_start).norm();
            sweep_start.copy_from(x.matrix());
            prod = Products::new(h, &x);
            e0 = energy_from_blocks(&prod.s, &prod.m);
        }

        let l1: f64 = col_l1.iter().sum();
        trace.records.push(IterateRecord {
            iter: k,
            e0,
            emu: e0 + mu * l1,
            l1,
            l_used: l,
            backtracks,
            nnz: x.nnz(),
            step_norm,
            mu,
        });
        bump_entry_counts(&mut trace.entry_counts, &x);

        if end_of_sweep && sweep_norm < cfg.tol {
            converged = true;
            break;
        }
    }

    let iterations = trace.len();
    Ok(SolveResult { x, trace, converged, iterations })
}
