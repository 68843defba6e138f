//! How often each method stops at a non-global minimum, over an ensemble of
//! wide random starts.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::{meta, with_pool, Artifacts, Driver, ExperimentConfig, Method, Stopwatch};
use crate::energy::l1_norm;
use crate::error::{OmmError, Result};
use crate::solvers::{random_initial_condition, SolverConfig};

/// Swaps considered when matching an energy to a level of the spectrum.
const MAX_SWAPS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub method: Method,
    /// `None` for truncated SD, whose target is `E_0`.
    pub mu: Option<f64>,
    /// Final `E_mu` (or `E_0` for truncated SD).
    pub energy: f64,
    pub l1: f64,
    pub converged: bool,
    pub iterations: usize,
    pub worst_increase: f64,
    /// `energy - min E_target`.
    pub excess: f64,
    pub trapped: bool,
    /// Closest `sum_{i in S} lambda_i - min E_0` over `|S| <= m`.
    pub nearest_level: f64,
    pub level_distance: f64,
}

#[derive(Clone, Debug)]
pub struct LocalMinimaReport {
    pub outcomes: Vec<TrialOutcome>,
    /// `(mu, estimated min E_mu)`: best converged value over the ensemble or
    /// its refinement at a hundredth of the tolerance.
    pub min_estimates: Vec<(f64, f64)>,
    pub min_e0: f64,
    pub trap_threshold: f64,
    pub artifacts: Artifacts,
}

impl LocalMinimaReport {
    pub fn trapped(&self, method: Method, mu: Option<f64>) -> usize {
        self.outcomes.iter().filter(|o| o.method == method && o.mu == mu && o.trapped).count()
    }

    pub fn outcomes_for(&self, method: Method, mu: Option<f64>) -> impl Iterator<Item = &TrialOutcome> {
        self.outcomes.iter().filter(move |o| o.method == method && o.mu == mu)
    }
}

/// Closest level `sum_{i in S} lambda_i - sum_{i < m} lambda_i` to `excess`,
/// over index sets `S` with `|S| <= m` that differ from the lowest `m` in at
/// most `max_swaps` removed indices. Returns `(level, |level - excess|)`.
///
/// `eigenvalues` must be sorted ascending.
pub fn nearest_level(eigenvalues: &[f64], m: usize, excess: f64, max_swaps: usize) -> (f64, f64) {
    let mut best = (0.0, excess.abs());
    let removable: Vec<f64> = eigenvalues[..m].to_vec();
    let addable = &eigenvalues[m..];

    fn add_search(addable: &[f64], start: usize, picks_left: usize, sum: f64, target: f64, best: &mut (f64, f64), base: f64) {
        let d = (sum - target).abs();
        if d < best.1 {
            *best = (base + sum, d);
        }
        if picks_left == 0 {
            return;
        }
        let rest = picks_left - 1;
        for a in start..addable.len() {
            let next = sum + addable[a];
            let later = &addable[a + 1..];
            // Reachable sums after picking `a` lie in [low, high]; `low`
            // grows with `a` because `addable` is ascending.
            let low = next + later.iter().take(rest).filter(|v| **v < 0.0).sum::<f64>();
            let high = next + later.iter().rev().take(rest).filter(|v| **v > 0.0).sum::<f64>();
            if low - target > best.1 {
                break;
            }
            if target - high > best.1 {
                continue;
            }
            add_search(addable, a + 1, rest, next, target, best, base);
        }
    }

    // Enumerate removal sets R (|R| <= max_swaps) by bitmask.
    let limit = max_swaps.min(m);
    for mask in 0u32..(1u32 << m) {
        let r = mask.count_ones() as usize;
        if r > limit {
            continue;
        }
        let removed: f64 = (0..m).filter(|i| mask & (1 << i) != 0).map(|i| removable[i]).sum();
        // level = sum(A) - sum(R); find sum(A) close to excess + sum(R).
        let target = excess + removed;
        add_search(addable, 0, r, 0.0, target, &mut best, -removed);
    }
    best
}

pub fn run_local_minima_ensemble(cfg: &ExperimentConfig, out_dir: &Path) -> Result<LocalMinimaReport> {
    cfg.validate()?;
    let clock = Stopwatch::start();
    let problem = cfg.problem.build()?;
    let base = cfg.solver_for(&problem.h);
    let l_support = cfg.first_l_support()?;
    let min_e0 = problem.spectrum.lowest_sum(problem.m);
    let eigenvalues: Vec<f64> = problem.spectrum.eigenvalues.iter().copied().collect();
    let seeds: Vec<u64> = (0..cfg.trials as u64).map(|t| cfg.seed.wrapping_add(t)).collect();

    let per_trial: Vec<Result<Vec<TrialOutcome>>> = with_pool(cfg.threads, || {
        seeds
            .par_iter()
            .enumerate()
            .map(|(trial, &seed)| {
                let x0 = random_initial_condition(&problem.grid, &problem.potential.centers, l_support, problem.m, seed)?
                    .into_matrix();
                let mut out = Vec::new();
                for &method in &cfg.methods {
                    let mus: Vec<Option<f64>> =
                        if method.is_penalized() { cfg.mus.iter().map(|&mu| Some(mu)).collect() } else { vec![None] };
                    for mu in mus {
                        let solver = base.clone().with_mu(mu.unwrap_or(0.0));
                        let result = method.run(&problem.h, &x0, &solver)?;
                        let x = result.x.matrix();
                        out.push(TrialOutcome {
                            trial,
                            seed,
                            method,
                            mu,
                            energy: if mu.is_some() { result.final_emu() } else { result.final_e0() },
                            l1: l1_norm(x),
                            converged: result.converged,
                            iterations: result.iterations,
                            worst_increase: result.trace.worst_increase(),
                            excess: f64::NAN,
                            trapped: false,
                            nearest_level: f64::NAN,
                            level_distance: f64::NAN,
                        });
                    }
                }
                Ok(out)
            })
            .collect()
    })?;
    let mut outcomes = Vec::new();
    for r in per_trial {
        outcomes.extend(r?);
    }

    // Best converged E_mu per mu, then the best trial rerun to a hundredth
    // of the tolerance.
    let mut min_estimates = Vec::new();
    for &mu in &cfg.mus {
        let pool: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.mu == Some(mu)).collect();
        let converged: Vec<&TrialOutcome> = pool.iter().copied().filter(|o| o.converged).collect();
        let candidates = if converged.is_empty() { pool } else { converged };
        let Some(best) = candidates.into_iter().min_by(|a, b| a.energy.total_cmp(&b.energy)) else {
            continue;
        };
        let x0 = random_initial_condition(&problem.grid, &problem.potential.centers, l_support, problem.m, best.seed)?
            .into_matrix();
        let refine = SolverConfig { tol: base.tol * 1e-2, ..base.clone() }.with_mu(mu);
        let refined = best.method.run(&problem.h, &x0, &refine)?;
        min_estimates.push((mu, best.energy.min(refined.final_emu())));
    }

    let trap_threshold = 10.0 * cfg.solver.tol;
    for o in &mut outcomes {
        let min = match o.mu {
            Some(mu) => min_estimates
                .iter()
                .find(|(m, _)| *m == mu)
                .map(|(_, v)| *v)
                .ok_or_else(|| OmmError::MissingData(format!("no estimate of min E_mu for mu = {mu}")))?,
            None => min_e0,
        };
        o.excess = o.energy - min;
        o.trapped = !o.converged || o.excess > trap_threshold;
        let (level, distance) = nearest_level(&eigenvalues, problem.m, o.excess, MAX_SWAPS);
        o.nearest_level = level;
        o.level_distance = distance;
    }

    let mut artifacts = Artifacts::default();
    let stem = Driver::LocalMinima.stem();
    let mut out = artifacts.create(out_dir, &format!("{stem}.csv"))?;
    writeln!(
        out,
        "trial,seed,method,mu,target,energy,excess,converged,iterations,trapped,nearest_level,level_distance,worst_increase"
    )?;
    for o in &outcomes {
        writeln!(
            out,
            "{},{},{},{},{},{:.15e},{:.15e},{},{},{},{:.15e},{:.15e},{:.6e}",
            o.trial,
            o.seed,
            o.method.name(),
            o.mu.map_or_else(String::new, |m| m.to_string()),
            if o.mu.is_some() { "Emu" } else { "E0" },
            o.energy,
            o.excess,
            o.converged,
            o.iterations,
            o.trapped,
            o.nearest_level,
            o.level_distance,
            o.worst_increase
        )?;
    }
    out.flush()?;
    drop(out);

    let notes = vec![
        "min E_mu is estimated as the best converged E_mu over all penalized runs at that mu, lowered by rerunning the best trial at tol / 100".into(),
        format!("a run is trapped when it did not converge or its excess exceeds 10 * tol = {trap_threshold:e}"),
        "truncated_sd is a reconstruction: dynamic-step gradient descent on E_0 projected onto the support of X0".into(),
        format!("nearest_level searches index sets differing from the lowest m in at most {MAX_SWAPS} removals"),
    ];
    artifacts.write_meta(
        out_dir,
        &stem,
        &meta(Driver::LocalMinima, cfg, vec![("problem".into(), problem.h.shift())], seeds, &clock, notes),
    )?;
    Ok(LocalMinimaReport { outcomes, min_estimates, min_e0, trap_threshold, artifacts })
}
