//! Iteration counts of the solver variants from a common start.

use std::io::Write;
use std::path::Path;

use super::{meta, Artifacts, Driver, ExperimentConfig, Method, Stopwatch};
use crate::error::Result;
use crate::solvers::{random_initial_condition, SolveResult};

#[derive(Clone, Debug)]
pub struct MethodRun {
    pub method: Method,
    pub result: SolveResult,
    /// Iterations in units of full passes over `X`: `ceil(iterations / m)`
    /// for block methods, `iterations` otherwise.
    pub sweeps: usize,
}

#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub runs: Vec<MethodRun>,
    /// Best final `E_mu` over all runs; the reference for the error curves.
    pub best_emu: f64,
    pub min_e0: f64,
    pub artifacts: Artifacts,
}

impl ComparisonReport {
    pub fn run(&self, method: Method) -> Option<&MethodRun> {
        self.runs.iter().find(|r| r.method == method)
    }
}

pub fn run_algorithm_comparison(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ComparisonReport> {
    cfg.validate()?;
    let clock = Stopwatch::start();
    let problem = cfg.problem.build()?;
    let mu = cfg.first_mu()?;
    let base = cfg.solver_for(&problem.h).with_mu(mu);
    let x0 = random_initial_condition(&problem.grid, &problem.potential.centers, cfg.first_l_support()?, problem.m, cfg.seed)?
        .into_matrix();
    let mut runs = Vec::new();
    for &method in &cfg.methods {
        let result = method.run(&problem.h, &x0, &base)?;
        let sweeps = if method.is_block() { result.iterations.div_ceil(problem.m) } else { result.iterations };
        runs.push(MethodRun { method, result, sweeps });
    }
    let best_emu = runs.iter().map(|r| r.result.final_emu()).fold(f64::INFINITY, f64::min);
    let min_e0 = problem.spectrum.lowest_sum(problem.m);

    let mut artifacts = Artifacts::default();
    let stem = Driver::Compare.stem();
    let mut out = artifacts.create(out_dir, &format!("{stem}.csv"))?;
    writeln!(out, "method,iter,sweep,Emu,Emu_minus_best,E0_minus_min,L,backtracks,nnz,step_norm")?;
    for run in &runs {
        for r in &run.result.trace.records {
            let sweep = if run.method.is_block() { r.iter as f64 / problem.m as f64 } else { r.iter as f64 };
            writeln!(
                out,
                "{},{},{},{:.15e},{:.15e},{:.15e},{:.15e},{},{},{:.15e}",
                run.method.name(),
                r.iter,
                sweep,
                r.emu,
                r.emu - best_emu,
                r.e0 - min_e0,
                r.l_used,
                r.backtracks,
                r.nnz,
                r.step_norm
            )?;
        }
    }
    out.flush()?;
    drop(out);

    let mut out = artifacts.create(out_dir, &format!("{stem}_summary.csv"))?;
    writeln!(out, "method,converged,iterations,sweeps,final_Emu,final_Emu_minus_best,worst_increase")?;
    for run in &runs {
        writeln!(
            out,
            "{},{},{},{},{:.15e},{:.15e},{:.6e}",
            run.method.name(),
            run.result.converged,
            run.result.iterations,
            run.sweeps,
            run.result.final_emu(),
            run.result.final_emu() - best_emu,
            run.result.trace.worst_increase()
        )?;
    }
    out.flush()?;
    drop(out);

    let notes = vec![
        "Emu_minus_best is measured against the best final E_mu over all methods".into(),
        "block methods count one sweep per m column updates".into(),
    ];
    artifacts.write_meta(
        out_dir,
        &stem,
        &meta(Driver::Compare, cfg, vec![("problem".into(), problem.h.shift())], vec![cfg.seed], &clock, notes),
    )?;
    Ok(ComparisonReport { runs, best_emu, min_e0, artifacts })
}
