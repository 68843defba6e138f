//! Iteration counts and sparsity histories for starts of different widths.

use std::io::Write;
use std::path::Path;

use super::{meta, Artifacts, Driver, ExperimentConfig, Stopwatch};
use crate::error::Result;
use crate::metrics::{sparsity_stats, SparsityStats};
use crate::solvers::{random_initial_condition, SolveResult};

#[derive(Clone, Debug)]
pub struct IcRun {
    pub l_support: usize,
    pub result: SolveResult,
    pub sparsity: SparsityStats,
}

#[derive(Clone, Debug)]
pub struct IcDependenceReport {
    pub runs: Vec<IcRun>,
    /// Best final `E_mu` over the runs, the stand-in for `min E_mu`.
    pub best_emu: f64,
    pub min_e0: f64,
    pub mu: f64,
    pub artifacts: Artifacts,
}

pub fn run_ic_dependence(cfg: &ExperimentConfig, out_dir: &Path) -> Result<IcDependenceReport> {
    cfg.validate()?;
    let clock = Stopwatch::start();
    let problem = cfg.problem.build()?;
    let mu = cfg.first_mu()?;
    let mut base = cfg.methods[0].configure(&cfg.solver_for(&problem.h)).with_mu(mu);
    base.track_entries = true;
    let mut runs = Vec::new();
    for &l_support in &cfg.l_supports {
        let x0 = random_initial_condition(&problem.grid, &problem.potential.centers, l_support, problem.m, cfg.seed)?
            .into_matrix();
        let result = cfg.methods[0].run(&problem.h, &x0, &base)?;
        let sparsity = sparsity_stats(&result.trace)?;
        runs.push(IcRun { l_support, result, sparsity });
    }
    let best_emu = runs.iter().map(|r| r.result.final_emu()).fold(f64::INFINITY, f64::min);
    let min_e0 = problem.spectrum.lowest_sum(problem.m);

    let mut artifacts = Artifacts::default();
    let stem = Driver::IcDependence.stem();
    let mut out = artifacts.create(out_dir, &format!("{stem}.csv"))?;
    writeln!(out, "L,iter,Emu_minus_best,E0_minus_min,l1,nnz,step_norm")?;
    for run in &runs {
        for r in &run.result.trace.records {
            writeln!(
                out,
                "{},{},{:.15e},{:.15e},{:.15e},{},{:.15e}",
                run.l_support,
                r.iter,
                r.emu - best_emu,
                r.e0 - min_e0,
                r.l1,
                r.nnz,
                r.step_norm
            )?;
        }
    }
    out.flush()?;
    drop(out);

    let mut out = artifacts.create(out_dir, &format!("{stem}_counts.csv"))?;
    writeln!(out, "L,row,col,count")?;
    for run in &runs {
        let c = &run.sparsity.counts;
        for col in 0..c.ncols() {
            for row in 0..c.nrows() {
                writeln!(out, "{},{row},{col},{}", run.l_support, c[(row, col)])?;
            }
        }
    }
    out.flush()?;
    drop(out);

    let mut out = artifacts.create(out_dir, &format!("{stem}_summary.csv"))?;
    writeln!(out, "L,converged,iterations,final_nnz,peak_nnz,final_Emu_minus_best")?;
    for run in &runs {
        writeln!(
            out,
            "{},{},{},{},{},{:.15e}",
            run.l_support,
            run.result.converged,
            run.result.iterations,
            run.sparsity.final_nnz,
            run.sparsity.peak_nnz,
            run.result.final_emu() - best_emu
        )?;
    }
    out.flush()?;
    drop(out);

    let notes = vec!["min E_mu is estimated as the best final E_mu over the runs".into()];
    artifacts.write_meta(
        out_dir,
        &stem,
        &meta(Driver::IcDependence, cfg, vec![("problem".into(), problem.h.shift())], vec![cfg.seed], &clock, notes),
    )?;
    Ok(IcDependenceReport { runs, best_emu, min_e0, mu, artifacts })
}
