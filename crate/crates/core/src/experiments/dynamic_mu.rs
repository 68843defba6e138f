//! Constant `mu` against a schedule that raises `mu` for a while.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{meta, Artifacts, Driver, ExperimentConfig, Stopwatch};
use crate::error::Result;
use crate::solvers::{random_initial_condition, SolveResult, SolverConfig};

#[derive(Clone, Debug)]
pub struct DynamicMuReport {
    pub constant: SolveResult,
    pub variable: SolveResult,
    pub min_e0: f64,
    pub artifacts: Artifacts,
}

#[derive(Serialize)]
struct Comparison {
    constant_mu: f64,
    constant_iterations: usize,
    constant_converged: bool,
    constant_final_e0_excess: f64,
    variable_iterations: usize,
    variable_converged: bool,
    variable_final_e0_excess: f64,
    iteration_ratio: f64,
}

fn write_trace(artifacts: &mut Artifacts, dir: &Path, name: &str, r: &SolveResult) -> Result<()> {
    let mut out = artifacts.create(dir, name)?;
    r.trace.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

pub fn run_dynamic_mu(cfg: &ExperimentConfig, out_dir: &Path) -> Result<DynamicMuReport> {
    cfg.validate()?;
    let clock = Stopwatch::start();
    let problem = cfg.problem.build()?;
    let mu = cfg.first_mu()?;
    let base = cfg.methods[0].configure(&cfg.solver_for(&problem.h));
    let x0 = random_initial_condition(&problem.grid, &problem.potential.centers, cfg.first_l_support()?, problem.m, cfg.seed)?
        .into_matrix();
    let constant = cfg.methods[0].run(&problem.h, &x0, &base.clone().with_mu(mu))?;
    let variable_cfg = SolverConfig { mu_schedule: cfg.mu_schedule.clone(), ..base };
    let variable = cfg.methods[0].run(&problem.h, &x0, &variable_cfg)?;
    let min_e0 = problem.spectrum.lowest_sum(problem.m);

    let mut artifacts = Artifacts::default();
    let stem = Driver::DynamicMu.stem();
    write_trace(&mut artifacts, out_dir, &format!("{stem}_constant.csv"), &constant)?;
    write_trace(&mut artifacts, out_dir, &format!("{stem}_variable.csv"), &variable)?;

    let mut out = artifacts.create(out_dir, &format!("{stem}.csv"))?;
    writeln!(out, "run,converged,iterations,final_Emu,final_E0_minus_min")?;
    for (name, r) in [("constant", &constant), ("variable", &variable)] {
        writeln!(out, "{name},{},{},{:.15e},{:.15e}", r.converged, r.iterations, r.final_emu(), r.final_e0() - min_e0)?;
    }
    out.flush()?;
    drop(out);

    let comparison = Comparison {
        constant_mu: mu,
        constant_iterations: constant.iterations,
        constant_converged: constant.converged,
        constant_final_e0_excess: constant.final_e0() - min_e0,
        variable_iterations: variable.iterations,
        variable_converged: variable.converged,
        variable_final_e0_excess: variable.final_e0() - min_e0,
        iteration_ratio: constant.iterations as f64 / variable.iterations as f64,
    };
    let mut out = artifacts.create(out_dir, &format!("{stem}_comparison.json"))?;
    serde_json::to_writer_pretty(&mut out, &comparison)?;
    writeln!(out)?;
    out.flush()?;
    drop(out);

    artifacts.write_meta(
        out_dir,
        &stem,
        &meta(Driver::DynamicMu, cfg, vec![("problem".into(), problem.h.shift())], vec![cfg.seed], &clock, vec![]),
    )?;
    Ok(DynamicMuReport { constant, variable, min_e0, artifacts })
}
