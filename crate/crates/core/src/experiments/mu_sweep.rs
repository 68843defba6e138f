//! Convergence of the penalized minimizers as `mu` halves.

use std::io::Write;
use std::path::Path;

use super::{meta, Artifacts, Driver, ExperimentConfig, ProblemConfig, Stopwatch};
use crate::energy::{e0, e_mu};
use crate::error::Result;
use crate::metrics::{
    convergence_orders, density_errors, distance_to_s0, make_reference, orthogonality_error, penalty_bound,
    stationarity, write_convergence_csv, ConvergenceRow, Stationarity,
};
use crate::solvers::random_initial_condition;

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub alpha: f64,
    pub gap: f64,
    /// `min E_mu` is estimated by `E_mu` of the converged iterate.
    pub row: ConvergenceRow,
    pub converged: bool,
    pub iterations: usize,
    pub e_mu: f64,
    pub e0: f64,
    pub orth_error: f64,
    pub density_tilde: f64,
    pub density_proj: Option<f64>,
    /// `mu |UG*|_1`: the slack allowed for `E_mu(X_mu) - min E_0`.
    pub penalty_bound: f64,
    pub stationarity: Stationarity,
    pub nnz: usize,
    pub worst_increase: f64,
}

#[derive(Clone, Debug)]
pub struct MuSweepReport {
    pub rows: Vec<SweepRow>,
    /// `(alpha, mu, exported column of X_mu)`.
    pub columns: Vec<(f64, f64, Vec<f64>)>,
    pub artifacts: Artifacts,
}

impl MuSweepReport {
    pub fn rows_for(&self, alpha: f64) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.alpha == alpha)
    }
}

const HEADER: &str = "alpha,mu,min_gap_Emu,order1,e0_excess,order2,dist,order3,converged,iterations,\
orth_error,density_tilde,density_proj,penalty_bound,zero_excess,nonzero_residual,grad_norm,grad_bound,nnz,worst_increase";

/// For each `alpha` and each `mu` of the ladder (largest first), solve to the
/// configured tolerance, warm-starting from the previous `mu`, and tabulate
/// the errors against the exact eigenspace.
pub fn run_mu_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<MuSweepReport> {
    cfg.validate()?;
    let clock = Stopwatch::start();
    let l_support = cfg.first_l_support()?;
    let mut rows = Vec::new();
    let mut columns = Vec::new();
    let mut shifts = Vec::new();

    for &alpha in &cfg.alphas {
        let problem = ProblemConfig { alpha, ..cfg.problem.clone() }.build()?;
        shifts.push((format!("alpha={alpha}"), problem.h.shift()));
        let reference = make_reference(&problem.spectrum, problem.m)?;
        let base = cfg.solver_for(&problem.h);
        let mut x = random_initial_condition(&problem.grid, &problem.potential.centers, l_support, problem.m, cfg.seed)?
            .into_matrix();
        let first = rows.len();
        for &mu in &cfg.mus {
            let result = cfg.methods[0].run(&problem.h, &x, &base.clone().with_mu(mu))?;
            x = result.x.matrix().clone();
            let e0_val = e0(&problem.h, &x)?;
            let e_mu_val = e_mu(&problem.h, &x, mu)?;
            let (density_tilde, density_proj) = density_errors(&x, &reference)?;
            if cfg.export_column < x.ncols() {
                columns.push((alpha, mu, x.column(cfg.export_column).iter().copied().collect::<Vec<f64>>()));
            }
            rows.push(SweepRow {
                alpha,
                gap: reference.gap,
                row: ConvergenceRow::new(
                    mu,
                    e_mu_val - reference.min_e0,
                    e0_val - reference.min_e0,
                    distance_to_s0(&x, &reference)?,
                ),
                converged: result.converged,
                iterations: result.iterations,
                e_mu: e_mu_val,
                e0: e0_val,
                orth_error: orthogonality_error(&x),
                density_tilde,
                density_proj,
                penalty_bound: penalty_bound(&x, &reference, mu)?,
                stationarity: stationarity(&problem.h, &x, mu)?,
                nnz: result.x.nnz(),
                worst_increase: result.trace.worst_increase(),
            });
        }
        let mut table: Vec<ConvergenceRow> = rows[first..].iter().map(|r| r.row.clone()).collect();
        convergence_orders(&mut table)?;
        for i in 0..table.len() {
            // Orders involving a non-converged row are meaningless.
            let usable = rows[first + i].converged && (i == 0 || rows[first + i - 1].converged);
            rows[first + i].row.orders = if usable { table[i].orders } else { [None; 3] };
        }
    }

    let mut artifacts = Artifacts::default();
    let stem = Driver::MuSweep.stem();
    let mut out = artifacts.create(out_dir, &format!("{stem}.csv"))?;
    writeln!(out, "{HEADER}")?;
    for r in &rows {
        let s = &r.stationarity;
        let o = |i: usize| r.row.orders[i].map_or_else(String::new, |v| format!("{v:.6}"));
        writeln!(
            out,
            "{},{:.15e},{:.15e},{},{:.15e},{},{:.15e},{},{},{},{:.15e},{:.15e},{},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{},{:.6e}",
            r.alpha,
            r.row.mu,
            r.row.min_gap_emu,
            o(0),
            r.row.e0_excess,
            o(1),
            r.row.dist,
            o(2),
            r.converged,
            r.iterations,
            r.orth_error,
            r.density_tilde,
            super::fmt_opt(r.density_proj),
            r.penalty_bound,
            s.zero_excess,
            s.nonzero_residual,
            s.grad_norm,
            s.grad_bound,
            r.nnz,
            r.worst_increase
        )?;
    }
    out.flush()?;
    drop(out);

    for &alpha in &cfg.alphas {
        let table: Vec<ConvergenceRow> = rows.iter().filter(|r| r.alpha == alpha).map(|r| r.row.clone()).collect();
        let mut out = artifacts.create(out_dir, &format!("{stem}_table_alpha{alpha}.csv"))?;
        write_convergence_csv(&table, &mut out)?;
        out.flush()?;
    }

    let mut out = artifacts.create(out_dir, &format!("{stem}_column.csv"))?;
    writeln!(out, "alpha,mu,row,x,value")?;
    let grid_h = cfg.problem.domain_length / cfg.problem.n as f64;
    for (alpha, mu, col) in &columns {
        for (i, v) in col.iter().enumerate() {
            writeln!(out, "{alpha},{mu:.15e},{i},{:.15e},{v:.15e}", i as f64 * grid_h)?;
        }
    }
    out.flush()?;
    drop(out);

    let notes = vec![
        "min E_mu is estimated by E_mu of the converged iterate at each mu".into(),
        "dist is measured from the computed minimizer X_mu to S_0".into(),
        "orders compare each row with the row above (mu twice as large)".into(),
    ];
    artifacts.write_meta(out_dir, &stem, &meta(Driver::MuSweep, cfg, shifts, vec![cfg.seed], &clock, notes))?;
    Ok(MuSweepReport { rows, columns, artifacts })
}
