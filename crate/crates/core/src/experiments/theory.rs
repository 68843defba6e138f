//! Numerical checks of the structural facts about `E_0`: derivative,
//! invariance, second-order expansion at critical points, absence of
//! non-global local minima, and the exact quartic along rays.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{meta, Artifacts, Driver, ExperimentConfig, Stopwatch};
use crate::energy::{e0, expansion_delta, grad_e0, line_coefficients, PerturbationSpec};
use crate::error::Result;
use crate::operator::{eigendecomposition, HermitianOperator, SpectralData};
use crate::solvers::{solve, suggested_l0, SolverConfig, Variant};

/// Starts near saddle points (non-minimal eigenvector sets).
pub const SADDLE_STARTS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub problem: String,
    pub check: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct TheoryReport {
    pub checks: Vec<CheckResult>,
    pub artifacts: Artifacts,
}

impl TheoryReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn random_start(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
    let scale = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0) * scale)
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
    let d = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
    let norm = d.norm();
    d / norm
}

fn random_orthogonal(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0)).qr().q()
}

fn check(problem: &str, name: &'static str, value: f64, threshold: f64, seed: u64) -> CheckResult {
    CheckResult { problem: problem.to_string(), check: name, value, threshold, passed: value <= threshold, seed }
}

/// Runs the six checks on `h` with `m` columns.
///
/// `probes` random restarts and [`SADDLE_STARTS`] saddle starts are solved
/// with `solver` at `mu = 0`.
pub fn theory_checks(
    label: &str,
    h: &HermitianOperator,
    spectrum: &SpectralData,
    m: usize,
    solver: &SolverConfig,
    probes: usize,
    seed: u64,
) -> Result<Vec<CheckResult>> {
    let n = h.dim();
    let min_e0 = spectrum.lowest_sum(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    // (a) gradient against central differences of E_0
    let x = random_start(&mut rng, n, m);
    let g = grad_e0(h, &x)?;
    let eps = 1e-5;
    let mut fd = DMatrix::zeros(n, m);
    for j in 0..m {
        for i in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[(i, j)] += eps;
            xm[(i, j)] -= eps;
            fd[(i, j)] = (e0(h, &xp)? - e0(h, &xm)?) / (2.0 * eps);
        }
    }
    out.push(check(label, "gradient_fd", (&fd - &g).norm() / g.norm(), 1e-6, seed));

    // (b) E_0(XG) = E_0(X), grad(XG) = grad(X) G
    let q = random_orthogonal(&mut rng, m);
    let xq = &x * &q;
    let e = e0(h, &x)?;
    out.push(check(label, "unitary_invariance", (e0(h, &xq)? - e).abs() / e.abs(), 1e-10, seed));
    let gq = grad_e0(h, &xq)?;
    out.push(check(label, "gradient_equivariance", (&gq - &g * &q).norm() / g.norm(), 1e-9, seed));

    // (c) second-order expansion around a critical point with one empty
    // column; the remainder must shrink by ~8 when t halves
    let mut occupancy = vec![true; m];
    if m > 1 {
        occupancy[m - 1] = false;
    }
    let eigenvalues: Vec<f64> = spectrum.eigenvalues.iter().copied().collect();
    let coefficients = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
    let pert = PerturbationSpec::new(occupancy, coefficients, eigenvalues)?;
    let remainder = |t: f64| -> Result<f64> {
        let scaled = pert.scaled(t);
        let (z, xt) = scaled.realize(&spectrum.eigenvectors);
        Ok((e0(h, &xt)? - e0(h, &z)? - expansion_delta(&scaled)).abs())
    };
    let t = 1e-3;
    let ratio = remainder(t)? / remainder(t / 2.0)?;
    // Report the distance from the interval [6, 10] (0 inside).
    out.push(check(label, "expansion_order", (6.0 - ratio).max(ratio - 10.0).max(0.0), 0.0, seed));

    // (d) local = global: perturbed restarts and saddle starts all reach min E_0
    let mu0 = SolverConfig { variant: Variant::IstaDynamic, ..solver.clone() }.with_mu(0.0);
    let converged = solve(h, &random_start(&mut rng, n, m), &mu0)?;
    let x_star = converged.x.matrix().clone();
    let mut worst: f64 = (converged.final_e0() - min_e0).abs();
    for _ in 0..probes {
        let start = &x_star + random_direction(&mut rng, n, m) * 0.1;
        let r = solve(h, &start, &mu0)?;
        worst = worst.max((r.final_e0() - min_e0).abs());
        if !r.converged {
            worst = f64::INFINITY;
        }
    }
    out.push(check(label, "local_is_global_restarts", worst, 1e-6, seed));

    let mut worst_saddle: f64 = 0.0;
    let upper: Vec<usize> = (m..n).collect();
    for s in 0..SADDLE_STARTS {
        // First start: eigenvectors m+1..2m; the rest replace a random
        // nonempty subset of the lowest m by higher ones.
        let mut idx: Vec<usize> = (0..m).collect();
        if s == 0 && 2 * m <= n {
            idx = (m..2 * m).collect();
        } else {
            let k = rng.gen_range(1..=m.min(upper.len()));
            let mut lows: Vec<usize> = (0..m).collect();
            lows.shuffle(&mut rng);
            let highs: Vec<usize> = upper.choose_multiple(&mut rng, k).copied().collect();
            for (slot, hi) in lows.into_iter().take(k).zip(highs) {
                idx[slot] = hi;
            }
        }
        let mut start = DMatrix::zeros(n, m);
        for (c, &i) in idx.iter().enumerate() {
            start.set_column(c, &spectrum.eigenvectors.column(i));
        }
        // An exact critical point has zero gradient; nudge it off.
        start += random_direction(&mut rng, n, m) * 1e-3;
        let r = solve(h, &start, &mu0)?;
        worst_saddle = worst_saddle.max((r.final_e0() - min_e0).abs());
        if !r.converged {
            worst_saddle = f64::INFINITY;
        }
    }
    out.push(check(label, "local_is_global_saddles", worst_saddle, 1e-6, seed));

    // (e) E_0(tU) = c1 t^4 + c2 t^2 for a unit direction U
    let u = random_direction(&mut rng, n, m);
    let (c1, c2) = line_coefficients(h, &u)?;
    let mut worst_line: f64 = 0.0;
    for t in [0.3, 0.7, 1.1, 1.9] {
        let direct = e0(h, &(&u * t))?;
        let poly = c1 * t.powi(4) + c2 * t * t;
        worst_line = worst_line.max((direct - poly).abs() / direct.abs().max(1.0));
    }
    out.push(check(label, "line_polynomial", worst_line, 1e-10, seed));

    // (f) along the ray through a minimizer, the minimum sits at the
    // minimizer: t* = sqrt(-c2 / (2 c1)) equals |X*|_F
    let norm = x_star.norm();
    let (c1, c2) = line_coefficients(h, &(&x_star / norm))?;
    let t_star = (-c2 / (2.0 * c1)).sqrt();
    out.push(check(label, "ray_minimizer", (t_star / norm - 1.0).abs(), 1e-6, seed));

    Ok(out)
}

/// The checks on a 2x2 toy operator and on the configured problem.
pub fn run_theory_suite(cfg: &ExperimentConfig, out_dir: &Path) -> Result<TheoryReport> {
    cfg.validate()?;
    let clock = Stopwatch::start();
    let mut checks = Vec::new();

    let toy = HermitianOperator::from_dense(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0])))?;
    let toy_spec = eigendecomposition(&toy)?;
    let mut toy_solver = cfg.solver.clone();
    if cfg.scaled_l0 {
        toy_solver.l0 = suggested_l0(&toy);
    }
    checks.extend(theory_checks("toy diag(-1 -2)", &toy, &toy_spec, 1, &toy_solver, cfg.trials, cfg.seed)?);

    let problem = cfg.problem.build()?;
    let label = format!("N={} alpha={}", cfg.problem.n, cfg.problem.alpha);
    checks.extend(theory_checks(
        &label,
        &problem.h,
        &problem.spectrum,
        problem.m,
        &cfg.solver_for(&problem.h),
        cfg.trials,
        cfg.seed,
    )?);

    let mut artifacts = Artifacts::default();
    let stem = Driver::Theory.stem();
    let mut out = artifacts.create(out_dir, &format!("{stem}.csv"))?;
    writeln!(out, "problem,check,value,threshold,passed,seed")?;
    for c in &checks {
        writeln!(out, "{},{},{:.6e},{:e},{},{}", c.problem, c.check, c.value, c.threshold, c.passed, c.seed)?;
    }
    out.flush()?;
    drop(out);

    let notes = vec![format!("{} perturbed restarts and {SADDLE_STARTS} saddle starts per problem", cfg.trials)];
    artifacts.write_meta(
        out_dir,
        &stem,
        &meta(
            Driver::Theory,
            cfg,
            vec![("toy".into(), 0.0), ("problem".into(), problem.h.shift())],
            vec![cfg.seed],
            &clock,
            notes,
        ),
    )?;
    Ok(TheoryReport { checks, artifacts })
}
