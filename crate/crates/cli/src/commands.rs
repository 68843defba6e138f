use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use sparse_omm::energy::{e0, e_mu, l0_count};
use sparse_omm::experiments::{run_driver, Driver, Problem, Report};
use sparse_omm::metrics::{density_errors, distance_to_s0, make_reference, orthogonality_error, stationarity, Stationarity};
use sparse_omm::operator::{eigendecomposition, read_matrix_triplets, write_matrix_triplets, HermitianOperator, SpectralData};
use sparse_omm::solvers::{random_initial_condition, solve, suggested_l0, MuSchedule};
use sparse_omm::OmmError;

use crate::config::{experiment_config, solve_settings, OperatorSource, RawConfig, SolveSettings};
use crate::manifest::RunManifest;
use crate::{Cli, CliError, Command};

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let raw = match &cli.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    std::fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::Spectrum => spectrum(cli, &raw),
        Command::Solve => solve_cmd(cli, &raw),
        Command::Experiment { name } => experiment(cli, &raw, name),
        Command::Plot { input, kind, series, group } => {
            let svg = crate::plot::render(*kind, input, *series, group.as_deref())?;
            let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "plot".into());
            let path = cli.out.join(format!("{stem}.{}.svg", format!("{kind:?}").to_lowercase()));
            std::fs::write(&path, svg)?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

/// The operator, its spectrum and, for the model problem, the grid data.
struct Assembled {
    h: HermitianOperator,
    spectrum: SpectralData,
    m: usize,
    model: Option<Problem>,
}

fn assemble(source: &OperatorSource) -> Result<Assembled, CliError> {
    if let OperatorSource::Model(p) = source {
        let problem = p.build()?;
        return Ok(Assembled { h: problem.h.clone(), spectrum: problem.spectrum.clone(), m: problem.m, model: Some(problem) });
    }
    let h = source.load_operator()?.expect("non-model source");
    let spectrum = eigendecomposition(&h)?;
    let largest = spectrum.eigenvalues[spectrum.len() - 1];
    if largest >= 0.0 {
        return Err(OmmError::NotNegativeDefinite { largest }.into());
    }
    let m = source.m();
    if m == 0 || m >= h.dim() {
        return Err(CliError::Config(format!("need 0 < m < N, got m = {m}, N = {}", h.dim())));
    }
    Ok(Assembled { h, spectrum, m, model: None })
}

fn settings(cli: &Cli, raw: &RawConfig) -> Result<SolveSettings, CliError> {
    let mut s = solve_settings(raw)?;
    if let Some(seed) = cli.seed {
        s.init.seed = seed;
        s.solver.seed = seed;
    }
    if let Some(mu) = cli.mu {
        s.solver.mu_schedule = MuSchedule::new(vec![(0, mu)])?;
    }
    Ok(s)
}

fn create(files: &mut Vec<PathBuf>, dir: &Path, name: &str) -> Result<std::io::BufWriter<std::fs::File>, CliError> {
    let path = dir.join(name);
    let file = std::fs::File::create(&path)?;
    files.push(path);
    Ok(std::io::BufWriter::new(file))
}

#[derive(Serialize)]
struct SpectrumSummary {
    n: usize,
    m: usize,
    shift: f64,
    lambda_min: f64,
    lambda_max: f64,
    lambda_m: f64,
    lambda_m_plus_1: f64,
    gap: f64,
    min_e0: f64,
}

fn spectrum(cli: &Cli, raw: &RawConfig) -> Result<(), CliError> {
    let s = settings(cli, raw)?;
    let mut manifest = RunManifest::new("spectrum".into(), cli.config.as_deref(), serde_json::to_value(&s.operator)?, vec![]);
    let a = assemble(&s.operator)?;
    let ev = &a.spectrum.eigenvalues;
    let mut out = create(&mut manifest.outputs, &cli.out, "eigenvalues.csv")?;
    writeln!(out, "index,eigenvalue")?;
    for (i, v) in ev.iter().enumerate() {
        writeln!(out, "{},{v:.15e}", i + 1)?;
    }
    out.flush()?;
    let summary = SpectrumSummary {
        n: ev.len(),
        m: a.m,
        shift: a.h.shift(),
        lambda_min: ev[0],
        lambda_max: ev[ev.len() - 1],
        lambda_m: ev[a.m - 1],
        lambda_m_plus_1: ev[a.m],
        gap: ev[a.m] - ev[a.m - 1],
        min_e0: a.spectrum.lowest_sum(a.m),
    };
    let mut out = create(&mut manifest.outputs, &cli.out, "spectrum.json")?;
    serde_json::to_writer_pretty(&mut out, &summary)?;
    writeln!(out)?;
    out.flush()?;
    println!("gap lambda_{} - lambda_{} = {:.6}", a.m + 1, a.m, summary.gap);
    manifest.write(&cli.out)?;
    Ok(())
}

#[derive(Serialize)]
struct SolveMetrics {
    converged: bool,
    iterations: usize,
    final_mu: f64,
    e0: f64,
    e_mu: f64,
    min_e0: f64,
    e0_excess: f64,
    gap: f64,
    dist: f64,
    orth_error: f64,
    density_tilde: f64,
    density_proj: Option<f64>,
    nnz: usize,
    worst_increase: f64,
    stationarity: Stationarity,
}

fn initial_matrix(s: &SolveSettings, a: &Assembled) -> Result<DMatrix<f64>, CliError> {
    let n = a.h.dim();
    if let Some(path) = &s.init.x0 {
        let file = std::fs::File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let x = read_matrix_triplets(std::io::BufReader::new(file))?;
        if x.shape() != (n, a.m) {
            return Err(CliError::Config(format!("x0 is {:?}, expected ({n}, {})", x.shape(), a.m)));
        }
        return Ok(x);
    }
    Ok(match &a.model {
        Some(p) => random_initial_condition(&p.grid, &p.potential.centers, s.init.l_support, a.m, s.init.seed)?.into_matrix(),
        None => {
            // Dense uniform start for operators without a grid.
            let mut rng = ChaCha8Rng::seed_from_u64(s.init.seed);
            let scale = 1.0 / (n as f64).sqrt();
            DMatrix::from_fn(n, a.m, |_, _| rng.gen_range(-1.0..1.0) * scale)
        }
    })
}

fn solve_cmd(cli: &Cli, raw: &RawConfig) -> Result<(), CliError> {
    let mut s = settings(cli, raw)?;
    let a = assemble(&s.operator)?;
    if s.scaled_l0 {
        s.solver.l0 = suggested_l0(&a.h);
    }
    let mut manifest =
        RunManifest::new("solve".into(), cli.config.as_deref(), serde_json::to_value(&s)?, vec![s.init.seed, s.solver.seed]);
    let x0 = initial_matrix(&s, &a)?;
    let result = solve(&a.h, &x0, &s.solver)?;
    let x = result.x.matrix();

    let mut out = create(&mut manifest.outputs, &cli.out, "trace.csv")?;
    result.trace.write_csv(&mut out)?;
    out.flush()?;
    let mut out = create(&mut manifest.outputs, &cli.out, "x.triplets")?;
    write_matrix_triplets(x, &mut out)?;
    out.flush()?;
    if let Some(counts) = &result.trace.entry_counts {
        let mut out = create(&mut manifest.outputs, &cli.out, "entry_counts.csv")?;
        writeln!(out, "row,col,count")?;
        for col in 0..counts.ncols() {
            for row in 0..counts.nrows() {
                writeln!(out, "{row},{col},{}", counts[(row, col)])?;
            }
        }
        out.flush()?;
    }

    let reference = make_reference(&a.spectrum, a.m)?;
    let final_mu = result.trace.last().map_or(s.solver.mu_schedule.mu_at(1), |r| r.mu);
    let (density_tilde, density_proj) = density_errors(x, &reference)?;
    let e0_val = e0(&a.h, x)?;
    let metrics = SolveMetrics {
        converged: result.converged,
        iterations: result.iterations,
        final_mu,
        e0: e0_val,
        e_mu: e_mu(&a.h, x, final_mu)?,
        min_e0: reference.min_e0,
        e0_excess: e0_val - reference.min_e0,
        gap: reference.gap,
        dist: distance_to_s0(x, &reference)?,
        orth_error: orthogonality_error(x),
        density_tilde,
        density_proj,
        nnz: l0_count(x),
        worst_increase: result.trace.worst_increase(),
        stationarity: stationarity(&a.h, x, final_mu)?,
    };
    let mut out = create(&mut manifest.outputs, &cli.out, "metrics.json")?;
    serde_json::to_writer_pretty(&mut out, &metrics)?;
    writeln!(out)?;
    out.flush()?;
    println!(
        "{} after {} iterations; E0 - min E0 = {:.6e}",
        if result.converged { "converged" } else { "not converged" },
        result.iterations,
        metrics.e0_excess
    );
    manifest.write(&cli.out)?;
    Ok(())
}

fn experiment(cli: &Cli, raw: &RawConfig, name: &str) -> Result<(), CliError> {
    let driver = Driver::parse(name)?;
    let mut cfg = experiment_config(raw, driver)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.solver.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    if let Some(mu) = cli.mu {
        cfg.mus = vec![mu];
    }
    if let Some(trials) = cli.trials {
        cfg.trials = trials;
    }
    cfg.validate()?;
    let seeds = match driver {
        Driver::LocalMinima => (0..cfg.trials as u64).map(|t| cfg.seed.wrapping_add(t)).collect(),
        _ => vec![cfg.seed],
    };
    let mut manifest =
        RunManifest::new(format!("experiment {}", driver.name()), cli.config.as_deref(), serde_json::to_value(&cfg)?, seeds);
    let report = run_driver(driver, &cfg, &cli.out)?;
    manifest.outputs.extend(report.artifacts().files.iter().cloned());
    manifest.write(&cli.out)?;
    summarize(&report);
    if let Report::Theory(t) = &report {
        let failed = t.failures().count();
        if failed > 0 {
            for c in t.failures() {
                eprintln!("FAILED {} / {}: {:e} > {:e}", c.problem, c.check, c.value, c.threshold);
            }
            return Err(CliError::TheoryFailed(failed));
        }
    }
    Ok(())
}

fn summarize(report: &Report) {
    match report {
        Report::MuSweep(r) => {
            for s in &r.rows {
                println!(
                    "alpha={} mu={:.3e} converged={} E0-min={:.4e} dist={:.4e}",
                    s.alpha, s.row.mu, s.converged, s.row.e0_excess, s.row.dist
                );
            }
        }
        Report::Compare(r) => {
            for run in &r.runs {
                println!("{}: {} iterations, converged={}", run.method.name(), run.result.iterations, run.result.converged);
            }
        }
        Report::LocalMinima(r) => {
            for (mu, _) in &r.min_estimates {
                let trapped: usize = r.outcomes.iter().filter(|o| o.mu == Some(*mu) && o.trapped).count();
                println!("mu={mu}: {trapped} trapped runs");
            }
            let sd = r.outcomes.iter().filter(|o| o.mu.is_none() && o.trapped).count();
            println!("truncated_sd: {sd} trapped runs");
        }
        Report::IcDependence(r) => {
            for run in &r.runs {
                println!("L={}: {} iterations", run.l_support, run.result.iterations);
            }
        }
        Report::DynamicMu(r) => {
            println!("constant: {} iterations, variable: {} iterations", r.constant.iterations, r.variable.iterations);
        }
        Report::Theory(r) => {
            println!("{}/{} checks passed", r.checks.len() - r.failures().count(), r.checks.len());
        }
    }
}
