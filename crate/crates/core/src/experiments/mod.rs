//! Reproducible drivers for the numerical studies.
//!
//! Every driver is a pure function of its [`ExperimentConfig`]: it builds the
//! problem, runs the solvers and writes `<name>.csv` plus
//! `<name>.meta.json` (and sometimes extra CSVs) into an output directory.
//! Rerunning with the same config reproduces the CSV bytes exactly; only the
//! wall time in the metadata changes.

mod compare;
mod dynamic_mu;
mod ic_dependence;
mod local_minima;
mod mu_sweep;
mod theory;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{OmmError, Result};
use crate::operator::{build_hamiltonian, GaussianPotential, GridSpec, HermitianOperator, ShiftPolicy, SpectralData};
use crate::solvers::{solve, solve_truncated_sd, suggested_l0, BlockSchedule, MuSchedule, SolveResult, SolverConfig, Variant};

pub use compare::{run_algorithm_comparison, ComparisonReport, MethodRun};
pub use dynamic_mu::{run_dynamic_mu, DynamicMuReport};
pub use ic_dependence::{run_ic_dependence, IcDependenceReport, IcRun};
pub use local_minima::{nearest_level, run_local_minima_ensemble, LocalMinimaReport, TrialOutcome};
pub use mu_sweep::{run_mu_sweep, MuSweepReport, SweepRow};
pub use theory::{run_theory_suite, theory_checks, CheckResult, TheoryReport};

/// The discretized model problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub m: usize,
    pub domain_length: f64,
    pub shift: ShiftPolicy,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self { n: 800, alpha: -100.0, beta: 0.1, m: 10, domain_length: 10.0, shift: ShiftPolicy::default() }
    }
}

/// An assembled problem: grid, potential, shifted operator and its spectrum.
#[derive(Clone, Debug)]
pub struct Problem {
    pub grid: GridSpec,
    pub potential: GaussianPotential,
    pub h: HermitianOperator,
    pub spectrum: SpectralData,
    pub m: usize,
}

impl ProblemConfig {
    /// Atom centers `0.5, 1.5, ...` spread over the domain, one per column.
    pub fn centers(&self) -> Vec<f64> {
        let spacing = self.domain_length / self.m as f64;
        (0..self.m).map(|i| (i as f64 + 0.5) * spacing).collect()
    }

    pub fn build(&self) -> Result<Problem> {
        if self.m == 0 || self.m >= self.n {
            return Err(OmmError::InvalidParameter(format!("need 0 < m < N, got m = {}, N = {}", self.m, self.n)));
        }
        let grid = GridSpec::new(self.domain_length, self.n)?;
        let potential = GaussianPotential::new(self.alpha, self.beta, self.centers())?;
        let (h, spectrum) = build_hamiltonian(&grid, &potential, self.shift)?;
        Ok(Problem { grid, potential, h, spectrum, m: self.m })
    }
}

/// A solver configuration as it appears in experiment sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    IstaBacktrack,
    IstaDynamic,
    BlockSequential,
    BlockRandom,
    /// Truncated steepest descent: gradient descent on `E_0` with every
    /// iterate projected onto the support of `X0`.
    TruncatedSd,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::IstaBacktrack, Method::IstaDynamic, Method::BlockSequential, Method::BlockRandom, Method::TruncatedSd];

    pub fn name(self) -> &'static str {
        match self {
            Method::IstaBacktrack => "ista_backtrack",
            Method::IstaDynamic => "ista_dynamic",
            Method::BlockSequential => "block_sequential",
            Method::BlockRandom => "block_random",
            Method::TruncatedSd => "truncated_sd",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| OmmError::InvalidParameter(format!("unknown method `{s}`")))
    }

    pub fn is_block(self) -> bool {
        matches!(self, Method::BlockSequential | Method::BlockRandom)
    }

    pub fn is_penalized(self) -> bool {
        self != Method::TruncatedSd
    }

    /// `base` with the variant and block schedule this method implies.
    pub fn configure(self, base: &SolverConfig) -> SolverConfig {
        let (variant, block_schedule) = match self {
            Method::IstaBacktrack => (Variant::IstaBacktrack, base.block_schedule),
            Method::IstaDynamic | Method::TruncatedSd => (Variant::IstaDynamic, base.block_schedule),
            Method::BlockSequential => (Variant::BlockDynamic, BlockSchedule::Sequential),
            Method::BlockRandom => (Variant::BlockDynamic, BlockSchedule::RandomPermutation),
        };
        SolverConfig { variant, block_schedule, ..base.clone() }
    }

    /// Runs the method from `x0`; truncated SD keeps the support of `x0`.
    pub fn run(self, h: &HermitianOperator, x0: &nalgebra::DMatrix<f64>, base: &SolverConfig) -> Result<SolveResult> {
        let cfg = self.configure(base);
        match self {
            Method::TruncatedSd => solve_truncated_sd(h, x0, &x0.map(|v| v != 0.0), &cfg),
            _ => solve(h, x0, &cfg),
        }
    }
}

/// The drivers, by CLI name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Driver {
    MuSweep,
    Compare,
    LocalMinima,
    IcDependence,
    DynamicMu,
    Theory,
}

impl Driver {
    pub const ALL: [Driver; 6] =
        [Driver::MuSweep, Driver::Compare, Driver::LocalMinima, Driver::IcDependence, Driver::DynamicMu, Driver::Theory];

    pub fn name(self) -> &'static str {
        match self {
            Driver::MuSweep => "mu-sweep",
            Driver::Compare => "compare",
            Driver::LocalMinima => "local-minima",
            Driver::IcDependence => "ic-dependence",
            Driver::DynamicMu => "dynamic-mu",
            Driver::Theory => "theory",
        }
    }

    /// File stem of the driver's outputs.
    pub fn stem(self) -> String {
        self.name().replace('-', "_")
    }

    pub fn parse(s: &str) -> Result<Self> {
        Driver::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| OmmError::InvalidParameter(format!("unknown experiment `{s}`")))
    }
}

/// Everything a driver needs. Fields a driver does not use are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    /// Tolerances, safety factors and iteration cap shared by every run.
    pub solver: SolverConfig,
    /// Replace `solver.l0` by [`suggested_l0`] of the assembled operator.
    pub scaled_l0: bool,
    pub methods: Vec<Method>,
    /// Potential depths swept by `mu-sweep`.
    pub alphas: Vec<f64>,
    /// The `mu` ladder (`mu-sweep`), the `mu` values (`local-minima`) or the
    /// single constant `mu` (`compare`, `ic-dependence`, `dynamic-mu`).
    pub mus: Vec<f64>,
    /// Variable schedule of `dynamic-mu`.
    pub mu_schedule: MuSchedule,
    pub trials: usize,
    /// Half-widths `L` of the initial supports.
    pub l_supports: Vec<usize>,
    pub seed: u64,
    /// Worker threads for ensembles; 0 lets the pool decide.
    pub threads: usize,
    /// Column of `X` exported per `mu` by `mu-sweep` (0-based).
    pub export_column: usize,
}

impl ExperimentConfig {
    /// The defaults of each study.
    pub fn defaults(driver: Driver) -> Self {
        let base = Self {
            problem: ProblemConfig::default(),
            solver: SolverConfig { tol: 1e-6, max_iters: 200_000, ..SolverConfig::default() },
            scaled_l0: true,
            methods: vec![Method::IstaDynamic],
            alphas: vec![-100.0],
            mus: vec![0.1],
            mu_schedule: MuSchedule::constant(0.1),
            trials: 1,
            l_supports: vec![4],
            seed: 1,
            threads: 0,
            export_column: 4,
        };
        match driver {
            Driver::MuSweep => Self {
                solver: SolverConfig { tol: 1e-11, max_iters: 2_000_000, ..base.solver.clone() },
                alphas: vec![-100.0, -10.0],
                mus: (8..=12).map(|k| 2f64.powi(-k)).collect(),
                ..base
            },
            Driver::Compare => Self {
                methods: vec![Method::IstaBacktrack, Method::IstaDynamic, Method::BlockSequential, Method::BlockRandom],
                ..base
            },
            Driver::LocalMinima => Self {
                problem: ProblemConfig { n: 500, ..ProblemConfig::default() },
                solver: SolverConfig { tol: 1e-8, ..base.solver.clone() },
                methods: vec![Method::IstaDynamic, Method::BlockSequential, Method::TruncatedSd],
                mus: vec![0.5, 10.0],
                trials: 100,
                l_supports: vec![60],
                ..base
            },
            Driver::IcDependence => Self {
                problem: ProblemConfig { n: 150, ..ProblemConfig::default() },
                solver: SolverConfig { tol: 1e-8, track_entries: true, ..base.solver.clone() },
                l_supports: vec![4, 8, 12, 16],
                ..base
            },
            Driver::DynamicMu => Self {
                problem: ProblemConfig { n: 150, ..ProblemConfig::default() },
                solver: SolverConfig { tol: 1e-8, ..base.solver.clone() },
                mu_schedule: MuSchedule { pieces: vec![(0, 0.1), (100, 1.0), (500, 0.1)] },
                l_supports: vec![16],
                ..base
            },
            Driver::Theory => Self {
                problem: ProblemConfig { n: 60, ..ProblemConfig::default() },
                solver: SolverConfig { tol: 1e-10, ..base.solver.clone() },
                trials: 50,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.mu_schedule.validate()?;
        if let Some(mu) = self.mus.iter().find(|mu| !(**mu >= 0.0)) {
            return Err(OmmError::InvalidParameter(format!("mu must be non-negative, got {mu}")));
        }
        if self.methods.is_empty() {
            return Err(OmmError::InvalidParameter("no methods configured".into()));
        }
        Ok(())
    }

    /// Solver settings for `problem`, with `L0` rescaled if requested.
    pub fn solver_for(&self, h: &HermitianOperator) -> SolverConfig {
        let mut cfg = self.solver.clone();
        if self.scaled_l0 {
            cfg.l0 = suggested_l0(h);
        }
        cfg
    }

    pub(crate) fn first_mu(&self) -> Result<f64> {
        self.mus.first().copied().ok_or_else(|| OmmError::InvalidParameter("no mu configured".into()))
    }

    pub(crate) fn first_l_support(&self) -> Result<usize> {
        self.l_supports
            .first()
            .copied()
            .ok_or_else(|| OmmError::InvalidParameter("no initial support width configured".into()))
    }
}

/// Provenance written next to every CSV.
#[derive(Clone, Debug, Serialize)]
pub struct RunMeta {
    pub experiment: String,
    pub config: ExperimentConfig,
    /// `(label, eta)` for every operator assembled.
    pub shifts: Vec<(String, f64)>,
    pub seeds: Vec<u64>,
    pub wall_time_seconds: f64,
    pub library_version: String,
    pub notes: Vec<String>,
}

/// Files a driver wrote.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
}

impl Artifacts {
    pub(crate) fn create(&mut self, dir: &Path, name: &str) -> Result<BufWriter<File>> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(name);
        let file = File::create(&path)?;
        self.files.push(path);
        Ok(BufWriter::new(file))
    }

    pub(crate) fn write_meta(&mut self, dir: &Path, stem: &str, meta: &RunMeta) -> Result<()> {
        let mut out = self.create(dir, &format!("{stem}.meta.json"))?;
        serde_json::to_writer_pretty(&mut out, meta)?;
        writeln!(out)?;
        out.flush()?;
        Ok(())
    }
}

pub(crate) struct Stopwatch(Instant);

impl Stopwatch {
    pub(crate) fn start() -> Self {
        Self(Instant::now())
    }

    pub(crate) fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

pub(crate) fn meta(
    driver: Driver,
    cfg: &ExperimentConfig,
    shifts: Vec<(String, f64)>,
    seeds: Vec<u64>,
    clock: &Stopwatch,
    notes: Vec<String>,
) -> RunMeta {
    RunMeta {
        experiment: driver.name().to_string(),
        config: cfg.clone(),
        shifts,
        seeds,
        wall_time_seconds: clock.seconds(),
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        notes,
    }
}

/// Largest relative increase of `E_mu` over the accepted iterations of
/// every run in `results`.
pub fn worst_monotonicity<'a>(results: impl IntoIterator<Item = &'a SolveResult>) -> f64 {
    results.into_iter().map(|r| r.trace.worst_increase()).fold(f64::NEG_INFINITY, f64::max)
}

/// Runs `f` on a pool with `threads` workers (0: default size).
pub(crate) fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| OmmError::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Outcome of any driver, for callers that dispatch by name.
#[derive(Clone, Debug)]
pub enum Report {
    MuSweep(MuSweepReport),
    Compare(ComparisonReport),
    LocalMinima(LocalMinimaReport),
    IcDependence(IcDependenceReport),
    DynamicMu(DynamicMuReport),
    Theory(TheoryReport),
}

impl Report {
    pub fn artifacts(&self) -> &Artifacts {
        match self {
            Report::MuSweep(r) => &r.artifacts,
            Report::Compare(r) => &r.artifacts,
            Report::LocalMinima(r) => &r.artifacts,
            Report::IcDependence(r) => &r.artifacts,
            Report::DynamicMu(r) => &r.artifacts,
            Report::Theory(r) => &r.artifacts,
        }
    }
}

pub fn run_driver(driver: Driver, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Report> {
    Ok(match driver {
        Driver::MuSweep => Report::MuSweep(run_mu_sweep(cfg, out_dir)?),
        Driver::Compare => Report::Compare(run_algorithm_comparison(cfg, out_dir)?),
        Driver::LocalMinima => Report::LocalMinima(run_local_minima_ensemble(cfg, out_dir)?),
        Driver::IcDependence => Report::IcDependence(run_ic_dependence(cfg, out_dir)?),
        Driver::DynamicMu => Report::DynamicMu(run_dynamic_mu(cfg, out_dir)?),
        Driver::Theory => Report::Theory(run_theory_suite(cfg, out_dir)?),
    })
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.15e}"))
}
