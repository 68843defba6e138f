//! INI-style configuration files.
//!
//! ```text
//! [problem]
//! n = 800
//! alpha = -100
//! shift = auto
//!
//! [solver]
//! variant = ista_dynamic
//! mu = 0.1
//! l0 = auto
//!
//! [solver.block_dynamic]
//! block_schedule = random_permutation
//!
//! [init]
//! l_support = 4
//!
//! [experiment]
//! mus = 0.5, 10
//! trials = 100
//! ```
//!
//! `shift` also takes a number (an explicit `eta`); `l0` a number instead of
//! `auto`. A `[solver.<variant>]` section is applied on top of `[solver]`
//! when that variant runs. Every key is optional. Unknown sections or keys are errors so typos do not
//! silently fall back to defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ini::Ini;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use sparse_omm::experiments::{Driver, ExperimentConfig, Method, ProblemConfig};
use sparse_omm::operator::{HermitianOperator, ShiftPolicy};
use sparse_omm::solvers::{BlockSchedule, MuSchedule, SolverConfig, Variant};

use crate::CliError;

type Section = BTreeMap<String, String>;

/// The parsed file: section name to key/value pairs.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, Section>,
    base_dir: PathBuf,
}

const SECTIONS: [&str; 4] = ["problem", "solver", "init", "experiment"];

impl RawConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let ini = Ini::load_from_file(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut raw = Self::from_ini(&ini)?;
        raw.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(raw)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Self::from_ini(&ini)
    }

    fn from_ini(ini: &Ini) -> Result<Self, CliError> {
        let mut sections = BTreeMap::new();
        for (name, props) in ini.iter() {
            let Some(name) = name else {
                if props.iter().next().is_some() {
                    return Err(CliError::Config("keys outside a section".into()));
                }
                continue;
            };
            let known = SECTIONS.contains(&name)
                || name.strip_prefix("solver.").is_some_and(|v| Variant::parse(v).is_ok());
            if !known {
                return Err(CliError::Config(format!("unknown section [{name}]")));
            }
            let entry: &mut Section = sections.entry(name.to_string()).or_default();
            for (k, v) in props.iter() {
                entry.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(Self { sections, base_dir: PathBuf::new() })
    }

    fn section(&self, name: &str) -> Section {
        self.sections.get(name).cloned().unwrap_or_default()
    }
}

/// Consumes keys from one section, remembering which were used.
struct Reader {
    name: String,
    values: Section,
}

impl Reader {
    fn new(name: &str, values: Section) -> Self {
        Self { name: name.to_string(), values }
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.values.remove(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("[{}] {key}: cannot parse `{v}`", self.name))),
        }
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| CliError::Config(format!("[{}] {key}: cannot parse `{s}`", self.name))))
                .collect::<Result<Vec<T>, _>>()
                .map(Some),
        }
    }

    fn finish(self) -> Result<(), CliError> {
        match self.values.keys().next() {
            Some(k) => Err(CliError::Config(format!("[{}] unknown key `{k}`", self.name))),
            None => Ok(()),
        }
    }
}

/// `0:0.1, 100:1, 500:0.1`
pub fn parse_mu_schedule(text: &str) -> Result<MuSchedule, CliError> {
    let pieces = text
        .split(',')
        .map(|p| {
            let (k, mu) = p
                .split_once(':')
                .ok_or_else(|| CliError::Config(format!("mu_schedule piece `{}` is not `iter:mu`", p.trim())))?;
            let k = k.trim().parse().map_err(|_| CliError::Config(format!("bad iteration `{k}`")))?;
            let mu = mu.trim().parse().map_err(|_| CliError::Config(format!("bad mu `{mu}`")))?;
            Ok((k, mu))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(MuSchedule::new(pieces)?)
}

/// Where the operator comes from.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorSource {
    /// The periodic Schrodinger operator with Gaussian wells.
    Model(ProblemConfig),
    /// `diag(values)`, for toys.
    Diagonal { values: Vec<f64>, m: usize },
    /// A symmetric matrix in triplet format.
    File { path: PathBuf, m: usize },
}

impl OperatorSource {
    pub fn m(&self) -> usize {
        match self {
            OperatorSource::Model(p) => p.m,
            OperatorSource::Diagonal { m, .. } | OperatorSource::File { m, .. } => *m,
        }
    }

    pub fn load_operator(&self) -> Result<Option<HermitianOperator>, CliError> {
        Ok(match self {
            OperatorSource::Model(_) => None,
            OperatorSource::Diagonal { values, .. } => {
                Some(HermitianOperator::from_dense(DMatrix::from_diagonal(&DVector::from_column_slice(values)))?)
            }
            OperatorSource::File { path, .. } => {
                let file = std::fs::File::open(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                Some(HermitianOperator::read_triplets(std::io::BufReader::new(file))?)
            }
        })
    }
}

fn read_problem(raw: &RawConfig, defaults: ProblemConfig) -> Result<OperatorSource, CliError> {
    let mut r = Reader::new("problem", raw.section("problem"));
    let mut p = defaults;
    if let Some(n) = r.parse("n")? {
        p.n = n;
    }
    if let Some(a) = r.parse("alpha")? {
        p.alpha = a;
    }
    if let Some(b) = r.parse("beta")? {
        p.beta = b;
    }
    if let Some(m) = r.parse("m")? {
        p.m = m;
    }
    if let Some(l) = r.parse("domain_length")? {
        p.domain_length = l;
    }
    let margin: Option<f64> = r.parse("shift_margin")?;
    match r.take("shift").as_deref() {
        None | Some("auto") => p.shift = ShiftPolicy::AutoMargin(margin.unwrap_or(1.0)),
        Some(v) => {
            if margin.is_some() {
                return Err(CliError::Config("[problem] shift_margin only applies to shift = auto".into()));
            }
            let eta = v.parse().map_err(|_| CliError::Config(format!("[problem] shift: cannot parse `{v}`")))?;
            p.shift = ShiftPolicy::Explicit(eta);
        }
    }
    let diagonal: Option<Vec<f64>> = r.list("diagonal")?;
    let file = r.take("operator");
    r.finish()?;
    Ok(match (diagonal, file) {
        (Some(_), Some(_)) => return Err(CliError::Config("[problem] give either diagonal or operator".into())),
        (Some(values), None) => OperatorSource::Diagonal { values, m: p.m },
        (None, Some(path)) => OperatorSource::File { path: raw.base_dir.join(path), m: p.m },
        (None, None) => OperatorSource::Model(p),
    })
}

/// `l0 = auto` requests the operator-scaled starting `L`.
fn read_solver(raw: &RawConfig, defaults: SolverConfig) -> Result<(SolverConfig, Option<bool>), CliError> {
    let mut base = raw.section("solver");
    let variant = match base.get("variant") {
        Some(v) => Variant::parse(v)?,
        None => defaults.variant,
    };
    base.extend(raw.section(&format!("solver.{}", variant.name())));
    let mut r = Reader::new("solver", base);
    let mut s = defaults;
    s.variant = variant;
    r.take("variant");
    if let Some(v) = r.take("block_schedule") {
        s.block_schedule = BlockSchedule::parse(&v)?;
    }
    let mut scaled = None;
    match r.take("l0").as_deref() {
        None => {}
        Some("auto") => scaled = Some(true),
        Some(v) => {
            s.l0 = v.parse().map_err(|_| CliError::Config(format!("[solver] l0: cannot parse `{v}`")))?;
            scaled = Some(false);
        }
    }
    if let Some(v) = r.parse("eta_bt")? {
        s.eta_bt = v;
    }
    if let Some(v) = r.parse("c1")? {
        s.c1 = v;
    }
    if let Some(v) = r.parse("c2")? {
        s.c2 = v;
    }
    if let Some(v) = r.parse("tol")? {
        s.tol = v;
    }
    if let Some(v) = r.parse("max_iters")? {
        s.max_iters = v;
    }
    if let Some(v) = r.parse("seed")? {
        s.seed = v;
    }
    if let Some(v) = r.parse("track_entries")? {
        s.track_entries = v;
    }
    match (r.parse::<f64>("mu")?, r.take("mu_schedule")) {
        (Some(_), Some(_)) => return Err(CliError::Config("[solver] give either mu or mu_schedule".into())),
        (Some(mu), None) => s.mu_schedule = MuSchedule::constant(mu),
        (None, Some(text)) => s.mu_schedule = parse_mu_schedule(&text)?,
        (None, None) => {}
    }
    r.finish()?;
    s.validate()?;
    Ok((s, scaled))
}

/// How `solve` builds its starting matrix.
#[derive(Clone, Debug, Serialize)]
pub struct InitConfig {
    /// Half-width of the random localized start (model problems).
    pub l_support: usize,
    pub seed: u64,
    /// A triplet file overrides the random start.
    pub x0: Option<PathBuf>,
}

/// Everything `spectrum` and `solve` need.
#[derive(Clone, Debug, Serialize)]
pub struct SolveSettings {
    pub operator: OperatorSource,
    pub solver: SolverConfig,
    pub scaled_l0: bool,
    pub init: InitConfig,
}

pub fn solve_settings(raw: &RawConfig) -> Result<SolveSettings, CliError> {
    let operator = read_problem(raw, ProblemConfig::default())?;
    let (solver, scaled) = read_solver(raw, SolverConfig { tol: 1e-8, max_iters: 200_000, ..SolverConfig::default() })?;
    let mut r = Reader::new("init", raw.section("init"));
    let init = InitConfig {
        l_support: r.parse("l_support")?.unwrap_or(4),
        seed: r.parse("seed")?.unwrap_or(1),
        x0: r.take("x0").map(|p| raw.base_dir.join(p)),
    };
    r.finish()?;
    if raw.sections.contains_key("experiment") {
        return Err(CliError::Config("[experiment] is only read by `omm experiment`".into()));
    }
    Ok(SolveSettings { operator, solver, scaled_l0: scaled.unwrap_or(true), init })
}

/// The driver defaults with the file's overrides applied.
pub fn experiment_config(raw: &RawConfig, driver: Driver) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::defaults(driver);
    cfg.problem = match read_problem(raw, cfg.problem.clone())? {
        OperatorSource::Model(p) => p,
        _ => return Err(CliError::Config("experiments run on the model problem only".into())),
    };
    let (solver, scaled) = read_solver(raw, cfg.solver.clone())?;
    cfg.solver = solver;
    if let Some(s) = scaled {
        cfg.scaled_l0 = s;
    }
    if raw.sections.contains_key("init") {
        return Err(CliError::Config("[init] is only read by `omm solve`; use [experiment] l_supports".into()));
    }
    let mut r = Reader::new("experiment", raw.section("experiment"));
    if let Some(names) = r.list::<String>("methods")? {
        cfg.methods = names.iter().map(|n| Method::parse(n)).collect::<Result<_, _>>()?;
    }
    if let Some(v) = r.list("alphas")? {
        cfg.alphas = v;
    }
    if let Some(v) = r.list("mus")? {
        cfg.mus = v;
    }
    if let Some(text) = r.take("mu_schedule") {
        cfg.mu_schedule = parse_mu_schedule(&text)?;
    }
    if let Some(v) = r.parse("trials")? {
        cfg.trials = v;
    }
    if let Some(v) = r.list("l_supports")? {
        cfg.l_supports = v;
    }
    if let Some(v) = r.parse("seed")? {
        cfg.seed = v;
    }
    if let Some(v) = r.parse("threads")? {
        cfg.threads = v;
    }
    if let Some(v) = r.parse("export_column")? {
        cfg.export_column = v;
    }
    r.finish()?;
    cfg.validate()?;
    Ok(cfg)
}
