use serde::{Deserialize, Serialize};

use super::schedule::{BlockSchedule, MuSchedule};
use crate::error::{OmmError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// ISTA where `L` only grows: `L_k = L_{k-1}`, failures multiply by `eta_bt`.
    IstaBacktrack,
    /// ISTA with secant-seeded `L` and solved-for backtracking.
    IstaDynamic,
    /// One column per iteration with the dynamic rules.
    BlockDynamic,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::IstaBacktrack => "ista_backtrack",
            Variant::IstaDynamic => "ista_dynamic",
            Variant::BlockDynamic => "block_dynamic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ista_backtrack" => Ok(Variant::IstaBacktrack),
            "ista_dynamic" => Ok(Variant::IstaDynamic),
            "block_dynamic" => Ok(Variant::BlockDynamic),
            other => Err(OmmError::InvalidParameter(format!("unknown solver variant `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub variant: Variant,
    pub block_schedule: BlockSchedule,
    pub mu_schedule: MuSchedule,
    /// Initial step reciprocal.
    pub l0: f64,
    /// Growth factor for traditional backtracking.
    pub eta_bt: f64,
    /// Safety factor on the secant estimate of the initial `L`.
    pub c1: f64,
    /// Safety factor on the solved-for backtracking `L`.
    pub c2: f64,
    /// Stop once `|X_k - X_{k-1}|_F < tol` (per sweep for block variants).
    pub tol: f64,
    pub max_iters: usize,
    /// Seeds the random block permutations.
    pub seed: u64,
    /// Keep per-entry counts of iterations in which the entry was nonzero.
    pub track_entries: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            variant: Variant::IstaDynamic,
            block_schedule: BlockSchedule::Sequential,
            mu_schedule: MuSchedule::constant(0.0),
            l0: 1.0,
            eta_bt: 2.0,
            c1: 1.5,
            c2: 2.0,
            tol: 1e-6,
            max_iters: 100_000,
            seed: 0,
            track_entries: false,
        }
    }
}

impl SolverConfig {
    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu_schedule = MuSchedule::constant(mu);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(OmmError::InvalidParameter(what));
        if !(self.l0 > 0.0 && self.l0.is_finite()) {
            return bad(format!("L0 must be positive, got {}", self.l0));
        }
        if !(self.eta_bt > 1.0) {
            return bad(format!("eta_bt must exceed 1, got {}", self.eta_bt));
        }
        if !(self.c1 > 1.0) {
            return bad(format!("c1 must exceed 1, got {}", self.c1));
        }
        if !(self.c2 > 1.0) {
            return bad(format!("c2 must exceed 1, got {}", self.c2));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        self.mu_schedule.validate()
    }
}
