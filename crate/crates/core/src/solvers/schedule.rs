use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OmmError, Result};

/// Piecewise-constant penalty: `pieces[i] = (first iteration, mu)`.
///
/// Iterations are numbered from 1; the first piece must start at 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuSchedule {
    pub pieces: Vec<(usize, f64)>,
}

impl MuSchedule {
    pub fn constant(mu: f64) -> Self {
        Self { pieces: vec![(0, mu)] }
    }

    pub fn new(pieces: Vec<(usize, f64)>) -> Result<Self> {
        let s = Self { pieces };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self.pieces.first() {
            Some((0, _)) => {}
            _ => return Err(OmmError::InvalidParameter("mu schedule must start at iteration 0".into())),
        }
        if self.pieces.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(OmmError::InvalidParameter("mu schedule starts must be strictly increasing".into()));
        }
        if let Some((_, mu)) = self.pieces.iter().find(|(_, mu)| !(*mu >= 0.0)) {
            return Err(OmmError::InvalidParameter(format!("mu must be non-negative, got {mu}")));
        }
        Ok(())
    }

    pub fn mu_at(&self, k: usize) -> f64 {
        let idx = self.pieces.partition_point(|(start, _)| *start <= k);
        self.pieces[idx.saturating_sub(1)].1
    }

    pub fn is_constant(&self) -> bool {
        self.pieces.windows(2).all(|w| w[0].1 == w[1].1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSchedule {
    /// `0, 1, ..., m-1, 0, 1, ...`
    Sequential,
    /// A fresh uniform permutation of the columns every `m` iterations.
    RandomPermutation,
}

impl BlockSchedule {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(BlockSchedule::Sequential),
            "random" | "random_permutation" => Ok(BlockSchedule::RandomPermutation),
            other => Err(OmmError::InvalidParameter(format!("unknown block schedule `{other}`"))),
        }
    }
}

/// Stateful block chooser. Column indices are 0-based.
#[derive(Clone, Debug)]
pub struct BlockScheduler {
    strategy: BlockSchedule,
    m: usize,
    perm: Vec<usize>,
    rng: ChaCha8Rng,
}

impl BlockScheduler {
    pub fn new(strategy: BlockSchedule, m: usize, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(OmmError::InvalidParameter("need at least one block".into()));
        }
        Ok(Self { strategy, m, perm: (0..m).collect(), rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    /// Block for iteration `k >= 1`; must be called with consecutive `k`.
    pub fn next_block(&mut self, k: usize) -> usize {
        let pos = (k - 1) % self.m;
        match self.strategy {
            BlockSchedule::Sequential => pos,
            BlockSchedule::RandomPermutation => {
                if pos == 0 {
                    self.perm.shuffle(&mut self.rng);
                }
                self.perm[pos]
            }
        }
    }
}
