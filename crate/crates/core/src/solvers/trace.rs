use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::energy::OrbitalMatrix;
use crate::error::{OmmError, Result};

pub const TRACE_CSV_HEADER: &str = "iter,E0,Emu,L,backtracks,nnz,step_norm,mu";

/// Diagnostics for one accepted iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterateRecord {
    pub iter: usize,
    pub e0: f64,
    pub emu: f64,
    /// `|X_k|_1`, kept so `E_mu` can be re-evaluated under another `mu`.
    pub l1: f64,
    pub l_used: f64,
    pub backtracks: usize,
    pub nnz: usize,
    pub step_norm: f64,
    pub mu: f64,
}

#[derive(Clone, Debug, Default)]
pub struct IterateTrace {
    pub initial_e0: f64,
    pub initial_l1: f64,
    pub records: Vec<IterateRecord>,
    /// Per entry: number of iterations after which the entry was nonzero.
    pub entry_counts: Option<DMatrix<u32>>,
}

impl IterateTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterateRecord> {
        self.records.last()
    }

    /// `(E_mu before, E_mu after)` for every iteration, both under that
    /// iteration's `mu`.
    pub fn emu_pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mut prev = (self.initial_e0, self.initial_l1);
        self.records.iter().map(move |r| {
            let before = prev.0 + r.mu * prev.1;
            prev = (r.e0, r.l1);
            (before, r.emu)
        })
    }

    /// Largest relative increase of `E_mu` over any accepted iteration.
    pub fn worst_increase(&self) -> f64 {
        self.emu_pairs()
            .map(|(before, after)| (after - before) / (1.0 + before.abs()))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = String::with_capacity(96 * (self.records.len() + 1));
        buf.push_str(TRACE_CSV_HEADER);
        buf.push('\n');
        for r in &self.records {
            buf.push_str(&format!(
                "{},{:.15e},{:.15e},{:.15e},{},{},{:.15e},{:.15e}\n",
                r.iter, r.e0, r.emu, r.l_used, r.backtracks, r.nnz, r.step_norm, r.mu
            ));
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }

    /// Reads the CSV written by [`IterateTrace::write_csv`]. `l1` is
    /// reconstructed from `E_mu - E_0` where `mu > 0`.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| OmmError::Parse { line: 1, message: "empty trace".into() })??;
        if header.trim() != TRACE_CSV_HEADER {
            return Err(OmmError::Parse { line: 1, message: format!("unexpected header `{header}`") });
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || OmmError::Parse { line: i + 2, message: format!("malformed row `{line}`") };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad());
            }
            let float = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
            let int = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
            let (e0, emu, mu) = (float(f[1])?, float(f[2])?, float(f[7])?);
            records.push(IterateRecord {
                iter: int(f[0])?,
                e0,
                emu,
                l1: if mu > 0.0 { (emu - e0) / mu } else { f64::NAN },
                l_used: float(f[3])?,
                backtracks: int(f[4])?,
                nnz: int(f[5])?,
                step_norm: float(f[6])?,
                mu,
            });
        }
        Ok(Self { initial_e0: f64::NAN, initial_l1: f64::NAN, records, entry_counts: None })
    }
}

/// Outcome of a solve. Hitting `max_iters` is reported through `converged`.
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub x: OrbitalMatrix,
    pub trace: IterateTrace,
    pub converged: bool,
    pub iterations: usize,
}

impl SolveResult {
    pub fn final_e0(&self) -> f64 {
        self.trace.last().map_or(self.trace.initial_e0, |r| r.e0)
    }

    pub fn final_emu(&self) -> f64 {
        self.trace.last().map_or(self.trace.initial_e0, |r| r.emu)
    }
}

pub(crate) fn bump_entry_counts(counts: &mut Option<DMatrix<u32>>, x: &DMatrix<f64>) {
    if let Some(c) = counts {
        c.zip_apply(x, |n, v| {
            if v != 0.0 {
                *n += 1;
            }
        });
    }
}
