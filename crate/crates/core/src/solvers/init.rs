use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::OrbitalMatrix;
use crate::error::{OmmError, Result};
use crate::operator::GridSpec;

/// Localized random start: column `i` is supported on the `2L+1` grid points
/// around the point nearest `centers[i]` (wrapping periodically), with values
/// uniform on `[0, 2/(2L+1)]`.
///
/// The column norms are not rescaled; the expected squared norm of a column
/// is `4 / (3(2L+1))`.
pub fn random_initial_condition(
    grid: &GridSpec,
    centers: &[f64],
    l_support: usize,
    m: usize,
    seed: u64,
) -> Result<OrbitalMatrix> {
    let n = grid.n_points;
    let width = 2 * l_support + 1;
    if width > n {
        return Err(OmmError::InvalidParameter(format!(
            "support width {width} exceeds grid size {n}"
        )));
    }
    if centers.len() < m {
        return Err(OmmError::InvalidParameter(format!(
            "{m} columns requested but only {} centers given",
            centers.len()
        )));
    }
    let upper = 2.0 / width as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, m);
    for (col, &c) in centers.iter().take(m).enumerate() {
        let mid = grid.nearest_index(c);
        for off in 0..width {
            let row = (mid + n + off - l_support) % n;
            x[(row, col)] = rng.gen_range(0.0..=upper);
        }
    }
    Ok(OrbitalMatrix::new(x))
}
