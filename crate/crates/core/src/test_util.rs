use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::operator::HermitianOperator;

#[track_caller]
pub fn assert_close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Dense random symmetric negative-definite operator with spectrum in [-3, -0.5].
pub fn random_negative_definite(rng: &mut ChaCha8Rng, n: usize) -> HermitianOperator {
    let a = random_matrix(rng, n, n);
    let q = a.qr().q();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| -rng.gen_range(0.5..3.0)));
    let mut h = &q * d * q.transpose();
    // exact symmetry
    for i in 0..n {
        for j in 0..i {
            h[(i, j)] = h[(j, i)];
        }
    }
    HermitianOperator::from_dense(h).unwrap()
}

pub fn diag(values: &[f64]) -> HermitianOperator {
    HermitianOperator::from_dense(DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(values))).unwrap()
}
