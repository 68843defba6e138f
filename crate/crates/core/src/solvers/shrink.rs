use nalgebra::{Complex, DMatrix};

use crate::energy::OrbitalMatrix;
use crate::error::{OmmError, Result};

/// `sign(y) * max(|y| - alpha, 0)`.
#[inline]
pub fn soft_threshold(y: f64, alpha: f64) -> f64 {
    if y > alpha {
        y - alpha
    } else if y < -alpha {
        y + alpha
    } else {
        0.0
    }
}

/// Complex soft threshold: the magnitude shrinks by `alpha`, the phase is kept.
pub fn soft_threshold_complex(z: Complex<f64>, alpha: f64) -> Complex<f64> {
    let r = z.norm();
    if r <= alpha {
        Complex::new(0.0, 0.0)
    } else {
        z * ((r - alpha) / r)
    }
}

pub(crate) fn shrink_in_place(y: &mut DMatrix<f64>, alpha: f64) {
    if alpha > 0.0 {
        y.apply(|v| *v = soft_threshold(*v, alpha));
    }
}

/// Entrywise soft thresholding `T_alpha(Y)`.
pub fn shrink(y: &DMatrix<f64>, alpha: f64) -> Result<OrbitalMatrix> {
    if !(alpha >= 0.0) {
        return Err(OmmError::InvalidParameter(format!("threshold must be non-negative, got {alpha}")));
    }
    let mut out = y.clone();
    shrink_in_place(&mut out, alpha);
    Ok(OrbitalMatrix::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::assert_close;

    #[test]
    fn scalar_cases() {
        assert_close(soft_threshold(1.2, 0.5), 0.7, 1e-15);
        assert_eq!(soft_threshold(-0.3, 0.5), 0.0);
        assert_eq!(soft_threshold(0.5, 0.5), 0.0);
        assert_close(soft_threshold(-2.0, 0.5), -1.5, 1e-15);
    }

    #[test]
    fn zero_threshold_is_identity() {
        let y = DMatrix::from_row_slice(2, 2, &[1.0, -1e-300, 0.0, 3.5]);
        assert_eq!(*shrink(&y, 0.0).unwrap(), y);
    }

    #[test]
    fn negative_threshold_rejected() {
        assert!(shrink(&DMatrix::zeros(1, 1), -1.0).is_err());
    }

    #[test]
    fn complex_keeps_phase() {
        for k in 0..12 {
            let theta = k as f64 * 0.5;
            let z = Complex::from_polar(3.0, theta);
            let w = soft_threshold_complex(z, 1.0);
            let expected = Complex::from_polar(2.0, theta);
            assert!((w - expected).norm() < 1e-14);
        }
        assert_eq!(soft_threshold_complex(Complex::new(0.3, 0.4), 0.5), Complex::new(0.0, 0.0));
    }

    #[test]
    fn nnz_recomputed() {
        let y = DMatrix::from_row_slice(1, 4, &[1.0, 0.2, -0.9, 0.0]);
        let s = shrink(&y, 0.5).unwrap();
        assert_eq!(s.nnz(), 2);
    }
}
