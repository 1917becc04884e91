//! Cholesky factorization with the escalating-jitter policy used for GP
//! covariance matrices.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative jitter added to a bare kernel matrix before factorization.
pub const BASE_JITTER_REL: f64 = 1e-8;
/// Relative jitter beyond which factorization is abandoned.
pub const MAX_JITTER_REL: f64 = 1e-4;

pub struct FactoredSpd {
    pub chol: Cholesky<f64, Dyn>,
    pub log_det: f64,
    /// Absolute jitter that was added to the diagonal.
    pub jitter: f64,
}

/// Factor a symmetric matrix, adding `base_rel * mean(diag)` to the diagonal
/// and escalating by factors of 10 up to `MAX_JITTER_REL * mean(diag)`.
///
/// Matrices that already carry a noise term on the diagonal (C + sigma^2 I,
/// A + gamma I) should pass `base_rel = 0.0` so that a well-conditioned
/// matrix is factored exactly.
pub fn factor_spd(m: &DMatrix<f64>, base_rel: f64) -> Result<FactoredSpd> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "cannot factor a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let mean_diag = m.diagonal().iter().sum::<f64>() / n as f64;
    if !mean_diag.is_finite() {
        return Err(Error::Numerical("non-finite covariance diagonal".into()));
    }
    let scale = mean_diag.abs().max(f64::MIN_POSITIVE);

    let mut rel = base_rel;
    loop {
        let jitter = rel * scale;
        let attempt = if jitter == 0.0 {
            m.clone()
        } else {
            let mut shifted = m.clone();
            for i in 0..n {
                shifted[(i, i)] += jitter;
            }
            shifted
        };
        if let Some(chol) = Cholesky::new(attempt) {
            let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            if log_det.is_finite() {
                return Ok(FactoredSpd { chol, log_det, jitter });
            }
        }
        rel = if rel == 0.0 { BASE_JITTER_REL } else { rel * 10.0 };
        if rel > MAX_JITTER_REL {
            return Err(Error::Numerical(format!(
                "Cholesky failed for {n}x{n} covariance even with jitter {:.3e}",
                MAX_JITTER_REL * scale
            )));
        }
    }
}

/// Log-density of a zero-mean multivariate normal with the factored
/// covariance, evaluated at `v`.
pub fn mvn_logpdf_centered(f: &FactoredSpd, v: &DVector<f64>) -> f64 {
    let n = v.len() as f64;
    let solved = f.chol.solve(v);
    let quad = v.dot(&solved);
    -0.5 * quad - 0.5 * f.log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_needs_no_jitter() {
        let m = DMatrix::identity(3, 3);
        let f = factor_spd(&m, 0.0).unwrap();
        assert_eq!(f.jitter, 0.0);
        assert_relative_eq!(f.log_det, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn semidefinite_matrix_gets_jitter() {
        // Rank-one 2x2, singular without jitter.
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = factor_spd(&m, BASE_JITTER_REL).unwrap();
        assert!(f.jitter > 0.0);
    }

    #[test]
    fn indefinite_matrix_fails() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(factor_spd(&m, 0.0).is_err());
    }

    #[test]
    fn standard_normal_logpdf() {
        let m = DMatrix::identity(1, 1);
        let f = factor_spd(&m, 0.0).unwrap();
        let v = DVector::from_element(1, 0.0);
        assert_relative_eq!(
            mvn_logpdf_centered(&f, &v),
            -0.5 * (2.0 * std::f64::consts::PI).ln(),
            epsilon = 1e-14
        );
    }
}
