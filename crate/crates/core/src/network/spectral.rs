//! Second-largest eigenvalue modulus (SLEM) of consensus matrices.
//!
//! For symmetric `W` with `W𝟏 = 𝟏`, `λ₂(W) = ‖W − 𝟏𝟏ᵀ/n‖₂`. The deflated
//! matrix is still symmetric, so a dense symmetric eigensolve gives every
//! eigenvalue except the consensus direction, which is mapped to zero.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub const SYMMETRY_TOL: f64 = 1e-12;

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn deflate(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let avg = 1.0 / n as f64;
    m.map(|w| w - avg)
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::usage(format!(
            "expected a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Eigen-decomposition of the deflated (symmetrized) matrix.
pub(crate) fn deflated_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let d = deflate(m);
    // Average with the transpose so round-off asymmetry never leaks into the solver.
    let sym = (&d + d.transpose()) * 0.5;
    SymmetricEigen::new(sym)
}

/// Second-largest eigenvalue modulus of a symmetric matrix.
pub fn lambda2(m: &DMatrix<f64>) -> Result<f64> {
    check_square(m)?;
    let asym = max_asymmetry(m);
    if asym > SYMMETRY_TOL {
        return Err(Error::usage(format!(
            "lambda2 needs a symmetric matrix (max |W_ij - W_ji| = {asym:e})"
        )));
    }
    if m.nrows() == 1 {
        return Ok((m[(0, 0)] - 1.0).abs());
    }
    let eig = deflated_eigen(m);
    Ok(eig.eigenvalues.iter().fold(0.0f64, |acc, l| acc.max(l.abs())))
}

/// `‖W − 𝟏𝟏ᵀ/n‖₂` for any square matrix via singular values.
pub fn deflated_spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    check_square(m)?;
    let svd = deflate(m).svd(false, false);
    Ok(svd.singular_values.iter().fold(0.0f64, |acc, s| acc.max(*s)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_projector_has_zero_slem() {
        for n in 1..8 {
            let j = DMatrix::from_element(n, n, 1.0 / n as f64);
            assert!(lambda2(&j).unwrap() < 1e-12);
        }
    }

    #[test]
    fn identity_has_unit_slem() {
        let i = DMatrix::<f64>::identity(4, 4);
        assert!((lambda2(&i).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_input_is_a_usage_error() {
        let mut m = DMatrix::from_element(3, 3, 1.0 / 3.0);
        m[(0, 1)] += 0.01;
        assert!(matches!(lambda2(&m), Err(Error::Usage(_))));
        assert!(deflated_spectral_norm(&m).is_ok());
    }

    #[test]
    fn svd_route_agrees_on_symmetric_input() {
        let m = DMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.0, 0.5, 0.0, 0.5, 0.0, 0.5, 0.5]);
        let a = lambda2(&m).unwrap();
        let b = deflated_spectral_norm(&m).unwrap();
        assert!((a - 0.5).abs() < 1e-12 && (a - b).abs() < 1e-12);
    }
}
