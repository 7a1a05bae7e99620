use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidArgument(format!(
            "matrix is {}x{}, not square",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::InvalidArgument(format!(
                    "matrix is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}

/// Smallest eigenvalue of a symmetric matrix (`+∞` for the empty matrix).
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Clips negative eigenvalues to zero. Returns the projection and the
/// original minimum eigenvalue.
pub fn psd_project(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    check_symmetric(m)?;
    if m.nrows() == 0 {
        return Ok((m.clone(), f64::INFINITY));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min >= 0.0 {
        return Ok((m.clone(), min));
    }
    // Subtracting only the negative part keeps the change as small as those
    // eigenvalues; rebuilding from the full decomposition does not.
    let mut proj = m.clone();
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l < 0.0 {
            let v = eig.eigenvectors.column(i);
            proj -= (v * v.transpose()) * l;
        }
    }
    Ok(((&proj + proj.transpose()) * 0.5, min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn clips_negative_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        let (p, min) = psd_project(&m).unwrap();
        assert_eq!(min, -0.5);
        assert!((p - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).amax() < 1e-15);
    }

    #[test]
    fn identity_is_fixed() {
        let m = DMatrix::<f64>::identity(3, 3);
        let (p, min) = psd_project(&m).unwrap();
        assert_eq!(p, m);
        assert!((min - 1.0).abs() < 1e-15);
    }

    #[test]
    fn small_perturbation_moves_little() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = DMatrix::from_fn(6, 3, |_, _| rng.gen_range(-1.0..1.0));
        // Rank-deficient Gram matrix, pushed slightly out of the cone.
        let mut g = &r * r.transpose();
        let e = DMatrix::from_fn(6, 6, |i, j| if i == j { -1e-10 } else { 0.0 });
        g += e;
        let (p, min) = psd_project(&g).unwrap();
        assert!(min < 0.0);
        assert!((&p - &g).norm() <= 1e-9);
        assert!(min_eigenvalue(&p) >= -1e-12);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(psd_project(&m).is_err());
    }
}
