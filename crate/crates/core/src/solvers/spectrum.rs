use nalgebra::{Complex, ComplexField, DMatrix};

use crate::error::{Error, Result};
use crate::scalar::Real;

const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues of a real square matrix via the real Schur form.
pub fn eigenvalues<T: Real>(a: &DMatrix<T>) -> Result<Vec<Complex<T>>> {
    if !a.is_square() {
        return Err(Error::invalid(format!(
            "eigenvalues of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let schur = nalgebra::Schur::try_new(a.clone(), T::default_epsilon(), SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part over the spectrum; negative iff `a` is Hurwitz.
pub fn spectral_abscissa<T: Real>(a: &DMatrix<T>) -> Result<T> {
    let eigs = eigenvalues(a)?;
    eigs.iter()
        .map(|z| z.re)
        .reduce(|x, y| if y > x { y } else { x })
        .ok_or_else(|| Error::invalid("spectral abscissa of an empty matrix"))
}

/// Compares two spectra as multisets: each eigenvalue of `lhs` is paired
/// greedily with the nearest unused eigenvalue of `rhs`, and every pair must
/// lie within `tol`.
pub fn spectra_match<T: Real>(lhs: &[Complex<T>], rhs: &[Complex<T>], tol: T) -> bool {
    if lhs.len() != rhs.len() {
        return false;
    }
    let mut used = vec![false; rhs.len()];
    for z in lhs {
        let best = rhs
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, w)| (i, (z - w).modulus()))
            .reduce(|a, b| if b.1 < a.1 { b } else { a });
        match best {
            Some((i, d)) if d <= tol => used[i] = true,
            _ => return false,
        }
    }
    true
}
