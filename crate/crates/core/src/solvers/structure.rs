use nalgebra::{Complex, DMatrix};

use super::eigenvalues;
use crate::error::Result;
use crate::scalar::Real;

/// Relative singular-value threshold for the rank decisions below.
pub(crate) const RANK_TOL: f64 = 1e-8;

/// Rank of `m`, counting singular values above `RANK_TOL` times the largest.
pub fn numerical_rank<T: Real>(m: &DMatrix<T>) -> usize {
    orthonormal_range(m).ncols()
}

fn orthonormal_range<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    if smax == T::zero() {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > smax * T::lit(RANK_TOL))
        .map(|(i, _)| i)
        .collect();
    u.select_columns(keep.iter())
}

/// Orthonormal basis of the controllable subspace of `(a, b)`, grown one
/// Krylov step at a time until the dimension stalls.
pub fn controllable_subspace<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let n = a.nrows();
    let mut basis = orthonormal_range(b);
    loop {
        let dim = basis.ncols();
        if dim == n || dim == 0 {
            return basis;
        }
        let image = a * &basis;
        let stacked = DMatrix::from_columns(
            &basis
                .column_iter()
                .chain(image.column_iter())
                .map(|c| c.clone_owned())
                .collect::<Vec<_>>(),
        );
        let next = orthonormal_range(&stacked);
        if next.ncols() == dim {
            return basis;
        }
        basis = next;
    }
}

/// Eigenvalues of `a` restricted to the complement of the controllable
/// subspace of `(a, b)`.
pub fn uncontrollable_modes<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<Vec<Complex<T>>> {
    let n = a.nrows();
    let ctrb = controllable_subspace(a, b);
    if ctrb.ncols() == n {
        return Ok(Vec::new());
    }
    let projector = DMatrix::<T>::identity(n, n) - &ctrb * ctrb.transpose();
    let complement = orthonormal_range(&projector);
    eigenvalues(&(complement.transpose() * a * &complement))
}

/// Eigenvalues of `a` on the unobservable subspace of `(c, a)`.
pub fn unobservable_modes<T: Real>(a: &DMatrix<T>, c: &DMatrix<T>) -> Result<Vec<Complex<T>>> {
    uncontrollable_modes(&a.transpose(), &c.transpose())
}

/// `(a, b)` is stabilizable when every mode outside the controllable
/// subspace is asymptotically stable.
pub fn is_stabilizable<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<bool> {
    Ok(uncontrollable_modes(a, b)?.iter().all(|z| z.re < T::zero()))
}

/// `(c, a)` is detectable iff `(a^T, c^T)` is stabilizable.
pub fn is_detectable<T: Real>(a: &DMatrix<T>, c: &DMatrix<T>) -> Result<bool> {
    is_stabilizable(&a.transpose(), &c.transpose())
}
