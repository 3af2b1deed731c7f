use nalgebra::{DMatrix, DVector};

use super::{is_symmetric, symmetrize};
use crate::error::{Error, Result};
use crate::scalar::Real;

const EQUATION: &str = "Lyapunov equation";

/// `A X + X A^T + Q` evaluated at `x`.
pub fn lyapunov_residual<T: Real>(a: &DMatrix<T>, x: &DMatrix<T>, q: &DMatrix<T>) -> DMatrix<T> {
    a * x + x * a.transpose() + q
}

/// Solves `A X + X A^T + Q = 0` for Hurwitz `A` and symmetric `Q` with the
/// Bartels-Stewart method on the real Schur form of `A`.
pub fn solve_lyapunov<T: Real>(a: &DMatrix<T>, q: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    if !a.is_square() || q.shape() != (n, n) {
        return Err(Error::invalid(format!(
            "Lyapunov data: A is {}x{}, Q is {}x{}",
            a.nrows(),
            a.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    if a.iter().chain(q.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("Lyapunov data must be finite"));
    }
    if !is_symmetric(q) {
        return Err(Error::invalid(
            "Lyapunov right-hand side Q must be symmetric",
        ));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }

    let schur = nalgebra::Schur::try_new(a.clone(), T::default_epsilon(), 10_000)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    let abscissa = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .reduce(|x, y| if y > x { y } else { x })
        .unwrap_or_else(T::zero);
    if abscissa >= T::zero() {
        return Err(Error::NotHurwitz {
            equation: EQUATION.into(),
            abscissa: abscissa.as_f64(),
        });
    }
    let (u, s) = schur.unpack();

    let solve = |rhs: &DMatrix<T>| -> Result<DMatrix<T>> {
        let c = u.transpose() * rhs * &u;
        let y = quasi_triangular_sylvester(&s, &c)?;
        Ok(&u * y * u.transpose())
    };

    let mut x = symmetrize(&solve(q)?);
    let tol = T::residual_tol() * (T::one() + q.norm());
    let mut residual = lyapunov_residual(a, &x, q);
    if residual.norm() > tol * T::lit(1e-3) {
        // One step of iterative refinement.
        let correction = solve(&symmetrize(&residual))?;
        x = symmetrize(&(x + correction));
        residual = lyapunov_residual(a, &x, q);
    }
    if residual.norm() > tol {
        return Err(Error::Convergence {
            equation: EQUATION.into(),
            residual: residual.norm().as_f64(),
            tolerance: tol.as_f64(),
            iterations: 2,
        });
    }
    Ok(x)
}

/// Solves `S Y + Y S^T = -C` for quasi-upper-triangular `S`, sweeping the
/// columns of `Y` from last to first.
fn quasi_triangular_sylvester<T: Real>(s: &DMatrix<T>, c: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = s.nrows();
    let mut y = DMatrix::<T>::zeros(n, n);
    let eye = DMatrix::<T>::identity(n, n);
    let singular = || Error::Numerical("singular block in Bartels-Stewart sweep".into());

    // -c_j - sum_{k > last} S[j, k] y_k
    let rhs_for = |y: &DMatrix<T>, j: usize, last: usize| -> DVector<T> {
        let mut r = -c.column(j).clone_owned();
        for k in (last + 1)..n {
            let sjk = s[(j, k)];
            if sjk != T::zero() {
                r.axpy(-sjk, &y.column(k), T::one());
            }
        }
        r
    };

    let mut j = n;
    while j > 0 {
        let col = j - 1;
        let block = col > 0 && s[(col, col - 1)] != T::zero();
        if block {
            let (p, q) = (col - 1, col);
            let mut big = DMatrix::<T>::zeros(2 * n, 2 * n);
            big.view_mut((0, 0), (n, n))
                .copy_from(&(s + &eye * s[(p, p)]));
            big.view_mut((0, n), (n, n)).copy_from(&(&eye * s[(p, q)]));
            big.view_mut((n, 0), (n, n)).copy_from(&(&eye * s[(q, p)]));
            big.view_mut((n, n), (n, n))
                .copy_from(&(s + &eye * s[(q, q)]));
            let mut rhs = DVector::<T>::zeros(2 * n);
            rhs.rows_mut(0, n).copy_from(&rhs_for(&y, p, q));
            rhs.rows_mut(n, n).copy_from(&rhs_for(&y, q, q));
            let sol = big.lu().solve(&rhs).ok_or_else(singular)?;
            y.set_column(p, &sol.rows(0, n));
            y.set_column(q, &sol.rows(n, n));
            j -= 2;
        } else {
            let shifted = s + &eye * s[(col, col)];
            let sol = shifted
                .lu()
                .solve(&rhs_for(&y, col, col))
                .ok_or_else(singular)?;
            y.set_column(col, &sol);
            j -= 1;
        }
    }
    Ok(y)
}

/// Reference solver for `A X + X A^T + Q = 0` through the vectorized system
/// `(I (x) A + A (x) I) vec(X) = -vec(Q)`. Costs `O(n^6)`; meant for
/// validating [`solve_lyapunov`] on small instances.
pub fn lyapunov_oracle<T: Real>(a: &DMatrix<T>, q: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    if !a.is_square() || q.shape() != (n, n) {
        return Err(Error::invalid("Lyapunov oracle: dimension mismatch"));
    }
    let eye = DMatrix::<T>::identity(n, n);
    let system = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = -DVector::from_column_slice(q.as_slice());
    let vec_x = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("Kronecker system is singular".into()))?;
    Ok(DMatrix::from_column_slice(n, n, vec_x.as_slice()))
}
