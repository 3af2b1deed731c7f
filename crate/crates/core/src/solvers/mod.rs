//! Dense solvers for continuous-time Lyapunov and algebraic Riccati
//! equations, plus spectral and structural diagnostics.

mod lyapunov;
mod riccati;
mod spectrum;
mod structure;

pub use lyapunov::{lyapunov_oracle, lyapunov_residual, solve_lyapunov};
pub use riccati::{care_residual, newton_kleinman, solve_care, CareProblem, SolveReport};
pub use spectrum::{eigenvalues, spectra_match, spectral_abscissa};
pub use structure::{
    controllable_subspace, is_detectable, is_stabilizable, numerical_rank, uncontrollable_modes,
    unobservable_modes,
};

use nalgebra::DMatrix;

use crate::scalar::Real;

pub(crate) fn symmetrize<T: Real>(x: &DMatrix<T>) -> DMatrix<T> {
    (x + x.transpose()) * T::lit(0.5)
}

pub(crate) fn is_symmetric<T: Real>(x: &DMatrix<T>) -> bool {
    if !x.is_square() {
        return false;
    }
    let tol = T::default_epsilon().sqrt() * (T::one() + x.norm());
    (x - x.transpose()).norm() <= tol
}
