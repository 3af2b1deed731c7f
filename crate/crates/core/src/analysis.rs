//! Stationary covariance, the photon-number cost, and the thermal sweep
//! comparing the whitening and Markovian controllers.

use nalgebra::{DMatrix, Matrix2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    build_augmented_model, build_markovian_model, noise_intensity, LinearModel, PhysicalParams,
};
use crate::scalar::Real;
use crate::solvers::solve_lyapunov;
use crate::synthesis::{
    assemble_closed_loop, lqg_gain, markovian_filter, whitening_filter, ClosedLoop,
    ControlSynthesis, FilterSynthesis,
};

/// Stationary principal-mode cost of both controllers at one thermal
/// occupation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow<T: Real> {
    pub thermal_n: T,
    pub j_whitening: T,
    pub j_markovian: T,
}

/// Stationary covariance `P` of the closed loop:
/// `A~ P + P A~^T + B~ M B~^T = 0`.
pub fn steady_state_covariance<T: Real>(cl: &ClosedLoop<T>) -> Result<DMatrix<T>> {
    solve_lyapunov(&cl.a_tilde, &cl.noise_input())
        .map_err(|e| e.in_equation("closed-loop Lyapunov equation"))
}

/// `J = tr(P E~^T Q1 E~)`.
pub fn photon_objective<T: Real>(
    p_tilde: &DMatrix<T>,
    cl: &ClosedLoop<T>,
    q1: &Matrix2<T>,
) -> Result<T> {
    let dim = cl.dim();
    if p_tilde.shape() != (dim, dim) || cl.e_tilde.shape() != (2, dim) {
        return Err(Error::invalid(format!(
            "covariance is {}x{}, closed loop has {dim} states",
            p_tilde.nrows(),
            p_tilde.ncols()
        )));
    }
    Ok(weighted_trace(p_tilde, &cl.e_tilde, q1))
}

pub(crate) fn weighted_trace<T: Real>(p: &DMatrix<T>, e: &DMatrix<T>, q1: &Matrix2<T>) -> T {
    let q1 = DMatrix::from_iterator(2, 2, q1.iter().copied());
    (p * e.transpose() * q1 * e).trace()
}

/// Everything in the thermal comparison that does not depend on `N`: the
/// plant, the Markovian design model with its filter, and both regulators.
#[derive(Debug, Clone)]
pub struct ThermalStudy<T: Real> {
    pub params: PhysicalParams<T>,
    pub plant: LinearModel<T>,
    pub markovian_model: LinearModel<T>,
    pub markovian_filter: FilterSynthesis<T>,
    pub whitening_control: ControlSynthesis<T>,
    pub markovian_control: ControlSynthesis<T>,
}

impl<T: Real> ThermalStudy<T> {
    pub fn new(params: &PhysicalParams<T>) -> Result<Self> {
        params.validate()?;
        let plant = build_augmented_model(params)?;
        let markovian_model = build_markovian_model(params)?;
        // The principal-only model has no thermal channel.
        let mk_noise = noise_intensity(&markovian_model, T::zero())?;
        Ok(Self {
            params: params.clone(),
            markovian_filter: markovian_filter(&markovian_model, &mk_noise)?,
            whitening_control: lqg_gain(&plant, params)?,
            markovian_control: lqg_gain(&markovian_model, params)?,
            plant,
            markovian_model,
        })
    }

    /// Whitening filter for the plant at occupation `thermal_n`.
    pub fn whitening_filter(&self, thermal_n: T) -> Result<FilterSynthesis<T>> {
        let noise = noise_intensity(&self.plant, thermal_n)?;
        whitening_filter(&self.plant, &noise)
    }

    pub fn whitening_loop(&self, thermal_n: T) -> Result<ClosedLoop<T>> {
        let noise = noise_intensity(&self.plant, thermal_n)?;
        let filter = whitening_filter(&self.plant, &noise)?;
        assemble_closed_loop(&self.plant, &noise, &filter, &self.whitening_control)
    }

    pub fn markovian_loop(&self, thermal_n: T) -> Result<ClosedLoop<T>> {
        let noise = noise_intensity(&self.plant, thermal_n)?;
        assemble_closed_loop(
            &self.plant,
            &noise,
            &self.markovian_filter,
            &self.markovian_control,
        )
    }

    pub fn evaluate(&self, thermal_n: T) -> Result<SweepRow<T>> {
        let q1 = &self.params.q1;
        let cost = |cl: ClosedLoop<T>| -> Result<T> {
            let p = steady_state_covariance(&cl)?;
            photon_objective(&p, &cl, q1)
        };
        Ok(SweepRow {
            thermal_n,
            j_whitening: cost(self.whitening_loop(thermal_n)?)?,
            j_markovian: cost(self.markovian_loop(thermal_n)?)?,
        })
    }

    fn evaluate_tagged(&self, thermal_n: T) -> Result<SweepRow<T>> {
        self.evaluate(thermal_n).map_err(|e| Error::Sweep {
            thermal_n: thermal_n.as_f64(),
            source: Box::new(e),
        })
    }
}

fn check_grid<T: Real>(grid: &[T]) -> Result<()> {
    if let Some(bad) = grid.iter().find(|n| !(**n >= T::zero()) || !n.is_finite()) {
        return Err(Error::invalid(format!(
            "thermal_n grid value {bad} is not >= 0"
        )));
    }
    Ok(())
}

/// `J` of both controllers over a grid of thermal occupations, evaluated in
/// parallel. Rows come back in grid order and are bitwise identical to
/// [`sweep_thermal_serial`].
pub fn sweep_thermal<T: Real>(params: &PhysicalParams<T>, grid: &[T]) -> Result<Vec<SweepRow<T>>> {
    check_grid(grid)?;
    let study = ThermalStudy::new(params)?;
    grid.par_iter().map(|&n| study.evaluate_tagged(n)).collect()
}

pub fn sweep_thermal_serial<T: Real>(
    params: &PhysicalParams<T>,
    grid: &[T],
) -> Result<Vec<SweepRow<T>>> {
    check_grid(grid)?;
    let study = ThermalStudy::new(params)?;
    grid.iter().map(|&n| study.evaluate_tagged(n)).collect()
}
