//! LQG feedback control of a linear quantum system driven by Lorentzian
//! (colored) noise.
//!
//! The colored environment is represented by an ancillary cavity mode that
//! filters white noise into a Lorentzian spectrum. Together with the
//! controlled principal mode this gives a 4-state Markovian model in
//! quadrature form, on which a whitening Kalman filter and an LQG regulator
//! are designed. A baseline controller built on the 2-state principal-only
//! model is provided for comparison, together with steady-state cost
//! analysis and a Monte Carlo integrator for cross-checking.
//!
//! All numerical code is generic over the scalar type through [`Real`]; the
//! aliases below fix it to `f64`, which is what the tolerances in the test
//! suite are written for.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod model;
pub mod scalar;
pub mod simulate;
pub mod solvers;
pub mod synthesis;

pub use error::{Error, Result};
pub use scalar::Real;

pub use analysis::{
    photon_objective, steady_state_covariance, sweep_thermal, sweep_thermal_serial, SweepRow,
    ThermalStudy,
};
pub use model::{
    build_augmented_model, build_markovian_model, lorentzian_psd, model_output_psd,
    noise_intensity, LinearModel, NoiseIntensity, PhysicalParams,
};
pub use simulate::{
    empirical_objective, exact_discretization, simulate_closed_loop, Integrator, SimConfig,
    TrajectoryStats,
};
pub use solvers::{
    lyapunov_oracle, newton_kleinman, solve_care, solve_lyapunov, spectral_abscissa, CareProblem,
    SolveReport,
};
pub use synthesis::{
    assemble_closed_loop, lqg_gain, markovian_filter, whitening_filter, ClosedLoop,
    ControlSynthesis, FilterSynthesis,
};

/// Dense `f64` matrix.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Physical parameters in double precision.
pub type Params = PhysicalParams<f64>;
pub type Model = LinearModel<f64>;
pub type Noise = NoiseIntensity<f64>;
pub type Filter = FilterSynthesis<f64>;
pub type Controller = ControlSynthesis<f64>;
pub type Loop = ClosedLoop<f64>;
pub type Row = SweepRow<f64>;
pub type Stats = TrajectoryStats<f64>;
