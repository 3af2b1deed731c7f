//! Kalman filters, LQG regulator gains and the closed loops they form with
//! the true (augmented) plant.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::model::{LinearModel, NoiseIntensity, PhysicalParams};
use crate::scalar::Real;
use crate::solvers::{self, solve_care, spectral_abscissa, CareProblem};

const FILTER_EQUATION: &str = "filter Riccati equation";
const CONTROL_EQUATION: &str = "control Riccati equation";

/// Stationary Kalman filter designed against `model`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSynthesis<T: Real> {
    /// `K = (V C^T + V12) V2^-1`, `n x p`.
    pub gain: DMatrix<T>,
    /// Stationary error covariance `V`.
    pub error_cov: DMatrix<T>,
    pub model: LinearModel<T>,
}

/// Stationary LQ regulator `u = -F x_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSynthesis<T: Real> {
    /// `F = Q2^-1 B^T P`, `1 x n`.
    pub gain: DMatrix<T>,
    pub riccati_solution: DMatrix<T>,
}

/// Plant and filter stacked into one linear system driven by `w`:
/// `d/dt [x; x_hat] = A~ [x; x_hat] + B~ w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop<T: Real> {
    pub a_tilde: DMatrix<T>,
    pub b_tilde: DMatrix<T>,
    /// Picks `[q_s, p_s]` out of the closed-loop state.
    pub e_tilde: DMatrix<T>,
    /// Covariance of `w`.
    pub m: DMatrix<T>,
    pub plant_states: usize,
    pub filter_states: usize,
}

impl<T: Real> ClosedLoop<T> {
    pub fn dim(&self) -> usize {
        self.plant_states + self.filter_states
    }

    /// `B~ M B~^T`.
    pub fn noise_input(&self) -> DMatrix<T> {
        let bm = &self.b_tilde * &self.m;
        let out = &bm * self.b_tilde.transpose();
        (&out + out.transpose()) * T::lit(0.5)
    }
}

/// Literal residual of the filter equation
/// `(A - V12 V2^-1 C) V + V (A - V12 V2^-1 C)^T - V C^T V2^-1 C V + V1 - V12 V2^-1 V12^T`.
pub fn filter_are_residual<T: Real>(
    model: &LinearModel<T>,
    noise: &NoiseIntensity<T>,
    v: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    let v2_inv = invert(&noise.v2, "V2")?;
    let shifted = &model.a - &noise.v12 * &v2_inv * &model.c;
    Ok(
        &shifted * v + v * shifted.transpose() - v * model.c.transpose() * &v2_inv * &model.c * v
            + &noise.v1
            - &noise.v12 * &v2_inv * noise.v12.transpose(),
    )
}

/// Literal residual of `P A + A^T P - P B Q2^-1 B^T P + W`, where `W` is the
/// state weight passed in.
pub fn control_are_residual<T: Real>(
    model: &LinearModel<T>,
    state_weight: &DMatrix<T>,
    q2: T,
    p: &DMatrix<T>,
) -> DMatrix<T> {
    p * &model.a + model.a.transpose() * p - p * &model.b * model.b.transpose() * p / q2
        + state_weight
}

fn invert<T: Real>(m: &DMatrix<T>, name: &str) -> Result<DMatrix<T>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::invalid(format!("{name} is singular")))
}

fn check_noise<T: Real>(model: &LinearModel<T>, noise: &NoiseIntensity<T>) -> Result<()> {
    model.validate()?;
    let (n, p) = (model.n(), model.outputs());
    if noise.v1.shape() != (n, n) || noise.v12.shape() != (n, p) || noise.v2.shape() != (p, p) {
        return Err(Error::invalid(format!(
            "noise intensity blocks do not fit a model with {n} states and {p} outputs"
        )));
    }
    if noise.m.shape() != (model.q(), model.q()) {
        return Err(Error::invalid("noise covariance M does not match B'"));
    }
    Ok(())
}

fn kalman_filter<T: Real>(
    model: &LinearModel<T>,
    noise: &NoiseIntensity<T>,
) -> Result<FilterSynthesis<T>> {
    check_noise(model, noise)?;
    let problem = CareProblem::new(
        model.a.transpose(),
        model.c.transpose(),
        noise.v1.clone(),
        noise.v2.clone(),
    )
    .with_cross(noise.v12.clone());
    let report = solve_care(&problem).map_err(|e| e.in_equation(FILTER_EQUATION))?;
    let error_cov = report.solution;
    let gain = (&error_cov * model.c.transpose() + &noise.v12) * invert(&noise.v2, "V2")?;

    let residual = filter_are_residual(model, noise, &error_cov)?.norm();
    let tol = T::residual_tol() * (T::one() + noise.v1.norm());
    if !(residual <= tol) {
        return Err(Error::Convergence {
            equation: FILTER_EQUATION.into(),
            residual: residual.as_f64(),
            tolerance: tol.as_f64(),
            iterations: 0,
        });
    }
    let abscissa = spectral_abscissa(&(&model.a - &gain * &model.c))?;
    if abscissa >= T::zero() {
        return Err(Error::Unstable {
            context: "filter error dynamics A - K C".into(),
            abscissa: abscissa.as_f64(),
        });
    }
    Ok(FilterSynthesis {
        gain,
        error_cov,
        model: model.clone(),
    })
}

/// Kalman filter on the augmented principal + ancilla model; its
/// innovations are white because the colored noise source is part of the
/// state.
pub fn whitening_filter<T: Real>(
    model: &LinearModel<T>,
    noise: &NoiseIntensity<T>,
) -> Result<FilterSynthesis<T>> {
    if model.n() != 4 {
        return Err(Error::invalid(format!(
            "whitening filter expects the 4-state augmented model, got {} states",
            model.n()
        )));
    }
    kalman_filter(model, noise)
}

/// Baseline Kalman filter on the 2-state principal-only model.
pub fn markovian_filter<T: Real>(
    model: &LinearModel<T>,
    noise: &NoiseIntensity<T>,
) -> Result<FilterSynthesis<T>> {
    if model.n() != 2 {
        return Err(Error::invalid(format!(
            "Markovian filter expects the 2-state principal model, got {} states",
            model.n()
        )));
    }
    kalman_filter(model, noise)
}

/// `E = [I_2 0]`, selecting the principal quadratures out of `width` states.
pub fn principal_selector<T: Real>(width: usize) -> DMatrix<T> {
    DMatrix::from_fn(2, width, |i, j| if i == j { T::one() } else { T::zero() })
}

/// LQ regulator for the cost `x_s^T Q1 x_s + Q2 u^2` with `x_s = E x`.
/// Only the principal quadratures are weighted; for the 2-state model
/// `E = I`.
pub fn lqg_gain<T: Real>(
    model: &LinearModel<T>,
    params: &PhysicalParams<T>,
) -> Result<ControlSynthesis<T>> {
    model.validate()?;
    params.validate()?;
    let n = model.n();
    if n < 2 || model.inputs() != 1 {
        return Err(Error::invalid(
            "LQG gain expects a single-input model with at least 2 states",
        ));
    }
    let e = principal_selector::<T>(n);
    let q1 = DMatrix::from_iterator(2, 2, params.q1.iter().copied());
    let weight = e.transpose() * q1 * &e;
    let r = DMatrix::from_element(1, 1, params.q2);
    let problem = CareProblem::new(model.a.clone(), model.b.clone(), weight.clone(), r);
    let report = solve_care(&problem).map_err(|e| e.in_equation(CONTROL_EQUATION))?;
    let p = report.solution;
    let gain = model.b.transpose() * &p / params.q2;

    let residual = control_are_residual(model, &weight, params.q2, &p).norm();
    let tol = T::residual_tol() * (T::one() + weight.norm());
    if !(residual <= tol) {
        return Err(Error::Convergence {
            equation: CONTROL_EQUATION.into(),
            residual: residual.as_f64(),
            tolerance: tol.as_f64(),
            iterations: 0,
        });
    }
    let abscissa = spectral_abscissa(&(&model.a - &model.b * &gain))?;
    if abscissa >= T::zero() {
        return Err(Error::Unstable {
            context: "regulator dynamics A - B F".into(),
            abscissa: abscissa.as_f64(),
        });
    }
    Ok(ControlSynthesis {
        gain,
        riccati_solution: p,
    })
}

/// Interconnects the true plant with a filter/regulator pair, which may
/// have been designed on a different (smaller) model:
///
/// ```text
/// A~ = [[A,   -B F            ],     B~ = [[B'  ],
///       [K C,  Af - K Cf - Bf F]]          [K D ]]
/// ```
///
/// where `(Af, Bf, Cf)` belong to the filter's design model and `C`, `D` to
/// the plant. Fails if the interconnection is not Hurwitz.
pub fn assemble_closed_loop<T: Real>(
    plant: &LinearModel<T>,
    plant_noise: &NoiseIntensity<T>,
    filter: &FilterSynthesis<T>,
    controller: &ControlSynthesis<T>,
) -> Result<ClosedLoop<T>> {
    plant.validate()?;
    let design = &filter.model;
    design.validate()?;
    let n = plant.n();
    let nf = design.n();
    let (p, m) = (plant.outputs(), plant.inputs());
    let fits = filter.gain.shape() == (nf, p)
        && controller.gain.shape() == (m, nf)
        && design.outputs() == p
        && design.inputs() == m
        && plant_noise.m.shape() == (plant.q(), plant.q());
    if !fits {
        return Err(Error::invalid(format!(
            "closed loop: plant {n}x{m}x{p}, filter gain {:?}, regulator gain {:?}, design model {} states",
            filter.gain.shape(),
            controller.gain.shape(),
            nf
        )));
    }
    let k = &filter.gain;
    let f = &controller.gain;
    let mut a_tilde = DMatrix::zeros(n + nf, n + nf);
    a_tilde.view_mut((0, 0), (n, n)).copy_from(&plant.a);
    a_tilde
        .view_mut((0, n), (n, nf))
        .copy_from(&(-(&plant.b * f)));
    a_tilde.view_mut((n, 0), (nf, n)).copy_from(&(k * &plant.c));
    a_tilde
        .view_mut((n, n), (nf, nf))
        .copy_from(&(&design.a - k * &design.c - &design.b * f));

    let q = plant.q();
    let mut b_tilde = DMatrix::zeros(n + nf, q);
    b_tilde.view_mut((0, 0), (n, q)).copy_from(&plant.b_prime);
    b_tilde.view_mut((n, 0), (nf, q)).copy_from(&(k * &plant.d));

    let abscissa = spectral_abscissa(&a_tilde)?;
    if abscissa >= T::zero() {
        return Err(Error::Unstable {
            context: "closed-loop system".into(),
            abscissa: abscissa.as_f64(),
        });
    }
    Ok(ClosedLoop {
        a_tilde,
        b_tilde,
        e_tilde: principal_selector(n + nf),
        m: plant_noise.m.clone(),
        plant_states: n,
        filter_states: nf,
    })
}

/// `eig(A - B F) ∪ eig(A - K C)`, the closed-loop spectrum predicted by the
/// separation principle when filter and regulator share the plant model.
pub fn separated_spectrum<T: Real>(
    model: &LinearModel<T>,
    filter: &FilterSynthesis<T>,
    controller: &ControlSynthesis<T>,
) -> Result<Vec<Complex<T>>> {
    let mut eigs = solvers::eigenvalues(&(&model.a - &model.b * &controller.gain))?;
    eigs.extend(solvers::eigenvalues(&(&model.a - &filter.gain * &model.c))?);
    Ok(eigs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_augmented_model, build_markovian_model, noise_intensity};
    use crate::solvers::{eigenvalues, newton_kleinman, spectra_match};

    fn reference() -> PhysicalParams<f64> {
        PhysicalParams::reference()
    }

    fn whitening_at(
        p: &PhysicalParams<f64>,
    ) -> (LinearModel<f64>, NoiseIntensity<f64>, FilterSynthesis<f64>) {
        let model = build_augmented_model(p).unwrap();
        let noise = noise_intensity(&model, p.thermal_n).unwrap();
        let filter = whitening_filter(&model, &noise).unwrap();
        (model, noise, filter)
    }

    #[test]
    fn whitening_filter_at_reference_point() {
        let (model, noise, filter) = whitening_at(&reference());
        let residual = filter_are_residual(&model, &noise, &filter.error_cov).unwrap();
        assert!(residual.norm() <= 1e-9);
        assert!(spectral_abscissa(&(&model.a - &filter.gain * &model.c)).unwrap() < 0.0);
        let consistency =
            &filter.gain * &noise.v2 - &filter.error_cov * model.c.transpose() - &noise.v12;
        assert!(consistency.amax() <= 1e-12);
        assert!(filter.error_cov.symmetric_eigenvalues().min() >= -1e-12);
    }

    #[test]
    fn uncoupled_filter_reduces_to_probe_only_problem() {
        let p = PhysicalParams {
            kappa: 0.0,
            ..reference()
        };
        let (_, _, filter) = whitening_at(&p);
        // Independent 2-state problem: principal block of A, probe channel only.
        let a2 = DMatrix::from_row_slice(2, 2, &[-0.5, 10.0, -10.0, -0.5]);
        let c2 = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let problem = CareProblem::new(
            a2.transpose(),
            c2.transpose(),
            DMatrix::identity(2, 2),
            DMatrix::from_element(1, 1, 1.0),
        )
        .with_cross(DMatrix::from_row_slice(2, 1, &[-1.0, 0.0]));
        let small = solve_care(&problem).unwrap().solution;
        let block = filter.error_cov.view((0, 0), (2, 2));
        assert!((block - &small).amax() < 1e-9);
        assert!(filter.error_cov.view((0, 2), (2, 2)).amax() < 1e-9);
    }

    #[test]
    fn markovian_filter_properties() {
        let model = build_markovian_model(&reference()).unwrap();
        let noise = noise_intensity(&model, 0.0).unwrap();
        let filter = markovian_filter(&model, &noise).unwrap();
        assert!(
            filter_are_residual(&model, &noise, &filter.error_cov)
                .unwrap()
                .norm()
                <= 1e-9
        );
        assert!(spectral_abscissa(&(&model.a - &filter.gain * &model.c)).unwrap() < 0.0);

        let hot = markovian_filter(&model, &noise_intensity(&model, 4.0).unwrap()).unwrap();
        assert_eq!(hot.gain, filter.gain);

        let still = build_markovian_model(&PhysicalParams {
            omega_p: 0.0,
            ..reference()
        })
        .unwrap();
        let f = markovian_filter(&still, &noise_intensity(&still, 0.0).unwrap()).unwrap();
        assert!(f.error_cov[(0, 1)].abs() < 1e-9);
        assert!(f.error_cov[(1, 0)].abs() < 1e-9);
    }

    #[test]
    fn filter_shape_checks() {
        let aug = build_augmented_model(&reference()).unwrap();
        let mk = build_markovian_model(&reference()).unwrap();
        let aug_noise = noise_intensity(&aug, 0.0).unwrap();
        assert!(markovian_filter(&aug, &aug_noise).is_err());
        assert!(whitening_filter(&mk, &noise_intensity(&mk, 0.0).unwrap()).is_err());
        assert!(matches!(
            kalman_filter(&mk, &aug_noise),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn lqg_gain_at_reference_point() {
        let p = reference();
        let model = build_augmented_model(&p).unwrap();
        let ctrl = lqg_gain(&model, &p).unwrap();
        assert_eq!(ctrl.gain.shape(), (1, 4));
        assert!(spectral_abscissa(&(&model.a - &model.b * &ctrl.gain)).unwrap() < 0.0);
        let e = principal_selector::<f64>(4);
        let weight = e.transpose() * DMatrix::from_diagonal_element(2, 2, 0.5) * &e;
        assert!(control_are_residual(&model, &weight, 0.05, &ctrl.riccati_solution).norm() <= 1e-9);
        let consistency = &ctrl.gain * 0.05 - model.b.transpose() * &ctrl.riccati_solution;
        assert!(consistency.amax() <= 1e-12);

        // Newton-Kleinman from the zero gain (A is Hurwitz).
        let problem = CareProblem::new(
            model.a.clone(),
            model.b.clone(),
            weight,
            DMatrix::from_element(1, 1, 0.05),
        );
        let nk = newton_kleinman(&problem, &DMatrix::zeros(1, 4), 100).unwrap();
        assert!((nk.solution - &ctrl.riccati_solution).amax() < 1e-8);
    }

    #[test]
    fn lqg_gain_on_markovian_model() {
        let p = reference();
        let model = build_markovian_model(&p).unwrap();
        let ctrl = lqg_gain(&model, &p).unwrap();
        assert_eq!(ctrl.gain.shape(), (1, 2));
        assert!(spectral_abscissa(&(&model.a - &model.b * &ctrl.gain)).unwrap() < 0.0);
        let weight = DMatrix::from_diagonal_element(2, 2, 0.5);
        assert!(control_are_residual(&model, &weight, 0.05, &ctrl.riccati_solution).norm() <= 1e-9);
    }

    #[test]
    fn whitening_closed_loop_obeys_separation() {
        let p = reference();
        let (model, noise, filter) = whitening_at(&p);
        let ctrl = lqg_gain(&model, &p).unwrap();
        let cl = assemble_closed_loop(&model, &noise, &filter, &ctrl).unwrap();
        assert_eq!(cl.a_tilde.shape(), (8, 8));
        assert_eq!(cl.b_tilde.shape(), (8, 6));
        assert_eq!(cl.e_tilde, principal_selector::<f64>(8));
        let actual = eigenvalues(&cl.a_tilde).unwrap();
        let predicted = separated_spectrum(&model, &filter, &ctrl).unwrap();
        assert!(spectra_match(&actual, &predicted, 1e-8));
    }

    #[test]
    fn markovian_closed_loop_shapes() {
        let p = reference();
        let plant = build_augmented_model(&p).unwrap();
        let noise = noise_intensity(&plant, 0.0).unwrap();
        let design = build_markovian_model(&p).unwrap();
        let filter = markovian_filter(&design, &noise_intensity(&design, 0.0).unwrap()).unwrap();
        let ctrl = lqg_gain(&design, &p).unwrap();
        let cl = assemble_closed_loop(&plant, &noise, &filter, &ctrl).unwrap();
        assert_eq!(cl.a_tilde.shape(), (6, 6));
        assert_eq!(cl.b_tilde.shape(), (6, 6));
        assert_eq!(cl.b_tilde.view((0, 0), (4, 6)), plant.b_prime);
        assert_eq!(cl.b_tilde.view((4, 0), (2, 6)), &filter.gain * &plant.d);
        assert_eq!(cl.a_tilde.view((4, 0), (2, 4)), &filter.gain * &plant.c);
        assert_eq!((cl.plant_states, cl.filter_states), (4, 2));
    }

    #[test]
    fn open_loop_is_block_diagonal() {
        let p = reference();
        let (model, noise, filter) = whitening_at(&p);
        let zero_filter = FilterSynthesis {
            gain: DMatrix::zeros(4, 1),
            ..filter
        };
        let zero_ctrl = ControlSynthesis {
            gain: DMatrix::zeros(1, 4),
            riccati_solution: DMatrix::zeros(4, 4),
        };
        let cl = assemble_closed_loop(&model, &noise, &zero_filter, &zero_ctrl).unwrap();
        assert_eq!(cl.a_tilde.view((0, 0), (4, 4)), model.a);
        assert_eq!(cl.a_tilde.view((4, 4), (4, 4)), model.a);
        assert!(cl.a_tilde.view((0, 4), (4, 4)).iter().all(|v| *v == 0.0));
        assert!(cl.a_tilde.view((4, 0), (4, 4)).iter().all(|v| *v == 0.0));
        let a = spectral_abscissa(&model.a).unwrap();
        assert!((spectral_abscissa(&cl.a_tilde).unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn mismatched_gains_rejected() {
        let p = reference();
        let (model, noise, filter) = whitening_at(&p);
        let design = build_markovian_model(&p).unwrap();
        let small_ctrl = lqg_gain(&design, &p).unwrap();
        assert!(matches!(
            assemble_closed_loop(&model, &noise, &filter, &small_ctrl),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn unstable_interconnection_reported() {
        let p = reference();
        let (model, noise, filter) = whitening_at(&p);
        let ctrl = ControlSynthesis {
            gain: DMatrix::from_row_slice(1, 4, &[0.0, -50.0, 0.0, 0.0]),
            riccati_solution: DMatrix::zeros(4, 4),
        };
        assert!(matches!(
            assemble_closed_loop(&model, &noise, &filter, &ctrl),
            Err(Error::Unstable { .. })
        ));
    }
}
