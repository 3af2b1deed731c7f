mod common;

use nalgebra::DMatrix;
use nonmarkov_lqg::synthesis::{control_are_residual, principal_selector};
use nonmarkov_lqg::*;

#[test]
fn augmented_drift_abscissa() {
    let model = build_augmented_model(&Params::reference()).unwrap();
    let abscissa = spectral_abscissa(&model.a).unwrap();
    assert!((abscissa + 0.5).abs() < 1e-12, "{abscissa}");
    for p in common::random_params(3, 10) {
        let model = build_augmented_model(&p).unwrap();
        // The symmetric part is diagonal, so every real part lies between
        // the two damping rates.
        let a = spectral_abscissa(&model.a).unwrap();
        assert!(a <= -p.gamma_0.min(p.gamma_1) / 2.0 + 1e-12);
        assert!(a >= -p.gamma_0.max(p.gamma_1) / 2.0 - 1e-12);
    }
}

#[test]
fn control_care_matches_newton_kleinman() {
    let p = Params::reference();
    let model = build_augmented_model(&p).unwrap();
    let e = principal_selector::<f64>(4);
    let weight = e.transpose() * DMatrix::from_diagonal_element(2, 2, 0.5) * &e;
    let problem = CareProblem::new(
        model.a.clone(),
        model.b.clone(),
        weight.clone(),
        DMatrix::from_element(1, 1, 0.05),
    );
    let rep = solve_care(&problem).unwrap();
    assert!(rep.residual_norm <= 1e-9 * (1.0 + weight.norm()));
    assert!(rep.closed_loop_abscissa < 0.0);
    assert!(control_are_residual(&model, &weight, 0.05, &rep.solution).norm() <= 1e-9);
    let nk = newton_kleinman(&problem, &DMatrix::zeros(1, 4), 100).unwrap();
    assert!((nk.solution - &rep.solution).amax() <= 1e-8);
    assert!((&rep.solution - rep.solution.transpose()).amax() <= 1e-12);
}

#[test]
fn lyapunov_matches_oracle_on_every_closed_loop() {
    let mut sets = vec![Params::reference()];
    sets.extend(common::random_params(11, 8));
    for p in sets {
        let study = ThermalStudy::new(&p).unwrap();
        for n in [0.0, p.thermal_n] {
            for cl in [
                study.whitening_loop(n).unwrap(),
                study.markovian_loop(n).unwrap(),
            ] {
                let x = steady_state_covariance(&cl).unwrap();
                let oracle = lyapunov_oracle(&cl.a_tilde, &cl.noise_input()).unwrap();
                assert!((&x - &oracle).amax() <= 1e-8 * (1.0 + oracle.amax()));
            }
        }
    }
}
