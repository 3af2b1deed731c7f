use nalgebra::DMatrix;

use super::structure::{is_stabilizable, unobservable_modes, RANK_TOL};
use super::{solve_lyapunov, spectral_abscissa, symmetrize};
use crate::error::{Error, Result};
use crate::scalar::Real;

const EQUATION: &str = "algebraic Riccati equation";
const SIGN_MAX_ITER: usize = 100;
const NEWTON_MAX_ITER: usize = 50;

/// Continuous-time algebraic Riccati equation
///
/// ```text
/// A^T P + P A - (P B + S) R^-1 (B^T P + S^T) + Q = 0
/// ```
///
/// with the optimal gain `R^-1 (B^T P + S^T)`. The Kalman filter equation
/// with correlated noise is the same problem on transposed data:
/// `(A^T, C^T, V1, V2, V12)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CareProblem<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub q: DMatrix<T>,
    pub r: DMatrix<T>,
    pub s: DMatrix<T>,
}

/// Stabilizing solution together with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<T: Real> {
    pub solution: DMatrix<T>,
    /// Frobenius norm of the Riccati residual at `solution`.
    pub residual_norm: T,
    /// Spectral abscissa of `A - B R^-1 (B^T P + S^T)`.
    pub closed_loop_abscissa: T,
}

/// Data after eliminating the cross term:
/// `A - B R^-1 S^T`, `Q - S R^-1 S^T`, `B R^-1 B^T`.
struct Reduced<T: Real> {
    a: DMatrix<T>,
    q: DMatrix<T>,
    g: DMatrix<T>,
}

impl<T: Real> CareProblem<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, q: DMatrix<T>, r: DMatrix<T>) -> Self {
        let s = DMatrix::zeros(a.nrows(), b.ncols());
        Self { a, b, q, r, s }
    }

    pub fn with_cross(mut self, s: DMatrix<T>) -> Self {
        self.s = s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        let m = self.b.ncols();
        let shapes = [
            ("A", self.a.shape(), (n, n)),
            ("B", self.b.shape(), (n, m)),
            ("Q", self.q.shape(), (n, n)),
            ("R", self.r.shape(), (m, m)),
            ("S", self.s.shape(), (n, m)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::invalid(format!(
                    "Riccati data: {name} is {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                )));
            }
        }
        let all = [&self.a, &self.b, &self.q, &self.r, &self.s];
        if all.iter().any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid("Riccati data must be finite"));
        }
        if !super::is_symmetric(&self.q) {
            return Err(Error::invalid("Riccati state weight Q must be symmetric"));
        }
        if !super::is_symmetric(&self.r) || self.r.clone().cholesky().is_none() {
            return Err(Error::invalid(
                "Riccati input weight R must be symmetric positive definite",
            ));
        }
        let joint = self.joint_weight();
        let floor = -T::default_epsilon().sqrt() * (T::one() + joint.norm());
        if symmetrize(&joint).symmetric_eigenvalues().min() < floor {
            return Err(Error::invalid(
                "Riccati weight [[Q, S], [S^T, R]] is not positive semidefinite",
            ));
        }
        Ok(())
    }

    fn joint_weight(&self) -> DMatrix<T> {
        let n = self.a.nrows();
        let m = self.b.ncols();
        let mut w = DMatrix::zeros(n + m, n + m);
        w.view_mut((0, 0), (n, n)).copy_from(&self.q);
        w.view_mut((0, n), (n, m)).copy_from(&self.s);
        w.view_mut((n, 0), (m, n)).copy_from(&self.s.transpose());
        w.view_mut((n, n), (m, m)).copy_from(&self.r);
        w
    }

    fn r_inv(&self) -> Result<DMatrix<T>> {
        self.r
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::invalid("Riccati input weight R must be positive definite"))
    }

    fn reduced(&self) -> Result<Reduced<T>> {
        let r_inv = self.r_inv()?;
        let s_r_inv = &self.s * &r_inv;
        Ok(Reduced {
            a: &self.a - &self.b * s_r_inv.transpose(),
            q: symmetrize(&(&self.q - &s_r_inv * self.s.transpose())),
            g: symmetrize(&(&self.b * &r_inv * self.b.transpose())),
        })
    }

    /// `R^-1 (B^T P + S^T)`.
    pub fn gain(&self, p: &DMatrix<T>) -> Result<DMatrix<T>> {
        Ok(self.r_inv()? * (self.b.transpose() * p + self.s.transpose()))
    }

    fn closed_loop(&self, p: &DMatrix<T>) -> Result<DMatrix<T>> {
        Ok(&self.a - &self.b * self.gain(p)?)
    }

    fn tolerance(&self) -> T {
        T::residual_tol() * (T::one() + self.q.norm())
    }

    fn report(&self, p: DMatrix<T>) -> Result<SolveReport<T>> {
        let residual_norm = care_residual(self, &p)?.norm();
        let closed_loop_abscissa = spectral_abscissa(&self.closed_loop(&p)?)?;
        Ok(SolveReport {
            solution: p,
            residual_norm,
            closed_loop_abscissa,
        })
    }
}

/// `P A + A^T P - (P B + S) R^-1 (B^T P + S^T) + Q` at `p`.
pub fn care_residual<T: Real>(problem: &CareProblem<T>, p: &DMatrix<T>) -> Result<DMatrix<T>> {
    let gain = problem.gain(p)?;
    let pb_s = p * &problem.b + &problem.s;
    Ok(p * &problem.a + problem.a.transpose() * p - pb_s * gain + &problem.q)
}

/// Stabilizing solution of the CARE.
///
/// The stable invariant subspace of the Hamiltonian
/// `[[A, -G], [-Q, -A^T]]` (cross term eliminated) is extracted with the
/// scaled matrix sign function, and the result is polished with
/// Newton-Kleinman steps until the residual is below tolerance.
pub fn solve_care<T: Real>(problem: &CareProblem<T>) -> Result<SolveReport<T>> {
    problem.validate()?;
    let n = problem.a.nrows();
    if !is_stabilizable(&problem.a, &problem.b)? {
        return Err(Error::Infeasible {
            equation: EQUATION.into(),
            condition: "(A, B) is not stabilizable".into(),
        });
    }
    let reduced = problem.reduced()?;
    // A stabilizing solution needs every mode the cost cannot see to stay
    // off the imaginary axis; unstable unobserved modes are allowed.
    let axis_tol = T::lit(RANK_TOL) * (T::one() + reduced.a.norm());
    if let Some(z) = unobservable_modes(&reduced.a, &reduced.q)?
        .into_iter()
        .find(|z| z.re.abs() <= axis_tol)
    {
        return Err(Error::Infeasible {
            equation: EQUATION.into(),
            condition: format!(
                "(Q - S R^-1 S^T, A - B R^-1 S^T) has an unobservable mode {} {:+}i within {} of the imaginary axis",
                z.re, z.im, axis_tol
            ),
        });
    }

    let negligible = T::default_epsilon() * T::lit(16.0) * (T::one() + problem.q.amax());
    if reduced.q.amax() <= negligible && spectral_abscissa(&reduced.a)? < T::zero() {
        return problem.report(DMatrix::zeros(n, n));
    }

    let p0 = sign_function_solution(&reduced)?;
    let tol = problem.tolerance();
    let mut best = problem.report(p0)?;
    for _ in 0..NEWTON_MAX_ITER {
        if best.residual_norm <= tol * T::lit(1e-3) || best.closed_loop_abscissa >= T::zero() {
            break;
        }
        let next = match newton_step(problem, &best.solution) {
            Ok(p) => problem.report(p)?,
            Err(_) => break,
        };
        if next.residual_norm >= best.residual_norm {
            break;
        }
        best = next;
    }
    finish(best, tol, NEWTON_MAX_ITER)
}

fn finish<T: Real>(report: SolveReport<T>, tol: T, iterations: usize) -> Result<SolveReport<T>> {
    if report.closed_loop_abscissa >= T::zero() {
        return Err(Error::Infeasible {
            equation: EQUATION.into(),
            condition: format!(
                "no stabilizing solution (closed-loop spectral abscissa {:e})",
                report.closed_loop_abscissa.as_f64()
            ),
        });
    }
    if !(report.residual_norm <= tol) {
        return Err(Error::Convergence {
            equation: EQUATION.into(),
            residual: report.residual_norm.as_f64(),
            tolerance: tol.as_f64(),
            iterations,
        });
    }
    Ok(report)
}

fn hamiltonian<T: Real>(r: &Reduced<T>) -> DMatrix<T> {
    let n = r.a.nrows();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&r.a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&r.g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-&r.q));
    h.view_mut((n, n), (n, n)).copy_from(&(-r.a.transpose()));
    h
}

fn imaginary_axis() -> Error {
    Error::Infeasible {
        equation: EQUATION.into(),
        condition: "Hamiltonian matrix has eigenvalues on the imaginary axis".into(),
    }
}

/// `W = sign(H)`; the stable subspace `[I; P]` is the kernel of `W + I`,
/// so `P` solves `[W12; W22 + I] P = -[W11 + I; W21]`.
fn sign_function_solution<T: Real>(r: &Reduced<T>) -> Result<DMatrix<T>> {
    let n = r.a.nrows();
    let dim = 2 * n;
    let half = T::lit(0.5);
    let stop = T::lit(10.0 * dim as f64) * T::default_epsilon();
    let mut z = hamiltonian(r);
    let mut scaled = true;
    let mut last_delta = T::max_value().unwrap_or_else(T::one);
    for _ in 0..SIGN_MAX_ITER {
        let lu = z.clone().lu();
        let diag = lu.u().diagonal();
        if diag.iter().any(|d| *d == T::zero() || !d.is_finite()) {
            return Err(imaginary_axis());
        }
        let inv = lu.try_inverse().ok_or_else(imaginary_axis)?;
        let c = if scaled {
            let mean_log = diag
                .iter()
                .map(|d| d.abs().ln())
                .fold(T::zero(), |a, b| a + b)
                / T::lit(dim as f64);
            (-mean_log).exp()
        } else {
            T::one()
        };
        let next = (&z * c + inv / c) * half;
        let delta = (&next - &z).norm() / next.norm();
        z = next;
        if delta < T::lit(1e-2) {
            scaled = false;
        }
        if delta <= stop || (!scaled && delta >= last_delta && delta < T::default_epsilon().sqrt())
        {
            break;
        }
        last_delta = delta;
    }
    let involution = (&z * &z - DMatrix::identity(dim, dim)).norm();
    if !(involution <= T::default_epsilon().sqrt() * T::lit(dim as f64)) {
        return Err(imaginary_axis());
    }

    let eye = DMatrix::<T>::identity(n, n);
    let mut lhs = DMatrix::zeros(dim, n);
    lhs.view_mut((0, 0), (n, n))
        .copy_from(&z.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(z.view((n, n), (n, n)) + &eye));
    let mut rhs = DMatrix::zeros(dim, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(z.view((0, 0), (n, n)) + &eye)));
    rhs.view_mut((n, 0), (n, n))
        .copy_from(&(-z.view((n, 0), (n, n))));
    let p = lhs
        .svd(true, true)
        .solve(&rhs, T::default_epsilon())
        .map_err(|e| Error::Numerical(format!("stable subspace extraction: {e}")))?;
    Ok(symmetrize(&p))
}

/// One Newton-Kleinman update from `p`: with `K = R^-1 (B^T P + S^T)` and
/// `A_K = A - B K`, solve `A_K^T X + X A_K + Q + K^T R K - S K - K^T S^T = 0`.
fn newton_step<T: Real>(problem: &CareProblem<T>, p: &DMatrix<T>) -> Result<DMatrix<T>> {
    let k = problem.gain(p)?;
    newton_update(problem, &k)
}

fn newton_update<T: Real>(problem: &CareProblem<T>, k: &DMatrix<T>) -> Result<DMatrix<T>> {
    let a_k = &problem.a - &problem.b * k;
    let sk = &problem.s * k;
    let rhs = &problem.q + k.transpose() * &problem.r * k - &sk - sk.transpose();
    let x = solve_lyapunov(&a_k.transpose(), &symmetrize(&rhs))?;
    Ok(symmetrize(&x))
}

/// Newton-Kleinman iteration from a stabilizing initial gain (`m x n`).
/// Each step is one Lyapunov solve; converges quadratically to the
/// stabilizing solution. Independent of the Hamiltonian route in
/// [`solve_care`], which makes it usable as a cross-check.
pub fn newton_kleinman<T: Real>(
    problem: &CareProblem<T>,
    initial_gain: &DMatrix<T>,
    max_iter: usize,
) -> Result<SolveReport<T>> {
    problem.validate()?;
    let (n, m) = (problem.a.nrows(), problem.b.ncols());
    if initial_gain.shape() != (m, n) {
        return Err(Error::invalid(format!(
            "initial gain is {}x{}, expected {m}x{n}",
            initial_gain.nrows(),
            initial_gain.ncols()
        )));
    }
    let start = spectral_abscissa(&(&problem.a - &problem.b * initial_gain))?;
    if start >= T::zero() {
        return Err(Error::Infeasible {
            equation: EQUATION.into(),
            condition: "initial gain is not stabilizing".into(),
        });
    }
    let tol = problem.tolerance();
    let mut p = newton_update(problem, initial_gain)?;
    let mut iterations = 1;
    while iterations < max_iter {
        if care_residual(problem, &p)?.norm() <= tol * T::lit(1e-3) {
            break;
        }
        let next = newton_step(problem, &p)?;
        let change = (&next - &p).norm();
        p = next;
        iterations += 1;
        if change <= T::default_epsilon() * T::lit(10.0) * (T::one() + p.norm()) {
            break;
        }
    }
    finish(problem.report(p)?, tol, iterations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn scalar(a: f64, b: f64, q: f64, r: f64) -> CareProblem<f64> {
        CareProblem::new(dmatrix![a], dmatrix![b], dmatrix![q], dmatrix![r])
    }

    #[test]
    fn scalar_integrator() {
        let rep = solve_care(&scalar(0.0, 1.0, 1.0, 1.0)).unwrap();
        assert!((rep.solution[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((rep.closed_loop_abscissa + 1.0).abs() < 1e-12);
        assert!(rep.residual_norm < 1e-12);
    }

    #[test]
    fn zero_weight_on_stable_plant() {
        let rep = solve_care(&scalar(-1.0, 1.0, 0.0, 1.0)).unwrap();
        assert_eq!(rep.solution[(0, 0)], 0.0);
        assert_eq!(rep.closed_loop_abscissa, -1.0);
    }

    #[test]
    fn scalar_closed_form() {
        // p^2 b^2 / r - 2 a p - q = 0, stabilizing root
        for (a, b, q, r) in [
            (1.0, 1.0, 1.0, 1.0),
            (-2.0, 0.5, 3.0, 0.1),
            (0.3, 2.0, 0.2, 5.0),
        ] {
            let rep = solve_care(&scalar(a, b, q, r)).unwrap();
            let want = r * (a + (a * a + b * b * q / r).sqrt()) / (b * b);
            assert!((rep.solution[(0, 0)] - want).abs() < 1e-10 * (1.0 + want));
        }
    }

    #[test]
    fn expensive_control_switches_off() {
        let mut last = f64::INFINITY;
        for r in [1.0, 1e2, 1e4, 1e6] {
            let problem = scalar(-1.0, 1.0, 1.0, r);
            let rep = solve_care(&problem).unwrap();
            let gain = problem.gain(&rep.solution).unwrap()[(0, 0)];
            assert!(gain < last);
            last = gain;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn cross_term_matches_shifted_problem() {
        let a = dmatrix![0.2, 1.0; -1.0, -0.3];
        let b = dmatrix![0.0; 1.0];
        let q = dmatrix![2.0, 0.1; 0.1, 1.0];
        let r = dmatrix![0.5];
        let s = dmatrix![0.3; -0.2];
        let with_cross =
            CareProblem::new(a.clone(), b.clone(), q.clone(), r.clone()).with_cross(s.clone());
        let rep = solve_care(&with_cross).unwrap();
        let shifted = CareProblem::new(
            &a - &b * (&s * 2.0).transpose(),
            b.clone(),
            &q - &s * s.transpose() * 2.0,
            r,
        );
        let rep2 = solve_care(&shifted).unwrap();
        assert!((rep.solution - rep2.solution).amax() < 1e-10);
    }

    #[test]
    fn newton_kleinman_agrees_with_sign_route() {
        let a = dmatrix![-0.5, 10.0; -10.0, -0.5];
        let b = dmatrix![0.0; 1.0];
        let problem = CareProblem::new(a, b, dmatrix![0.5, 0.0; 0.0, 0.5], dmatrix![0.05]);
        let rep = solve_care(&problem).unwrap();
        let nk = newton_kleinman(&problem, &DMatrix::zeros(1, 2), 50).unwrap();
        assert!((rep.solution - nk.solution).amax() < 1e-10);
        assert!(matches!(
            newton_kleinman(&scalar(1.0, 1.0, 1.0, 1.0), &dmatrix![0.0], 10),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn infeasible_and_invalid() {
        let a = dmatrix![1.0, 0.0; 0.0, -1.0];
        let b = dmatrix![0.0; 1.0];
        let p = CareProblem::new(a, b, DMatrix::identity(2, 2), dmatrix![1.0]);
        assert!(
            matches!(solve_care(&p), Err(Error::Infeasible { condition, .. }) if condition.contains("stabilizable"))
        );
        // Marginal mode invisible to the cost.
        let p = CareProblem::new(
            dmatrix![0.0, 0.0; 0.0, -1.0],
            DMatrix::identity(2, 2),
            dmatrix![0.0, 0.0; 0.0, 1.0],
            DMatrix::identity(2, 2),
        );
        assert!(
            matches!(solve_care(&p), Err(Error::Infeasible { condition, .. }) if condition.contains("imaginary axis"))
        );
        assert!(matches!(
            solve_care(&scalar(1.0, 1.0, 1.0, 0.0)),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            solve_care(&scalar(1.0, 1.0, 1.0, -1.0)),
            Err(Error::InvalidInput(_))
        ));
        let bad_joint = scalar(-1.0, 1.0, 1.0, 1.0).with_cross(dmatrix![2.0]);
        assert!(matches!(
            solve_care(&bad_joint),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn unstable_mode_hidden_from_cost_is_still_stabilized() {
        // p = 2 a r / b^2 for q = 0, a > 0.
        let rep = solve_care(&scalar(0.5, 1.0, 0.0, 1.0)).unwrap();
        assert!((rep.solution[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((rep.closed_loop_abscissa + 0.5).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_state_weight() {
        let a = dmatrix![0.1, 2.0; -2.0, -0.4];
        let b = dmatrix![0.0; 1.0];
        let mut prev: Option<DMatrix<f64>> = None;
        for scale in [0.1, 0.5, 1.0, 4.0] {
            let q = dmatrix![1.0, 0.0; 0.0, 0.5] * scale;
            let p = solve_care(&CareProblem::new(a.clone(), b.clone(), q, dmatrix![1.0]))
                .unwrap()
                .solution;
            if let Some(prev) = prev {
                assert!((&p - prev).symmetric_eigenvalues().min() >= -1e-10);
            }
            prev = Some(p);
        }
    }

    #[test]
    fn single_precision() {
        let p = CareProblem::<f32>::new(dmatrix![0.0], dmatrix![1.0], dmatrix![1.0], dmatrix![1.0]);
        let rep = solve_care(&p).unwrap();
        assert!((rep.solution[(0, 0)] - 1.0).abs() < 1e-5);
    }
}
