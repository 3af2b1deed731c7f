//! Monte Carlo integration of a closed loop `dx = A~ x dt + B~ dW`,
//! `E[dW dW^T] = M dt`, used to cross-check the Lyapunov covariance.
//!
//! Trajectories start at the origin and run on independent ChaCha8 streams:
//! trajectory `i` uses `ChaCha8Rng::seed_from_u64(seed)` with stream `i`.
//! Per-trajectory sums are reduced in trajectory order, so results are
//! bitwise reproducible regardless of how rayon schedules the work.

use nalgebra::{DMatrix, Matrix2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::analysis::weighted_trace;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::solvers::eigenvalues;
use crate::synthesis::ClosedLoop;

/// Largest `dt * |Im lambda|` accepted over the closed-loop spectrum.
pub const MAX_PHASE_PER_STEP: f64 = 0.05;

const DIVERGENCE_BOUND: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// `x' = e^{A dt} x + chol(Q_dt) xi`, exact in distribution for any `dt`.
    Exact,
    /// `x' = x + A x dt + B sqrt(M dt) xi`. Its stationary covariance is
    /// biased by `O(|lambda|^2 dt / |Re lambda|)`.
    EulerMaruyama,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T: Real> {
    pub dt: T,
    pub horizon: T,
    pub n_traj: usize,
    /// Fraction of the horizon discarded before statistics are collected.
    pub burn_in: T,
    pub seed: u64,
    pub integrator: Integrator,
}

impl<T: Real> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(1e-3),
            horizon: T::lit(200.0),
            n_traj: 256,
            burn_in: T::lit(0.5),
            seed: 0x5eed_1a9c,
            integrator: Integrator::Exact,
        }
    }
}

impl<T: Real> SimConfig<T> {
    fn total_steps(&self) -> usize {
        (self.horizon / self.dt).round().as_f64() as usize
    }

    fn burn_steps(&self) -> usize {
        (self.burn_in * T::lit(self.total_steps() as f64))
            .floor()
            .as_f64() as usize
    }

    pub fn validate(&self, cl: &ClosedLoop<T>) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.horizon > T::zero()) || !self.horizon.is_finite() {
            return Err(Error::invalid(format!(
                "horizon must be > 0, got {}",
                self.horizon
            )));
        }
        if !(self.burn_in >= T::zero() && self.burn_in < T::one()) {
            return Err(Error::invalid(format!(
                "burn_in must lie in [0, 1), got {}",
                self.burn_in
            )));
        }
        if self.n_traj == 0 {
            return Err(Error::invalid("n_traj must be >= 1"));
        }
        if self.total_steps() <= self.burn_steps() {
            return Err(Error::invalid("no samples left after burn-in"));
        }
        let max_imag = eigenvalues(&cl.a_tilde)?
            .iter()
            .map(|z| z.im.abs())
            .fold(T::zero(), |a, b| if b > a { b } else { a });
        if self.dt * max_imag > T::lit(MAX_PHASE_PER_STEP) {
            return Err(Error::invalid(format!(
                "dt = {} does not resolve the fastest rotation: dt * |Im lambda| = {} > {}",
                self.dt,
                self.dt * max_imag,
                MAX_PHASE_PER_STEP
            )));
        }
        Ok(())
    }
}

/// Pooled post-burn-in statistics of a trajectory ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStats<T: Real> {
    pub sample_cov: DMatrix<T>,
    pub sample_mean: DMatrix<T>,
    /// Number of pooled samples (post-burn-in steps times trajectories).
    pub effective_samples: usize,
    pub config: SimConfig<T>,
    /// Covariance of each trajectory on its own, for error bars.
    pub per_trajectory_cov: Vec<DMatrix<T>>,
}

impl<T: Real> TrajectoryStats<T> {
    /// Standard error of the ensemble average of `f(cov_i)`, estimated from
    /// the spread across trajectories. `None` with fewer than two.
    pub fn standard_error(&self, f: impl Fn(&DMatrix<T>) -> T) -> Option<T> {
        let k = self.per_trajectory_cov.len();
        if k < 2 {
            return None;
        }
        let kt = T::lit(k as f64);
        let values: Vec<T> = self.per_trajectory_cov.iter().map(&f).collect();
        let mean = values.iter().fold(T::zero(), |a, b| a + *b) / kt;
        let var = values
            .iter()
            .map(|v| (*v - mean) * (*v - mean))
            .fold(T::zero(), |a, b| a + b)
            / T::lit((k - 1) as f64);
        Some((var / kt).sqrt())
    }
}

/// `(e^{A dt}, integral_0^dt e^{As} B M B^T e^{A^T s} ds)` by Van Loan's
/// block exponential.
pub fn exact_discretization<T: Real>(
    cl: &ClosedLoop<T>,
    dt: T,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let n = cl.dim();
    let noise = cl.noise_input();
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block
        .view_mut((0, 0), (n, n))
        .copy_from(&(-&cl.a_tilde * dt));
    block.view_mut((0, n), (n, n)).copy_from(&(&noise * dt));
    block
        .view_mut((n, n), (n, n))
        .copy_from(&(cl.a_tilde.transpose() * dt));
    let e = block.exp();
    let phi = e.view((n, n), (n, n)).transpose();
    if noise.iter().all(|v| *v == T::zero()) {
        return Ok((phi, DMatrix::zeros(n, n)));
    }
    let q = &phi * e.view((0, n), (n, n));
    let q = (&q + q.transpose()) * T::lit(0.5);
    if phi.iter().chain(q.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix exponential overflowed".into()));
    }
    Ok((phi, q))
}

/// Square factor `L` with `L L^T = S` for symmetric PSD `S`; negative
/// eigenvalues from roundoff are clipped to zero.
fn psd_factor<T: Real>(s: &DMatrix<T>) -> DMatrix<T> {
    let eig = s.clone().symmetric_eigen();
    let roots = eig
        .eigenvalues
        .map(|l| if l > T::zero() { l.sqrt() } else { T::zero() });
    eig.eigenvectors * DMatrix::from_diagonal(&roots)
}

struct Stepper<T> {
    n: usize,
    r: usize,
    /// Row-major `n x n`.
    drift: Vec<T>,
    /// Row-major `n x r`.
    diffusion: Vec<T>,
}

impl<T: Real> Stepper<T> {
    fn new(cl: &ClosedLoop<T>, cfg: &SimConfig<T>) -> Result<Self> {
        let n = cl.dim();
        let (drift, diffusion) = match cfg.integrator {
            Integrator::Exact => {
                let (phi, q) = exact_discretization(cl, cfg.dt)?;
                (phi, psd_factor(&q))
            }
            Integrator::EulerMaruyama => {
                let phi = DMatrix::identity(n, n) + &cl.a_tilde * cfg.dt;
                let m = (&cl.m + cl.m.transpose()) * T::lit(0.5);
                (phi, &cl.b_tilde * psd_factor(&m) * cfg.dt.sqrt())
            }
        };
        let row_major = |m: &DMatrix<T>| m.transpose().as_slice().to_vec();
        Ok(Self {
            n,
            r: diffusion.ncols(),
            drift: row_major(&drift),
            diffusion: row_major(&diffusion),
        })
    }
}

struct Sums<T> {
    first: Vec<T>,
    /// Row-major `n x n` (upper triangle filled during accumulation).
    second: Vec<T>,
    count: usize,
}

fn run_trajectory<T: Real>(stepper: &Stepper<T>, cfg: &SimConfig<T>, index: u64) -> Result<Sums<T>>
where
    StandardNormal: Distribution<T>,
{
    let n = stepper.n;
    let r = stepper.r;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let total = cfg.total_steps();
    let burn = cfg.burn_steps();

    let mut x = vec![T::zero(); n];
    let mut next = vec![T::zero(); n];
    let mut xi = vec![T::zero(); r];
    let mut first = vec![T::zero(); n];
    let mut second = vec![T::zero(); n * n];
    let bound = T::lit(DIVERGENCE_BOUND);

    for step in 0..total {
        for v in xi.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        for (i, out) in next.iter_mut().enumerate() {
            let drow = &stepper.drift[i * n..(i + 1) * n];
            let srow = &stepper.diffusion[i * r..(i + 1) * r];
            let mut acc = T::zero();
            for (a, b) in drow.iter().zip(&x) {
                acc += *a * *b;
            }
            for (a, b) in srow.iter().zip(&xi) {
                acc += *a * *b;
            }
            *out = acc;
        }
        std::mem::swap(&mut x, &mut next);
        if step % 1024 == 0 && x.iter().any(|v| !(v.abs() < bound)) {
            return Err(Error::Unstable {
                context: format!("trajectory {index} diverged at step {step}"),
                abscissa: f64::NAN,
            });
        }
        if step >= burn {
            for i in 0..n {
                first[i] += x[i];
                let xi_ = x[i];
                let row = &mut second[i * n..(i + 1) * n];
                for j in i..n {
                    row[j] += xi_ * x[j];
                }
            }
        }
    }
    if x.iter().chain(&second).any(|v| !v.is_finite()) {
        return Err(Error::Unstable {
            context: format!("trajectory {index} produced non-finite values"),
            abscissa: f64::NAN,
        });
    }
    Ok(Sums {
        first,
        second,
        count: total - burn,
    })
}

fn moments<T: Real>(first: &[T], second: &[T], count: usize) -> (DMatrix<T>, DMatrix<T>) {
    let n = first.len();
    let c = T::lit(count as f64);
    let mean = DMatrix::from_iterator(n, 1, first.iter().map(|v| *v / c));
    let cov = DMatrix::from_fn(n, n, |i, j| {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        second[i * n + j] / c - mean[i] * mean[j]
    });
    (mean, cov)
}

/// Integrates `cfg.n_traj` trajectories of the closed loop and pools their
/// post-burn-in samples.
pub fn simulate_closed_loop<T: Real>(
    cl: &ClosedLoop<T>,
    cfg: &SimConfig<T>,
) -> Result<TrajectoryStats<T>>
where
    StandardNormal: Distribution<T>,
{
    cfg.validate(cl)?;
    let stepper = Stepper::new(cl, cfg)?;
    let runs: Vec<Sums<T>> = (0..cfg.n_traj as u64)
        .into_par_iter()
        .map(|i| run_trajectory(&stepper, cfg, i))
        .collect::<Result<_>>()?;

    let n = cl.dim();
    let mut first = vec![T::zero(); n];
    let mut second = vec![T::zero(); n * n];
    let mut count = 0;
    let mut per_trajectory_cov = Vec::with_capacity(runs.len());
    for run in &runs {
        for (acc, v) in first.iter_mut().zip(&run.first) {
            *acc += *v;
        }
        for (acc, v) in second.iter_mut().zip(&run.second) {
            *acc += *v;
        }
        count += run.count;
        per_trajectory_cov.push(moments(&run.first, &run.second, run.count).1);
    }
    let (sample_mean, sample_cov) = moments(&first, &second, count);
    Ok(TrajectoryStats {
        sample_cov,
        sample_mean,
        effective_samples: count,
        config: cfg.clone(),
        per_trajectory_cov,
    })
}

/// Monte Carlo estimate `tr(S E~^T Q1 E~)` of the photon-number cost.
pub fn empirical_objective<T: Real>(
    stats: &TrajectoryStats<T>,
    e_tilde: &DMatrix<T>,
    q1: &Matrix2<T>,
) -> Result<T> {
    let dim = stats.sample_cov.nrows();
    if e_tilde.shape() != (2, dim) {
        return Err(Error::invalid(format!(
            "selector is {}x{}, expected 2x{dim}",
            e_tilde.nrows(),
            e_tilde.ncols()
        )));
    }
    Ok(weighted_trace(&stats.sample_cov, e_tilde, q1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn ou(a: f64, m: f64) -> ClosedLoop<f64> {
        ClosedLoop {
            a_tilde: dmatrix![a],
            b_tilde: dmatrix![1.0],
            e_tilde: dmatrix![1.0; 0.0],
            m: dmatrix![m],
            plant_states: 1,
            filter_states: 0,
        }
    }

    fn cfg(integrator: Integrator) -> SimConfig<f64> {
        SimConfig {
            dt: 1e-3,
            horizon: 200.0,
            n_traj: 64,
            burn_in: 0.5,
            seed: 7,
            integrator,
        }
    }

    #[test]
    fn ornstein_uhlenbeck_stationary_variance() {
        for integrator in [Integrator::EulerMaruyama, Integrator::Exact] {
            let stats = simulate_closed_loop(&ou(-1.0, 1.0), &cfg(integrator)).unwrap();
            let var = stats.sample_cov[(0, 0)];
            assert!((var - 0.5).abs() <= 0.05 * 0.5, "{integrator:?}: {var}");
            assert_eq!(stats.effective_samples, 64 * 100_000);
        }
    }

    #[test]
    fn zero_noise_gives_zero_covariance() {
        for integrator in [Integrator::EulerMaruyama, Integrator::Exact] {
            let c = SimConfig {
                horizon: 5.0,
                n_traj: 4,
                ..cfg(integrator)
            };
            let stats = simulate_closed_loop(&ou(-1.0, 0.0), &c).unwrap();
            assert_eq!(stats.sample_cov[(0, 0)], 0.0);
            assert_eq!(stats.sample_mean[(0, 0)], 0.0);
        }
    }

    #[test]
    fn exact_discretization_of_scalar() {
        let (phi, q) = exact_discretization(&ou(-1.0, 1.0), 0.1).unwrap();
        assert!((phi[(0, 0)] - (-0.1f64).exp()).abs() < 1e-14);
        // (1 - e^{-2 dt}) / 2
        assert!((q[(0, 0)] - (1.0 - (-0.2f64).exp()) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn config_validation() {
        let cl = ou(-1.0, 1.0);
        assert!(SimConfig {
            dt: 0.0,
            ..cfg(Integrator::Exact)
        }
        .validate(&cl)
        .is_err());
        assert!(SimConfig {
            burn_in: 1.0,
            ..cfg(Integrator::Exact)
        }
        .validate(&cl)
        .is_err());
        assert!(SimConfig {
            n_traj: 0,
            ..cfg(Integrator::Exact)
        }
        .validate(&cl)
        .is_err());
        let rotating = ClosedLoop {
            a_tilde: dmatrix![-0.5, 10.0; -10.0, -0.5],
            b_tilde: DMatrix::identity(2, 2),
            e_tilde: DMatrix::identity(2, 2),
            m: DMatrix::identity(2, 2),
            plant_states: 2,
            filter_states: 0,
        };
        assert!(SimConfig {
            dt: 0.01,
            ..cfg(Integrator::Exact)
        }
        .validate(&rotating)
        .is_err());
        assert!(SimConfig {
            dt: 0.004,
            ..cfg(Integrator::Exact)
        }
        .validate(&rotating)
        .is_ok());
    }

    #[test]
    fn deterministic_across_runs() {
        let c = SimConfig {
            horizon: 10.0,
            n_traj: 16,
            ..cfg(Integrator::Exact)
        };
        let a = simulate_closed_loop(&ou(-1.0, 1.0), &c).unwrap();
        let b = simulate_closed_loop(&ou(-1.0, 1.0), &c).unwrap();
        assert_eq!(
            a.sample_cov[(0, 0)].to_bits(),
            b.sample_cov[(0, 0)].to_bits()
        );
        let other = simulate_closed_loop(&ou(-1.0, 1.0), &SimConfig { seed: 8, ..c }).unwrap();
        assert_ne!(a.sample_cov[(0, 0)], other.sample_cov[(0, 0)]);
    }

    #[test]
    fn empirical_objective_arithmetic() {
        let mut stats = simulate_closed_loop(
            &ou(-1.0, 0.0),
            &SimConfig {
                horizon: 1.0,
                n_traj: 1,
                ..cfg(Integrator::Exact)
            },
        )
        .unwrap();
        let q1 = Matrix2::new(0.5, 0.0, 0.0, 0.5);
        let e = DMatrix::from_fn(2, 8, |i, j| if i == j { 1.0 } else { 0.0 });
        stats.sample_cov = DMatrix::identity(8, 8);
        assert_eq!(empirical_objective(&stats, &e, &q1).unwrap(), 1.0);
        stats.sample_cov = DMatrix::zeros(8, 8);
        assert_eq!(empirical_objective(&stats, &e, &q1).unwrap(), 0.0);
        assert!(empirical_objective(&stats, &DMatrix::zeros(2, 3), &q1).is_err());
    }
}
