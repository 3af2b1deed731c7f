//! State-space models of the principal/ancillary cavity pair, their noise
//! intensities, and the Lorentzian spectrum produced by the ancillary mode.
//!
//! Quadrature ordering for the augmented model is `x = [q_s, p_s, q_0, p_0]`
//! (principal mode first, then ancillary). The noise vector is
//! `w = [v_p, v_q, nu_p, nu_q, mu_p, mu_q]`: probe field, white vacuum input
//! of the ancilla, thermal input of the ancilla. Quadratures come from the
//! annihilation/creation pair through `Xi = [[1, 1], [-i, i]] / sqrt(2)`;
//! only the resulting real matrices are built here.

use nalgebra::{Complex, DMatrix, Matrix2};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Scalars of the cavity pair plus the LQG cost weights.
///
/// All rates share one (arbitrary) unit; only ratios matter.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams<T: Real> {
    /// Angular frequency of the principal mode.
    pub omega_s: T,
    /// Angular frequency of the ancillary mode (Lorentzian center).
    pub omega_0: T,
    /// Ancillary damping rate (Lorentzian linewidth).
    pub gamma_0: T,
    /// Damping of the principal mode into the probe field.
    pub gamma_1: T,
    /// Direct principal/ancilla coupling strength.
    pub kappa: T,
    /// Mean photon number of the thermal input.
    pub thermal_n: T,
    /// State weight on the principal quadratures.
    pub q1: Matrix2<T>,
    /// Control weight.
    pub q2: T,
    /// Terminal weight. Kept for completeness; the stationary problem never reads it.
    pub q3: Matrix2<T>,
    /// Rotation frequency assumed by the principal-only (Markovian) model.
    pub omega_p: T,
}

impl<T: Real> PhysicalParams<T> {
    /// Reference operating point: `omega_s = omega_0 = omega_p = 10`, `gamma_0 = gamma_1 = 1`,
    /// `kappa = 2`, `Q1 = diag(1/2, 1/2)`, `Q2 = 0.05`, `N = 0`.
    pub fn reference() -> Self {
        let half = T::lit(0.5);
        Self {
            omega_s: T::lit(10.0),
            omega_0: T::lit(10.0),
            gamma_0: T::one(),
            gamma_1: T::one(),
            kappa: T::lit(2.0),
            thermal_n: T::zero(),
            q1: Matrix2::new(half, T::zero(), T::zero(), half),
            q2: T::lit(0.05),
            q3: Matrix2::identity(),
            omega_p: T::lit(10.0),
        }
    }

    pub fn with_thermal_n(mut self, thermal_n: T) -> Self {
        self.thermal_n = thermal_n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("omega_s", self.omega_s),
            ("omega_0", self.omega_0),
            ("gamma_0", self.gamma_0),
            ("gamma_1", self.gamma_1),
            ("kappa", self.kappa),
            ("thermal_n", self.thermal_n),
            ("q2", self.q2),
            ("omega_p", self.omega_p),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite, got {v}")));
            }
        }
        if self.gamma_0 <= T::zero() {
            return Err(Error::invalid(format!(
                "gamma_0 must be > 0, got {}",
                self.gamma_0
            )));
        }
        if self.gamma_1 <= T::zero() {
            return Err(Error::invalid(format!(
                "gamma_1 must be > 0, got {}",
                self.gamma_1
            )));
        }
        if self.kappa < T::zero() {
            return Err(Error::invalid(format!(
                "kappa must be >= 0, got {}",
                self.kappa
            )));
        }
        if self.thermal_n < T::zero() {
            return Err(Error::invalid(format!(
                "thermal_n must be >= 0, got {}",
                self.thermal_n
            )));
        }
        if self.q2 <= T::zero() {
            return Err(Error::invalid(format!("q2 must be > 0, got {}", self.q2)));
        }
        check_spd2("q1", &self.q1)?;
        check_spd2("q3", &self.q3)?;
        Ok(())
    }
}

fn check_spd2<T: Real>(name: &str, m: &Matrix2<T>) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{name} must be finite")));
    }
    let scale = m.norm().max(T::one());
    if (m[(0, 1)] - m[(1, 0)]).abs() > T::default_epsilon() * T::lit(16.0) * scale {
        return Err(Error::invalid(format!("{name} must be symmetric")));
    }
    if m[(0, 0)] <= T::zero() || m.determinant() <= T::zero() {
        return Err(Error::invalid(format!("{name} must be positive definite")));
    }
    Ok(())
}

/// Linear quantum stochastic model in quadrature form:
///
/// ```text
/// dx/dt = A x + B u + B' w
///     y = C x + D w
/// ```
///
/// The trailing `thermal_channels` entries of `w` carry thermal noise; the
/// rest are vacuum inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
    pub b_prime: DMatrix<T>,
    pub d: DMatrix<T>,
    pub thermal_channels: usize,
}

impl<T: Real> LinearModel<T> {
    pub fn new(
        a: DMatrix<T>,
        b: DMatrix<T>,
        c: DMatrix<T>,
        b_prime: DMatrix<T>,
        d: DMatrix<T>,
        thermal_channels: usize,
    ) -> Result<Self> {
        let model = Self {
            a,
            b,
            c,
            b_prime,
            d,
            thermal_channels,
        };
        model.validate()?;
        Ok(model)
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Noise dimension.
    pub fn q(&self) -> usize {
        self.b_prime.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        let check = |name: &str, got: (usize, usize), want: (usize, usize)| {
            if got != want {
                Err(Error::invalid(format!(
                    "{name} is {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                )))
            } else {
                Ok(())
            }
        };
        check("A", self.a.shape(), (n, n))?;
        check("B", self.b.shape(), (n, self.b.ncols()))?;
        check("C", self.c.shape(), (self.c.nrows(), n))?;
        check("B'", self.b_prime.shape(), (n, self.b_prime.ncols()))?;
        check("D", self.d.shape(), (self.c.nrows(), self.b_prime.ncols()))?;
        if self.thermal_channels > self.q() {
            return Err(Error::invalid(format!(
                "{} thermal channels exceed noise dimension {}",
                self.thermal_channels,
                self.q()
            )));
        }
        let all = [&self.a, &self.b, &self.c, &self.b_prime, &self.d];
        if all.iter().any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid("model matrices must be finite"));
        }
        Ok(())
    }
}

/// Noise covariance `M` of `w` and the joint intensity of `(B'w, Dw)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIntensity<T: Real> {
    pub m: DMatrix<T>,
    pub v1: DMatrix<T>,
    pub v12: DMatrix<T>,
    pub v2: DMatrix<T>,
}

impl<T: Real> NoiseIntensity<T> {
    /// `[[V1, V12], [V12^T, V2]]`.
    pub fn joint(&self) -> DMatrix<T> {
        let n = self.v1.nrows();
        let p = self.v2.nrows();
        let mut out = DMatrix::zeros(n + p, n + p);
        out.view_mut((0, 0), (n, n)).copy_from(&self.v1);
        out.view_mut((0, n), (n, p)).copy_from(&self.v12);
        out.view_mut((n, 0), (p, n))
            .copy_from(&self.v12.transpose());
        out.view_mut((n, n), (p, p)).copy_from(&self.v2);
        out
    }

    /// `V1 - V12 V2^-1 V12^T`, the process intensity left after removing
    /// the part correlated with the measurement.
    pub fn decorrelated_process(&self) -> Result<DMatrix<T>> {
        let v2_inv = self
            .v2
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::invalid("V2 is singular"))?;
        Ok(&self.v1 - &self.v12 * v2_inv * self.v12.transpose())
    }
}

/// Quadrature model of the principal mode coupled to the ancillary mode.
pub fn build_augmented_model<T: Real>(params: &PhysicalParams<T>) -> Result<LinearModel<T>> {
    params.validate()?;
    let z = T::zero();
    let two = T::lit(2.0);
    let d1 = -params.gamma_1 / two;
    let d0 = -params.gamma_0 / two;
    let k = (params.kappa * params.gamma_0).sqrt() / two;
    let (ws, w0) = (params.omega_s, params.omega_0);
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        d1,  ws,  k,   z,
        -ws, d1,  z,   k,
        -k,  z,   d0,  w0,
        z,   -k,  -w0, d0,
    ]);
    let b = DMatrix::from_row_slice(4, 1, &[z, T::one(), z, z]);
    let c = DMatrix::from_row_slice(1, 4, &[params.gamma_1.sqrt(), z, z, z]);
    let s1 = -params.gamma_1.sqrt();
    let s0 = -params.gamma_0.sqrt();
    #[rustfmt::skip]
    let b_prime = DMatrix::from_row_slice(4, 6, &[
        s1, z,  z,  z,  z,  z,
        z,  s1, z,  z,  z,  z,
        z,  z,  s0, z,  s0, z,
        z,  z,  z,  s0, z,  s0,
    ]);
    let d = DMatrix::from_row_slice(1, 6, &[T::one(), z, z, z, z, z]);
    LinearModel::new(a, b, c, b_prime, d, 2)
}

/// Principal-only model that ignores the ancilla, rotating at `omega_p`.
pub fn build_markovian_model<T: Real>(params: &PhysicalParams<T>) -> Result<LinearModel<T>> {
    params.validate()?;
    let z = T::zero();
    let d1 = -params.gamma_1 / T::lit(2.0);
    let wp = params.omega_p;
    let a = DMatrix::from_row_slice(2, 2, &[d1, wp, -wp, d1]);
    let b = DMatrix::from_row_slice(2, 1, &[z, T::one()]);
    let c = DMatrix::from_row_slice(1, 2, &[params.gamma_1.sqrt(), z]);
    let b_prime = DMatrix::from_diagonal_element(2, 2, -params.gamma_1.sqrt());
    let d = DMatrix::from_row_slice(1, 2, &[T::one(), z]);
    LinearModel::new(a, b, c, b_prime, d, 0)
}

/// Builds `M` (unit intensity on vacuum channels, `1/2 + N` on thermal
/// channels) and the blocks `V1 = B'MB'^T`, `V12 = B'MD^T`, `V2 = DMD^T`.
///
/// `D` never touches the thermal channels for the models built here, so
/// `V12` and `V2` reduce to `B'_1 D_1^T` and `D_1 D_1^T`.
pub fn noise_intensity<T: Real>(model: &LinearModel<T>, thermal_n: T) -> Result<NoiseIntensity<T>> {
    model.validate()?;
    if !(thermal_n >= T::zero()) || !thermal_n.is_finite() {
        return Err(Error::invalid(format!(
            "thermal_n must be >= 0, got {thermal_n}"
        )));
    }
    let q = model.q();
    let thermal = T::lit(0.5) + thermal_n;
    let m = DMatrix::from_fn(q, q, |i, j| {
        match (i == j, i >= q - model.thermal_channels) {
            (false, _) => T::zero(),
            (true, false) => T::one(),
            (true, true) => thermal,
        }
    });
    let bm = &model.b_prime * &m;
    let v1 = &bm * model.b_prime.transpose();
    let v12 = &bm * model.d.transpose();
    let v2 = &model.d * &m * model.d.transpose();
    let v1 = (&v1 + v1.transpose()) * T::lit(0.5);
    if v2.clone().try_inverse().is_none() || v2.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("measurement noise intensity V2 is singular"));
    }
    Ok(NoiseIntensity { m, v1, v12, v2 })
}

/// Lorentzian line shape `(g^2/4) / (g^2/4 + (omega - omega_0)^2)`, unit
/// height at `omega_0`, half width `gamma_0 / 2`.
pub fn lorentzian_psd<T: Real>(gamma_0: T, omega_0: T, omega: T) -> T {
    debug_assert!(gamma_0 > T::zero());
    let hw2 = gamma_0 * gamma_0 / T::lit(4.0);
    let det = omega - omega_0;
    hw2 / (hw2 + det * det)
}

/// Power spectrum of the fictitious output `c = -(sqrt(g0)/2) a_0` of the
/// ancilla `da_0 = -(g0/2 + i w0) a_0 dt - sqrt(g0) dB`, driven by unit white
/// noise. Evaluated as `|C (s - A)^-1 B|^2` at `s = -i omega` (time
/// dependence `e^{-i omega t}`).
pub fn model_output_psd<T: Real>(gamma_0: T, omega_0: T, omega: T) -> T {
    debug_assert!(gamma_0 > T::zero());
    let half = T::lit(0.5);
    let drift = Complex::new(-gamma_0 * half, -omega_0);
    let input = Complex::new(-gamma_0.sqrt(), T::zero());
    let output = Complex::new(-gamma_0.sqrt() * half, T::zero());
    let s = Complex::new(T::zero(), -omega);
    let transfer = output * input / (s - drift);
    transfer.norm_sqr()
}
