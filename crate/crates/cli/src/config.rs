//! Parameter resolution: command-line flags override the TOML config file,
//! which overrides the built-in defaults.

use std::path::Path;

use nalgebra::Matrix2;
use nonmarkov_lqg::Params;
use serde::Deserialize;

use crate::CliError;

/// Flat key-value config file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub omega_s: Option<f64>,
    pub omega_0: Option<f64>,
    pub gamma_0: Option<f64>,
    pub gamma_1: Option<f64>,
    pub kappa: Option<f64>,
    pub thermal_n: Option<f64>,
    pub q1_11: Option<f64>,
    pub q1_12: Option<f64>,
    pub q1_22: Option<f64>,
    pub q2: Option<f64>,
    pub omega_p: Option<f64>,

    pub n_min: Option<f64>,
    pub n_max: Option<f64>,
    pub steps: Option<usize>,

    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub points: Option<usize>,

    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub trajectories: Option<usize>,
    pub seed: Option<u64>,
    pub burn_in: Option<f64>,
    pub integrator: Option<String>,
    pub controller: Option<String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

/// Physical-parameter flags shared by every subcommand.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct ParamArgs {
    /// Principal-mode frequency
    #[arg(long, global = true)]
    pub omega_s: Option<f64>,
    /// Ancilla (Lorentzian center) frequency
    #[arg(long, global = true)]
    pub omega_0: Option<f64>,
    /// Ancilla decay rate (Lorentzian linewidth)
    #[arg(long, global = true)]
    pub gamma_0: Option<f64>,
    /// Principal-mode decay rate
    #[arg(long, global = true)]
    pub gamma_1: Option<f64>,
    /// Ancilla-principal coupling
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
    /// Thermal photon number N
    #[arg(long, global = true)]
    pub thermal_n: Option<f64>,
    /// State weight Q1, entry (1,1)
    #[arg(long, global = true)]
    pub q1_11: Option<f64>,
    /// State weight Q1, off-diagonal entry
    #[arg(long, global = true)]
    pub q1_12: Option<f64>,
    /// State weight Q1, entry (2,2)
    #[arg(long, global = true)]
    pub q1_22: Option<f64>,
    /// Control weight Q2
    #[arg(long, global = true)]
    pub q2: Option<f64>,
    /// Principal frequency used by the Markovian design model
    #[arg(long, global = true)]
    pub omega_p: Option<f64>,
}

pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

impl ParamArgs {
    pub fn resolve(&self, file: &ConfigFile) -> Result<Params, CliError> {
        let d = Params::reference();
        let q12 = pick(self.q1_12, file.q1_12, d.q1[(0, 1)]);
        let params = Params {
            omega_s: pick(self.omega_s, file.omega_s, d.omega_s),
            omega_0: pick(self.omega_0, file.omega_0, d.omega_0),
            gamma_0: pick(self.gamma_0, file.gamma_0, d.gamma_0),
            gamma_1: pick(self.gamma_1, file.gamma_1, d.gamma_1),
            kappa: pick(self.kappa, file.kappa, d.kappa),
            thermal_n: pick(self.thermal_n, file.thermal_n, d.thermal_n),
            q1: Matrix2::new(
                pick(self.q1_11, file.q1_11, d.q1[(0, 0)]),
                q12,
                q12,
                pick(self.q1_22, file.q1_22, d.q1[(1, 1)]),
            ),
            q2: pick(self.q2, file.q2, d.q2),
            omega_p: pick(self.omega_p, file.omega_p, d.omega_p),
            ..d
        };
        params
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(params)
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let span = hi - lo;
    (0..n)
        .map(|i| lo + span * i as f64 / (n - 1) as f64)
        .collect()
}

pub fn check_range(name: &str, lo: f64, hi: f64, n: usize) -> Result<(), CliError> {
    if !lo.is_finite() || !hi.is_finite() {
        return Err(CliError::Usage(format!(
            "{name} bounds must be finite, got [{lo}, {hi}]"
        )));
    }
    if lo > hi {
        return Err(CliError::Usage(format!(
            "{name} range is empty: {lo} > {hi}"
        )));
    }
    if n == 0 {
        return Err(CliError::Usage(format!(
            "{name} grid needs at least one point"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let file = ConfigFile::parse("kappa = 3.0\ngamma_0 = 2.0\n").unwrap();
        let flags = ParamArgs {
            kappa: Some(4.0),
            ..Default::default()
        };
        let p = flags.resolve(&file).unwrap();
        assert_eq!(p.kappa, 4.0);
        assert_eq!(p.gamma_0, 2.0);
        assert_eq!(p.gamma_1, 1.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ConfigFile::parse("kapa = 3.0").is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = linspace(0.0, 5.0, 11);
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[10], 5.0);
        assert_eq!(g[5], 2.5);
        assert_eq!(linspace(3.0, 3.0, 1), vec![3.0]);
        assert_eq!(linspace(5.0, 15.0, 1001)[500], 10.0);
    }
}
