//! `nmlqg`: command-line front end for the colored-noise LQG library.
//!
//! Results go to stdout (or `--out`), diagnostics to stderr. Exit codes are
//! 0 on success, 2 for invalid arguments or configuration and 1 when a
//! solver or synthesis step fails.

pub mod config;
pub mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::result::Result;

use clap::{Parser, Subcommand, ValueEnum};
use nonmarkov_lqg::solvers::eigenvalues;
use nonmarkov_lqg::synthesis::principal_selector;
use nonmarkov_lqg::*;

use config::{check_range, linspace, pick, ConfigFile, ParamArgs};
use report::{
    write_csv, write_matrix, write_spectrum, SimulationRecord, SpectrumRecord, SweepRecord,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Solver(Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Solver(e) if is_invalid_input(e) => 2,
            CliError::Solver(_) | CliError::Io(_) => 1,
        }
    }
}

fn is_invalid_input(e: &Error) -> bool {
    match e {
        Error::InvalidInput(_) => true,
        Error::Sweep { source, .. } => is_invalid_input(source),
        _ => false,
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
            CliError::Solver(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Solver(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "nmlqg",
    version,
    about = "LQG control of a cavity mode under Lorentzian noise"
)]
#[command(allow_negative_numbers = true)]
pub struct Cli {
    /// TOML file with flat `key = value` overrides
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntegratorArg {
    Exact,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ControllerArg {
    Whitening,
    Markovian,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the system matrices and noise intensities of both models
    #[command(allow_negative_numbers = true)]
    Model,
    /// Print filter and regulator gains, Riccati solutions and closed-loop spectra
    #[command(allow_negative_numbers = true)]
    Synthesize,
    /// Print the stationary cost J of both controllers
    #[command(allow_negative_numbers = true)]
    Analyze,
    /// Write J of both controllers over a thermal-occupation grid as CSV
    #[command(allow_negative_numbers = true)]
    Sweep {
        #[arg(long)]
        n_min: Option<f64>,
        #[arg(long)]
        n_max: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the Lorentzian and model output spectra as CSV
    #[command(allow_negative_numbers = true)]
    Spectrum {
        #[arg(long)]
        omega_min: Option<f64>,
        #[arg(long)]
        omega_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare Monte Carlo and analytic J
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        trajectories: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Fraction of the horizon discarded before sampling
        #[arg(long)]
        burn_in: Option<f64>,
        #[arg(long, value_enum)]
        integrator: Option<IntegratorArg>,
        #[arg(long, value_enum)]
        controller: Option<ControllerArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name) and executes the command.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let params = cli.params.resolve(&file)?;
    match &cli.command {
        Command::Model => model(&params, out),
        Command::Synthesize => synthesize(&params, out),
        Command::Analyze => {
            let row = ThermalStudy::new(&params)?.evaluate(params.thermal_n)?;
            write_csv(out, &[record(&row)])?;
            Ok(())
        }
        Command::Sweep {
            n_min,
            n_max,
            steps,
            out: path,
        } => {
            let lo = pick(*n_min, file.n_min, 0.0);
            let hi = pick(*n_max, file.n_max, 5.0);
            let steps = pick(*steps, file.steps, 11);
            check_range("thermal_n", lo, hi, steps)?;
            if lo < 0.0 {
                return Err(CliError::Usage(format!(
                    "thermal_n grid must be >= 0, got n_min = {lo}"
                )));
            }
            let rows: Vec<SweepRecord> = sweep_thermal(&params, &linspace(lo, hi, steps))?
                .iter()
                .map(record)
                .collect();
            emit(path.as_deref(), out, &rows)
        }
        Command::Spectrum {
            omega_min,
            omega_max,
            points,
            out: path,
        } => {
            let half_span = 5.0 * params.gamma_0;
            let lo = pick(*omega_min, file.omega_min, params.omega_0 - half_span);
            let hi = pick(*omega_max, file.omega_max, params.omega_0 + half_span);
            let points = pick(*points, file.points, 1001);
            check_range("omega", lo, hi, points)?;
            let rows: Vec<SpectrumRecord> = linspace(lo, hi, points)
                .into_iter()
                .map(|omega| SpectrumRecord {
                    omega,
                    psd_lorentzian: lorentzian_psd(params.gamma_0, params.omega_0, omega),
                    psd_model: model_output_psd(params.gamma_0, params.omega_0, omega),
                })
                .collect();
            emit(path.as_deref(), out, &rows)
        }
        Command::Simulate {
            dt,
            horizon,
            trajectories,
            seed,
            burn_in,
            integrator,
            controller,
            out: path,
        } => {
            let d = SimConfig::<f64>::default();
            let integrator = match integrator {
                Some(i) => *i,
                None => match file.integrator.as_deref() {
                    None | Some("exact") => IntegratorArg::Exact,
                    Some("euler") => IntegratorArg::Euler,
                    Some(other) => {
                        return Err(CliError::Usage(format!("unknown integrator '{other}'")))
                    }
                },
            };
            let controller = match controller {
                Some(c) => *c,
                None => match file.controller.as_deref() {
                    None | Some("whitening") => ControllerArg::Whitening,
                    Some("markovian") => ControllerArg::Markovian,
                    Some("both") => ControllerArg::Both,
                    Some(other) => {
                        return Err(CliError::Usage(format!("unknown controller '{other}'")))
                    }
                },
            };
            let cfg = SimConfig {
                dt: pick(*dt, file.dt, d.dt),
                horizon: pick(*horizon, file.horizon, d.horizon),
                n_traj: pick(*trajectories, file.trajectories, d.n_traj),
                burn_in: pick(*burn_in, file.burn_in, d.burn_in),
                seed: pick(*seed, file.seed, d.seed),
                integrator: match integrator {
                    IntegratorArg::Exact => Integrator::Exact,
                    IntegratorArg::Euler => Integrator::EulerMaruyama,
                },
            };
            let rows = simulate(&params, &cfg, controller)?;
            emit(path.as_deref(), out, &rows)
        }
    }
}

fn record(row: &Row) -> SweepRecord {
    SweepRecord {
        thermal_n: row.thermal_n,
        j_whitening: row.j_whitening,
        j_markovian: row.j_markovian,
    }
}

fn emit<R: serde::Serialize>(
    path: Option<&Path>,
    out: &mut dyn Write,
    rows: &[R],
) -> Result<(), CliError> {
    match path {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
            let mut w = std::io::BufWriter::new(file);
            write_csv(&mut w, rows)?;
            w.flush()?;
        }
        None => write_csv(out, rows)?,
    }
    Ok(())
}

fn model(p: &Params, out: &mut dyn Write) -> Result<(), CliError> {
    let models = [
        ("augmented", build_augmented_model(p)?),
        ("markovian", build_markovian_model(p)?),
    ];
    for (name, m) in models {
        let noise = noise_intensity(&m, p.thermal_n)?;
        writeln!(out, "# {name} model, thermal_n = {}", p.thermal_n)?;
        write_matrix(out, "A", &m.a)?;
        write_matrix(out, "B", &m.b)?;
        write_matrix(out, "C", &m.c)?;
        write_matrix(out, "B'", &m.b_prime)?;
        write_matrix(out, "D", &m.d)?;
        write_matrix(out, "M", &noise.m)?;
        write_matrix(out, "V1", &noise.v1)?;
        write_matrix(out, "V12", &noise.v12)?;
        write_matrix(out, "V2", &noise.v2)?;
    }
    Ok(())
}

fn synthesize(p: &Params, out: &mut dyn Write) -> Result<(), CliError> {
    let study = ThermalStudy::new(p)?;
    let designs = [
        (
            "whitening",
            study.whitening_filter(p.thermal_n)?,
            &study.whitening_control,
            study.whitening_loop(p.thermal_n)?,
        ),
        (
            "markovian",
            study.markovian_filter.clone(),
            &study.markovian_control,
            study.markovian_loop(p.thermal_n)?,
        ),
    ];
    for (name, filter, control, cl) in designs {
        writeln!(out, "# {name} controller, thermal_n = {}", p.thermal_n)?;
        write_matrix(out, "K", &filter.gain)?;
        write_matrix(out, "V_hat", &filter.error_cov)?;
        write_matrix(out, "F", &control.gain)?;
        write_matrix(out, "P", &control.riccati_solution)?;
        write_spectrum(out, "closed-loop spectrum", &eigenvalues(&cl.a_tilde)?)?;
    }
    Ok(())
}

fn simulate(
    p: &Params,
    cfg: &SimConfig<f64>,
    which: ControllerArg,
) -> Result<Vec<SimulationRecord>, CliError> {
    let study = ThermalStudy::new(p)?;
    let n = p.thermal_n;
    let loops = match which {
        ControllerArg::Whitening => vec![("whitening", study.whitening_loop(n)?)],
        ControllerArg::Markovian => vec![("markovian", study.markovian_loop(n)?)],
        ControllerArg::Both => vec![
            ("whitening", study.whitening_loop(n)?),
            ("markovian", study.markovian_loop(n)?),
        ],
    };
    let mut rows = Vec::with_capacity(loops.len());
    for (name, cl) in loops {
        let cov = steady_state_covariance(&cl)?;
        let j = photon_objective(&cov, &cl, &p.q1)?;
        let stats = simulate_closed_loop(&cl, cfg)?;
        let je = empirical_objective(&stats, &cl.e_tilde, &p.q1)?;
        let e = principal_selector::<f64>(cl.dim());
        let weight = e.transpose() * Matrix::from_column_slice(2, 2, p.q1.as_slice()) * &e;
        let se = stats
            .standard_error(|c| (c * &weight).trace())
            .unwrap_or(f64::NAN);
        let exact_block = cov.view((0, 0), (2, 2));
        let sample_block = stats.sample_cov.view((0, 0), (2, 2));
        rows.push(SimulationRecord {
            controller: name.to_string(),
            thermal_n: n,
            j_analytic: j,
            j_empirical: je,
            j_relative_error: (je - j).abs() / j,
            j_standard_error: se,
            cov_relative_error: (sample_block - exact_block).norm() / exact_block.norm(),
        });
    }
    Ok(rows)
}
