use thiserror::Error;

/// Failures reported by model construction, the matrix-equation solvers,
/// synthesis and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The drift matrix of a Lyapunov equation is not Hurwitz.
    #[error(
        "{equation}: no unique stable solution, spectral abscissa {abscissa:e} is not negative"
    )]
    NotHurwitz { equation: String, abscissa: f64 },

    #[error("{equation}: synthesis infeasible, {condition}")]
    Infeasible { equation: String, condition: String },

    #[error("{equation}: residual {residual:e} above tolerance {tolerance:e} after {iterations} iterations")]
    Convergence {
        equation: String,
        residual: f64,
        tolerance: f64,
        iterations: usize,
    },

    #[error("{context}: unstable, spectral abscissa {abscissa:e}")]
    Unstable { context: String, abscissa: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("at thermal_n = {thermal_n}: {source}")]
    Sweep {
        thermal_n: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Relabels the equation named by a solver error.
    pub fn in_equation(self, name: &str) -> Self {
        match self {
            Error::NotHurwitz { abscissa, .. } => Error::NotHurwitz {
                equation: name.to_owned(),
                abscissa,
            },
            Error::Infeasible { condition, .. } => Error::Infeasible {
                equation: name.to_owned(),
                condition,
            },
            Error::Convergence {
                residual,
                tolerance,
                iterations,
                ..
            } => Error::Convergence {
                equation: name.to_owned(),
                residual,
                tolerance,
                iterations,
            },
            Error::Numerical(msg) => Error::Numerical(format!("{name}: {msg}")),
            other => other,
        }
    }
}
