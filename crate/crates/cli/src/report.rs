//! CSV records and plain-text matrix output.

use std::io::Write;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub thermal_n: f64,
    pub j_whitening: f64,
    pub j_markovian: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub omega: f64,
    pub psd_lorentzian: f64,
    pub psd_model: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub controller: String,
    pub thermal_n: f64,
    pub j_analytic: f64,
    pub j_empirical: f64,
    pub j_relative_error: f64,
    pub j_standard_error: f64,
    /// Relative Frobenius error of the principal 2x2 covariance block.
    pub cov_relative_error: f64,
}

pub fn write_csv<R: Serialize>(out: &mut dyn Write, rows: &[R]) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for row in rows {
        w.serialize(row).map_err(std::io::Error::other)?;
    }
    w.flush()
}

/// Parses a CSV produced by [`write_csv`].
pub fn read_csv<R: for<'de> Deserialize<'de>>(input: impl std::io::Read) -> csv::Result<Vec<R>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub fn write_matrix(out: &mut dyn Write, name: &str, m: &DMatrix<f64>) -> std::io::Result<()> {
    writeln!(out, "{name} ({}x{})", m.nrows(), m.ncols())?;
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "  {}", cells.join(" "))?;
    }
    Ok(())
}

pub fn write_spectrum(
    out: &mut dyn Write,
    name: &str,
    eigs: &[Complex<f64>],
) -> std::io::Result<()> {
    writeln!(out, "{name} ({} eigenvalues, re im)", eigs.len())?;
    for z in eigs {
        writeln!(out, "  {:e} {:e}", z.re, z.im)?;
    }
    Ok(())
}
