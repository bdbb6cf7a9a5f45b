//! Experiment harness around the design library: configuration files,
//! scenario drivers for every compared method, parameter sweeps with CSV
//! output, group-map emission, and an oracle check runner.
//!
//! The binary in `main.rs` is a thin argument parser over this crate; all
//! behavior worth testing lives here.

pub mod checks;
pub mod methods;
pub mod settings;
pub mod sweep;

use std::fmt;

/// Harness-level failure, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or input file: flags, schema, paths. Exit code 2.
    Usage(String),
    /// The computation itself failed after valid inputs. Exit code 1.
    Run(risma::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Run(err) => write!(f, "{err}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<risma::Error> for CliError {
    fn from(err: risma::Error) -> Self {
        CliError::Run(err)
    }
}

impl CliError {
    /// Process exit code mandated for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

/// Harness-wide result alias.
pub type CliResult<V> = std::result::Result<V, CliError>;

/// Formats a float for CSV output: full round-trip precision in scientific
/// notation, so identical values always serialize to identical bytes.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.12e}")
    }
}

/// Formats a sweep value: integers without a fractional tail, everything else
/// like [`fmt_float`].
pub fn fmt_sweep_value(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        fmt_float(x)
    }
}
