pub mod backproject;
pub mod correlate;
pub mod evaluate;
pub mod loss;
pub mod rate;
pub mod sweep;
pub mod synth;

use std::fmt::Display;

use crate::error::{CliError, CliResult};

/// One `stage: message` line on stderr.
pub fn log(stage: &str, msg: impl Display) {
    eprintln!("[{stage}] {msg}");
}

pub fn csv_to_string(w: csv::Writer<Vec<u8>>) -> CliResult<String> {
    let bytes = w.into_inner().map_err(|e| CliError::internal(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn csv_err(e: csv::Error) -> CliError {
    CliError::internal(e.to_string())
}
