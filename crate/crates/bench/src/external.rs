//! Scoring third-party separators that run as executables.
//!
//! The program is invoked as `program [args...] <input.csv> <output.csv> <q>`
//! and must write a `q x n` source matrix in the same CSV format it reads.

use std::path::PathBuf;
use std::process::Command;

use adis_core::data::{read_matrix_csv, write_matrix_csv};
use nalgebra::DMatrix;

use crate::error::{BenchError, Result};
use crate::montecarlo::{Separation, Separator};

#[derive(Clone, Debug)]
pub struct ExternalSeparator {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl Separator for ExternalSeparator {
    fn name(&self) -> String {
        self.program.display().to_string()
    }

    fn separate(&self, x: &DMatrix<f64>, q: usize, _seed: u64) -> Result<Separation> {
        let dir = tempfile::tempdir().map_err(|e| BenchError::External(e.to_string()))?;
        let input = dir.path().join("mixed.csv");
        let output = dir.path().join("sources.csv");
        write_matrix_csv(&input, x, None)?;
        let status = Command::new(&self.program)
            .args(&self.args)
            .arg(&input)
            .arg(&output)
            .arg(q.to_string())
            .status()
            .map_err(|e| BenchError::External(format!("{}: {e}", self.program.display())))?;
        if !status.success() {
            return Err(BenchError::External(format!(
                "{} exited with {status}",
                self.program.display()
            )));
        }
        let s_hat = read_matrix_csv(&output)?;
        if s_hat.shape() != (q, x.ncols()) {
            return Err(BenchError::External(format!(
                "expected a {q}x{} source matrix, got {}x{}",
                x.ncols(),
                s_hat.nrows(),
                s_hat.ncols()
            )));
        }
        Ok(Separation {
            s_hat,
            stage1: None,
            objectives: None,
            joint_outcome: None,
        })
    }
}
