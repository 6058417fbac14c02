//! Per-iteration convergence diagnostics.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{NlpError, Result};

/// One inner (trust-region) iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub outer: usize,
    pub inner: usize,
    pub objective: f64,
    pub lagrangian: f64,
    /// `||x - P(x - grad L(x, lambda, mu))||_inf`.
    pub proj_grad: f64,
    /// `||c(x)||_inf`.
    pub infeasibility: f64,
    pub multiplier_norm: f64,
    pub penalty: f64,
    pub radius: f64,
    /// Actual over predicted reduction; absent when the model predicted no decrease.
    pub ratio: Option<f64>,
    pub step_norm: f64,
    pub accepted: bool,
    pub qn_skipped: bool,
    /// KKT residuals with `mu = 0`, only on the final record of a solve.
    pub kkt_grad: Option<f64>,
    pub kkt_feas: Option<f64>,
}

/// Which branch of the outer loop ran after an inner solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OuterBranch {
    /// Inner solve failed; penalty lowered and tolerances reset.
    Retry,
    /// Constraint test passed; multipliers updated and tolerances tightened.
    Multiplier,
    /// Constraint test failed; penalty raised and tolerances reset.
    Penalty,
    /// Both stopping tests passed.
    Stop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub outer: usize,
    pub branch: OuterBranch,
    pub inner_iterations: usize,
    pub objective: f64,
    pub infeasibility: f64,
    pub kkt_grad: f64,
    pub multiplier_norm: f64,
    /// Penalty and tolerances in force after the branch.
    pub penalty: f64,
    pub eta_con: f64,
    pub eta_grad: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub records: Vec<IterRecord>,
    pub outer: Vec<OuterRecord>,
}

impl SolveTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn outer_iterations(&self) -> usize {
        self.outer.len()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for rec in &self.records {
            let line = serde_json::to_string(rec).map_err(|e| NlpError::Export(e.to_string()))?;
            writeln!(out, "{line}").map_err(|e| NlpError::Export(e.to_string()))?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<IterRecord>> {
        let mut records = Vec::new();
        for line in input.lines() {
            let line = line.map_err(|e| NlpError::Export(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| NlpError::Export(e.to_string()))?);
        }
        Ok(records)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        for rec in &self.records {
            writer
                .serialize(rec)
                .map_err(|e| NlpError::Export(e.to_string()))?;
        }
        writer.flush().map_err(|e| NlpError::Export(e.to_string()))
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<IterRecord>> {
        let mut reader = csv::Reader::from_reader(input);
        reader
            .deserialize()
            .collect::<std::result::Result<Vec<IterRecord>, _>>()
            .map_err(|e| NlpError::Export(e.to_string()))
    }
}
