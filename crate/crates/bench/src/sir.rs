//! Source-to-interferences ratio of estimated sources against the truth.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Reported when the interference energy is negligible.
pub const SIR_CAP_DB: f64 = 150.0;
/// Interference below this fraction of the target energy counts as zero.
pub const CAP_RATIO: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SirReport {
    /// SIR per true source, dB.
    pub sir_db: Vec<f64>,
    /// `matching[j]` is the estimated row assigned to true source `j`.
    pub matching: Vec<usize>,
    pub mean_db: f64,
}

/// Orthogonal projector onto the row span of `s` (applied to row vectors),
/// via the Cholesky factor of the Gram matrix.
struct SpanProjector {
    s: DMatrix<f64>,
    gram: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl SpanProjector {
    fn new(s: &DMatrix<f64>) -> Result<Self> {
        let gram = s * s.transpose();
        let scale = gram.diagonal().max().max(f64::MIN_POSITIVE);
        let eig = gram.clone().symmetric_eigenvalues();
        if eig.min() <= 1e-12 * scale {
            return Err(BenchError::RankDeficient(format!(
                "Gram matrix eigenvalue {:e} against scale {scale:e}",
                eig.min()
            )));
        }
        let gram = gram
            .cholesky()
            .ok_or_else(|| BenchError::RankDeficient("Gram matrix not positive definite".into()))?;
        Ok(Self { s: s.clone(), gram })
    }

    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let coef = self.gram.solve(&(&self.s * v));
        self.s.tr_mul(&coef)
    }
}

/// Target and interference parts of `s_hat` for true source `target`:
/// `P_{s_j} s_hat` and `P_S s_hat - P_{s_j} s_hat`.
pub fn decompose_estimate(
    s_true: &DMatrix<f64>,
    target: usize,
    s_hat: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let proj = SpanProjector::new(s_true)?;
    Ok(split(&proj, s_true, target, s_hat))
}

fn split(
    proj: &SpanProjector,
    s_true: &DMatrix<f64>,
    target: usize,
    s_hat: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let sj = s_true.row(target).transpose();
    let t = &sj * (sj.dot(s_hat) / sj.norm_squared());
    let full = proj.project(s_hat);
    let e = full - &t;
    (t, e)
}

/// SIR in dB from target and interference energies, capped.
pub fn sir_db(target_energy: f64, interference_energy: f64) -> f64 {
    if interference_energy < CAP_RATIO * target_energy {
        SIR_CAP_DB
    } else {
        (10.0 * (target_energy / interference_energy).log10()).min(SIR_CAP_DB)
    }
}

fn pearson(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let ac = a.add_scalar(-a.mean());
    let bc = b.add_scalar(-b.mean());
    let denom = ac.norm() * bc.norm();
    if denom == 0.0 {
        0.0
    } else {
        ac.dot(&bc) / denom
    }
}

/// Greedy matching on `|corr|`: repeatedly takes the largest remaining
/// entry; ties go to the lower true index, then the lower estimate index.
pub fn greedy_match(s_true: &DMatrix<f64>, s_hat: &DMatrix<f64>) -> Vec<usize> {
    let q = s_true.nrows();
    let m = s_hat.nrows();
    let corr = DMatrix::from_fn(q, m, |j, k| {
        pearson(&s_true.row(j).transpose(), &s_hat.row(k).transpose()).abs()
    });
    let mut matching = vec![usize::MAX; q];
    let mut used = vec![false; m];
    for _ in 0..q.min(m) {
        let mut best: Option<(usize, usize, f64)> = None;
        for j in (0..q).filter(|&j| matching[j] == usize::MAX) {
            for k in (0..m).filter(|&k| !used[k]) {
                if best.is_none_or(|(_, _, c)| corr[(j, k)] > c) {
                    best = Some((j, k, corr[(j, k)]));
                }
            }
        }
        let (j, k, _) = best.expect("unmatched pair remains");
        matching[j] = k;
        used[k] = true;
    }
    matching
}

pub fn sir(s_true: &DMatrix<f64>, s_hat: &DMatrix<f64>) -> Result<SirReport> {
    let (q, n) = s_true.shape();
    if q == 0 || n <= q {
        return Err(BenchError::InvalidSpec(format!(
            "need q >= 1 and n > q, got q = {q}, n = {n}"
        )));
    }
    if s_hat.shape() != (q, n) {
        return Err(BenchError::InvalidSpec(format!(
            "estimate is {}x{}, truth is {q}x{n}",
            s_hat.nrows(),
            s_hat.ncols()
        )));
    }
    let proj = SpanProjector::new(s_true)?;
    let matching = greedy_match(s_true, s_hat);
    let sir_db: Vec<f64> = (0..q)
        .map(|j| {
            let est = s_hat.row(matching[j]).transpose();
            let (t, e) = split(&proj, s_true, j, &est);
            sir_db(t.norm_squared(), e.norm_squared())
        })
        .collect();
    let mean_db = sir_db.iter().sum::<f64>() / q as f64;
    Ok(SirReport {
        sir_db,
        matching,
        mean_db,
    })
}
