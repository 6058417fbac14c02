//! Latent dimensionality: a permutation lower bound followed by
//! leave-one-out cross-validation of the flat noise tail of the spectrum.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::whiten::covariance_eigen;

/// Eigenvalues at or below this fraction of the largest are treated as zero.
const ZERO_EIGEN_REL: f64 = 1e-12;
const ZERO_VARIANCE: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationBound {
    pub q_l: usize,
    pub lambda: Vec<f64>,
    pub lambda_b: Vec<f64>,
}

/// Eigenvalues of `X X^T / n`, descending, with round-off level values
/// snapped to zero.
pub fn spectrum(x: &DMatrix<f64>) -> Vec<f64> {
    let (vals, _) = covariance_eigen(x);
    let top = vals[0].max(0.0);
    vals.iter()
        .map(|&v| if v <= ZERO_EIGEN_REL * top { 0.0 } else { v })
        .collect()
}

/// Independently permutes the entries of every column.
pub fn permute_columns(x: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut out = x.clone();
    let mut buf: Vec<f64> = Vec::with_capacity(x.nrows());
    for mut col in out.column_iter_mut() {
        buf.clear();
        buf.extend(col.iter().copied());
        buf.shuffle(rng);
        for (dst, v) in col.iter_mut().zip(&buf) {
            *dst = *v;
        }
    }
    out
}

/// Permutation lower bound with a single replicate.
pub fn permute_lower_bound(x: &DMatrix<f64>, seed: u64) -> PermutationBound {
    permute_lower_bound_replicates(x, seed, 1)
}

/// Permutation lower bound; `replicates > 1` averages the permuted spectra.
///
/// `q_l` is the length of the leading run of indices with
/// `lambda_i > lambda^b_i`.
pub fn permute_lower_bound_replicates(
    x: &DMatrix<f64>,
    seed: u64,
    replicates: usize,
) -> PermutationBound {
    let lambda = spectrum(x);
    let p = lambda.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reps = replicates.max(1);
    let mut lambda_b = vec![0.0; p];
    for _ in 0..reps {
        let xb = permute_columns(x, &mut rng);
        for (acc, v) in lambda_b.iter_mut().zip(spectrum(&xb)) {
            *acc += v / reps as f64;
        }
    }
    let q_l = lambda
        .iter()
        .zip(&lambda_b)
        .take_while(|(a, b)| a > b)
        .count();
    PermutationBound {
        q_l,
        lambda,
        lambda_b,
    }
}

/// Cross-validation error `E_bar(q)` and `Var(E_bar(q))` of the constant
/// model for the tail `lambda_{q+1..p-1}` (1-based indices).
pub fn cv_profile(lambda: &[f64], q: usize) -> Result<(f64, f64)> {
    let p = lambda.len();
    if p < 3 || q + 3 > p {
        return Err(CoreError::InvalidArgument(format!(
            "cross-validation needs q <= p - 3 (q = {q}, p = {p})"
        )));
    }
    // 0-based tail indices q..p-1 (exclusive of the structurally zero last one).
    let tail = &lambda[q..p - 1];
    let len = tail.len() as f64;
    let total: f64 = tail.iter().sum();
    let errors: Vec<f64> = tail
        .iter()
        .map(|&l| {
            let loo = (total - l) / (len - 1.0);
            (l - loo).powi(2)
        })
        .collect();
    let e_bar = errors.iter().sum::<f64>() / len;
    let var = errors.iter().map(|e| (e - e_bar).powi(2)).sum::<f64>() / len;
    Ok((e_bar, var / len))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub q: usize,
    pub e_bar: f64,
    pub var_e: f64,
    /// `Delta(q)`; absent on the last row, which only feeds `Delta(q - 1)`.
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatDimSummary {
    pub q_l: usize,
    pub lambda: Vec<f64>,
    pub lambda_b: Vec<f64>,
    /// First `q` of the scan, `max(q_l, 1) - 1`.
    pub q_start: usize,
    /// `Delta(q)` for `q = q_start..=p-4`.
    pub delta: Vec<f64>,
    /// Cumulative argmax `f(r)` for `r = q_start..=p-4`.
    pub f: Vec<usize>,
    /// `(y, g(y))` for every `y` hit by `f`, ascending in `y`.
    pub g: Vec<(usize, usize)>,
    pub q_hat: usize,
    pub rng_seed: u64,
    /// Set when the scan is empty or every `Delta` is undefined.
    pub degenerate: bool,
    pub profile: Vec<ProfileRow>,
}

impl LatDimSummary {
    /// CSV rows `q,e_bar,var_e,delta`.
    pub fn profile_csv(&self) -> String {
        let mut out = String::from("q,e_bar,var_e,delta\n");
        for row in &self.profile {
            let delta = row.delta.map(|d| format!("{d:?}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{:?},{:?},{}\n",
                row.q, row.e_bar, row.var_e, delta
            ));
        }
        out
    }
}

/// Two-stage estimate of the latent dimension from centered data.
pub fn estimate_q(x: &DMatrix<f64>, seed: u64) -> Result<LatDimSummary> {
    estimate_q_replicates(x, seed, 1)
}

pub fn estimate_q_replicates(
    x: &DMatrix<f64>,
    seed: u64,
    replicates: usize,
) -> Result<LatDimSummary> {
    let p = x.nrows();
    if p < 8 {
        return Err(CoreError::InvalidArgument(format!(
            "dimensionality scan q_l..p-4 needs p >= 8, got p = {p}"
        )));
    }
    let bound = permute_lower_bound_replicates(x, seed, replicates);
    Ok(summarize(bound, seed))
}

/// Cross-validation stage on a given bound.
///
/// The scan starts one below the bound: the estimate is `1 + argmax`, so
/// starting at `q_l` itself would rule out `q_hat = q_l` even when the bound
/// is tight.
pub fn summarize(bound: PermutationBound, seed: u64) -> LatDimSummary {
    let lambda = &bound.lambda;
    let p = lambda.len();
    let q_start = bound.q_l.max(1) - 1;
    let mut profile = Vec::new();
    let mut delta = Vec::new();
    let mut any_defined = false;
    if q_start + 4 <= p {
        let rows: Vec<(f64, f64)> = (q_start..=p - 3)
            .map(|q| cv_profile(lambda, q).expect("q within p - 3"))
            .collect();
        for (i, q) in (q_start..=p - 3).enumerate() {
            let d = if q < p - 3 {
                let (e0, v0) = rows[i];
                let (e1, v1) = rows[i + 1];
                let denom = v0 + v1;
                if denom < ZERO_VARIANCE {
                    Some(0.0)
                } else {
                    any_defined = true;
                    Some((e0 - e1) / denom.sqrt())
                }
            } else {
                None
            };
            if let Some(d) = d {
                delta.push(d);
            }
            profile.push(ProfileRow {
                q,
                e_bar: rows[i].0,
                var_e: rows[i].1,
                delta: d,
            });
        }
    }

    let mut f = Vec::with_capacity(delta.len());
    let mut best = 0usize;
    for (r, d) in delta.iter().enumerate() {
        if *d > delta[best] {
            best = r;
        }
        f.push(q_start + best);
    }
    let mut g: Vec<(usize, usize)> = Vec::new();
    for &y in &f {
        match g.iter_mut().find(|(v, _)| *v == y) {
            Some(entry) => entry.1 += 1,
            None => g.push((y, 1)),
        }
    }
    g.sort_by_key(|&(y, _)| y);

    let degenerate = delta.is_empty() || !any_defined;
    let q_hat = if delta.is_empty() {
        bound.q_l.max(1)
    } else if !any_defined {
        bound.q_l
    } else {
        // Smallest y among the most frequent.
        let mut top = g[0];
        for &entry in &g[1..] {
            if entry.1 > top.1 {
                top = entry;
            }
        }
        1 + top.0
    };
    LatDimSummary {
        q_l: bound.q_l,
        lambda: bound.lambda,
        lambda_b: bound.lambda_b,
        q_start,
        delta,
        f,
        g,
        q_hat,
        rng_seed: seed,
        degenerate,
        profile,
    }
}
