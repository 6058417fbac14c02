//! Probabilistic PCA fit of `x = mu + A s + eta`, whitening, and post-hoc
//! source statistics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{CoreError, Result};

/// Removes the channel mean of every column (the `I - 1 1^T / p` operator),
/// then the sample mean of every row.
///
/// Returns the centered matrix and the sample mean `mu_hat` of the
/// channel-centered data.
pub fn center(data: &DataMatrix) -> (DMatrix<f64>, DVector<f64>) {
    let mut x = data.values().clone();
    let p = x.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let m = col.sum() / p;
        col.add_scalar_mut(-m);
    }
    let mu = x.column_mean();
    for mut col in x.column_iter_mut() {
        col -= &mu;
    }
    (x, mu)
}

/// Subtracts the sample mean of every row only.
pub fn center_samples(data: &DataMatrix) -> (DMatrix<f64>, DVector<f64>) {
    let mut x = data.values().clone();
    let mu = x.column_mean();
    for mut col in x.column_iter_mut() {
        col -= &mu;
    }
    (x, mu)
}

/// Eigenvalues (descending) and matching eigenvectors of `X X^T / n`.
pub fn covariance_eigen(x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.ncols() as f64;
    let mut cov = x * x.transpose() / n;
    // Symmetrize against rounding in the product.
    cov = (&cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(cov);
    let p = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let vals = DVector::from_fn(p, |i, _| eig.eigenvalues[order[i]]);
    let vecs = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WhitenConfig {
    /// Apply the channel-centering operator before the sample mean. With it
    /// the smallest eigenvalue is structurally zero and the noise floor uses
    /// `lambda_{q+1..p-1}`; without it (square mixing) the floor uses
    /// `lambda_{q+1..p}`.
    pub channel_center: bool,
    /// Fail with `DegenerateSpectrum` instead of clipping when
    /// `lambda_k <= sigma2_hat` for some retained `k`.
    pub strict: bool,
    /// Floor for `lambda_k - sigma2_hat` when clipping.
    pub clip_floor: f64,
}

impl Default for WhitenConfig {
    fn default() -> Self {
        Self {
            channel_center: true,
            strict: false,
            clip_floor: 1e-12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PpcaModel {
    pub mu_hat: DVector<f64>,
    pub eigvals: DVector<f64>,
    pub eigvecs: DMatrix<f64>,
    pub q: usize,
    pub sigma2_hat: f64,
    /// `U_q (Sigma_q - sigma2 I)^{1/2}`, the mixing estimate with `Q = I`.
    pub a_hat: DMatrix<f64>,
    /// Whitened data, `q x n`.
    pub x_tilde: DMatrix<f64>,
    /// Retained indices (0-based) whose excess over the noise floor was clipped.
    pub clipped: Vec<usize>,
    pub channel_centered: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub q: usize,
    pub sigma2_hat: f64,
    pub eigvals: Vec<f64>,
    pub mu_hat: Vec<f64>,
    pub channel_centered: bool,
    pub clipped: Vec<usize>,
}

impl PpcaModel {
    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            q: self.q,
            sigma2_hat: self.sigma2_hat,
            eigvals: self.eigvals.iter().copied().collect(),
            mu_hat: self.mu_hat.iter().copied().collect(),
            channel_centered: self.channel_centered,
            clipped: self.clipped.clone(),
        }
    }

    /// `Sigma_q - sigma2 I` after clipping.
    pub fn signal_variances(&self) -> DVector<f64> {
        DVector::from_fn(self.q, |k, _| self.a_hat.column(k).norm_squared())
    }

    /// Mixing estimate `U_q (Sigma_q - sigma2 I)^{1/2} Q^T` for a rotation `Q`.
    pub fn mixing(&self, rotation: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a_hat * rotation.transpose()
    }

    /// Least-squares sources `(A^T A)^{-1} A^T x_c` for centered data `x_c`
    /// under rotation `Q`.
    pub fn least_squares_sources(
        &self,
        centered: &DMatrix<f64>,
        rotation: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        let a = self.mixing(rotation);
        let ata = a.tr_mul(&a);
        let chol = ata
            .cholesky()
            .ok_or_else(|| CoreError::InvalidData("mixing estimate is rank deficient".into()))?;
        Ok(chol.solve(&a.tr_mul(centered)))
    }
}

/// Fits the model with the default configuration.
pub fn fit_ppca(data: &DataMatrix, q: usize) -> Result<PpcaModel> {
    fit_ppca_with(data, q, &WhitenConfig::default())
}

pub fn fit_ppca_with(data: &DataMatrix, q: usize, config: &WhitenConfig) -> Result<PpcaModel> {
    let p = data.channels();
    // With channel centering the last eigenvalue is structurally zero, so at
    // most p - 1 directions carry signal.
    let q_max = if config.channel_center { p - 1 } else { p };
    if q == 0 || q > q_max {
        return Err(CoreError::InvalidArgument(format!(
            "latent dimension q = {q} outside 1..={q_max} for p = {p}"
        )));
    }
    let (x, mu_hat) = if config.channel_center {
        center(data)
    } else {
        center_samples(data)
    };
    fit_centered(&x, mu_hat, q, config)
}

/// Fits the model to already centered data.
pub fn fit_centered(
    x: &DMatrix<f64>,
    mu_hat: DVector<f64>,
    q: usize,
    config: &WhitenConfig,
) -> Result<PpcaModel> {
    let (eigvals, eigvecs) = covariance_eigen(x);
    let p = eigvals.len();
    let tail_end = if config.channel_center { p - 1 } else { p };
    if q == 0 || q > tail_end {
        return Err(CoreError::InvalidArgument(format!(
            "latent dimension q = {q} outside 1..={tail_end}"
        )));
    }
    let tail = eigvals.rows(q, tail_end - q);
    let sigma2_hat = if tail.is_empty() {
        0.0
    } else {
        tail.mean().max(0.0)
    };

    let mut clipped = Vec::new();
    let mut excess = DVector::zeros(q);
    for k in 0..q {
        let e = eigvals[k] - sigma2_hat;
        if e <= config.clip_floor {
            if config.strict {
                return Err(CoreError::DegenerateSpectrum {
                    index: k + 1,
                    eigenvalue: eigvals[k],
                    sigma2: sigma2_hat,
                });
            }
            log::warn!(
                "eigenvalue {} ({:e}) does not exceed the noise floor {sigma2_hat:e}; clipped",
                k + 1,
                eigvals[k]
            );
            clipped.push(k);
            excess[k] = config.clip_floor;
        } else {
            excess[k] = e;
        }
    }
    let u_q = eigvecs.columns(0, q).into_owned();
    let a_hat = DMatrix::from_fn(p, q, |i, k| u_q[(i, k)] * excess[k].sqrt());
    let mut x_tilde = u_q.tr_mul(x);
    for k in 0..q {
        let s = 1.0 / excess[k].sqrt();
        x_tilde.row_mut(k).scale_mut(s);
    }
    Ok(PpcaModel {
        mu_hat,
        eigvals,
        eigvecs,
        q,
        sigma2_hat,
        a_hat,
        x_tilde,
        clipped,
        channel_centered: config.channel_center,
    })
}

/// Per-sample uncertainty and relative-variance maps of estimated sources.
#[derive(Clone, Debug)]
pub struct SourceStats {
    /// `(A^T A)^{-1}`; the covariance of source column `i` is this times `sigma2_i[i]`.
    pub precision_inv: DMatrix<f64>,
    /// Residual variance per sample, `||x_i - A s_i||^2 / (p - q)`.
    pub sigma2_i: DVector<f64>,
    /// Relative variance contribution of component `k` at sample `i` (`q x n`).
    pub rv: DMatrix<f64>,
}

impl SourceStats {
    pub fn cov_s(&self, i: usize) -> DMatrix<f64> {
        &self.precision_inv * self.sigma2_i[i]
    }
}

/// Statistics for sources `s_hat` estimated with mixing `a` from centered data.
pub fn source_stats(
    a: &DMatrix<f64>,
    centered: &DMatrix<f64>,
    s_hat: &DMatrix<f64>,
) -> Result<SourceStats> {
    let (p, q) = a.shape();
    if centered.nrows() != p || s_hat.nrows() != q || s_hat.ncols() != centered.ncols() {
        return Err(CoreError::InvalidArgument(format!(
            "shape mismatch: mixing {p}x{q}, data {}x{}, sources {}x{}",
            centered.nrows(),
            centered.ncols(),
            s_hat.nrows(),
            s_hat.ncols()
        )));
    }
    if p == q {
        return Err(CoreError::InvalidArgument(
            "residual variance undefined when p = q (division by p - q)".into(),
        ));
    }
    let n = centered.ncols();
    let precision_inv = a
        .tr_mul(a)
        .try_inverse()
        .ok_or_else(|| CoreError::InvalidData("mixing estimate is rank deficient".into()))?;
    let residual = centered - a * s_hat;
    let sigma2_i = DVector::from_fn(n, |i, _| residual.column(i).norm_squared() / (p - q) as f64);

    let var_a = DVector::from_fn(q, |k, _| {
        let col = a.column(k);
        let m = col.mean();
        col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (p - 1) as f64
    });
    let mut rv = DMatrix::zeros(q, n);
    for i in 0..n {
        let denom: f64 = (0..q).map(|k| var_a[k] * s_hat[(k, i)].powi(2)).sum();
        if denom > 0.0 {
            for k in 0..q {
                rv[(k, i)] = var_a[k] * s_hat[(k, i)].powi(2) / denom;
            }
        }
    }
    Ok(SourceStats {
        precision_inv,
        sigma2_i,
        rv,
    })
}
