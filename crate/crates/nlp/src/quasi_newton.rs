//! Quasi-Newton Hessian approximations: dense SR1/BFGS and their
//! limited-memory counterparts.
//!
//! The limited-memory forms keep the last `memory` step pairs and unroll the
//! same recursion as the dense updates from a scaled identity, so the most
//! recent pair always satisfies the secant condition exactly.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::operator::LinearOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QnKind {
    Sr1,
    Bfgs,
    LSr1,
    LBfgs,
}

impl std::str::FromStr for QnKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sr1" => Ok(Self::Sr1),
            "bfgs" => Ok(Self::Bfgs),
            "l-sr1" | "lsr1" => Ok(Self::LSr1),
            "l-bfgs" | "lbfgs" => Ok(Self::LBfgs),
            other => Err(format!("unknown quasi-Newton kind '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateOutcome {
    Applied,
    Skipped,
}

/// Safeguard thresholds for the updates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QnSafeguards {
    /// SR1 skips when `|(y - Bs)^T s| < r ||s|| ||y - Bs||`.
    pub sr1_skip: f64,
    /// BFGS skips when `y^T s <= floor * ||s|| ||y||`.
    pub bfgs_curvature_floor: f64,
}

impl Default for QnSafeguards {
    fn default() -> Self {
        Self {
            sr1_skip: 1e-8,
            bfgs_curvature_floor: 1e-12,
        }
    }
}

#[derive(Clone, Debug)]
enum Storage {
    Dense(DMatrix<f64>),
    Limited(LimitedMemory),
}

#[derive(Clone, Debug)]
pub struct HessianApprox {
    kind: QnKind,
    storage: Storage,
    safeguards: QnSafeguards,
    applied: usize,
    skipped: usize,
}

impl HessianApprox {
    /// `B = gamma * I`.
    pub fn new(
        kind: QnKind,
        dim: usize,
        gamma: f64,
        memory: usize,
        safeguards: QnSafeguards,
    ) -> Self {
        let storage = match kind {
            QnKind::Sr1 | QnKind::Bfgs => Storage::Dense(DMatrix::identity(dim, dim) * gamma),
            QnKind::LSr1 | QnKind::LBfgs => Storage::Limited(LimitedMemory {
                dim,
                gamma0: gamma,
                gamma,
                memory: memory.max(1),
                pairs: VecDeque::new(),
                terms: Vec::new(),
            }),
        };
        Self {
            kind,
            storage,
            safeguards,
            applied: 0,
            skipped: 0,
        }
    }

    /// Starts from a dense matrix (used by tests that need an exact model).
    pub fn from_dense(kind: QnKind, b: DMatrix<f64>, safeguards: QnSafeguards) -> Self {
        Self {
            kind,
            storage: Storage::Dense(b),
            safeguards,
            applied: 0,
            skipped: 0,
        }
    }

    pub fn kind(&self) -> QnKind {
        self.kind
    }

    pub fn applied(&self) -> usize {
        self.applied
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.storage {
            Storage::Dense(b) => b.clone(),
            Storage::Limited(lm) => {
                let mut b = DMatrix::zeros(lm.dim, lm.dim);
                for j in 0..lm.dim {
                    let mut e = DVector::zeros(lm.dim);
                    e[j] = 1.0;
                    b.set_column(j, &lm.apply(&e));
                }
                b
            }
        }
    }

    /// Submatrix `B[index, index]`, built without forming `B` for the
    /// limited-memory forms.
    pub fn restricted_dense(&self, index: &[usize]) -> DMatrix<f64> {
        let r = index.len();
        match &self.storage {
            Storage::Dense(b) => DMatrix::from_fn(r, r, |a, c| b[(index[a], index[c])]),
            Storage::Limited(lm) => {
                let mut out = DMatrix::zeros(r, r);
                for (c, &j) in index.iter().enumerate() {
                    let mut e = DVector::zeros(lm.dim);
                    e[j] = 1.0;
                    let col = lm.apply(&e);
                    for (a, &i) in index.iter().enumerate() {
                        out[(a, c)] = col[i];
                    }
                }
                out
            }
        }
    }

    /// Incorporates the pair `(s, y)`; returns whether the update was used.
    pub fn update(&mut self, s: &DVector<f64>, y: &DVector<f64>) -> UpdateOutcome {
        let s_norm = s.norm();
        if s_norm == 0.0 || !s_norm.is_finite() || !y.iter().all(|v| v.is_finite()) {
            self.skipped += 1;
            return UpdateOutcome::Skipped;
        }
        let kind = self.kind;
        let guards = self.safeguards;
        let outcome = match &mut self.storage {
            Storage::Dense(b) => match kind {
                QnKind::Sr1 | QnKind::LSr1 => dense_sr1(b, s, y, guards.sr1_skip),
                QnKind::Bfgs | QnKind::LBfgs => dense_bfgs(b, s, y, guards.bfgs_curvature_floor),
            },
            Storage::Limited(lm) => lm.push(kind, s, y, guards),
        };
        match outcome {
            UpdateOutcome::Applied => self.applied += 1,
            UpdateOutcome::Skipped => self.skipped += 1,
        }
        outcome
    }
}

impl LinearOperator for HessianApprox {
    fn dim(&self) -> usize {
        match &self.storage {
            Storage::Dense(b) => b.nrows(),
            Storage::Limited(lm) => lm.dim,
        }
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.storage {
            Storage::Dense(b) => b * v,
            Storage::Limited(lm) => lm.apply(v),
        }
    }
}

fn dense_sr1(b: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>, r: f64) -> UpdateOutcome {
    let u = y - &*b * s;
    let denom = u.dot(s);
    if denom.abs() < r * s.norm() * u.norm() || denom == 0.0 {
        return UpdateOutcome::Skipped;
    }
    b.ger(1.0 / denom, &u, &u, 1.0);
    UpdateOutcome::Applied
}

fn dense_bfgs(
    b: &mut DMatrix<f64>,
    s: &DVector<f64>,
    y: &DVector<f64>,
    floor: f64,
) -> UpdateOutcome {
    let ys = y.dot(s);
    if ys <= floor * s.norm() * y.norm() {
        return UpdateOutcome::Skipped;
    }
    let bs = &*b * s;
    let sbs = s.dot(&bs);
    if sbs <= 0.0 {
        return UpdateOutcome::Skipped;
    }
    b.ger(-1.0 / sbs, &bs, &bs, 1.0);
    b.ger(1.0 / ys, y, y, 1.0);
    UpdateOutcome::Applied
}

/// Rank-one terms `sign * t t^T` accumulated on top of `gamma * I`.
#[derive(Clone, Debug)]
struct LimitedMemory {
    dim: usize,
    gamma0: f64,
    gamma: f64,
    memory: usize,
    pairs: VecDeque<(DVector<f64>, DVector<f64>)>,
    terms: Vec<(f64, DVector<f64>)>,
}

impl LimitedMemory {
    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v * self.gamma;
        for (sign, t) in &self.terms {
            out.axpy(sign * t.dot(v), t, 1.0);
        }
        out
    }

    fn push(
        &mut self,
        kind: QnKind,
        s: &DVector<f64>,
        y: &DVector<f64>,
        guards: QnSafeguards,
    ) -> UpdateOutcome {
        // Test the new pair against the current approximation first.
        match kind {
            QnKind::LSr1 | QnKind::Sr1 => {
                let u = y - self.apply(s);
                let denom = u.dot(s);
                if denom.abs() < guards.sr1_skip * s.norm() * u.norm() || denom == 0.0 {
                    return UpdateOutcome::Skipped;
                }
            }
            QnKind::LBfgs | QnKind::Bfgs => {
                if y.dot(s) <= guards.bfgs_curvature_floor * s.norm() * y.norm() {
                    return UpdateOutcome::Skipped;
                }
            }
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s.clone(), y.clone()));
        self.rebuild(kind, guards);
        UpdateOutcome::Applied
    }

    fn rebuild(&mut self, kind: QnKind, guards: QnSafeguards) {
        self.terms.clear();
        match kind {
            QnKind::LSr1 | QnKind::Sr1 => {
                self.gamma = self.gamma0;
                let pairs: Vec<_> = self.pairs.iter().cloned().collect();
                let mut kept = VecDeque::new();
                for (s, y) in pairs {
                    let u = &y - self.apply(&s);
                    let denom = u.dot(&s);
                    if denom.abs() < guards.sr1_skip * s.norm() * u.norm() || denom == 0.0 {
                        continue;
                    }
                    let scale = denom.abs().sqrt();
                    self.terms.push((denom.signum(), u / scale));
                    kept.push_back((s, y));
                }
                self.pairs = kept;
            }
            QnKind::LBfgs | QnKind::Bfgs => {
                if let Some((s, y)) = self.pairs.back() {
                    self.gamma = y.norm_squared() / y.dot(s);
                }
                let pairs: Vec<_> = self.pairs.iter().cloned().collect();
                for (s, y) in pairs {
                    let bs = self.apply(&s);
                    let sbs = s.dot(&bs);
                    let ys = y.dot(&s);
                    if sbs <= 0.0 || ys <= 0.0 {
                        continue;
                    }
                    self.terms.push((-1.0, bs / sbs.sqrt()));
                    self.terms.push((1.0, y / ys.sqrt()));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &m * m.transpose() + DMatrix::identity(n, n) * 0.5
    }

    fn secant_residual(b: &HessianApprox, s: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (b.apply(s) - y).norm() / (1.0 + y.norm())
    }

    /// On a quadratic, n SR1 updates along independent steps recover H
    /// exactly; the expected matrix is H itself.
    #[test]
    fn sr1_recovers_quadratic_hessian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 5;
        let h = random_spd(n, &mut rng);
        let mut b = HessianApprox::new(QnKind::Sr1, n, 1.0, 0, QnSafeguards::default());
        for _ in 0..n {
            let s = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let y = &h * &s;
            assert_eq!(b.update(&s, &y), UpdateOutcome::Applied);
            assert!(secant_residual(&b, &s, &y) <= 1e-10);
        }
        let diff = (b.to_dense() - &h).amax();
        assert!(diff <= 1e-8, "max |B - H| = {diff}");
    }

    #[test]
    fn limited_sr1_matches_dense_within_memory() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 6;
        let h = random_spd(n, &mut rng);
        let mut dense = HessianApprox::new(QnKind::Sr1, n, 2.0, 0, QnSafeguards::default());
        let mut limited = HessianApprox::new(QnKind::LSr1, n, 2.0, 10, QnSafeguards::default());
        for _ in 0..4 {
            let s = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let y = &h * &s;
            dense.update(&s, &y);
            limited.update(&s, &y);
            assert!(secant_residual(&limited, &s, &y) <= 1e-10);
        }
        assert!((dense.to_dense() - limited.to_dense()).amax() <= 1e-10);
    }

    #[test]
    fn sr1_skips_when_secant_already_holds() {
        let b0 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let mut b = HessianApprox::from_dense(QnKind::Sr1, b0.clone(), QnSafeguards::default());
        let s = DVector::from_vec(vec![0.3, -1.0, 0.7]);
        let y = &b0 * &s;
        assert_eq!(b.update(&s, &y), UpdateOutcome::Skipped);
        assert_eq!(b.to_dense(), b0);
        assert_eq!(b.skipped(), 1);
    }

    #[test]
    fn bfgs_stays_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 4;
        for kind in [QnKind::Bfgs, QnKind::LBfgs] {
            let mut b = HessianApprox::new(kind, n, 1.0, 3, QnSafeguards::default());
            for _ in 0..12 {
                let s = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                let y = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                if b.update(&s, &y) == UpdateOutcome::Applied {
                    assert!(y.dot(&s) > 0.0);
                    assert!(secant_residual(&b, &s, &y) <= 1e-10);
                    let dense = b.to_dense();
                    let sym = (&dense + dense.transpose()) * 0.5;
                    assert!(
                        sym.cholesky().is_some(),
                        "{kind:?} lost positive definiteness"
                    );
                }
            }
            assert!(b.applied() > 0 && b.skipped() > 0);
        }
    }

    #[test]
    fn restricted_dense_matches_submatrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 5;
        let h = random_spd(n, &mut rng);
        let mut b = HessianApprox::new(QnKind::LBfgs, n, 1.0, 4, QnSafeguards::default());
        for _ in 0..3 {
            let s = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            b.update(&s, &(&h * &s));
        }
        let full = b.to_dense();
        let idx = [0, 2, 4];
        let sub = b.restricted_dense(&idx);
        for a in 0..3 {
            for c in 0..3 {
                assert!((sub[(a, c)] - full[(idx[a], idx[c])]).abs() < 1e-12);
            }
        }
    }
}
