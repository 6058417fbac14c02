//! Solver benchmark problems: charges on a sphere, constrained least
//! squares, and the largest small polygon.

use std::f64::consts::PI;

use adis_nlp::{Constraints, NlpProblem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{BenchError, Result};

/// A problem together with its starting point.
pub struct Fixture {
    pub name: String,
    pub problem: NlpProblem,
    pub x0: DVector<f64>,
}

/// Coulomb energy of `n_p` unit charges constrained to the unit sphere.
///
/// Variables are stored as `(x_1, y_1, z_1, x_2, ...)`. The starting point
/// is a seeded set of uniform draws from the cube projected onto the sphere.
pub fn electron_problem(n_p: usize, seed: u64) -> Result<Fixture> {
    if n_p < 2 {
        return Err(BenchError::InvalidSpec(format!(
            "electron problem needs n_p >= 2, got {n_p}"
        )));
    }
    let n = 3 * n_p;
    let objective = move |v: &DVector<f64>| {
        let mut f = 0.0;
        let mut g = DVector::zeros(n);
        for i in 0..n_p {
            for j in i + 1..n_p {
                let d = [
                    v[3 * i] - v[3 * j],
                    v[3 * i + 1] - v[3 * j + 1],
                    v[3 * i + 2] - v[3 * j + 2],
                ];
                let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                let inv = 1.0 / r2.sqrt();
                f += inv;
                let coef = inv * inv * inv;
                for a in 0..3 {
                    g[3 * i + a] -= coef * d[a];
                    g[3 * j + a] += coef * d[a];
                }
            }
        }
        (f, g)
    };
    let sphere = Constraints::new(n_p, move |v: &DVector<f64>| {
        let mut c = DVector::zeros(n_p);
        let mut jac = DMatrix::zeros(n_p, n);
        for i in 0..n_p {
            c[i] = v[3 * i].powi(2) + v[3 * i + 1].powi(2) + v[3 * i + 2].powi(2) - 1.0;
            for a in 0..3 {
                jac[(i, 3 * i + a)] = 2.0 * v[3 * i + a];
            }
        }
        (c, jac)
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x0 = DVector::zeros(n);
    for i in 0..n_p {
        let mut p = [0.0f64; 3];
        loop {
            for v in p.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if norm > 1e-3 {
                for (a, v) in p.iter().enumerate() {
                    x0[3 * i + a] = v / norm;
                }
                break;
            }
        }
    }
    Ok(Fixture {
        name: format!("electron-{n_p}"),
        problem: NlpProblem::new(n, objective).with_equalities(sphere),
        x0,
    })
}

/// `min ||A x - b||^2` subject to `C x - d >= 0`.
#[derive(Clone, Debug)]
pub struct NnlsInstance {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
}

impl NnlsInstance {
    /// Standard-normal `A` and `b` with plain nonnegativity (`C = I`, `d = 0`).
    pub fn random(rows: usize, cols: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal));
        let b = DVector::from_fn(rows, |_, _| rng.sample(StandardNormal));
        Self {
            a,
            b,
            c: DMatrix::identity(cols, cols),
            d: DVector::zeros(cols),
        }
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        (&self.a * x - &self.b).norm_squared()
    }
}

pub fn nnls_problem(inst: &NnlsInstance) -> Result<Fixture> {
    let (m, n) = inst.a.shape();
    if inst.b.len() != m || inst.c.ncols() != n || inst.d.len() != inst.c.nrows() {
        return Err(BenchError::InvalidSpec(format!(
            "inconsistent NNLS shapes: A {m}x{n}, b {}, C {}x{}, d {}",
            inst.b.len(),
            inst.c.nrows(),
            inst.c.ncols(),
            inst.d.len()
        )));
    }
    let (a, b) = (inst.a.clone(), inst.b.clone());
    let ata = a.tr_mul(&a);
    let atb = a.tr_mul(&b);
    let objective = move |x: &DVector<f64>| {
        let r = &a * x - &b;
        (r.norm_squared(), (&ata * x - &atb) * 2.0)
    };
    let (c, d) = (inst.c.clone(), inst.d.clone());
    let rows = c.nrows();
    let ineq = Constraints::new(rows, move |x: &DVector<f64>| (&c * x - &d, c.clone()));
    Ok(Fixture {
        name: format!("nnls-{m}x{n}"),
        problem: NlpProblem::new(n, objective).with_inequalities(ineq),
        x0: DVector::zeros(n),
    })
}

/// Largest polygon of unit diameter, in polar coordinates.
///
/// Variables are `(r_1..r_nv, theta_1..theta_nv)`. The last vertex is pinned
/// to the origin (`r = 0`, `theta = pi`) through its bounds, so the fan
/// `0.5 sum r_i r_{i+1} sin(theta_{i+1} - theta_i)` is the area of an
/// `n_v`-gon. The objective is negated for minimization.
pub fn polygon_problem(n_v: usize) -> Result<Fixture> {
    if n_v < 3 {
        return Err(BenchError::InvalidSpec(format!(
            "polygon needs n_v >= 3, got {n_v}"
        )));
    }
    let n = 2 * n_v;
    let objective = move |x: &DVector<f64>| {
        let mut g = DVector::zeros(n);
        let f = -polygon_area_with_grad(x, n_v, Some(&mut g));
        (f, -g)
    };
    let pairs = n_v * (n_v - 1) / 2;
    let count = pairs + n_v - 1;
    let ineq = Constraints::new(count, move |x: &DVector<f64>| {
        let (r, t) = (x.rows(0, n_v), x.rows(n_v, n_v));
        let mut c = DVector::zeros(count);
        let mut jac = DMatrix::zeros(count, n);
        let mut k = 0;
        for i in 0..n_v {
            for j in i + 1..n_v {
                let cos = (t[i] - t[j]).cos();
                let sin = (t[i] - t[j]).sin();
                c[k] = 1.0 - (r[i] * r[i] + r[j] * r[j] - 2.0 * r[i] * r[j] * cos);
                jac[(k, i)] = -(2.0 * r[i] - 2.0 * r[j] * cos);
                jac[(k, j)] = -(2.0 * r[j] - 2.0 * r[i] * cos);
                jac[(k, n_v + i)] = -2.0 * r[i] * r[j] * sin;
                jac[(k, n_v + j)] = 2.0 * r[i] * r[j] * sin;
                k += 1;
            }
        }
        for i in 0..n_v - 1 {
            c[k] = t[i + 1] - t[i];
            jac[(k, n_v + i + 1)] = 1.0;
            jac[(k, n_v + i)] = -1.0;
            k += 1;
        }
        (c, jac)
    });
    let mut lower = DVector::zeros(n);
    let mut upper = DVector::from_element(n, PI);
    for i in 0..n_v {
        upper[i] = f64::INFINITY;
    }
    upper[n_v - 1] = 0.0;
    lower[n - 1] = PI;
    let problem = NlpProblem::new(n, objective)
        .with_inequalities(ineq)
        .with_bounds(lower, upper)
        .map_err(|e| BenchError::InvalidSpec(e.to_string()))?;
    Ok(Fixture {
        name: format!("polygon-{n_v}"),
        problem,
        x0: polygon_start(n_v, 0),
    })
}

/// Regular fan `r_i = 0.5`, `theta_i = i pi / (n_v + 1)` for seed 0; other
/// seeds jitter radii by up to 0.1 and angles by up to a quarter of the
/// fan spacing, which keeps the start feasible and ordered.
pub fn polygon_start(n_v: usize, seed: u64) -> DVector<f64> {
    let mut x = DVector::zeros(2 * n_v);
    let spacing = PI / (n_v + 1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n_v {
        let (dr, dt) = if seed == 0 {
            (0.0, 0.0)
        } else {
            (
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.25..0.25) * spacing,
            )
        };
        x[i] = 0.5 + dr;
        x[n_v + i] = (i + 1) as f64 * spacing + dt;
    }
    x[n_v - 1] = 0.0;
    x[2 * n_v - 1] = PI;
    x
}

/// Original (maximized) polygon objective.
pub fn polygon_area(x: &DVector<f64>, n_v: usize) -> f64 {
    polygon_area_with_grad(x, n_v, None)
}

/// Largest squared distance between two vertices.
pub fn polygon_max_sq_distance(x: &DVector<f64>, n_v: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..n_v {
        for j in i + 1..n_v {
            let (ri, rj) = (x[i], x[j]);
            let d = ri * ri + rj * rj - 2.0 * ri * rj * (x[n_v + i] - x[n_v + j]).cos();
            worst = worst.max(d);
        }
    }
    worst
}

fn polygon_area_with_grad(
    x: &DVector<f64>,
    n_v: usize,
    mut grad: Option<&mut DVector<f64>>,
) -> f64 {
    let mut area = 0.0;
    for i in 0..n_v - 1 {
        let (ri, rj) = (x[i], x[i + 1]);
        let dt = x[n_v + i + 1] - x[n_v + i];
        let (sin, cos) = dt.sin_cos();
        area += 0.5 * ri * rj * sin;
        if let Some(g) = grad.as_deref_mut() {
            g[i] += 0.5 * rj * sin;
            g[i + 1] += 0.5 * ri * sin;
            g[n_v + i + 1] += 0.5 * ri * rj * cos;
            g[n_v + i] -= 0.5 * ri * rj * cos;
        }
    }
    area
}
