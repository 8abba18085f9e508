#![allow(dead_code)]

//! Independent reference computations shared by the integration tests. Only
//! dense textbook formulas here; nothing calls into the library's numerics.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rvsm_core::{KernelSpec, Point3};

pub fn sigma(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

pub fn log1pexp(a: f64) -> f64 {
    if a > 30.0 {
        a
    } else {
        a.exp().ln_1p()
    }
}

/// Negative log posterior `−Σ[t a − ln(1+eᵃ)] + ½ Σ α w²`.
pub fn neg_log_posterior(t: &DVector<f64>, phi: &DMatrix<f64>, alpha: &[f64], w: &DVector<f64>) -> f64 {
    let a = phi * w;
    let mut f = 0.0;
    for i in 0..t.len() {
        f -= t[i] * a[i] - log1pexp(a[i]);
    }
    for (k, wk) in w.iter().enumerate() {
        f += 0.5 * alpha[k] * wk * wk;
    }
    f
}

/// Central finite-difference Hessian of [`neg_log_posterior`].
pub fn fd_hessian(t: &DVector<f64>, phi: &DMatrix<f64>, alpha: &[f64], w: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let m = w.len();
    let f = |dw: &[(usize, f64)]| {
        let mut x = w.clone();
        for &(k, d) in dw {
            x[k] += d;
        }
        neg_log_posterior(t, phi, alpha, &x)
    };
    DMatrix::from_fn(m, m, |i, j| {
        (f(&[(i, h), (j, h)]) - f(&[(i, h), (j, -h)]) - f(&[(i, -h), (j, h)]) + f(&[(i, -h), (j, -h)]))
            / (4.0 * h * h)
    })
}

/// Posterior mode by plain Newton iteration with explicit inverses.
pub fn newton_mode(t: &DVector<f64>, phi: &DMatrix<f64>, alpha: &[f64]) -> DVector<f64> {
    let m = phi.ncols();
    let a_mat = DMatrix::from_diagonal(&DVector::from_column_slice(alpha));
    let mut w = DVector::zeros(m);
    for _ in 0..200 {
        let y = (phi * &w).map(sigma);
        let grad = phi.transpose() * (t - &y) - &a_mat * &w;
        if grad.amax() < 1e-12 {
            break;
        }
        let b = DMatrix::from_diagonal(&y.map(|v| v * (1.0 - v)));
        let hess = phi.transpose() * b * phi + &a_mat;
        let step = hess.try_inverse().expect("hessian invertible") * grad;
        let f0 = neg_log_posterior(t, phi, alpha, &w);
        let mut lambda = 1.0;
        while lambda > 1e-10 && neg_log_posterior(t, phi, alpha, &(&w + &step * lambda)) > f0 + 1e-14 {
            lambda *= 0.5;
        }
        w += step * lambda;
    }
    w
}

/// Laplace evidence `−f(w*) + ½ Σ ln α − ½ ln det H` with a dense determinant.
pub fn laplace_evidence(t: &DVector<f64>, phi: &DMatrix<f64>, alpha: &[f64]) -> f64 {
    let w = newton_mode(t, phi, alpha);
    let y = (phi * &w).map(sigma);
    let b = DMatrix::from_diagonal(&y.map(|v| v * (1.0 - v)));
    let hess = phi.transpose() * b * phi + DMatrix::from_diagonal(&DVector::from_column_slice(alpha));
    -neg_log_posterior(t, phi, alpha, &w) + 0.5 * alpha.iter().map(|a| a.ln()).sum::<f64>()
        - 0.5 * hess.determinant().ln()
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Point3> {
    (0..n)
        .map(|_| [rng.random::<f64>() * scale, rng.random::<f64>() * scale, rng.random::<f64>() * scale])
        .collect()
}

/// Random 0/1 targets with both values present.
pub fn random_targets(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let t = DVector::from_fn(n, |_, _| if rng.random_bool(0.5) { 1.0 } else { 0.0 });
        let ones = t.sum();
        if ones > 0.0 && ones < n as f64 {
            return t;
        }
    }
}

/// Full candidate design matrix (bias column first when enabled).
pub fn design(kernel: &KernelSpec, points: &[Point3]) -> DMatrix<f64> {
    kernel.design_matrix(points, points).unwrap()
}

/// Distinct sorted indices drawn from `0..n`.
pub fn random_subset(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut idx = rand::seq::index::sample(rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Best Laplace evidence over every nonempty subset of the candidate
/// columns, each subset's precisions optimized by cyclic golden-section
/// search in `ln α`.
pub fn exhaustive_best(t: &DVector<f64>, full: &DMatrix<f64>) -> f64 {
    let n_b = full.ncols();
    let mut best = f64::NEG_INFINITY;
    for mask in 1u32..(1 << n_b) {
        let idx: Vec<usize> = (0..n_b).filter(|j| mask & (1 << j) != 0).collect();
        let phi = full.select_columns(&idx);
        let mut log_alpha = vec![0.0; idx.len()];
        let eval = |la: &[f64]| {
            let alpha: Vec<f64> = la.iter().map(|v| v.exp()).collect();
            laplace_evidence(t, &phi, &alpha)
        };
        let mut current = eval(&log_alpha);
        for _ in 0..60 {
            let before = current;
            for k in 0..idx.len() {
                let x = golden_max(
                    |v| {
                        let mut trial = log_alpha.clone();
                        trial[k] = v;
                        eval(&trial)
                    },
                    -8.0,
                    14.0,
                    1e-6,
                );
                log_alpha[k] = x;
                current = eval(&log_alpha);
            }
            if (current - before).abs() < 1e-9 {
                break;
            }
        }
        best = best.max(current);
    }
    best
}

fn select(full: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    full.select_columns(idx)
}

pub struct Dense {
    pub s: Vec<f64>,
    pub q: Vec<f64>,
    pub s_m: Vec<f64>,
    pub q_m: Vec<f64>,
}

/// Factors through `C = B⁻¹ + Φ A⁻¹ Φᵀ`: `s = φᵀC⁻¹φ`, `q = φᵀC⁻¹t̂`, and for
/// active bases the same with basis `m` removed from `C`.
pub fn dense_factors(
    t: &DVector<f64>,
    full: &DMatrix<f64>,
    idx: &[usize],
    alpha: &[f64],
    mu: &DVector<f64>,
    y: &DVector<f64>,
) -> Dense {
    let n = t.len();
    let beta = y.map(|v| v * (1.0 - v));
    let phi = select(full, idx);
    let b_inv = DMatrix::from_diagonal(&beta.map(|b| 1.0 / b));
    let t_hat = &phi * mu + &b_inv * (t - y);
    let mut c = b_inv.clone();
    for (k, &j) in idx.iter().enumerate() {
        let col = full.column(j);
        c += col * col.transpose() / alpha[k];
    }
    let c_inv = c.clone().try_inverse().unwrap();
    let mut out = Dense { s: vec![], q: vec![], s_m: vec![], q_m: vec![] };
    for m in 0..full.ncols() {
        let col = full.column(m).into_owned();
        out.s.push(col.dot(&(&c_inv * &col)));
        out.q.push(col.dot(&(&c_inv * &t_hat)));
        match idx.iter().position(|&j| j == m) {
            Some(k) => {
                let c_minus = &c - &col * col.transpose() / alpha[k];
                let inv = c_minus.try_inverse().unwrap();
                out.s_m.push(col.dot(&(&inv * &col)));
                out.q_m.push(col.dot(&(&inv * &t_hat)));
            }
            None => {
                out.s_m.push(out.s[m]);
                out.q_m.push(out.q[m]);
            }
        }
    }
    assert_eq!(c.nrows(), n);
    out
}

/// The quoted formulas evaluated with explicit matrices:
/// `s = φᵀBφ − φᵀBΦΣΦᵀBφ`, `q = φᵀBt̂ − φᵀBΦΣΦᵀBt̂`.
pub fn literal_factors(
    t: &DVector<f64>,
    full: &DMatrix<f64>,
    idx: &[usize],
    alpha: &[f64],
    mu: &DVector<f64>,
    y: &DVector<f64>,
) -> (Vec<f64>, Vec<f64>) {
    let beta = y.map(|v| v * (1.0 - v));
    let b = DMatrix::from_diagonal(&beta);
    let phi = select(full, idx);
    let a = DMatrix::from_diagonal(&DVector::from_column_slice(alpha));
    let sigma = (phi.transpose() * &b * &phi + a).try_inverse().unwrap();
    let t_hat = &phi * mu + b.clone().try_inverse().unwrap() * (t - y);
    let proj = &b - &b * &phi * sigma * phi.transpose() * &b;
    let s = (0..full.ncols()).map(|m| full.column(m).dot(&(&proj * full.column(m)))).collect();
    let q = (0..full.ncols()).map(|m| full.column(m).dot(&(&proj * &t_hat))).collect();
    (s, q)
}
