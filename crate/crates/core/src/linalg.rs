use nalgebra::linalg::Cholesky;
use nalgebra::{DMatrix, DVector, Dyn};

use crate::{Error, Result};

/// Largest diagonal jitter tried before giving up on a factorization.
pub(crate) const MAX_JITTER: f64 = 1e-4;

/// Cholesky factorization, escalating a diagonal jitter ×10 from `jitter`
/// up to [`MAX_JITTER`] when the plain factorization fails.
pub(crate) fn cholesky_jittered(m: &DMatrix<f64>, jitter: f64) -> Result<Cholesky<f64, Dyn>> {
    if let Some(ch) = Cholesky::new(m.clone()) {
        return Ok(ch);
    }
    let mut eps = jitter;
    while eps <= MAX_JITTER * (1.0 + 1e-12) {
        let mut jittered = m.clone();
        for i in 0..m.nrows() {
            jittered[(i, i)] += eps;
        }
        if let Some(ch) = Cholesky::new(jittered) {
            return Ok(ch);
        }
        eps *= 10.0;
    }
    Err(Error::NotPositiveDefinite { jitter: eps / 10.0 })
}

pub(crate) fn log_det(ch: &Cholesky<f64, Dyn>) -> f64 {
    #[allow(unused_imports)]
    use num_traits::Float;
    let l = ch.l_dirty();
    (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
}

/// `Φᵀ diag(w) Φ + diag(alpha)`.
pub(crate) fn weighted_gram(phi: &DMatrix<f64>, weights: &DVector<f64>, alpha: &[f64]) -> DMatrix<f64> {
    let (n, m) = phi.shape();
    let mut scaled = phi.clone();
    for j in 0..m {
        for (x, w) in scaled.column_mut(j).iter_mut().zip(weights.iter()) {
            *x *= w;
        }
    }
    let data = phi.as_slice();
    let sdata = scaled.as_slice();
    let mut h = DMatrix::zeros(m, m);
    for i in 0..m {
        let a = &sdata[i * n..(i + 1) * n];
        for j in i..m {
            let b = &data[j * n..(j + 1) * n];
            let v = dot(a, b);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
        h[(i, i)] += alpha[i];
    }
    h
}

/// Dot product with four independent accumulators.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jitter_rescues_semidefinite_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(Cholesky::new(m.clone()).is_none());
        assert!(cholesky_jittered(&m, 1e-8).is_ok());
    }

    #[test]
    fn indefinite_matrix_fails() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(cholesky_jittered(&m, 1e-8), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn log_det_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![2.0, 3.0, 4.0]));
        let ch = cholesky_jittered(&m, 1e-8).unwrap();
        assert!((log_det(&ch) - 24f64.ln()).abs() < 1e-14);
    }
}
