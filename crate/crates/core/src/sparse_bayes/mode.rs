use nalgebra::{DMatrix, DVector};

use super::{sigmoid, softplus, TrainConfig, BETA_FLOOR};
use crate::linalg::{cholesky_jittered, weighted_gram};
use crate::{Error, Result};

/// Posterior mode of the weights for fixed precisions.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    /// Most probable weights.
    pub mu: DVector<f64>,
    /// `σ(φ(x_i)ᵀ μ)` for every training point.
    pub y_hat: DVector<f64>,
    /// `y_hat (1 − y_hat)`, floored at [`BETA_FLOOR`].
    pub beta: DVector<f64>,
    pub steps: usize,
    /// Infinity norm of `Φᵀ(t − y) − Aμ` at `mu`.
    pub gradient_norm: f64,
}

/// Log posterior up to a constant: Bernoulli log likelihood minus `½ wᵀAw`.
pub(crate) fn log_posterior(targets: &DVector<f64>, latent: &DVector<f64>, w: &DVector<f64>, alpha: &[f64]) -> f64 {
    let loglik: f64 = targets
        .iter()
        .zip(latent.iter())
        .map(|(&t, &a)| t * a - softplus(a))
        .sum();
    let penalty: f64 = w.iter().zip(alpha).map(|(wi, ai)| ai * wi * wi).sum();
    loglik - 0.5 * penalty
}

pub(crate) fn beta_of(y_hat: &DVector<f64>) -> DVector<f64> {
    y_hat.map(|y| (y * (1.0 - y)).max(BETA_FLOOR))
}

/// Newton/IRLS search for the mode of `log p(t|w) + log p(w|α)`, halving the
/// step until the objective does not decrease. Stops once
/// `‖Φᵀ(t − y) − Aμ‖_∞ < cfg.irls_tol`.
pub fn find_mode(
    targets: &DVector<f64>,
    phi: &DMatrix<f64>,
    alpha: &[f64],
    warm_start: Option<&DVector<f64>>,
    cfg: &TrainConfig,
) -> Result<Mode> {
    let m = phi.ncols();
    if alpha.len() != m {
        return Err(Error::LengthMismatch { expected: m, found: alpha.len() });
    }
    if targets.len() != phi.nrows() {
        return Err(Error::LengthMismatch { expected: phi.nrows(), found: targets.len() });
    }
    if alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(Error::invalid("precisions must be finite and positive"));
    }

    let mut w = match warm_start {
        Some(w0) if w0.len() == m => w0.clone(),
        _ => DVector::zeros(m),
    };
    let mut latent = phi * &w;
    let mut objective = log_posterior(targets, &latent, &w, alpha);
    let mut gradient_norm = f64::INFINITY;

    for step in 0..=cfg.irls_max_steps {
        let y_hat = latent.map(sigmoid);
        let mut gradient = phi.tr_mul(&(targets - &y_hat));
        for (g, (wi, ai)) in gradient.iter_mut().zip(w.iter().zip(alpha)) {
            *g -= ai * wi;
        }
        gradient_norm = gradient.amax();
        if gradient_norm < cfg.irls_tol {
            let beta = beta_of(&y_hat);
            return Ok(Mode { mu: w, y_hat, beta, steps: step, gradient_norm });
        }
        if step == cfg.irls_max_steps {
            break;
        }

        let beta = beta_of(&y_hat);
        let hessian = weighted_gram(phi, &beta, alpha);
        let chol = cholesky_jittered(&hessian, cfg.jitter)?;
        let direction = chol.solve(&gradient);

        let slack = 1e-12 * (1.0 + objective.abs());
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = &w + &direction * lambda;
            let cand_latent = phi * &candidate;
            let cand_objective = log_posterior(targets, &cand_latent, &candidate, alpha);
            if cand_objective >= objective - slack {
                w = candidate;
                latent = cand_latent;
                objective = cand_objective;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    Err(Error::ModeSearchFailure {
        steps: cfg.irls_max_steps,
        gradient_norm,
        last_iterate: w.iter().copied().collect(),
    })
}
