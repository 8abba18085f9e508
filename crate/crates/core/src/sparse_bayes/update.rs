use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use super::mode::{find_mode, log_posterior};
use super::TrainConfig;
use crate::linalg::{cholesky_jittered, dot, log_det, weighted_gram};
use crate::{Error, Result};

/// Laplace approximation of the current sparse model.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveModel {
    /// Candidate-basis indices in the model, ascending.
    pub active_indices: Vec<usize>,
    /// Precision of each active basis, aligned with `active_indices`.
    pub alpha: Vec<f64>,
    /// Posterior mean (mode) of the active weights.
    pub mu: DVector<f64>,
    /// Posterior covariance `(ΦᵀBΦ + A)⁻¹`.
    pub sigma: DMatrix<f64>,
    /// Laplace log marginal likelihood at the mode.
    pub log_marginal: f64,
    pub y_hat: DVector<f64>,
    pub beta: DVector<f64>,
}

impl ActiveModel {
    pub fn len(&self) -> usize {
        self.active_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active_indices.is_empty()
    }

    pub fn position(&self, basis: usize) -> Option<usize> {
        self.active_indices.binary_search(&basis).ok()
    }
}

/// Sparsity and quality factors for every candidate basis.
///
/// `raw_*` hold `s` and `q` computed with the current model as is; `sparsity`
/// and `quality` are `s_m`, `q_m`, i.e. the same quantities with basis `m`
/// left out of the model. Both coincide for inactive bases.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTable {
    pub raw_sparsity: Vec<f64>,
    pub raw_quality: Vec<f64>,
    pub sparsity: Vec<f64>,
    pub quality: Vec<f64>,
    /// `q_m² − s_m`.
    pub theta: Vec<f64>,
    /// Active bases whose `α_m − s` was non-positive and got clamped.
    pub flagged: Vec<usize>,
}

impl FactorTable {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Columns of `full_phi` listed in `indices`.
pub fn active_design(full_phi: &DMatrix<f64>, indices: &[usize]) -> DMatrix<f64> {
    full_phi.select_columns(indices)
}

fn laplace_evidence(loglik_minus_penalty: f64, alpha: &[f64], log_det_hessian: f64) -> f64 {
    let log_alpha: f64 = alpha.iter().map(|a| a.ln()).sum();
    loglik_minus_penalty + 0.5 * log_alpha - 0.5 * log_det_hessian
}

/// Laplace log marginal likelihood
/// `log p(t|w*) + log p(w*|α) + ½ log|Σ| + (M/2) log 2π` at the mode.
pub fn log_marginal_likelihood(
    targets: &DVector<f64>,
    active_phi: &DMatrix<f64>,
    alpha: &[f64],
    cfg: &TrainConfig,
) -> Result<f64> {
    let mode = find_mode(targets, active_phi, alpha, None, cfg)?;
    let hessian = weighted_gram(active_phi, &mode.beta, alpha);
    let chol = cholesky_jittered(&hessian, cfg.jitter)?;
    let latent = active_phi * &mode.mu;
    Ok(laplace_evidence(
        log_posterior(targets, &latent, &mode.mu, alpha),
        alpha,
        log_det(&chol),
    ))
}

/// Re-fits the Laplace approximation for the given active set and computes the
/// factor table over all candidate bases (columns of `full_phi`).
pub fn update_model(
    targets: &DVector<f64>,
    full_phi: &DMatrix<f64>,
    active_indices: &[usize],
    alpha: &[f64],
    warm_start: Option<&DVector<f64>>,
    cfg: &TrainConfig,
) -> Result<(ActiveModel, FactorTable)> {
    let (model, ctx) = refit(targets, full_phi, active_indices, alpha, warm_start, cfg)?;
    let table = ctx.table(full_phi);
    Ok((model, table))
}

/// Laplace refit without the factor table; factors are then computed on
/// demand from the returned context.
pub(crate) fn refit(
    targets: &DVector<f64>,
    full_phi: &DMatrix<f64>,
    active_indices: &[usize],
    alpha: &[f64],
    warm_start: Option<&DVector<f64>>,
    cfg: &TrainConfig,
) -> Result<(ActiveModel, FactorContext)> {
    if active_indices.is_empty() {
        return Err(Error::invalid("model needs at least one active basis"));
    }
    if active_indices.len() != alpha.len() {
        return Err(Error::LengthMismatch { expected: active_indices.len(), found: alpha.len() });
    }
    if active_indices.windows(2).any(|w| w[0] >= w[1]) || *active_indices.last().unwrap() >= full_phi.ncols() {
        return Err(Error::invalid("active indices must be ascending and in range"));
    }

    let phi = active_design(full_phi, active_indices);
    let mode = find_mode(targets, &phi, alpha, warm_start, cfg)?;
    let hessian = weighted_gram(&phi, &mode.beta, alpha);
    let chol = cholesky_jittered(&hessian, cfg.jitter)?;
    let mut sigma = chol.inverse();
    sigma = (&sigma + sigma.transpose()) * 0.5;

    let latent = &phi * &mode.mu;
    let log_marginal = laplace_evidence(
        log_posterior(targets, &latent, &mode.mu, alpha),
        alpha,
        log_det(&chol),
    );

    let ctx = FactorContext::new(
        targets,
        &phi,
        active_indices,
        alpha,
        &mode.mu,
        &mode.y_hat,
        &mode.beta,
        &sigma,
        cfg.jitter,
    );

    let model = ActiveModel {
        active_indices: active_indices.to_vec(),
        alpha: alpha.to_vec(),
        mu: mode.mu,
        sigma,
        log_marginal,
        y_hat: mode.y_hat,
        beta: mode.beta,
    };
    Ok((model, ctx))
}

/// Factors of a single candidate basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BasisFactors {
    pub raw_sparsity: f64,
    pub raw_quality: f64,
    pub sparsity: f64,
    pub quality: f64,
    pub theta: f64,
    pub flagged: bool,
}

/// Everything needed to evaluate `s`, `q`, `s_m`, `q_m` for one basis in
/// `O(n_t · M + M²)`.
pub(crate) struct FactorContext {
    /// `BΦ`, `n_t × M`.
    b_phi: DMatrix<f64>,
    /// `Bt̂ = BΦμ + (t − y)`.
    b_t_hat: DVector<f64>,
    /// `Σ ΦᵀBt̂`.
    sigma_v: DVector<f64>,
    sigma: DMatrix<f64>,
    beta: DVector<f64>,
    active_indices: Vec<usize>,
    alpha: Vec<f64>,
    jitter: f64,
}

impl FactorContext {
    #[allow(clippy::too_many_arguments)]
    fn new(
        targets: &DVector<f64>,
        active_phi: &DMatrix<f64>,
        active_indices: &[usize],
        alpha: &[f64],
        mu: &DVector<f64>,
        y_hat: &DVector<f64>,
        beta: &DVector<f64>,
        sigma: &DMatrix<f64>,
        jitter: f64,
    ) -> Self {
        let mut b_phi = active_phi.clone();
        for (i, mut row) in b_phi.row_iter_mut().enumerate() {
            row *= beta[i];
        }
        let b_t_hat = &b_phi * mu + (targets - y_hat);
        let sigma_v = sigma * active_phi.tr_mul(&b_t_hat);
        FactorContext {
            b_phi,
            b_t_hat,
            sigma_v,
            sigma: sigma.clone(),
            beta: beta.clone(),
            active_indices: active_indices.to_vec(),
            alpha: alpha.to_vec(),
            jitter,
        }
    }

    pub(crate) fn basis(&self, full_phi: &DMatrix<f64>, m: usize) -> BasisFactors {
        let n = full_phi.nrows();
        let col = &full_phi.as_slice()[m * n..(m + 1) * n];
        let b_phi = self.b_phi.as_slice();
        // φ_mᵀ B Φ
        let cross = DVector::from_fn(self.b_phi.ncols(), |k, _| dot(&b_phi[k * n..(k + 1) * n], col));
        let b_col: Vec<f64> = col.iter().zip(self.beta.iter()).map(|(p, b)| b * p).collect();
        let phi_b_phi = dot(&b_col, col);
        let raw_sparsity = phi_b_phi - cross.dot(&(&self.sigma * &cross));
        let raw_quality = dot(col, self.b_t_hat.as_slice()) - cross.dot(&self.sigma_v);

        let (mut sparsity, mut quality, mut flagged) = (raw_sparsity, raw_quality, false);
        if let Ok(k) = self.active_indices.binary_search(&m) {
            let a = self.alpha[k];
            let mut denom = a - raw_sparsity;
            if denom <= 0.0 {
                denom = self.jitter;
                flagged = true;
            }
            sparsity = a * raw_sparsity / denom;
            quality = a * raw_quality / denom;
        }
        BasisFactors {
            raw_sparsity,
            raw_quality,
            sparsity,
            quality,
            theta: quality * quality - sparsity,
            flagged,
        }
    }

    pub(crate) fn table(&self, full_phi: &DMatrix<f64>) -> FactorTable {
        let n_basis = full_phi.ncols();
        let mut table = FactorTable {
            raw_sparsity: Vec::with_capacity(n_basis),
            raw_quality: Vec::with_capacity(n_basis),
            sparsity: Vec::with_capacity(n_basis),
            quality: Vec::with_capacity(n_basis),
            theta: Vec::with_capacity(n_basis),
            flagged: Vec::new(),
        };
        for m in 0..n_basis {
            let f = self.basis(full_phi, m);
            table.raw_sparsity.push(f.raw_sparsity);
            table.raw_quality.push(f.raw_quality);
            table.sparsity.push(f.sparsity);
            table.quality.push(f.quality);
            table.theta.push(f.theta);
            if f.flagged {
                table.flagged.push(m);
            }
        }
        table
    }
}

/// Sparsity and quality factors of every column of `full_phi` under the
/// Gaussian approximation with pseudo-targets `t̂ = Φμ + B⁻¹(t − y)`:
///
/// * `s = φᵀBφ − φᵀBΦ Σ ΦᵀBφ`
/// * `q = φᵀBt̂ − φᵀBΦ Σ ΦᵀBt̂`
/// * active bases: `s_m = α s/(α − s)`, `q_m = α q/(α − s)`; inactive: `s_m = s`, `q_m = q`.
#[allow(clippy::too_many_arguments)]
pub fn compute_factors(
    targets: &DVector<f64>,
    full_phi: &DMatrix<f64>,
    active_phi: &DMatrix<f64>,
    active_indices: &[usize],
    alpha: &[f64],
    mu: &DVector<f64>,
    y_hat: &DVector<f64>,
    beta: &DVector<f64>,
    sigma: &DMatrix<f64>,
    jitter: f64,
) -> FactorTable {
    FactorContext::new(targets, active_phi, active_indices, alpha, mu, y_hat, beta, sigma, jitter).table(full_phi)
}

