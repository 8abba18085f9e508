use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::update::{refit, update_model, ActiveModel, BasisFactors, FactorContext, FactorTable};
use super::{action_from, Action, BinaryRvmModel, TrainConfig, TrainingSet, VisitPolicy};
use crate::{ClassId, Error, KernelSpec, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    Add,
    Delete,
    Reestimate,
}

/// One accepted hyperparameter action and the model state after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStep {
    pub basis: usize,
    pub kind: ActionKind,
    pub log_marginal: f64,
    pub active_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub initial_basis: usize,
    pub initial_log_marginal: f64,
    /// Model updates attempted, accepted or not.
    pub iterations: usize,
    pub converged: bool,
    pub final_log_marginal: f64,
    pub steps: Vec<TrainStep>,
    /// Actions whose model update failed numerically and were rolled back.
    pub rejected: usize,
    /// Actions rolled back because the refit lowered the log marginal.
    pub declined: usize,
    /// Times an active basis hit the `α − s ≤ 0` guard.
    pub flagged: usize,
}

impl TrainReport {
    /// Active basis count after initialization and after every accepted action.
    pub fn active_counts(&self) -> Vec<usize> {
        let first = 1;
        core::iter::once(first).chain(self.steps.iter().map(|s| s.active_count)).collect()
    }

    /// Laplace log marginal likelihood after initialization and after every accepted action.
    pub fn log_marginals(&self) -> Vec<f64> {
        core::iter::once(self.initial_log_marginal)
            .chain(self.steps.iter().map(|s| s.log_marginal))
            .collect()
    }

    /// Largest drop of the log marginal between consecutive accepted actions.
    pub fn max_log_marginal_drop(&self) -> f64 {
        self.log_marginals()
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }
}

/// Picks the non-bias candidate with the largest normalized projection
/// `(φᵀt)²/‖φ‖²` and its starting precision `‖φ‖⁴/(φᵀt)²`.
///
/// The projection is taken against whichever coding of the targets (`t` or
/// `1 − t`) is larger, so the choice does not depend on which class is
/// called positive.
pub fn select_initial_basis(
    targets: &DVector<f64>,
    full_phi: &DMatrix<f64>,
    bias_column: Option<usize>,
) -> Result<(usize, f64)> {
    let complement = targets.map(|t| 1.0 - t);
    let mut best: Option<(usize, f64, f64, f64)> = None;
    for (j, col) in full_phi.column_iter().enumerate() {
        if Some(j) == bias_column {
            continue;
        }
        let norm2 = col.norm_squared();
        if norm2 <= 0.0 {
            continue;
        }
        let pos = col.dot(targets);
        let neg = col.dot(&complement);
        let proj2 = (pos * pos).max(neg * neg);
        let score = proj2 / norm2;
        if score > 0.0 && best.is_none_or(|(_, s, _, _)| score > s) {
            best = Some((j, score, norm2, proj2));
        }
    }
    let (j, _, norm2, proj2) = best.ok_or(Error::DegenerateInitialization)?;
    Ok((j, norm2 / (proj2 / norm2)))
}

/// Single-basis starting model, refitted once.
pub fn initialize_model(
    targets: &DVector<f64>,
    full_phi: &DMatrix<f64>,
    bias_column: Option<usize>,
    cfg: &TrainConfig,
) -> Result<(ActiveModel, FactorTable)> {
    let (j, alpha) = select_initial_basis(targets, full_phi, bias_column)?;
    update_model(targets, full_phi, &[j], &[alpha], None, cfg)
}

/// Relative slack below which a drop in log marginal still counts as no change.
const DECREASE_SLACK: f64 = 1e-10;

/// Re-estimation sweeps tried after a deletion that lowered the log marginal.
const SETTLE_SWEEPS: usize = 3;

struct Sequential<'a> {
    targets: &'a DVector<f64>,
    full_phi: &'a DMatrix<f64>,
    cfg: &'a TrainConfig,
    model: ActiveModel,
    factors: FactorContext,
    report: TrainReport,
}

impl Sequential<'_> {
    fn is_active(&self, j: usize) -> bool {
        self.model.position(j).is_some()
    }

    fn current_alpha(&self, j: usize) -> f64 {
        self.model.position(j).map_or(f64::INFINITY, |k| self.model.alpha[k])
    }

    fn factors(&self, j: usize) -> BasisFactors {
        self.factors.basis(self.full_phi, j)
    }

    /// Applies `action` to basis `j` and refits. Returns false when the refit
    /// failed or lowered the log marginal; the previous state is kept then.
    fn apply(&mut self, j: usize, action: Action) -> bool {
        let mut indices = self.model.active_indices.clone();
        let mut alpha = self.model.alpha.clone();
        let mut warm: Vec<f64> = self.model.mu.iter().copied().collect();
        let kind = match action {
            Action::Reestimate(a) => {
                let k = self.model.position(j).expect("re-estimated basis is active");
                alpha[k] = a;
                ActionKind::Reestimate
            }
            Action::Add(a) => {
                let k = indices.partition_point(|&i| i < j);
                indices.insert(k, j);
                alpha.insert(k, a);
                warm.insert(k, 0.0);
                ActionKind::Add
            }
            Action::Delete => {
                let k = self.model.position(j).expect("deleted basis is active");
                indices.remove(k);
                alpha.remove(k);
                warm.remove(k);
                ActionKind::Delete
            }
            Action::NoOp => return true,
        };
        self.report.iterations += 1;
        let warm = DVector::from_vec(warm);
        match refit(self.targets, self.full_phi, &indices, &alpha, Some(&warm), self.cfg) {
            Ok((model, factors)) if self.lowers(model.log_marginal) => {
                let settled = match kind {
                    ActionKind::Delete => self.settle(model, factors).filter(|(m, _)| !self.lowers(m.log_marginal)),
                    _ => None,
                };
                match settled {
                    Some((model, factors)) => self.commit(j, kind, model, factors),
                    None => {
                        self.report.declined += 1;
                        false
                    }
                }
            }
            Ok((model, factors)) => self.commit(j, kind, model, factors),
            Err(_) => {
                self.report.rejected += 1;
                false
            }
        }
    }

    fn lowers(&self, log_marginal: f64) -> bool {
        log_marginal < self.model.log_marginal - DECREASE_SLACK * (1.0 + self.model.log_marginal.abs())
    }

    fn commit(&mut self, j: usize, kind: ActionKind, model: ActiveModel, factors: FactorContext) -> bool {
        self.report.steps.push(TrainStep { basis: j, kind, log_marginal: model.log_marginal, active_count: model.len() });
        self.model = model;
        self.factors = factors;
        true
    }

    /// Re-estimates the precisions of a tentative model for a few sweeps.
    /// A deletion that costs evidence on its own can pay off once the
    /// remaining bases adjust.
    fn settle(&self, mut model: ActiveModel, mut factors: FactorContext) -> Option<(ActiveModel, FactorContext)> {
        for _ in 0..SETTLE_SWEEPS {
            let mut moved = false;
            for k in 0..model.len() {
                let f = factors.basis(self.full_phi, model.active_indices[k]);
                let Action::Reestimate(a) = action_from(f.theta, f.sparsity, f.quality, true) else {
                    continue;
                };
                if (a.ln() - model.alpha[k].ln()).abs() < self.cfg.convergence_tol {
                    continue;
                }
                let mut alpha = model.alpha.clone();
                alpha[k] = a;
                let warm = model.mu.clone();
                let (m, c) = refit(self.targets, self.full_phi, &model.active_indices, &alpha, Some(&warm), self.cfg).ok()?;
                model = m;
                factors = c;
                moved = true;
            }
            if !moved {
                break;
            }
        }
        Some((model, factors))
    }

    /// Action for basis `j` given its factors, or `None` when it should be
    /// skipped: deleting the last basis, or a re-estimate below the
    /// convergence tolerance.
    fn candidate(&mut self, j: usize, f: &BasisFactors) -> Option<Action> {
        if f.flagged {
            self.report.flagged += 1;
        }
        let action = action_from(f.theta, f.sparsity, f.quality, self.is_active(j));
        match action {
            Action::NoOp => None,
            Action::Delete if self.model.len() == 1 => None,
            Action::Reestimate(a) => {
                let change = (a.ln() - self.current_alpha(j).ln()).abs();
                (change >= self.cfg.convergence_tol).then_some(action)
            }
            _ => Some(action),
        }
    }

    fn run_random(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.rng_seed);
        let mut order: Vec<usize> = (0..self.full_phi.ncols()).collect();
        // Bases whose last action was rolled back. Nothing has changed for
        // them until another action is accepted, so retrying would repeat
        // the same refit.
        let mut failed = alloc::vec![false; order.len()];
        loop {
            order.shuffle(&mut rng);
            let mut structural = false;
            let mut max_change = 0.0f64;
            for &j in &order {
                if self.report.iterations >= self.cfg.max_iterations {
                    return;
                }
                if failed[j] {
                    continue;
                }
                let f = self.factors(j);
                let Some(action) = self.candidate(j, &f) else {
                    continue;
                };
                let change = match action {
                    Action::Reestimate(a) => (a.ln() - self.current_alpha(j).ln()).abs(),
                    _ => 0.0,
                };
                if self.apply(j, action) {
                    max_change = max_change.max(change);
                    structural |= matches!(action, Action::Add(_) | Action::Delete);
                    failed.fill(false);
                } else {
                    failed[j] = true;
                }
            }
            if !structural && max_change < self.cfg.convergence_tol {
                self.report.converged = true;
                return;
            }
        }
    }

    /// Predicted change in log marginal likelihood for an action on a basis
    /// with factors `f` and current precision `alpha`.
    fn gain(f: &BasisFactors, alpha: f64, action: Action) -> f64 {
        let (s, q) = (f.sparsity, f.quality);
        let (big_s, big_q) = (f.raw_sparsity, f.raw_quality);
        match action {
            Action::Add(_) => 0.5 * ((q * q - s) / s + (s / (q * q)).ln()),
            Action::Reestimate(a) => {
                let delta_inv = 1.0 / a - 1.0 / alpha;
                0.5 * (big_q * big_q / (big_s + 1.0 / delta_inv) - (1.0 + big_s * delta_inv).ln())
            }
            Action::Delete => 0.5 * (big_q * big_q / (big_s - alpha) - (1.0 - big_s / alpha).ln()),
            Action::NoOp => 0.0,
        }
    }

    fn run_greedy(&mut self) {
        let mut failed: Vec<usize> = Vec::new();
        while self.report.iterations < self.cfg.max_iterations {
            let mut best: Option<(usize, Action, f64)> = None;
            for j in 0..self.full_phi.ncols() {
                if failed.contains(&j) {
                    continue;
                }
                let f = self.factors(j);
                let Some(action) = self.candidate(j, &f) else {
                    continue;
                };
                let gain = Self::gain(&f, self.current_alpha(j), action);
                let gain = if gain.is_nan() { f64::NEG_INFINITY } else { gain };
                if best.is_none_or(|(_, _, g)| gain > g) {
                    best = Some((j, action, gain));
                }
            }
            let Some((j, action, _)) = best else {
                self.report.converged = true;
                return;
            };
            if self.apply(j, action) {
                failed.clear();
            } else {
                failed.push(j);
            }
        }
    }
}

/// Trains from a precomputed candidate design matrix whose columns are the
/// basis functions evaluated at the training inputs.
pub fn fit_sparse(
    targets: &DVector<f64>,
    full_phi: &DMatrix<f64>,
    bias_column: Option<usize>,
    cfg: &TrainConfig,
) -> Result<(ActiveModel, TrainReport)> {
    cfg.validate()?;
    let (initial_basis, initial_alpha) = select_initial_basis(targets, full_phi, bias_column)?;
    let (model, factors) = refit(targets, full_phi, &[initial_basis], &[initial_alpha], None, cfg)?;
    let report = TrainReport {
        initial_basis,
        initial_log_marginal: model.log_marginal,
        iterations: 0,
        converged: false,
        final_log_marginal: model.log_marginal,
        steps: Vec::new(),
        rejected: 0,
        declined: 0,
        flagged: 0,
    };
    let mut run = Sequential { targets, full_phi, cfg, model, factors, report };
    match cfg.policy {
        VisitPolicy::Random => run.run_random(),
        VisitPolicy::GreedyImprovement => run.run_greedy(),
    }
    run.report.final_log_marginal = run.model.log_marginal;
    Ok((run.model, run.report))
}

/// Trains a binary classifier whose candidate bases are the kernel centred on
/// every training input, plus the bias column when the kernel asks for it.
pub fn train_binary(
    ts: &TrainingSet,
    kernel: &KernelSpec,
    cfg: &TrainConfig,
    class_id: ClassId,
) -> Result<(BinaryRvmModel, TrainReport)> {
    kernel.validate()?;
    let full_phi = kernel.design_matrix(ts.inputs(), ts.inputs())?;
    let bias_column = kernel.include_bias.then_some(0);
    let offset = usize::from(kernel.include_bias);
    let targets = ts.target_vector();
    let (model, report) = fit_sparse(&targets, &full_phi, bias_column, cfg)?;

    let relevance_vectors = model
        .active_indices
        .iter()
        .filter(|&&j| Some(j) != bias_column)
        .map(|&j| ts.inputs()[j - offset])
        .collect();
    let binary = BinaryRvmModel::new(
        class_id,
        *kernel,
        relevance_vectors,
        model.mu.iter().copied().collect(),
        model.sigma.clone(),
    )?;
    Ok((binary, report))
}
