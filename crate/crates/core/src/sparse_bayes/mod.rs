//! Fast sequential relevance vector machine for binary classification.
//!
//! Training starts from a single basis and visits candidate bases one at a
//! time. For every candidate the sparsity factor `s_m` and quality factor
//! `q_m` of the current Laplace approximation decide whether the basis is
//! added, deleted or has its precision `α_m` re-estimated. Inactive bases
//! carry `α = ∞` implicitly.

mod mode;
mod model;
mod train;
mod update;

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Point3, Result};

pub use mode::{find_mode, Mode};
pub use model::BinaryRvmModel;
pub use train::{
    fit_sparse, initialize_model, select_initial_basis, train_binary, ActionKind, TrainReport, TrainStep,
};
pub use update::{
    active_design, compute_factors, log_marginal_likelihood, update_model, ActiveModel, FactorTable,
};

/// Floor applied to the IRLS weights `β_i = y_i (1 − y_i)` so `B` stays invertible.
pub const BETA_FLOOR: f64 = 1e-10;

/// Logistic sigmoid `1 / (1 + e^{−y})`, evaluated without overflow.
#[inline]
pub fn sigmoid(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^a)` without overflow.
#[inline]
pub(crate) fn softplus(a: f64) -> f64 {
    if a > 0.0 {
        a + (-a).exp().ln_1p()
    } else {
        a.exp().ln_1p()
    }
}

/// Input points paired with binary targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    inputs: Vec<Point3>,
    targets: Vec<bool>,
}

impl TrainingSet {
    /// Requires at least two points, finite coordinates and both classes present.
    pub fn new(inputs: Vec<Point3>, targets: Vec<bool>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::LengthMismatch {
                expected: inputs.len(),
                found: targets.len(),
            });
        }
        if inputs.len() < 2 {
            return Err(Error::TwoClassRequired(format!(
                "training set has {} point(s)",
                inputs.len()
            )));
        }
        if let Some(i) = inputs.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(format!("non-finite coordinate at index {i}")));
        }
        let positives = targets.iter().filter(|&&t| t).count();
        if positives == 0 || positives == targets.len() {
            return Err(Error::TwoClassRequired(format!(
                "{positives} positive and {} negative targets",
                targets.len() - positives
            )));
        }
        Ok(TrainingSet { inputs, targets })
    }

    pub fn inputs(&self) -> &[Point3] {
        &self.inputs
    }

    pub fn targets(&self) -> &[bool] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.targets.iter().filter(|&&t| t).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    /// Targets as a 0/1 vector.
    pub fn target_vector(&self) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_iterator(self.len(), self.targets.iter().map(|&t| f64::from(u8::from(t))))
    }

    /// Same inputs with every target negated.
    pub fn flipped(&self) -> Self {
        TrainingSet {
            inputs: self.inputs.clone(),
            targets: self.targets.iter().map(|t| !t).collect(),
        }
    }
}

/// Order in which candidate bases are visited during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum VisitPolicy {
    /// Each sweep visits every candidate once in a seeded random order.
    #[default]
    Random,
    /// Every iteration applies the action with the largest predicted gain in
    /// log marginal likelihood.
    GreedyImprovement,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct TrainConfig {
    /// Cap on model updates per binary classifier.
    pub max_iterations: usize,
    /// Convergence threshold on `max |Δ log α|` over a sweep.
    pub convergence_tol: f64,
    /// Initial diagonal jitter for Cholesky retries.
    pub jitter: f64,
    pub irls_max_steps: usize,
    /// Tolerance on the infinity norm of the posterior gradient at the mode.
    pub irls_tol: f64,
    pub rng_seed: u64,
    pub policy: VisitPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_iterations: 1000,
            convergence_tol: 1e-3,
            jitter: 1e-8,
            irls_max_steps: 100,
            irls_tol: 1e-8,
            rng_seed: 0,
            policy: VisitPolicy::Random,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.irls_max_steps == 0 {
            return Err(Error::invalid("iteration limits must be positive"));
        }
        for (name, v) in [
            ("convergence_tol", self.convergence_tol),
            ("jitter", self.jitter),
            ("irls_tol", self.irls_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Precision that maximizes the marginal likelihood for one basis given its
/// sparsity and quality factors: `s²/(q² − s)` when `q² > s`, otherwise
/// `f64::INFINITY` (the basis is pruned).
pub fn evaluate_hyperparameter(s_m: f64, q_m: f64) -> f64 {
    let theta = q_m * q_m - s_m;
    if theta > 0.0 {
        s_m * s_m / theta
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Reestimate(f64),
    Add(f64),
    Delete,
    NoOp,
}

/// Decision rule for basis `j`: `θ_j > 0` keeps or adds it with a re-estimated
/// precision, `θ_j ≤ 0` deletes it if active and ignores it otherwise.
pub fn select_action(j: usize, table: &FactorTable, is_active: bool) -> Action {
    action_from(table.theta[j], table.sparsity[j], table.quality[j], is_active)
}

pub(crate) fn action_from(theta: f64, s_m: f64, q_m: f64, is_active: bool) -> Action {
    match (theta > 0.0, is_active) {
        (true, true) => Action::Reestimate(evaluate_hyperparameter(s_m, q_m)),
        (true, false) => Action::Add(evaluate_hyperparameter(s_m, q_m)),
        (false, true) => Action::Delete,
        (false, false) => Action::NoOp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn sigmoid_reference_points() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert!(sigmoid(-800.0).is_finite());
        assert!((sigmoid(2.0) - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-16);
    }

    proptest! {
        #[test]
        fn sigmoid_symmetry_and_monotonicity(y in -20.0f64..20.0, dy in 1e-3f64..5.0) {
            prop_assert!((sigmoid(y) + sigmoid(-y) - 1.0).abs() < 1e-15);
            prop_assert!(sigmoid(y + dy) > sigmoid(y));
            prop_assert!(sigmoid(y) > 0.0 && sigmoid(y) < 1.0);
        }

        #[test]
        fn softplus_matches_naive(a in -30.0f64..30.0) {
            prop_assert!((softplus(a) - (1.0 + a.exp()).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn hyperparameter_closed_form() {
        assert!((evaluate_hyperparameter(1.0, 2.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!(evaluate_hyperparameter(4.0, 1.0).is_infinite());
        // q² == s sits on the pruning side.
        assert!(evaluate_hyperparameter(4.0, 2.0).is_infinite());
    }

    fn evidence_contribution(alpha: f64, s: f64, q: f64) -> f64 {
        0.5 * (alpha.ln() - (alpha + s).ln() + q * q / (alpha + s))
    }

    #[test]
    fn hyperparameter_beats_log_grid() {
        let (s, q) = (1.0, 2.0);
        let best = evaluate_hyperparameter(s, q);
        let at_best = evidence_contribution(best, s, q);
        for i in 0..1000 {
            let a = 10f64.powf(-6.0 + 12.0 * i as f64 / 999.0);
            assert!(evidence_contribution(a, s, q) <= at_best + 1e-12);
        }
    }

    fn table(theta: f64) -> FactorTable {
        FactorTable {
            raw_sparsity: vec![1.0],
            raw_quality: vec![1.0],
            sparsity: vec![1.0],
            quality: vec![(1.0 + theta).sqrt()],
            theta: vec![theta],
            flagged: vec![],
        }
    }

    #[test]
    fn action_branches() {
        assert!(matches!(select_action(0, &table(0.5), true), Action::Reestimate(a) if a.is_finite()));
        assert!(matches!(select_action(0, &table(0.5), false), Action::Add(a) if a.is_finite()));
        assert_eq!(select_action(0, &table(-0.1), false), Action::NoOp);
        assert_eq!(select_action(0, &table(-0.1), true), Action::Delete);
        assert_eq!(select_action(0, &table(0.0), true), Action::Delete);
        assert_eq!(select_action(0, &table(0.0), false), Action::NoOp);
    }

    #[test]
    fn training_set_validation() {
        let pts = vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert!(TrainingSet::new(pts.clone(), vec![true, false, true]).is_ok());
        assert!(matches!(
            TrainingSet::new(pts.clone(), vec![true, true, true]),
            Err(Error::TwoClassRequired(_))
        ));
        assert!(matches!(
            TrainingSet::new(pts.clone(), vec![true, false]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(TrainingSet::new(vec![[0.0; 3]], vec![true]).is_err());
        let mut bad = pts;
        bad[1][2] = f64::NAN;
        assert!(TrainingSet::new(bad, vec![true, false, true]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let cfg = TrainConfig { irls_tol: 0.0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig { max_iterations: 0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
