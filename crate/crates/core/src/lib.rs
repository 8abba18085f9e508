//! Sparse Bayesian semantic mapping.
//!
//! This crate holds the numerical core: squared-exponential kernel bases, the
//! fast sequential relevance vector machine for binary classification (Laplace
//! approximation around the posterior mode, sparsity/quality factors and the
//! add/delete/re-estimate hyperparameter actions), the one-vs-rest semantic map
//! built from one binary model per class, and the AUC / mean-sensitivity
//! evaluation metrics.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, model documents,
//! parallel orchestration and the command-line tool live in the `rvsm` crate.

#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod cloud;
mod error;
pub mod kernel;
mod linalg;
pub mod metrics;
pub mod multiclass;
pub mod sparse_bayes;

pub use cloud::{Blob, LabeledPointCloud, Scene, SyntheticSceneSpec};
pub use error::{Error, Result};
pub use kernel::{KernelFamily, KernelSpec};
pub use metrics::{auc, evaluate_map, mean_sensitivity, ClassMetrics, EvalReport};
pub use multiclass::{
    ClassDictionary, ClassEntry, ClassTrainSummary, MapPosterior, Provenance, SemanticMapModel,
};
pub use sparse_bayes::{
    Action, ActiveModel, BinaryRvmModel, FactorTable, TrainConfig, TrainReport, TrainingSet,
    VisitPolicy,
};

/// A point in 3D space, in meters.
pub type Point3 = [f64; 3];

/// Semantic class identifier as stored in point-cloud label columns.
pub type ClassId = u32;
