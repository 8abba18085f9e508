//! One-vs-rest semantic map built from binary relevance vector classifiers.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sparse_bayes::{train_binary, BinaryRvmModel, TrainConfig, TrainReport, TrainingSet};
use crate::{ClassId, Error, KernelSpec, LabeledPointCloud, Point3, Result};

/// Unnormalized probability assigned to classes without a trained model, and
/// the lower bound of every class probability before normalization.
pub const PROBABILITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ClassEntry {
    pub id: ClassId,
    pub name: String,
    pub color: [u8; 3],
}

/// Ordered set of semantic classes. The order fixes posterior columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDictionary {
    classes: Vec<ClassEntry>,
}

const PALETTE: [[u8; 3]; 12] = [
    [230, 25, 75],
    [60, 180, 75],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 190],
    [0, 128, 128],
    [170, 110, 40],
    [128, 128, 128],
];

impl ClassDictionary {
    pub fn new(classes: Vec<ClassEntry>) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::TwoClassRequired(format!(
                "dictionary declares {} class(es)",
                classes.len()
            )));
        }
        for (i, c) in classes.iter().enumerate() {
            if classes[..i].iter().any(|o| o.id == c.id) {
                return Err(Error::invalid(format!("duplicate class id {}", c.id)));
            }
        }
        Ok(ClassDictionary { classes })
    }

    /// Dictionary with generated names (`class_<id>`) and palette colors.
    pub fn from_ids(ids: &[ClassId]) -> Result<Self> {
        Self::new(
            ids.iter()
                .enumerate()
                .map(|(i, &id)| ClassEntry {
                    id,
                    name: format!("class_{id}"),
                    color: PALETTE[i % PALETTE.len()],
                })
                .collect(),
        )
    }

    /// This dictionary followed by generated entries for `ids` it lacks.
    pub fn extended(&self, ids: &[ClassId]) -> Result<Self> {
        let mut classes = self.classes.clone();
        for &id in ids {
            if classes.iter().all(|c| c.id != id) {
                let color = PALETTE[classes.len() % PALETTE.len()];
                classes.push(ClassEntry { id, name: format!("class_{id}"), color });
            }
        }
        Self::new(classes)
    }

    pub fn entries(&self) -> &[ClassEntry] {
        &self.classes
    }

    pub fn ids(&self) -> Vec<ClassId> {
        self.classes.iter().map(|c| c.id).collect()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn position(&self, id: ClassId) -> Option<usize> {
        self.classes.iter().position(|c| c.id == id)
    }

    pub fn get(&self, id: ClassId) -> Option<&ClassEntry> {
        self.classes.iter().find(|c| c.id == id)
    }

    pub fn contains(&self, id: ClassId) -> bool {
        self.position(id).is_some()
    }
}

/// Binary targets for class `k` against every other label.
pub fn split_one_vs_rest(cloud: &LabeledPointCloud, k: ClassId) -> Result<TrainingSet> {
    if !cloud.labels().contains(&k) {
        return Err(Error::ClassNotPresent(k));
    }
    TrainingSet::new(
        cloud.points().to_vec(),
        cloud.labels().iter().map(|&l| l == k).collect(),
    )
}

/// Per-class training seed. Depends on the class id, not its dictionary
/// position, so reordering the dictionary does not change any model.
pub fn class_seed(base_seed: u64, class_id: ClassId) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(u64::from(class_id));
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassTrainSummary {
    pub class_id: ClassId,
    pub positives: usize,
    pub negatives: usize,
    pub relevance_vectors: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_log_marginal: Option<f64>,
    /// Set when no model could be trained for the class.
    pub untrainable: Option<String>,
}

/// Where a map came from. Carries no timestamps so reruns serialize identically.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Provenance {
    pub rng_seed: u64,
    pub config_hash: Option<String>,
    pub source_digest: Option<String>,
}

/// One binary model per dictionary class, in dictionary order.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMapModel {
    pub dictionary: ClassDictionary,
    pub kernel: KernelSpec,
    pub binary_models: Vec<BinaryRvmModel>,
    pub provenance: Provenance,
    pub training: Vec<ClassTrainSummary>,
}

impl SemanticMapModel {
    pub fn validate(&self) -> Result<()> {
        if self.binary_models.len() != self.dictionary.len() {
            return Err(Error::LengthMismatch {
                expected: self.dictionary.len(),
                found: self.binary_models.len(),
            });
        }
        for (entry, model) in self.dictionary.entries().iter().zip(&self.binary_models) {
            if model.class_id != entry.id {
                return Err(Error::invalid(format!(
                    "model for class {} stored at position of class {}",
                    model.class_id, entry.id
                )));
            }
            if model.kernel != self.kernel {
                return Err(Error::invalid(format!("class {} uses a different kernel", entry.id)));
            }
            model.validate()?;
        }
        Ok(())
    }

    pub fn model_for(&self, id: ClassId) -> Option<&BinaryRvmModel> {
        self.binary_models.iter().find(|m| m.class_id == id)
    }

    /// Total relevance vectors over all classes.
    pub fn relevance_count(&self) -> usize {
        self.binary_models.iter().map(BinaryRvmModel::relevance_count).sum()
    }
}

/// Outcome of training one class of a map.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassOutcome {
    pub model: BinaryRvmModel,
    pub summary: ClassTrainSummary,
    pub report: Option<TrainReport>,
    /// Why the class is untrainable, if it is.
    pub error: Option<Error>,
}

/// Trains the one-vs-rest classifier for `class_id`. Classes that are absent,
/// cover the whole cloud, or fail numerically come back untrainable.
pub fn train_class(
    cloud: &LabeledPointCloud,
    class_id: ClassId,
    kernel: &KernelSpec,
    cfg: &TrainConfig,
) -> ClassOutcome {
    let positives = cloud.count(class_id);
    let negatives = cloud.len() - positives;
    let untrainable = |e: Error| ClassOutcome {
        model: BinaryRvmModel::untrainable(class_id, *kernel),
        summary: ClassTrainSummary {
            class_id,
            positives,
            negatives,
            relevance_vectors: 0,
            iterations: 0,
            converged: false,
            final_log_marginal: None,
            untrainable: Some(e.to_string()),
        },
        report: None,
        error: Some(e),
    };
    let ts = match split_one_vs_rest(cloud, class_id) {
        Ok(ts) => ts,
        Err(e) => return untrainable(e),
    };
    let class_cfg = TrainConfig { rng_seed: class_seed(cfg.rng_seed, class_id), ..*cfg };
    match train_binary(&ts, kernel, &class_cfg, class_id) {
        Ok((model, report)) => ClassOutcome {
            summary: ClassTrainSummary {
                class_id,
                positives,
                negatives,
                relevance_vectors: model.relevance_count(),
                iterations: report.iterations,
                converged: report.converged,
                final_log_marginal: Some(report.final_log_marginal),
                untrainable: None,
            },
            model,
            report: Some(report),
            error: None,
        },
        Err(e) => untrainable(e),
    }
}

/// Checks that a cloud can train a map over `dict`.
pub fn check_training_cloud(cloud: &LabeledPointCloud, dict: &ClassDictionary) -> Result<()> {
    if cloud.is_empty() {
        return Err(Error::invalid("training cloud is empty"));
    }
    let present = cloud.classes();
    if let Some(unknown) = present.iter().find(|&&c| !dict.contains(c)) {
        return Err(Error::invalid(format!("label {unknown} is not in the class dictionary")));
    }
    if present.len() < 2 {
        return Err(Error::TwoClassRequired(format!(
            "training cloud contains {} class(es)",
            present.len()
        )));
    }
    Ok(())
}

/// Collects per-class outcomes, in dictionary order, into a map.
pub fn assemble_map(
    dict: &ClassDictionary,
    kernel: &KernelSpec,
    outcomes: Vec<ClassOutcome>,
    provenance: Provenance,
) -> Result<SemanticMapModel> {
    let mut binary_models = Vec::with_capacity(outcomes.len());
    let mut training = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        binary_models.push(o.model);
        training.push(o.summary);
    }
    let map = SemanticMapModel {
        dictionary: dict.clone(),
        kernel: *kernel,
        binary_models,
        provenance,
        training,
    };
    map.validate()?;
    Ok(map)
}

/// Trains every class of `dict` sequentially.
pub fn train_map(
    cloud: &LabeledPointCloud,
    dict: &ClassDictionary,
    kernel: &KernelSpec,
    cfg: &TrainConfig,
) -> Result<SemanticMapModel> {
    kernel.validate()?;
    cfg.validate()?;
    check_training_cloud(cloud, dict)?;
    let outcomes = dict
        .ids()
        .into_iter()
        .map(|id| train_class(cloud, id, kernel, cfg))
        .collect();
    let provenance = Provenance { rng_seed: cfg.rng_seed, ..Provenance::default() };
    assemble_map(dict, kernel, outcomes, provenance)
}

/// Per-point categorical distribution over the dictionary classes.
#[derive(Debug, Clone, PartialEq)]
pub struct MapPosterior {
    pub points: Vec<Point3>,
    /// Column order of `class_probs`.
    pub class_ids: Vec<ClassId>,
    /// `n_q × n_c`; every row sums to one.
    pub class_probs: DMatrix<f64>,
    pub hard_labels: Vec<ClassId>,
}

impl MapPosterior {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn column(&self, class_id: ClassId) -> Option<Vec<f64>> {
        let k = self.class_ids.iter().position(|&c| c == class_id)?;
        Some(self.class_probs.column(k).iter().copied().collect())
    }
}

/// Evaluates every class classifier at `x` and normalizes across classes.
/// Writes the normalized row into `row` and returns the argmax position
/// (lowest index on ties).
fn posterior_row(model: &SemanticMapModel, x: &Point3, row: &mut [f64]) -> usize {
    let mut total = 0.0;
    for (p, m) in row.iter_mut().zip(&model.binary_models) {
        let raw = if m.trained {
            crate::sparse_bayes::sigmoid(m.latent_unchecked(x))
        } else {
            PROBABILITY_FLOOR
        };
        *p = raw.max(PROBABILITY_FLOOR);
        total += *p;
    }
    let mut best = 0;
    for k in 0..row.len() {
        row[k] /= total;
        if row[k] > row[best] {
            best = k;
        }
    }
    best
}

/// Normalized class probabilities and hard labels at every query point.
pub fn query_map(model: &SemanticMapModel, queries: &[Point3]) -> Result<MapPosterior> {
    if let Some(i) = queries.iter().position(|q| !q.iter().all(|c| c.is_finite())) {
        return Err(Error::invalid(format!("non-finite query point at index {i}")));
    }
    let n_c = model.dictionary.len();
    let ids = model.dictionary.ids();
    let mut probs = DMatrix::zeros(queries.len(), n_c);
    let mut hard_labels = Vec::with_capacity(queries.len());
    let mut row = alloc::vec![0.0; n_c];
    for (i, x) in queries.iter().enumerate() {
        let best = posterior_row(model, x, &mut row);
        for (k, &p) in row.iter().enumerate() {
            probs[(i, k)] = p;
        }
        hard_labels.push(ids[best]);
    }
    Ok(MapPosterior {
        points: queries.to_vec(),
        class_ids: ids,
        class_probs: probs,
        hard_labels,
    })
}
