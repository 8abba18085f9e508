//! Versioned JSON documents for binary classifiers and whole semantic maps.

use std::path::Path;

use nalgebra::DMatrix;
use rvsm_core::{
    BinaryRvmModel, ClassDictionary, ClassEntry, ClassId, ClassTrainSummary, KernelSpec, Point3, Provenance,
    SemanticMapModel,
};
use serde::{Deserialize, Serialize};

use crate::{json, Error, Result};

pub const MODEL_VERSION: u32 = 1;

/// On-disk form of [`BinaryRvmModel`]. Field order is the file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub version: u32,
    pub class_id: ClassId,
    pub kernel: KernelSpec,
    pub relevance_vectors: Vec<Point3>,
    pub weights: Vec<f64>,
    /// Row-major lower triangle of the weight covariance.
    pub covariance: Vec<f64>,
    pub trained_flag: bool,
}

fn lower_triangle(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * (m.nrows() + 1) / 2);
    for i in 0..m.nrows() {
        for j in 0..=i {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn from_lower_triangle(values: &[f64], n: usize) -> Option<DMatrix<f64>> {
    if values.len() != n * (n + 1) / 2 {
        return None;
    }
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in 0..=i {
            m[(i, j)] = values[k];
            m[(j, i)] = values[k];
            k += 1;
        }
    }
    Some(m)
}

impl From<&BinaryRvmModel> for ModelDocument {
    fn from(m: &BinaryRvmModel) -> Self {
        ModelDocument {
            version: MODEL_VERSION,
            class_id: m.class_id,
            kernel: m.kernel,
            relevance_vectors: m.relevance_vectors.clone(),
            weights: m.weights.clone(),
            covariance: lower_triangle(&m.covariance),
            trained_flag: m.trained,
        }
    }
}

impl ModelDocument {
    pub fn into_model(self) -> std::result::Result<BinaryRvmModel, String> {
        if self.version != MODEL_VERSION {
            return Err(format!("unsupported model version {} (expected {MODEL_VERSION})", self.version));
        }
        let n = self.weights.len();
        let covariance = from_lower_triangle(&self.covariance, n).ok_or_else(|| {
            format!("class {}: covariance has {} entries, expected {}", self.class_id, self.covariance.len(), n * (n + 1) / 2)
        })?;
        let model = BinaryRvmModel {
            class_id: self.class_id,
            kernel: self.kernel,
            relevance_vectors: self.relevance_vectors,
            weights: self.weights,
            covariance,
            trained: self.trained_flag,
        };
        model.validate().map_err(|e| format!("class {}: {e}", model.class_id))?;
        Ok(model)
    }
}

pub fn model_to_bytes(model: &BinaryRvmModel) -> Vec<u8> {
    json::to_bytes(&ModelDocument::from(model))
}

pub fn save_model(model: &BinaryRvmModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<BinaryRvmModel> {
    let doc: ModelDocument = json::read_file(path)?;
    doc.into_model().map_err(|m| Error::format(path, m))
}

/// On-disk form of [`SemanticMapModel`]: dictionary, provenance and one
/// [`ModelDocument`] per class in dictionary order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDocument {
    pub version: u32,
    pub dictionary: Vec<ClassEntry>,
    pub kernel: KernelSpec,
    pub provenance: Provenance,
    pub training: Vec<ClassTrainSummary>,
    pub models: Vec<ModelDocument>,
}

impl From<&SemanticMapModel> for MapDocument {
    fn from(map: &SemanticMapModel) -> Self {
        MapDocument {
            version: MODEL_VERSION,
            dictionary: map.dictionary.entries().to_vec(),
            kernel: map.kernel,
            provenance: map.provenance.clone(),
            training: map.training.clone(),
            models: map.binary_models.iter().map(ModelDocument::from).collect(),
        }
    }
}

impl MapDocument {
    pub fn into_map(self) -> std::result::Result<SemanticMapModel, String> {
        if self.version != MODEL_VERSION {
            return Err(format!("unsupported map version {} (expected {MODEL_VERSION})", self.version));
        }
        let dictionary = ClassDictionary::new(self.dictionary).map_err(|e| e.to_string())?;
        let binary_models = self.models.into_iter().map(ModelDocument::into_model).collect::<std::result::Result<_, _>>()?;
        let map = SemanticMapModel {
            dictionary,
            kernel: self.kernel,
            binary_models,
            provenance: self.provenance,
            training: self.training,
        };
        map.validate().map_err(|e| e.to_string())?;
        Ok(map)
    }
}

pub fn map_to_bytes(map: &SemanticMapModel) -> Vec<u8> {
    json::to_bytes(&MapDocument::from(map))
}

pub fn save_map(map: &SemanticMapModel, path: &Path) -> Result<()> {
    std::fs::write(path, map_to_bytes(map)).map_err(|e| Error::io(path, e))
}

pub fn load_map(path: &Path) -> Result<SemanticMapModel> {
    let doc: MapDocument = json::read_file(path)?;
    doc.into_map().map_err(|m| Error::format(path, m))
}
