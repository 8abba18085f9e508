use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::sigmoid;
use crate::{ClassId, Error, KernelSpec, Point3, Result};

/// A trained binary relevance vector classifier.
///
/// When the bias basis survived training, `weights[0]` is its weight and
/// `weights.len() == relevance_vectors.len() + 1`; otherwise the two lengths
/// are equal. `covariance` is the posterior covariance over `weights`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryRvmModel {
    pub class_id: ClassId,
    pub kernel: KernelSpec,
    pub relevance_vectors: Vec<Point3>,
    pub weights: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// False for classes that could not be trained; such models carry no weights.
    pub trained: bool,
}

impl BinaryRvmModel {
    pub fn new(
        class_id: ClassId,
        kernel: KernelSpec,
        relevance_vectors: Vec<Point3>,
        weights: Vec<f64>,
        covariance: DMatrix<f64>,
    ) -> Result<Self> {
        let model = BinaryRvmModel {
            class_id,
            kernel,
            relevance_vectors,
            weights,
            covariance,
            trained: true,
        };
        model.validate()?;
        Ok(model)
    }

    /// Placeholder for a class with no usable training data.
    pub fn untrainable(class_id: ClassId, kernel: KernelSpec) -> Self {
        BinaryRvmModel {
            class_id,
            kernel,
            relevance_vectors: Vec::new(),
            weights: Vec::new(),
            covariance: DMatrix::zeros(0, 0),
            trained: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        let n_rv = self.relevance_vectors.len();
        let n_w = self.weights.len();
        if !self.trained {
            return if n_rv == 0 && n_w == 0 {
                Ok(())
            } else {
                Err(Error::invalid("untrained model must not carry weights"))
            };
        }
        let bias_ok = self.kernel.include_bias && n_w == n_rv + 1;
        if !(n_w == n_rv || bias_ok) || n_w == 0 {
            return Err(Error::invalid(format!(
                "{n_w} weights do not match {n_rv} relevance vectors"
            )));
        }
        if self.covariance.shape() != (n_w, n_w) {
            return Err(Error::invalid(format!(
                "covariance is {:?}, expected {n_w}×{n_w}",
                self.covariance.shape()
            )));
        }
        if self.relevance_vectors.iter().flatten().any(|c| !c.is_finite())
            || self.weights.iter().any(|w| !w.is_finite())
        {
            return Err(Error::invalid("non-finite model parameter"));
        }
        Ok(())
    }

    pub fn has_bias(&self) -> bool {
        self.weights.len() == self.relevance_vectors.len() + 1
    }

    /// Number of surviving kernel bases (bias excluded).
    pub fn relevance_count(&self) -> usize {
        self.relevance_vectors.len()
    }

    /// `w*ᵀ φ(x)` using the relevance vectors as centres.
    pub fn latent(&self, x: &Point3) -> Result<f64> {
        if !x.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid(format!("non-finite query {x:?}")));
        }
        if !self.trained {
            return Err(Error::invalid(format!("class {} has no trained model", self.class_id)));
        }
        Ok(self.latent_unchecked(x))
    }

    #[inline]
    pub(crate) fn latent_unchecked(&self, x: &Point3) -> f64 {
        let (bias, rest) = if self.has_bias() {
            (self.weights[0], &self.weights[1..])
        } else {
            (0.0, &self.weights[..])
        };
        bias + self
            .relevance_vectors
            .iter()
            .zip(rest)
            .map(|(c, w)| w * self.kernel.eval_unchecked(x, c))
            .sum::<f64>()
    }

    /// Probability that `x` belongs to this model's class, `σ(w*ᵀ φ(x))`.
    pub fn predict(&self, x: &Point3) -> Result<f64> {
        self.latent(x).map(sigmoid)
    }
}
