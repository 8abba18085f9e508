//! Kernel basis functions.
//!
//! Each training input becomes a candidate basis `k(·, c)` centred on it; an
//! optional constant column acts as the bias basis.

use alloc::format;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Point3, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum KernelFamily {
    #[default]
    SquaredExponential,
}

/// Kernel family plus parameters defining the basis map.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Length scale in meters.
    pub length_scale: f64,
    pub signal_variance: f64,
    /// Prepend a constant `1` column to every basis vector.
    pub include_bias: bool,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            family: KernelFamily::SquaredExponential,
            length_scale: 0.3,
            signal_variance: 1.0,
            include_bias: true,
        }
    }
}

fn check_point(p: &Point3) -> Result<()> {
    if p.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("non-finite coordinate in {p:?}")))
    }
}

impl KernelSpec {
    pub fn squared_exponential(length_scale: f64, signal_variance: f64, include_bias: bool) -> Result<Self> {
        let spec = KernelSpec {
            family: KernelFamily::SquaredExponential,
            length_scale,
            signal_variance,
            include_bias,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale.is_finite() && self.length_scale > 0.0) {
            return Err(Error::invalid(format!(
                "length_scale must be positive and finite, got {}",
                self.length_scale
            )));
        }
        if !(self.signal_variance.is_finite() && self.signal_variance > 0.0) {
            return Err(Error::invalid(format!(
                "signal_variance must be positive and finite, got {}",
                self.signal_variance
            )));
        }
        Ok(())
    }

    /// Number of basis columns produced for `n_centers` centres.
    pub fn basis_len(&self, n_centers: usize) -> usize {
        n_centers + usize::from(self.include_bias)
    }

    /// Kernel value without input checks. Callers guarantee finite points.
    #[inline]
    pub(crate) fn eval_unchecked(&self, a: &Point3, b: &Point3) -> f64 {
        match self.family {
            KernelFamily::SquaredExponential => {
                let dx = a[0] - b[0];
                let dy = a[1] - b[1];
                let dz = a[2] - b[2];
                let d2 = dx * dx + dy * dy + dz * dz;
                self.signal_variance * (-d2 / (2.0 * self.length_scale * self.length_scale)).exp()
            }
        }
    }

    /// `signal_variance · exp(−‖a−b‖² / (2 ℓ²))`.
    pub fn eval(&self, a: &Point3, b: &Point3) -> Result<f64> {
        check_point(a)?;
        check_point(b)?;
        Ok(self.eval_unchecked(a, b))
    }

    /// `[1, k(x, c_1), …, k(x, c_n)]`, without the leading `1` when the bias is off.
    pub fn basis_vector(&self, x: &Point3, centers: &[Point3]) -> Result<DVector<f64>> {
        if centers.is_empty() {
            return Err(Error::invalid("basis requires at least one center"));
        }
        check_point(x)?;
        centers.iter().try_for_each(check_point)?;
        let offset = usize::from(self.include_bias);
        let mut out = DVector::zeros(self.basis_len(centers.len()));
        if self.include_bias {
            out[0] = 1.0;
        }
        for (j, c) in centers.iter().enumerate() {
            out[offset + j] = self.eval_unchecked(x, c);
        }
        Ok(out)
    }

    /// `n_inputs × n_basis` design matrix whose rows are basis vectors.
    pub fn design_matrix(&self, inputs: &[Point3], centers: &[Point3]) -> Result<DMatrix<f64>> {
        if inputs.is_empty() {
            return Err(Error::invalid("design matrix requires at least one input"));
        }
        if centers.is_empty() {
            return Err(Error::invalid("basis requires at least one center"));
        }
        inputs.iter().try_for_each(check_point)?;
        centers.iter().try_for_each(check_point)?;
        let offset = usize::from(self.include_bias);
        let mut phi = DMatrix::zeros(inputs.len(), self.basis_len(centers.len()));
        if self.include_bias {
            phi.column_mut(0).fill(1.0);
        }
        for (j, c) in centers.iter().enumerate() {
            let mut col = phi.column_mut(offset + j);
            for (i, x) in inputs.iter().enumerate() {
                col[i] = self.eval_unchecked(x, c);
            }
        }
        Ok(phi)
    }
}
