//! Labeled point clouds and synthetic scenes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::distr::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::UnitBall;

use crate::{ClassId, Error, Point3, Result};

/// 3D points with one semantic label each.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledPointCloud {
    points: Vec<Point3>,
    labels: Vec<ClassId>,
}

impl LabeledPointCloud {
    pub fn new(points: Vec<Point3>, labels: Vec<ClassId>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::LengthMismatch { expected: points.len(), found: labels.len() });
        }
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(format!("non-finite coordinate at point {i}")));
        }
        Ok(LabeledPointCloud { points, labels })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distinct labels, ascending.
    pub fn classes(&self) -> Vec<ClassId> {
        self.class_counts().into_keys().collect()
    }

    pub fn class_counts(&self) -> BTreeMap<ClassId, usize> {
        let mut counts = BTreeMap::new();
        for &l in &self.labels {
            *counts.entry(l).or_insert(0) += 1;
        }
        counts
    }

    pub fn count(&self, class: ClassId) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }

    /// Points at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        LabeledPointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Keeps `⌈fraction · n_k⌉` points of every class `k` (at least one),
    /// drawn uniformly without replacement. Retained points keep their
    /// original relative order.
    pub fn downsample_per_class(&self, fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::invalid(format!("downsample fraction must be in (0, 1], got {fraction}")));
        }
        let mut by_class: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
        for (i, &l) in self.labels.iter().enumerate() {
            by_class.entry(l).or_default().push(i);
        }
        let mut keep = Vec::new();
        for (class, members) in by_class {
            let n = members.len();
            // Guard against products like 0.07 · 100 = 7.000000000000001.
            let target = ((fraction * n as f64) - 1e-9).ceil().max(1.0) as usize;
            let target = target.min(n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(u64::from(class));
            let chosen = rand::seq::index::sample(&mut rng, n, target);
            keep.extend(chosen.iter().map(|k| members[k]));
        }
        keep.sort_unstable();
        Ok(self.select(&keep))
    }
}

/// A ball of points sharing one class label.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Blob {
    pub class_id: ClassId,
    pub center: Point3,
    pub radius: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SyntheticSceneSpec {
    pub class_blobs: Vec<Blob>,
    /// Probability that a training label is replaced by another class.
    pub label_noise_rate: f64,
    pub rng_seed: u64,
}

/// Generated scene: noisy training labels, held-out test points, and the
/// training locations with their clean labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub train: LabeledPointCloud,
    pub test: LabeledPointCloud,
    pub truth: LabeledPointCloud,
}

impl SyntheticSceneSpec {
    /// Three separated blobs of 300 points each, classes 1, 2 and 3.
    pub fn standard(label_noise_rate: f64, rng_seed: u64) -> Self {
        let blob = |class_id, center| Blob { class_id, center, radius: 0.5, count: 300 };
        SyntheticSceneSpec {
            class_blobs: alloc::vec![
                blob(1, [0.0, 0.0, 0.0]),
                blob(2, [1.6, 0.0, 0.0]),
                blob(3, [0.8, 1.4, 0.0]),
            ],
            label_noise_rate,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_blobs.is_empty() {
            return Err(Error::invalid("scene needs at least one blob"));
        }
        for b in &self.class_blobs {
            if !(b.radius.is_finite() && b.radius > 0.0) || b.count == 0 {
                return Err(Error::invalid(format!("blob for class {} needs positive radius and count", b.class_id)));
            }
            if !b.center.iter().all(|c| c.is_finite()) {
                return Err(Error::invalid("blob center must be finite"));
            }
        }
        if !(self.label_noise_rate >= 0.0 && self.label_noise_rate < 0.5) {
            return Err(Error::invalid(format!(
                "label noise rate must be in [0, 0.5), got {}",
                self.label_noise_rate
            )));
        }
        Ok(())
    }

    fn sample_blobs(&self, rng: &mut ChaCha8Rng) -> LabeledPointCloud {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for b in &self.class_blobs {
            for _ in 0..b.count {
                let u: [f64; 3] = UnitBall.sample(rng);
                points.push([
                    b.center[0] + b.radius * u[0],
                    b.center[1] + b.radius * u[1],
                    b.center[2] + b.radius * u[2],
                ]);
                labels.push(b.class_id);
            }
        }
        LabeledPointCloud { points, labels }
    }

    /// Samples every blob uniformly, then flips each training label to a
    /// uniformly chosen other class with probability `label_noise_rate`.
    pub fn generate(&self) -> Result<Scene> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        let truth = self.sample_blobs(&mut rng);
        let test = self.sample_blobs(&mut rng);

        let mut classes: Vec<ClassId> = self.class_blobs.iter().map(|b| b.class_id).collect();
        classes.sort_unstable();
        classes.dedup();
        let flip = Bernoulli::new(self.label_noise_rate).map_err(|e| Error::invalid(format!("{e}")))?;
        let mut train = truth.clone();
        if classes.len() > 1 {
            for label in &mut train.labels {
                if flip.sample(&mut rng) {
                    let others: Vec<ClassId> = classes.iter().copied().filter(|c| c != label).collect();
                    *label = others[rng.random_range(0..others.len())];
                }
            }
        }
        Ok(Scene { train, test, truth })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_mismatch_and_nan() {
        assert!(LabeledPointCloud::new(vec![[0.0; 3]], vec![]).is_err());
        assert!(LabeledPointCloud::new(vec![[0.0, f64::NAN, 0.0]], vec![1]).is_err());
        assert!(LabeledPointCloud::new(vec![], vec![]).unwrap().is_empty());
    }

    fn cloud_with_counts(counts: &[(ClassId, usize)]) -> LabeledPointCloud {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for &(c, n) in counts {
            for i in 0..n {
                points.push([i as f64, c as f64, 0.0]);
                labels.push(c);
            }
        }
        LabeledPointCloud::new(points, labels).unwrap()
    }

    #[test]
    fn downsample_full_fraction_is_identity() {
        let c = cloud_with_counts(&[(1, 5), (2, 7)]);
        assert_eq!(c.downsample_per_class(1.0, 9).unwrap(), c);
    }

    #[test]
    fn downsample_uses_ceiling_per_class() {
        let c = cloud_with_counts(&[(1, 200), (2, 3), (5, 100)]);
        let d = c.downsample_per_class(0.01, 4).unwrap();
        assert_eq!(d.count(1), 2);
        assert_eq!(d.count(2), 1);
        assert_eq!(d.count(5), 1);
        let d = c.downsample_per_class(0.07, 4).unwrap();
        assert_eq!(d.count(5), 7);
        assert_eq!(d.count(1), 14);
    }

    #[test]
    fn downsample_keeps_order_and_is_seeded() {
        let c = cloud_with_counts(&[(1, 50), (2, 50)]);
        let a = c.downsample_per_class(0.3, 11).unwrap();
        let b = c.downsample_per_class(0.3, 11).unwrap();
        assert_eq!(a, b);
        // Points of a class were generated with increasing x.
        for class in [1, 2] {
            let xs: Vec<f64> = a
                .points()
                .iter()
                .zip(a.labels())
                .filter(|(_, &l)| l == class)
                .map(|(p, _)| p[0])
                .collect();
            assert!(xs.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(c.downsample_per_class(0.0, 1).is_err());
        assert!(c.downsample_per_class(1.5, 1).is_err());
    }

    #[test]
    fn noiseless_scene_has_correct_labels() {
        let spec = SyntheticSceneSpec {
            class_blobs: vec![
                Blob { class_id: 1, center: [0.0; 3], radius: 0.5, count: 50 },
                Blob { class_id: 2, center: [3.0, 0.0, 0.0], radius: 0.5, count: 50 },
            ],
            label_noise_rate: 0.0,
            rng_seed: 3,
        };
        let scene = spec.generate().unwrap();
        assert_eq!(scene.train, scene.truth);
        for (p, &l) in scene.train.points().iter().zip(scene.train.labels()) {
            let center = if l == 1 { [0.0; 3] } else { [3.0, 0.0, 0.0] };
            let d2: f64 = (0..3).map(|k| (p[k] - center[k]).powi(2)).sum();
            assert!(d2 <= 0.25 + 1e-12);
        }
        assert_eq!(scene.test.len(), 100);
    }

    #[test]
    fn noise_rate_is_respected() {
        let spec = SyntheticSceneSpec {
            class_blobs: vec![
                Blob { class_id: 1, center: [0.0; 3], radius: 1.0, count: 5000 },
                Blob { class_id: 2, center: [5.0, 0.0, 0.0], radius: 1.0, count: 5000 },
            ],
            label_noise_rate: 0.2,
            rng_seed: 17,
        };
        let scene = spec.generate().unwrap();
        let flipped = scene
            .train
            .labels()
            .iter()
            .zip(scene.truth.labels())
            .filter(|(a, b)| a != b)
            .count();
        let rate = flipped as f64 / 10_000.0;
        // Binomial(10⁴, 0.2) has standard deviation 0.004; this is a 5σ window.
        assert!((0.18..=0.22).contains(&rate), "flip rate {rate}");
    }

    #[test]
    fn scene_is_reproducible() {
        let a = SyntheticSceneSpec::standard(0.1, 5).generate().unwrap();
        let b = SyntheticSceneSpec::standard(0.1, 5).generate().unwrap();
        assert_eq!(a, b);
        let c = SyntheticSceneSpec::standard(0.1, 6).generate().unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn invalid_scene_specs() {
        let mut spec = SyntheticSceneSpec::standard(0.5, 0);
        assert!(spec.generate().is_err());
        spec.label_noise_rate = 0.1;
        spec.class_blobs[0].radius = 0.0;
        assert!(spec.validate().is_err());
    }
}
