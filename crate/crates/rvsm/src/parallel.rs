//! Per-class training on a pool of scoped threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use rvsm_core::multiclass::{assemble_map, check_training_cloud, train_class, ClassOutcome};
use rvsm_core::{ClassDictionary, KernelSpec, LabeledPointCloud, Provenance, SemanticMapModel, TrainConfig};

use crate::{Error, Result};

/// Trains every dictionary class with up to `jobs` threads. Outcomes come
/// back in dictionary order and do not depend on `jobs`.
pub fn train_classes(
    cloud: &LabeledPointCloud,
    dict: &ClassDictionary,
    kernel: &KernelSpec,
    cfg: &TrainConfig,
    jobs: usize,
) -> Result<Vec<ClassOutcome>> {
    kernel.validate()?;
    cfg.validate()?;
    check_training_cloud(cloud, dict)?;
    let ids = dict.ids();
    let jobs = jobs.clamp(1, ids.len());
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<ClassOutcome>> = vec![None; ids.len()];
    thread::scope(|s| {
        let workers: Vec<_> = (0..jobs)
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let k = next.fetch_add(1, Ordering::Relaxed);
                        let Some(&id) = ids.get(k) else { break };
                        done.push((k, train_class(cloud, id, kernel, cfg)));
                    }
                    done
                })
            })
            .collect();
        for w in workers {
            for (k, outcome) in w.join().expect("training thread panicked") {
                slots[k] = Some(outcome);
            }
        }
    });
    Ok(slots.into_iter().map(|o| o.expect("every class trained")).collect())
}

/// [`train_classes`] followed by assembly. Fails if any class hit a
/// numerical error; classes merely absent from the cloud stay untrained.
pub fn train_map_parallel(
    cloud: &LabeledPointCloud,
    dict: &ClassDictionary,
    kernel: &KernelSpec,
    cfg: &TrainConfig,
    jobs: usize,
    provenance: Provenance,
) -> Result<SemanticMapModel> {
    let outcomes = train_classes(cloud, dict, kernel, cfg, jobs)?;
    if let Some(o) = outcomes.iter().find(|o| o.error.as_ref().is_some_and(|e| !e.is_input_error())) {
        return Err(Error::Training { class_id: o.summary.class_id, source: o.error.clone().expect("checked") });
    }
    Ok(assemble_map(dict, kernel, outcomes, provenance)?)
}
