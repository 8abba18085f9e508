use rvsm_core::multiclass::{query_map, split_one_vs_rest, train_map, ClassDictionary};
use rvsm_core::sparse_bayes::train_binary;
use rvsm_core::{auc, Blob, KernelSpec, SyntheticSceneSpec, TrainConfig, TrainingSet, VisitPolicy};

fn two_clusters(seed: u64) -> rvsm_core::Scene {
    SyntheticSceneSpec {
        class_blobs: vec![
            Blob { class_id: 1, center: [0.0, 0.0, 0.0], radius: 0.5, count: 50 },
            Blob { class_id: 2, center: [2.0, 0.5, 0.0], radius: 0.5, count: 50 },
        ],
        label_noise_rate: 0.0,
        rng_seed: seed,
    }
    .generate()
    .unwrap()
}

fn binary(cloud: &rvsm_core::LabeledPointCloud) -> TrainingSet {
    split_one_vs_rest(cloud, 1).unwrap()
}

#[test]
fn separable_clusters_are_learned_sparsely() {
    let scene = two_clusters(11);
    let ts = binary(&scene.train);
    for policy in [VisitPolicy::Random, VisitPolicy::GreedyImprovement] {
        let cfg = TrainConfig { policy, ..TrainConfig::default() };
        let (model, report) = train_binary(&ts, &KernelSpec::default(), &cfg, 1).unwrap();
        let test = binary(&scene.test);
        let scores: Vec<f64> = test.inputs().iter().map(|x| model.predict(x).unwrap()).collect();
        let a = auc(&scores, test.targets()).unwrap();
        assert!(a > 0.99, "{policy:?}: auc {a}");
        assert!(model.weights.len() as f64 <= 0.1 * ts.len() as f64, "{policy:?}: {} weights", model.weights.len());
        assert!(report.converged);
        assert!(report.max_log_marginal_drop() <= 0.0);
    }
}

#[test]
fn relevance_vector_inside_positive_cluster_is_confident() {
    let scene = two_clusters(12);
    let ts = binary(&scene.train);
    let (model, _) = train_binary(&ts, &KernelSpec::default(), &TrainConfig::default(), 1).unwrap();
    let inner = model
        .relevance_vectors
        .iter()
        .filter(|c| (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt() < 0.35)
        .collect::<Vec<_>>();
    for c in &inner {
        assert!(model.predict(c).unwrap() > 0.9);
    }
    assert!(model.predict(&[0.0, 0.0, 0.0]).unwrap() > 0.9);
}

#[test]
fn flipping_labels_complements_predictions() {
    let scene = SyntheticSceneSpec::standard(0.1, 5).generate().unwrap();
    let cloud = scene.train.downsample_per_class(0.2, 5).unwrap();
    let ts = binary(&cloud);
    let cfg = TrainConfig { rng_seed: 42, ..TrainConfig::default() };
    let kernel = KernelSpec::default();
    let (pos, _) = train_binary(&ts, &kernel, &cfg, 1).unwrap();
    let (neg, _) = train_binary(&ts.flipped(), &kernel, &cfg, 1).unwrap();
    assert_eq!(pos.relevance_vectors, neg.relevance_vectors);
    for x in scene.test.points().iter().step_by(7) {
        let sum = pos.predict(x).unwrap() + neg.predict(x).unwrap();
        assert!((sum - 1.0).abs() < 1e-6);
    }
}

#[test]
fn same_seed_same_trajectory() {
    let scene = SyntheticSceneSpec::standard(0.1, 3).generate().unwrap();
    let cloud = scene.train.downsample_per_class(0.2, 3).unwrap();
    let ts = binary(&cloud);
    let cfg = TrainConfig { rng_seed: 9, ..TrainConfig::default() };
    let (m1, r1) = train_binary(&ts, &KernelSpec::default(), &cfg, 1).unwrap();
    let (m2, r2) = train_binary(&ts, &KernelSpec::default(), &cfg, 1).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(m1, m2);
    let other = TrainConfig { rng_seed: 10, ..cfg };
    let (_, r3) = train_binary(&ts, &KernelSpec::default(), &other, 1).unwrap();
    assert_ne!(r1.steps, r3.steps);
}

#[test]
fn iteration_cap_returns_unconverged_model() {
    let scene = two_clusters(4);
    let ts = binary(&scene.train);
    let cfg = TrainConfig { max_iterations: 3, ..TrainConfig::default() };
    let (model, report) = train_binary(&ts, &KernelSpec::default(), &cfg, 1).unwrap();
    assert!(!report.converged);
    assert_eq!(report.iterations, 3);
    assert!(model.validate().is_ok());
}

#[test]
fn two_class_map_agrees_with_thresholded_binary_model() {
    let scene = two_clusters(21);
    let dict = ClassDictionary::from_ids(&[1, 2]).unwrap();
    let map = train_map(&scene.train, &dict, &KernelSpec::default(), &TrainConfig::default()).unwrap();
    let post = query_map(&map, scene.test.points()).unwrap();
    let class1 = map.model_for(1).unwrap();
    for (i, x) in scene.test.points().iter().enumerate() {
        let p = class1.predict(x).unwrap();
        let expected = if p >= 0.5 { 1 } else { 2 };
        assert_eq!(post.hard_labels[i], expected, "point {i}, p = {p}");
    }
}

#[test]
fn map_is_equivariant_under_dictionary_order() {
    let scene = SyntheticSceneSpec::standard(0.05, 8).generate().unwrap();
    let cloud = scene.train.downsample_per_class(0.15, 8).unwrap();
    let kernel = KernelSpec::default();
    let cfg = TrainConfig::default();
    let forward = train_map(&cloud, &ClassDictionary::from_ids(&[1, 2, 3]).unwrap(), &kernel, &cfg).unwrap();
    let backward = train_map(&cloud, &ClassDictionary::from_ids(&[3, 1, 2]).unwrap(), &kernel, &cfg).unwrap();
    let queries = &scene.test.points()[..200];
    let pf = query_map(&forward, queries).unwrap();
    let pb = query_map(&backward, queries).unwrap();
    assert_eq!(pf.hard_labels, pb.hard_labels);
    for (k, id) in [1u32, 2, 3].into_iter().enumerate() {
        let col_b = pb.class_ids.iter().position(|&c| c == id).unwrap();
        for i in 0..queries.len() {
            assert!((pf.class_probs[(i, k)] - pb.class_probs[(i, col_b)]).abs() < 1e-12);
        }
    }
}
