use imbal_core::features::{fit_vocabulary, vectorize, NGramConfig, Representation, SparseVector};
use imbal_core::learners::tree::Node;
use imbal_core::learners::{
    fit, AdaBoostParams, ForestParams, GbtParams, LearnerConfig, LogRegParams, Model,
    NaiveBayesParams, ProbabilisticClassifier, SvmParams, TreeParams,
};
use imbal_core::{Error, FeatureMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn matrix(points: &[Vec<f64>], labels: &[usize], n_classes: usize) -> FeatureMatrix {
    FeatureMatrix::new(
        points[0].len(),
        n_classes,
        points.iter().map(|p| SparseVector::from_dense(p)).collect(),
        labels.to_vec(),
        Representation::Counts,
    )
    .unwrap()
}

/// Sparse non-negative rows where each class favors its own block of features.
fn random_task(seed: u64, n: usize, dim: usize, n_classes: usize) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let y = i % n_classes;
        let mut row = vec![0.0; dim];
        for _ in 0..4 {
            let j = if rng.gen_bool(0.7) {
                (y * dim / n_classes + rng.gen_range(0..dim / n_classes)).min(dim - 1)
            } else {
                rng.gen_range(0..dim)
            };
            row[j] += rng.gen_range(0.1..1.0);
        }
        points.push(row);
        labels.push(y);
    }
    matrix(&points, &labels, n_classes)
}

fn small_configs() -> Vec<LearnerConfig> {
    vec![
        LearnerConfig::Majority,
        LearnerConfig::NaiveBayes(NaiveBayesParams::default()),
        LearnerConfig::Logreg(LogRegParams { epochs: 100, ..LogRegParams::default() }),
        LearnerConfig::LinearSvm(SvmParams { epochs: 5, ..SvmParams::default() }),
        LearnerConfig::LinearSvm(SvmParams { epochs: 5, calibrate: false, ..SvmParams::default() }),
        LearnerConfig::Tree(TreeParams::default()),
        LearnerConfig::RandomForest(ForestParams { n_estimators: 10, ..ForestParams::default() }),
        LearnerConfig::Bagging(ForestParams { n_estimators: 5, ..ForestParams::default() }),
        LearnerConfig::Adaboost(AdaBoostParams { n_estimators: 20, ..AdaBoostParams::default() }),
        LearnerConfig::Gbt(GbtParams { n_estimators: 10, ..GbtParams::xgboost() }),
        LearnerConfig::Gbt(GbtParams { n_estimators: 10, ..GbtParams::gradient_boosting() }),
    ]
}

#[test]
fn naive_bayes_hand_posterior() {
    let docs = vec![vec!["a".to_string(), "a".to_string()], vec!["b".to_string()]];
    let vocab = fit_vocabulary(&docs, &NGramConfig::new(1, 1).unwrap()).unwrap();
    let data = vectorize(&docs, &[0, 1], 2, &vocab, Representation::Counts).unwrap();
    let model = fit(&LearnerConfig::NaiveBayes(NaiveBayesParams { alpha: 1.0 }), &data, 0).unwrap();
    let query = vocab.encode(&["a".to_string()], Representation::Counts);
    let p = model.predict_proba(&query).unwrap();
    let expected = 0.75 / (0.75 + 1.0 / 3.0);
    assert!((p[0] - expected).abs() < 1e-12, "{p:?}");
    assert!((p[0] - 0.6923).abs() < 1e-4);
    assert_eq!(model.predict(&query).unwrap(), 0);
}

#[test]
fn logreg_separates_linearly_separable_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    while points.len() < 20 {
        let x: f64 = rng.gen_range(-2.0..2.0);
        let y: f64 = rng.gen_range(-2.0..2.0);
        let margin = x + 0.5 * y - 0.3;
        if margin.abs() < 0.2 {
            continue;
        }
        points.push(vec![x, y]);
        labels.push(usize::from(margin > 0.0));
    }
    let data = matrix(&points, &labels, 2);
    let config = LearnerConfig::Logreg(LogRegParams { l2: 0.0, learning_rate: 1.0, epochs: 3000 });
    let model = fit(&config, &data, 0).unwrap();
    for (x, &y) in data.rows().iter().zip(&labels) {
        assert_eq!(model.predict(x).unwrap(), y);
    }
}

#[test]
fn probabilities_are_distributions() {
    let data = random_task(3, 60, 12, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for config in small_configs() {
        let model = fit(&config, &data, 1).unwrap();
        for _ in 0..100 {
            let dense: Vec<f64> = (0..12)
                .map(|_| if rng.gen_bool(0.3) { rng.gen_range(-3.0..3.0) } else { 0.0 })
                .collect();
            let p = model.predict_proba(&SparseVector::from_dense(&dense)).unwrap();
            assert_eq!(p.len(), 3);
            assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0), "{config:?} {p:?}");
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9, "{config:?}");
        }
    }
}

#[test]
fn batch_matches_single_predictions() {
    let data = random_task(4, 40, 10, 2);
    for config in small_configs() {
        let model = fit(&config, &data, 2).unwrap();
        assert!(model.predict_proba_batch(&[]).unwrap().is_empty());
        let rows = &data.rows()[..3];
        let batch = model.predict_proba_batch(rows).unwrap();
        for (x, p) in rows.iter().zip(&batch) {
            assert_eq!(&model.predict_proba(x).unwrap(), p);
        }
        let one = model.predict_proba_batch(&rows[..1]).unwrap();
        assert_eq!(one, vec![model.predict_proba(&rows[0]).unwrap()]);
        let wrong = SparseVector::zeros(11);
        assert!(matches!(
            model.predict_proba_batch(&[wrong]),
            Err(Error::DimensionMismatch { expected: 10, actual: 11 })
        ));
    }
}

#[test]
fn fitting_is_deterministic_and_round_trips() {
    let data = random_task(8, 50, 10, 3);
    for config in small_configs() {
        let a = fit(&config, &data, 9).unwrap();
        let b = fit(&config, &data, 9).unwrap();
        assert_eq!(a, b, "{config:?}");
        let loaded = imbal_core::FittedModel::from_json(&a.to_json().unwrap()).unwrap();
        for x in data.rows() {
            let p = a.predict_proba(x).unwrap();
            let q = loaded.predict_proba(x).unwrap();
            assert_eq!(
                p.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                q.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}

#[test]
fn rejects_single_class_and_non_finite_data() {
    let one_class = matrix(&[vec![1.0], vec![2.0]], &[1, 1], 2);
    let nan = matrix(&[vec![1.0], vec![f64::NAN]], &[0, 1], 2);
    for config in small_configs() {
        assert!(matches!(fit(&config, &one_class, 0), Err(Error::Validation(_))));
        assert!(matches!(fit(&config, &nan, 0), Err(Error::Validation(_))));
    }
}

#[test]
fn config_validation() {
    let bad = [
        LearnerConfig::NaiveBayes(NaiveBayesParams { alpha: -1.0 }),
        LearnerConfig::Logreg(LogRegParams { l2: f64::NAN, ..LogRegParams::default() }),
        LearnerConfig::RandomForest(ForestParams { n_estimators: 0, ..ForestParams::default() }),
        LearnerConfig::Adaboost(AdaBoostParams { max_depth: 0, ..AdaBoostParams::default() }),
        LearnerConfig::Gbt(GbtParams { lambda: -0.1, ..GbtParams::default() }),
    ];
    for config in bad {
        assert!(matches!(config.validate(), Err(Error::Config(_))), "{config:?}");
    }
}

#[test]
fn config_parses_from_toml_and_rejects_unknown_keys() {
    #[derive(serde::Deserialize)]
    struct Wrapper {
        learner: LearnerConfig,
    }
    let w: Wrapper = toml::from_str("learner = { kind = \"gbt\", n_estimators = 7 }").unwrap();
    match w.learner {
        LearnerConfig::Gbt(p) => {
            assert_eq!(p.n_estimators, 7);
            assert_eq!(p.lambda, 1.0);
        }
        other => panic!("{other:?}"),
    }
    let w: Wrapper = toml::from_str("learner = { kind = \"majority\" }").unwrap();
    assert_eq!(w.learner, LearnerConfig::Majority);
    assert!(toml::from_str::<Wrapper>("learner = { kind = \"logreg\", epoch = 3 }").is_err());
}

#[test]
fn gbt_without_rounds_predicts_priors() {
    for k in [2, 3] {
        let data = random_task(12, 7 * k + 2, 6, k);
        let counts = data.class_counts();
        let n = data.len() as f64;
        let config = LearnerConfig::Gbt(GbtParams { n_estimators: 0, ..GbtParams::default() });
        let model = fit(&config, &data, 0).unwrap();
        for x in data.rows() {
            let p = model.predict_proba(x).unwrap();
            for (pc, &c) in p.iter().zip(&counts) {
                assert!((pc - c as f64 / n).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn adaboost_accepts_only_better_than_chance_stumps() {
    for k in [2, 3] {
        let data = random_task(21, 90, 9, k);
        let config = LearnerConfig::Adaboost(AdaBoostParams { n_estimators: 30, ..AdaBoostParams::default() });
        let model = fit(&config, &data, 0).unwrap();
        let Model::Adaboost(ada) = model.model() else { panic!() };
        assert!(ada.n_stumps() > 0);
        let chance = (k as f64 - 1.0) / k as f64;
        assert!(ada.errors().iter().all(|&e| e < chance), "{:?}", ada.errors());
    }
}

fn gini(labels: &[usize], rows: &[usize], k: usize) -> f64 {
    let mut counts = vec![0.0; k];
    for &r in rows {
        counts[labels[r]] += 1.0;
    }
    let n: f64 = counts.iter().sum();
    if n == 0.0 {
        return 0.0;
    }
    n - counts.iter().map(|c| c * c).sum::<f64>() / n
}

#[test]
fn every_tree_split_reduces_gini() {
    for seed in 0..5 {
        let data = random_task(seed, 80, 10, 3);
        let model = fit(&LearnerConfig::Tree(TreeParams::default()), &data, seed).unwrap();
        let Model::Tree(tree) = model.model() else { panic!() };
        let nodes = tree.nodes();
        let mut stack = vec![(0usize, (0..data.len()).collect::<Vec<_>>())];
        let mut splits = 0;
        while let Some((at, rows)) = stack.pop() {
            if let Node::Split { feature, threshold, left, right } = &nodes[at] {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| data.rows()[i].get(*feature) <= *threshold);
                assert!(!l.is_empty() && !r.is_empty());
                let before = gini(data.labels(), &rows, 3);
                let after = gini(data.labels(), &l, 3) + gini(data.labels(), &r, 3);
                assert!(after < before, "split at node {at}: {before} -> {after}");
                splits += 1;
                stack.push((*left, l));
                stack.push((*right, r));
            }
        }
        assert!(splits > 0);
        for (x, &y) in data.rows().iter().zip(data.labels()) {
            let distinct = data
                .rows()
                .iter()
                .zip(data.labels())
                .any(|(other, &oy)| other == x && oy != y);
            if !distinct {
                assert_eq!(model.predict(x).unwrap(), y);
            }
        }
    }
}

#[test]
fn duplicating_rows_keeps_nb_and_logreg_predictions() {
    let data = random_task(30, 40, 8, 2);
    let doubled = FeatureMatrix::new(
        data.dim(),
        2,
        data.rows().iter().chain(data.rows()).cloned().collect(),
        data.labels().iter().chain(data.labels()).copied().collect(),
        Representation::Counts,
    )
    .unwrap();
    let probe = random_task(31, 50, 8, 2);
    for config in [
        LearnerConfig::NaiveBayes(NaiveBayesParams::default()),
        LearnerConfig::Logreg(LogRegParams::default()),
    ] {
        let a = fit(&config, &data, 0).unwrap();
        let b = fit(&config, &doubled, 0).unwrap();
        for x in probe.rows() {
            assert_eq!(a.predict(x).unwrap(), b.predict(x).unwrap(), "{config:?}");
        }
    }
}

#[test]
fn boosted_and_bagged_models_fit_training_data() {
    let data = random_task(40, 120, 12, 2);
    for config in [
        LearnerConfig::Gbt(GbtParams { n_estimators: 30, ..GbtParams::xgboost() }),
        LearnerConfig::Gbt(GbtParams { n_estimators: 60, ..GbtParams::gradient_boosting() }),
        LearnerConfig::RandomForest(ForestParams { n_estimators: 30, ..ForestParams::default() }),
        LearnerConfig::Adaboost(AdaBoostParams { n_estimators: 50, ..AdaBoostParams::default() }),
        LearnerConfig::Logreg(LogRegParams::default()),
        LearnerConfig::LinearSvm(SvmParams::default()),
    ] {
        let model = fit(&config, &data, 0).unwrap();
        let correct = data
            .rows()
            .iter()
            .zip(data.labels())
            .filter(|(x, &y)| model.predict(x).unwrap() == y)
            .count();
        assert!(correct as f64 / data.len() as f64 > 0.8, "{} {correct}", config.name());
    }
}
