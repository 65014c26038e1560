use std::collections::{BTreeMap, HashMap};

use proptest::prelude::*;

use imbal_core::augment::{generate_balanced, paraphrase, AugmentConfig, NeighborSource};
use imbal_core::ensemble::{average_proba, hard_vote, soft_vote};
use imbal_core::eval::{confusion, report};
use imbal_core::resample::{resample, Method, RowOrigin};
use imbal_core::rng::rng_from_seed;
use imbal_core::{Dataset, Example, FeatureMatrix, Label, ResamplePlan, Representation, SparseVector, Task, Tweet};

fn matrix_strategy() -> impl Strategy<Value = FeatureMatrix> {
    (2usize..=3, 2usize..=6)
        .prop_flat_map(|(k, dim)| {
            let row = proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..3.0], dim);
            let class = proptest::collection::vec(row, 2..25);
            (Just(dim), proptest::collection::vec(class, k))
        })
        .prop_map(|(dim, classes)| {
            let mut rows = Vec::new();
            let mut labels = Vec::new();
            for (c, members) in classes.iter().enumerate() {
                for r in members {
                    rows.push(SparseVector::from_dense(r));
                    labels.push(c);
                }
            }
            FeatureMatrix::new(dim, classes.len(), rows, labels, Representation::Tfidf).unwrap()
        })
}

const METHODS: [Method; 7] = [
    Method::None,
    Method::Ros,
    Method::Rus,
    Method::Smote,
    Method::NearMiss1,
    Method::NearMiss2,
    Method::NearMiss3,
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn resampled_counts_hit_targets(data in matrix_strategy(), seed in any::<u64>(), n_ref in 1usize..4) {
        for method in METHODS {
            let plan = ResamplePlan { method, n_ref, seed, ..ResamplePlan::default() };
            let out = resample(&data, &plan).unwrap();
            let want = match method {
                Method::None => data.class_counts(),
                _ => plan.resolve_targets(&data.class_counts()).unwrap(),
            };
            prop_assert_eq!(out.data.class_counts(), want);
            prop_assert_eq!(out.data.rows().len(), out.data.labels().len());
            prop_assert_eq!(out.origins.len(), out.data.len());
            prop_assert!(out.data.rows().iter().all(|r| r.dim() == data.dim()));
            let again = resample(&data, &plan).unwrap();
            prop_assert_eq!(&again.data, &out.data);
        }
    }

    #[test]
    fn copies_match_their_sources(data in matrix_strategy(), seed in any::<u64>()) {
        for method in [Method::Ros, Method::Rus, Method::NearMiss2] {
            let out = resample(&data, &ResamplePlan::new(method, seed)).unwrap();
            let mut seen = vec![false; data.len()];
            for (i, origin) in out.origins.iter().enumerate() {
                let src = match *origin {
                    RowOrigin::Original(s) => {
                        prop_assert!(!seen[s], "original row {} emitted twice", s);
                        seen[s] = true;
                        s
                    }
                    RowOrigin::Duplicate(s) => {
                        prop_assert_eq!(method, Method::Ros);
                        s
                    }
                    RowOrigin::Synthetic { .. } => return Err(TestCaseError::fail("unexpected synthetic row")),
                };
                prop_assert_eq!(&out.data.rows()[i], &data.rows()[src]);
                prop_assert_eq!(out.data.labels()[i], data.labels()[src]);
            }
            if method == Method::Ros {
                prop_assert!(seen.iter().all(|&s| s), "ROS dropped an input row");
            }
        }
    }

    #[test]
    fn smote_points_lie_between_source_and_neighbor(data in matrix_strategy(), seed in any::<u64>(), k in 1usize..5) {
        let plan = ResamplePlan { method: Method::Smote, k_neighbors: k, seed, ..ResamplePlan::default() };
        let out = resample(&data, &plan).unwrap();
        for (row, origin) in out.data.rows().iter().zip(&out.origins) {
            if let RowOrigin::Synthetic { source, neighbor, gap } = *origin {
                prop_assert!((0.0..1.0).contains(&gap));
                prop_assert_eq!(data.labels()[source], data.labels()[neighbor]);
                let (a, b, p) = (data.rows()[source].to_dense(), data.rows()[neighbor].to_dense(), row.to_dense());
                for j in 0..p.len() {
                    let expected = a[j] + gap * (b[j] - a[j]);
                    prop_assert!((p[j] - expected).abs() <= 1e-12 * (1.0 + a[j].abs() + b[j].abs()));
                }
                prop_assert!(row.values().iter().all(|v| *v != 0.0), "explicit zero stored");
            }
        }
    }

    #[test]
    fn report_matches_tally_and_is_order_free(
        pairs in proptest::collection::vec((0usize..3, 0usize..3), 1..1000),
        shift in any::<prop::sample::Index>(),
    ) {
        let golds: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let preds: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let r = report(&confusion(&golds, &preds, 3).unwrap());
        let mut f1s = Vec::new();
        for c in 0..3 {
            let tp = pairs.iter().filter(|p| p.0 == c && p.1 == c).count() as f64;
            let pred = pairs.iter().filter(|p| p.1 == c).count() as f64;
            let gold = pairs.iter().filter(|p| p.0 == c).count() as f64;
            let precision = if pred > 0.0 { tp / pred } else { 0.0 };
            let recall = if gold > 0.0 { tp / gold } else { 0.0 };
            let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
            prop_assert_eq!(r.classes[c].precision, precision);
            prop_assert_eq!(r.classes[c].recall, recall);
            prop_assert!((r.classes[c].f1 - f1).abs() <= 1e-15);
            if gold > 0.0 {
                f1s.push(f1);
            }
        }
        let macro_f1 = f1s.iter().sum::<f64>() / f1s.len() as f64;
        prop_assert!((r.macro_f1 - macro_f1).abs() <= 1e-15);
        prop_assert!((0.0..=1.0).contains(&r.macro_f1));
        prop_assert_eq!(r.macro_f1 == 1.0, golds == preds);

        let mut rotated = pairs.clone();
        rotated.rotate_left(shift.index(pairs.len()));
        let g2: Vec<usize> = rotated.iter().map(|p| p.0).collect();
        let p2: Vec<usize> = rotated.iter().map(|p| p.1).collect();
        prop_assert_eq!(report(&confusion(&g2, &p2, 3).unwrap()), r);
    }

    #[test]
    fn vote_invariants(
        raw in proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, 3), 1..6),
        label in 0usize..3,
        members in 1usize..6,
    ) {
        let dists: Vec<Vec<f64>> = raw
            .iter()
            .map(|d| {
                let s: f64 = d.iter().sum();
                d.iter().map(|v| v / s).collect()
            })
            .collect();
        let forward = soft_vote(&dists, None).unwrap();
        let mut reversed = dists.clone();
        reversed.reverse();
        prop_assert_eq!(soft_vote(&reversed, None).unwrap(), forward);
        let avg = average_proba(&dists).unwrap();
        prop_assert!(avg.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!((avg.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(hard_vote(&vec![label; members], 3).unwrap(), label);
    }
}

struct Table(HashMap<String, Vec<String>>);

impl NeighborSource for Table {
    fn neighbors(&self, word: &str, k: usize) -> Vec<String> {
        self.0.get(word).map(|v| v.iter().take(k).cloned().collect()).unwrap_or_default()
    }
}

fn table() -> Table {
    let words = ["alpha", "beta", "gamma", "delta", "eps"];
    Table(
        words
            .iter()
            .map(|w| (w.to_string(), words.iter().filter(|o| *o != w).map(|o| format!("{o}_syn")).collect()))
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn paraphrase_keeps_length_and_uses_neighbors(
        tokens in proptest::collection::vec(prop::sample::select(vec!["alpha", "beta", "gamma", "delta", "eps", "oov"]), 0..30),
        seed in any::<u64>(),
        p in 0.0f64..=1.0,
    ) {
        let tokens: Vec<String> = tokens.into_iter().map(String::from).collect();
        let source = table();
        let config = AugmentConfig { replace_prob: p, ..AugmentConfig::default() };
        let out = paraphrase(&tokens, &source, &config, &mut rng_from_seed(seed));
        prop_assert_eq!(out.len(), tokens.len());
        for (a, b) in tokens.iter().zip(&out) {
            let allowed = source.neighbors(a, config.top_k);
            prop_assert!(a == b || allowed.contains(b), "{} -> {}", a, b);
        }
    }

    #[test]
    fn balanced_generation_keeps_originals(sizes in (1usize..20, 1usize..20), seed in any::<u64>()) {
        let mut examples = Vec::new();
        for i in 0..sizes.0 {
            examples.push(Example::new(Tweet::new(format!("t{i}"), format!("alpha beta {i}")), Label::Targeted));
        }
        for i in 0..sizes.1 {
            examples.push(Example::new(Tweet::new(format!("u{i}"), "gamma delta eps"), Label::Untargeted));
        }
        let data = Dataset::new(Task::B, examples).unwrap();
        let config = AugmentConfig { seed, ..AugmentConfig::default() };
        let out = generate_balanced(&data, &table(), &config).unwrap();
        prop_assert_eq!(&out.examples()[..data.len()], data.examples());
        let m = sizes.0.max(sizes.1);
        let counts: BTreeMap<Label, usize> = out.class_counts();
        prop_assert_eq!(counts[&Label::Targeted], m);
        prop_assert_eq!(counts[&Label::Untargeted], m);
    }
}
