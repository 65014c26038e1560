use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use imbal_core::augment::{AugmentConfig, NeighborSource};
use imbal_core::corpus::preprocess;
use imbal_core::runner::{
    build_enhanced_dataset, evaluate, expand_grid, fingerprint, predict_dataset, predict_file, prepare_data,
    run_experiment, run_grid, train_predictor, EnhancementConfig, EnhancementMethod, ExperimentConfig, GridSpec,
    Predictor,
};
use imbal_core::{Dataset, Ensemble, Error, Example, Label, Scorer, Task, Tweet, VoteMode};

fn data_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn config(extra: &str) -> ExperimentConfig {
    let text = format!(
        "task = \"B\"\nseed = 7\n{extra}\n[data]\ntrain = {:?}\n",
        data_file("synthetic_b.tsv")
    );
    ExperimentConfig::from_toml(&text).unwrap()
}

fn logreg(enhancement: &str) -> ExperimentConfig {
    let mut c = config(&format!(
        "enhancement = \"{enhancement}\"\n[features]\nmin_n = 1\nmax_n = 2\n[learner]\nkind = \"logreg\"\nepochs = 60"
    ));
    c.name = Some(format!("logreg_{enhancement}"));
    c
}

#[test]
fn run_experiment_is_byte_deterministic() {
    let c = logreg("smote");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run_experiment(&c, Some(a.path())).unwrap();
    let rb = run_experiment(&c, Some(b.path())).unwrap();
    assert_eq!(ra.fingerprint, rb.fingerprint);
    for file in ["metrics.csv", "confusion.csv", "confusion_normalized.csv", "report.txt", "model/model.json"] {
        let x = std::fs::read(ra.run_dir.join(file)).unwrap();
        let y = std::fs::read(rb.run_dir.join(file)).unwrap();
        assert!(x == y, "{file} differs between identical runs");
    }
    assert!(ra.run_dir.join("result.json").exists());
    assert_eq!(ra.dev, rb.dev);
}

#[test]
fn fingerprint_tracks_config_and_data_but_not_locations() {
    let c = logreg("none");
    let mut moved = c.clone();
    moved.output = Some(PathBuf::from("/elsewhere"));
    assert_eq!(fingerprint(&c).unwrap(), fingerprint(&moved).unwrap());

    let dir = tempfile::tempdir().unwrap();
    let copy = dir.path().join("copy.tsv");
    std::fs::copy(&c.data.train, &copy).unwrap();
    let mut relocated = c.clone();
    relocated.data.train = copy.clone();
    assert_eq!(fingerprint(&c).unwrap(), fingerprint(&relocated).unwrap());

    let mut reseeded = c.clone();
    reseeded.seed += 1;
    assert_ne!(fingerprint(&c).unwrap(), fingerprint(&reseeded).unwrap());

    let mut text = std::fs::read_to_string(&copy).unwrap();
    text.push_str("zz1\tone more tweet\tOFF\tTIN\tNULL\n");
    std::fs::write(&copy, text).unwrap();
    assert_ne!(fingerprint(&c).unwrap(), fingerprint(&relocated).unwrap());
}

fn grid_spec(extra_axes: &str) -> GridSpec {
    let text = format!(
        r#"
[base]
task = "B"
seed = 1
[base.data]
train = {:?}
[base.learner]
kind = "naive_bayes"
[axes]
ngram = [[1, 1], [1, 2]]
enhancement = ["none", "ros"]
learner = [{{ kind = "naive_bayes" }}, {{ kind = "logreg", epochs = 30 }}]
{extra_axes}
"#,
        data_file("synthetic_b.tsv")
    );
    GridSpec::from_toml(&text).unwrap()
}

#[test]
fn grid_runs_every_cell_and_resumes() {
    let spec = grid_spec("");
    assert_eq!(expand_grid(&spec).unwrap().len(), 8);
    let out = tempfile::tempdir().unwrap();
    let first = run_grid(&spec, out.path(), 4).unwrap();
    assert_eq!((first.computed, first.skipped, first.failed), (8, 0, 0));
    assert_eq!(first.rows.len(), 8);
    let f1: Vec<f64> = first.rows.iter().map(|r| r.macro_f1.unwrap()).collect();
    assert!(f1.windows(2).all(|w| w[0] >= w[1]), "table not sorted: {f1:?}");
    let table = std::fs::read_to_string(&first.table).unwrap();
    assert_eq!(table.lines().count(), 9);

    let again = run_grid(&spec, out.path(), 2).unwrap();
    assert_eq!((again.computed, again.skipped), (0, 8));
    assert_eq!(std::fs::read_to_string(&again.table).unwrap(), table);
    let ledger = std::fs::read_to_string(out.path().join("ledger.jsonl")).unwrap();
    assert_eq!(ledger.lines().count(), 8);
}

#[test]
fn grid_table_is_independent_of_parallelism() {
    let spec = grid_spec("");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ta = run_grid(&spec, a.path(), 1).unwrap().table;
    let tb = run_grid(&spec, b.path(), 4).unwrap().table;
    assert_eq!(std::fs::read(ta).unwrap(), std::fs::read(tb).unwrap());
}

fn write_tsv(path: &Path, task: Task, rows: &[(&str, &str, Label)]) {
    let examples = rows
        .iter()
        .map(|(id, text, l)| Example::new(Tweet::new(*id, *text), *l))
        .collect();
    Dataset::new(task, examples).unwrap().write_tsv(path).unwrap();
}

#[test]
fn grid_records_failures_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.tsv");
    let dev = dir.path().join("dev.tsv");
    let mut rows: Vec<(String, String, Label)> = (0..12)
        .map(|i| (format!("t{i}"), format!("alpha beta gamma {i}"), Label::Targeted))
        .collect();
    rows.push(("u0".into(), "omega sigma".into(), Label::Untargeted));
    let borrowed: Vec<(&str, &str, Label)> = rows.iter().map(|(a, b, l)| (a.as_str(), b.as_str(), *l)).collect();
    write_tsv(&train, Task::B, &borrowed);
    write_tsv(
        &dev,
        Task::B,
        &[("d0", "alpha beta", Label::Targeted), ("d1", "omega", Label::Untargeted)],
    );
    let text = format!(
        "[base]\ntask = \"B\"\n[base.data]\ntrain = {train:?}\ndev = {dev:?}\n[base.learner]\nkind = \"naive_bayes\"\n[axes]\nenhancement = [\"none\", \"smote\"]\n"
    );
    let spec = GridSpec::from_toml(&text).unwrap();
    let outcome = run_grid(&spec, &dir.path().join("runs"), 2).unwrap();
    assert_eq!((outcome.computed, outcome.failed), (1, 1));
    let failed = outcome.rows.last().unwrap();
    assert!(failed.macro_f1.is_none());
    assert!(failed.error.as_deref().unwrap().contains("SMOTE"));
    let table = std::fs::read_to_string(&outcome.table).unwrap();
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn empty_grid_axis_is_a_config_error() {
    let mut spec = grid_spec("");
    spec.axes.seed = Some(Vec::new());
    assert!(matches!(expand_grid(&spec), Err(Error::Config(_))));
}

#[test]
fn dev_ids_seen_in_training_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let dev = dir.path().join("dev.tsv");
    write_tsv(&dev, Task::B, &[("b00005", "reused id", Label::Targeted)]);
    let mut c = logreg("none");
    c.data.dev = Some(dev);
    let err = prepare_data(&c).unwrap_err();
    assert!(matches!(err, Error::Validation(ref m) if m.contains("b00005")), "{err}");
}

#[test]
fn enhancement_touches_only_the_training_split() {
    let c = logreg("ros");
    let data = prepare_data(&c).unwrap();
    assert_eq!(data.dev.class_count_vec(), vec![380, 20]);
    let p = train_predictor(&c, &data).unwrap();
    let Predictor::Pipeline(pipe) = &p else { panic!("expected a single pipeline") };
    assert_eq!(pipe.vocabulary().n_docs(), data.train.len());
    let train_terms: std::collections::BTreeSet<&str> =
        data.train.examples().iter().flat_map(|e| e.tweet.tokens.iter().map(String::as_str)).collect();
    for term in pipe.vocabulary().terms() {
        for word in term.split(' ') {
            assert!(train_terms.contains(word), "vocabulary term {term:?} not from training text");
        }
    }
    let (m, _) = evaluate(&p, &data.dev).unwrap();
    assert_eq!(m.total(), 400);
}

struct Suffix;

impl NeighborSource for Suffix {
    fn neighbors(&self, word: &str, k: usize) -> Vec<String> {
        (0..k).map(|i| format!("{word}{i}")).collect()
    }
}

fn task_c_counts(counts: [usize; 3]) -> Dataset {
    let labels = [Label::Individual, Label::Group, Label::Other];
    let mut examples = Vec::new();
    for (l, n) in labels.iter().zip(counts) {
        for i in 0..n {
            let text = format!("{} word{} filler text number {i}", l.code(), i % 17);
            examples.push(Example::new(Tweet::new(format!("{}{i}", l.code()), text), *l));
        }
    }
    Dataset::new(Task::C, examples).unwrap()
}

#[test]
fn task_c_presets_balance_table_two_counts() {
    let train = task_c_counts([1925, 859, 316]);
    let augment = AugmentConfig::default();
    for method in [EnhancementMethod::C1, EnhancementMethod::C2, EnhancementMethod::C3, EnhancementMethod::C4] {
        let enh = EnhancementConfig::from(method);
        let out = build_enhanced_dataset(&train, &enh, &augment, 11, || Ok(Suffix)).unwrap();
        assert_eq!(out.class_count_vec(), vec![1925, 1925, 1925], "{method}");
        let synthetic: BTreeMap<Label, usize> = out
            .examples()
            .iter()
            .filter(|e| e.is_synthetic())
            .fold(BTreeMap::new(), |mut m, e| {
                *m.entry(e.label).or_default() += 1;
                m
            });
        let expect = |label: Label, by_synthesis: bool| {
            let added = 1925 - if label == Label::Group { 859 } else { 316 };
            assert_eq!(synthetic.get(&label).copied().unwrap_or(0), if by_synthesis { added } else { 0 }, "{method} {label}");
        };
        match method {
            EnhancementMethod::C1 => (expect(Label::Group, false), expect(Label::Other, false)),
            EnhancementMethod::C2 => (expect(Label::Group, true), expect(Label::Other, true)),
            EnhancementMethod::C3 => (expect(Label::Group, false), expect(Label::Other, true)),
            _ => (expect(Label::Group, true), expect(Label::Other, false)),
        };
    }
}

#[test]
fn org_and_balanced_synth_on_task_b_counts() {
    let mut examples = Vec::new();
    for i in 0..3101 {
        examples.push(Example::new(Tweet::new(format!("t{i}"), format!("targeted words {}", i % 23)), Label::Targeted));
    }
    for i in 0..419 {
        examples.push(Example::new(Tweet::new(format!("u{i}"), format!("untargeted words {}", i % 19)), Label::Untargeted));
    }
    let train = Dataset::new(Task::B, examples).unwrap();
    let augment = AugmentConfig::default();
    let org = build_enhanced_dataset(&train, &EnhancementMethod::Org.into(), &augment, 1, || Ok(Suffix)).unwrap();
    assert_eq!(org.class_count_vec(), vec![3101, 419]);
    assert_eq!(org, train);
    let synth =
        build_enhanced_dataset(&train, &EnhancementMethod::BalancedSynth.into(), &augment, 1, || Ok(Suffix)).unwrap();
    assert_eq!(synth.class_count_vec(), vec![3101, 3101]);
    let c1 = EnhancementConfig::from(EnhancementMethod::C1);
    assert!(matches!(
        build_enhanced_dataset(&train, &c1, &augment, 1, || Ok(Suffix)),
        Err(Error::Config(_))
    ));
}

fn trained(learner: &str, enhancement: &str) -> (Predictor, Dataset) {
    let c = config(&format!("enhancement = \"{enhancement}\"\n[learner]\n{learner}"));
    let data = prepare_data(&c).unwrap();
    (train_predictor(&c, &data).unwrap(), data.dev)
}

#[test]
fn soft_vote_is_member_order_invariant_and_single_average_is_identity() {
    let (nb, dev) = trained("kind = \"naive_bayes\"", "ros");
    let (lr, _) = trained("kind = \"logreg\"\nepochs = 40", "smote");
    let (gbt, _) = trained("kind = \"gbt\"\nn_estimators = 10", "none");
    let forward = Ensemble::new(vec![nb.clone(), lr.clone(), gbt.clone()], VoteMode::Soft, None).unwrap();
    let backward = Ensemble::new(vec![gbt, lr.clone(), nb], VoteMode::Soft, None).unwrap();
    let (f, b) = (Predictor::Ensemble(forward), Predictor::Ensemble(backward));
    assert_eq!(predict_dataset(&f, &dev).unwrap(), predict_dataset(&b, &dev).unwrap());

    let single = Predictor::Ensemble(Ensemble::new(vec![lr.clone()], VoteMode::Average, None).unwrap());
    assert_eq!(predict_dataset(&single, &dev).unwrap(), predict_dataset(&lr, &dev).unwrap());
    for e in dev.examples().iter().take(50) {
        let (p, q) = (single.proba(&e.tweet.tokens[..]).unwrap(), lr.proba(&e.tweet.tokens[..]).unwrap());
        assert!(p.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}

fn probe(dev: &Dataset, n: usize) -> String {
    let mut s = String::from("id\ttweet\n");
    for e in dev.examples().iter().take(n) {
        s.push_str(&format!("{}\t{}\n", e.tweet.id, e.tweet.raw_text));
    }
    s
}

#[test]
fn predict_file_round_trips_and_handles_edge_inputs() {
    let (nb, dev) = trained("kind = \"naive_bayes\"", "ros");
    let (lr, _) = trained("kind = \"logreg\"\nepochs = 40", "none");
    let predictor = Predictor::Ensemble(Ensemble::new(vec![nb, lr], VoteMode::Soft, Some(vec![2.0, 1.0])).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let artifact = predictor.save(&dir.path().join("model"), "model").unwrap();
    let input = dir.path().join("in.tsv");
    let output = dir.path().join("out.tsv");

    std::fs::write(&input, "").unwrap();
    assert_eq!(predict_file(&artifact, &input, &output).unwrap(), 0);
    assert_eq!(std::fs::read_to_string(&output).unwrap(), "id\tlabel\n");
    std::fs::write(&input, "id\ttweet\n").unwrap();
    assert_eq!(predict_file(&artifact, &input, &output).unwrap(), 0);
    assert_eq!(std::fs::read_to_string(&output).unwrap(), "id\tlabel\n");

    let first = &dev.examples()[0];
    std::fs::write(&input, probe(&dev, 1)).unwrap();
    assert_eq!(predict_file(&artifact, &input, &output).unwrap(), 1);
    let class = predictor.label(&preprocess(&first.tweet.raw_text)[..]).unwrap();
    let code = Task::B.label(class).unwrap().code();
    assert_eq!(std::fs::read_to_string(&output).unwrap(), format!("id\tlabel\n{}\t{code}\n", first.tweet.id));

    std::fs::write(&input, probe(&dev, 50)).unwrap();
    assert_eq!(predict_file(&artifact, &input, &output).unwrap(), 50);
    let written = std::fs::read_to_string(&output).unwrap();
    let loaded = Predictor::load(&artifact).unwrap();
    for (e, line) in dev.examples().iter().zip(written.lines().skip(1)) {
        let before = predictor.label(&e.tweet.tokens[..]).unwrap();
        let after = loaded.label(&e.tweet.tokens[..]).unwrap();
        assert_eq!(before, after);
        assert_eq!(line, format!("{}\t{}", e.tweet.id, Task::B.label(after).unwrap().code()));
    }
    let again = dir.path().join("again.tsv");
    predict_file(&artifact, &input, &again).unwrap();
    assert_eq!(std::fs::read(&output).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn tampered_vocabulary_is_a_fingerprint_mismatch() {
    let (nb, _) = trained("kind = \"naive_bayes\"", "none");
    let dir = tempfile::tempdir().unwrap();
    let path = nb.save(dir.path(), "nb").unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    json["vocab_fingerprint"] = serde_json::Value::String("0000".into());
    std::fs::write(&path, json.to_string()).unwrap();
    let err = Predictor::load(&path).unwrap_err();
    assert!(matches!(err, Error::FingerprintMismatch { .. }), "{err}");
    let input = dir.path().join("in.tsv");
    std::fs::write(&input, "id\ttweet\nx\thello\n").unwrap();
    assert!(predict_file(&path, &input, &dir.path().join("out.tsv")).is_err());
}
