//! Config-driven experiments: data loading, enhancement, training,
//! evaluation, artifacts and grids.

mod config;
mod enhance;
mod grid;
mod pipeline;

use std::cell::OnceCell;
use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::rc::Rc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{
    ClassEnhancement, DataConfig, EmbeddingCorpus, EnhancementConfig, EnhancementMethod, EnhancementTable,
    EnsembleConfig, ExperimentConfig, FeatureConfig, MemberConfig, TextPlan,
};
pub use enhance::{build_enhanced_dataset, resample_matrix, resolve_text_plan};
pub use grid::{expand_grid, run_grid, GridAxes, GridOutcome, GridRow, GridSpec};
pub use pipeline::{predict_file, read_unlabeled, Pipeline, Predictor};

use crate::augment::{train_embeddings, AugmentConfig, EmbeddingModel};
use crate::corpus::{load_olid, stratified_split, Dataset, Task};
use crate::ensemble::{Ensemble, Scorer};
use crate::error::{Error, Result, StageExt};
use crate::eval::{confusion, report, ClassReport, ConfusionMatrix};
use crate::features::{fit_vocabulary, vectorize, FeatureMatrix, Vocabulary};
use crate::learners::{fit, LearnerConfig};
use crate::rng::derive_seed;

pub const DEFAULT_OUTPUT: &str = "runs";

/// Training and held-out data for one experiment.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Option<Dataset>,
    /// Token lists of every row of the training file (before any split).
    pub train_file_tokens: Vec<Vec<String>>,
}

/// Load the configured files, splitting the training file when no dev file
/// is given, and check that no held-out id appears in training.
pub fn prepare_data(config: &ExperimentConfig) -> Result<Prepared> {
    let task = config.task;
    let train_file = load_olid(&config.data.train, task)?;
    let train_file_tokens = train_file.token_lists();
    let (train, dev) = match &config.data.dev {
        Some(dev) => (train_file, load_olid(dev, task)?),
        None => stratified_split(&train_file, &config.split)?,
    };
    let test = config.data.test.as_ref().map(|p| load_olid(p, task)).transpose()?;
    check_disjoint(&train, &dev, "dev")?;
    if let Some(t) = &test {
        check_disjoint(&train, t, "test")?;
    }
    Ok(Prepared {
        train,
        dev,
        test,
        train_file_tokens,
    })
}

fn check_disjoint(train: &Dataset, held_out: &Dataset, what: &str) -> Result<()> {
    let ids: BTreeSet<&str> = train.examples().iter().map(|e| e.tweet.id.as_str()).collect();
    if let Some(e) = held_out.examples().iter().find(|e| ids.contains(e.tweet.id.as_str())) {
        return Err(Error::Validation(format!(
            "tweet {} appears in both the training and {what} data",
            e.tweet.id
        )));
    }
    Ok(())
}

/// Shared state while training one experiment: stage seeds come from the
/// master seed, and enhanced feature matrices are reused by members that
/// ask for the same features and enhancement.
struct Trainer<'a> {
    config: &'a ExperimentConfig,
    data: &'a Prepared,
    embeddings: OnceCell<EmbeddingModel>,
    matrices: HashMap<String, Rc<(Vocabulary, FeatureMatrix)>>,
}

impl<'a> Trainer<'a> {
    fn new(config: &'a ExperimentConfig, data: &'a Prepared) -> Self {
        Trainer {
            config,
            data,
            embeddings: OnceCell::new(),
            matrices: HashMap::new(),
        }
    }

    fn seed(&self, label: &str) -> u64 {
        derive_seed(self.config.seed, label)
    }

    fn embeddings(&self) -> Result<&EmbeddingModel> {
        if let Some(m) = self.embeddings.get() {
            return Ok(m);
        }
        let corpus = match self.config.data.embedding_corpus {
            EmbeddingCorpus::TrainSplit => self.data.train.token_lists(),
            EmbeddingCorpus::TrainFile => self.data.train_file_tokens.clone(),
        };
        let augment = AugmentConfig {
            seed: self.seed("embeddings"),
            ..self.config.augment
        };
        let model = train_embeddings(&corpus, &augment).stage("embeddings")?;
        Ok(self.embeddings.get_or_init(|| model))
    }

    fn enhanced_dataset(&self, enhancement: &EnhancementConfig) -> Result<Dataset> {
        build_enhanced_dataset(
            &self.data.train,
            enhancement,
            &self.config.augment,
            self.seed("enhance"),
            || self.embeddings(),
        )
    }

    fn matrix(&mut self, features: &FeatureConfig, enhancement: &EnhancementConfig) -> Result<Rc<(Vocabulary, FeatureMatrix)>> {
        let key = serde_json::to_string(&(features, enhancement)).map_err(|e| Error::Serde(e.to_string()))?;
        if let Some(m) = self.matrices.get(&key) {
            return Ok(m.clone());
        }
        let train = self.enhanced_dataset(enhancement).stage("enhance")?;
        let docs = train.token_lists();
        let vocab = fit_vocabulary(&docs, &features.ngram()).stage("features")?;
        let task = train.task();
        let matrix = vectorize(&docs, &train.class_indices(), task.n_classes(), &vocab, features.representation)
            .stage("features")?;
        let matrix = resample_matrix(matrix, enhancement, self.seed("resample")).stage("resample")?;
        let entry = Rc::new((vocab, matrix));
        self.matrices.insert(key, entry.clone());
        Ok(entry)
    }

    fn learner(&mut self, path: &str, features: &FeatureConfig, enhancement: &EnhancementConfig, learner: &LearnerConfig) -> Result<Predictor> {
        let entry = self.matrix(features, enhancement)?;
        let (vocab, matrix) = &*entry;
        let model = fit(learner, matrix, self.seed(&format!("{path}/learner"))).stage("fit")?;
        let pipeline = Pipeline::new(self.config.task, features.representation, vocab.clone(), model)?;
        Ok(Predictor::Pipeline(Box::new(pipeline)))
    }

    fn ensemble(&mut self, path: &str, features: &FeatureConfig, enhancement: &EnhancementConfig, spec: &EnsembleConfig) -> Result<Predictor> {
        let mut members = Vec::with_capacity(spec.members.len());
        for (i, m) in spec.members.iter().enumerate() {
            let member_path = format!("{path}/member{i}");
            let features = m.features.as_ref().unwrap_or(features);
            let enhancement = m.enhancement.as_ref().unwrap_or(enhancement);
            let predictor = match (&m.learner, &m.ensemble) {
                (Some(l), _) => self.learner(&member_path, features, enhancement, l)?,
                (_, Some(e)) => self.ensemble(&member_path, features, enhancement, e)?,
                _ => return Err(Error::Config("ensemble member without a model".into())),
            };
            members.push(predictor);
        }
        Ok(Predictor::Ensemble(Ensemble::new(members, spec.mode, spec.weights.clone())?))
    }

    fn train(&mut self) -> Result<Predictor> {
        let c = self.config;
        match (&c.learner, &c.ensemble) {
            (Some(l), _) => self.learner("model", &c.features, &c.enhancement, l),
            (_, Some(e)) => self.ensemble("model", &c.features, &c.enhancement, e),
            _ => Err(Error::Config("experiment needs a learner or an ensemble".into())),
        }
    }
}

/// Fit everything the config describes on `data.train`.
pub fn train_predictor(config: &ExperimentConfig, data: &Prepared) -> Result<Predictor> {
    config.validate()?;
    Trainer::new(config, data).train()
}

/// Predicted class of every row, in order.
pub fn predict_dataset(predictor: &Predictor, data: &Dataset) -> Result<Vec<usize>> {
    use rayon::prelude::*;
    data.examples()
        .par_iter()
        .map(|e| predictor.label(e.tweet.tokens.as_slice()))
        .collect()
}

/// Score `predictor` on a labeled dataset.
pub fn evaluate(predictor: &Predictor, data: &Dataset) -> Result<(ConfusionMatrix, ClassReport)> {
    let preds = predict_dataset(predictor, data)?;
    let matrix = confusion(&data.class_indices(), &preds, data.task().n_classes())?;
    let report = report(&matrix);
    Ok((matrix, report))
}

pub fn label_codes(task: Task) -> Vec<&'static str> {
    task.labels().iter().map(|l| l.code()).collect()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Write via a temporary sibling and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    write_file(&tmp, contents)?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Write `<prefix>metrics.csv`, `<prefix>report.txt`, `<prefix>confusion.csv`
/// and `<prefix>confusion_normalized.csv` under `dir`.
pub fn write_evaluation(dir: &Path, prefix: &str, task: Task, matrix: &ConfusionMatrix, report: &ClassReport) -> Result<PathBuf> {
    let labels = label_codes(task);
    write_file(&dir.join(format!("{prefix}metrics.csv")), &report.to_csv(&labels))?;
    write_file(&dir.join(format!("{prefix}report.txt")), &report.render_text(&labels))?;
    let confusion_path = dir.join(format!("{prefix}confusion.csv"));
    write_file(&confusion_path, &matrix.to_csv(&labels))?;
    write_file(
        &dir.join(format!("{prefix}confusion_normalized.csv")),
        &matrix.to_normalized_csv(&labels),
    )?;
    Ok(confusion_path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub fingerprint: String,
    pub name: String,
    pub task: Task,
    pub seed: u64,
    pub macro_f1: f64,
    pub dev: ClassReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<ClassReport>,
    pub run_dir: PathBuf,
    pub confusion_csv: PathBuf,
    pub model_path: PathBuf,
    pub wall_time_secs: f64,
    pub version: String,
}

impl RunResult {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
    }
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(format!("sha256:{}", hex::encode(Sha256::digest(bytes))))
}

/// Identifies a run by its config, the contents of its data files and the
/// crate version. File locations and the output directory do not count.
pub fn fingerprint(config: &ExperimentConfig) -> Result<String> {
    let mut c = config.clone();
    c.output = None;
    c.data.train = PathBuf::from(file_digest(&config.data.train)?);
    if let Some(p) = &config.data.dev {
        c.data.dev = Some(PathBuf::from(file_digest(p)?));
    }
    if let Some(p) = &config.data.test {
        c.data.test = Some(PathBuf::from(file_digest(p)?));
    }
    let json = serde_json::to_string(&c).map_err(|e| Error::Serde(e.to_string()))?;
    let mut h = Sha256::new();
    h.update(format!("imbal {}\n", env!("CARGO_PKG_VERSION")));
    h.update(json);
    Ok(hex::encode(&h.finalize()[..8]))
}

/// Directory a config's results go to.
pub fn run_dir(config: &ExperimentConfig, out_root: Option<&Path>) -> Result<PathBuf> {
    let root = out_root
        .map(Path::to_path_buf)
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
    Ok(root.join(fingerprint(config)?))
}

/// Train, evaluate on dev (and test when configured) and persist every
/// artifact under `<out>/<fingerprint>/`. `result.json` is written last.
pub fn run_experiment(config: &ExperimentConfig, out_root: Option<&Path>) -> Result<RunResult> {
    config.validate()?;
    let started = Instant::now();
    let dir = run_dir(config, out_root).stage("fingerprint")?;
    let fingerprint = dir
        .file_name()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string();
    let data = prepare_data(config).stage("load")?;
    let predictor = Trainer::new(config, &data).train()?;
    let (matrix, dev_report) = evaluate(&predictor, &data.dev).stage("evaluate")?;
    let test = data
        .test
        .as_ref()
        .map(|t| evaluate(&predictor, t))
        .transpose()
        .stage("evaluate")?;

    let persist = || -> Result<RunResult> {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_file(&dir.join("config.toml"), &config.to_toml()?)?;
        let confusion_csv = write_evaluation(&dir, "", config.task, &matrix, &dev_report)?;
        if let Some((m, r)) = &test {
            write_evaluation(&dir, "test_", config.task, m, r)?;
        }
        let model_path = predictor.save(&dir.join("model"), "model")?;
        let result = RunResult {
            fingerprint: fingerprint.clone(),
            name: config.display_name(),
            task: config.task,
            seed: config.seed,
            macro_f1: dev_report.macro_f1,
            dev: dev_report.clone(),
            test: test.as_ref().map(|(_, r)| r.clone()),
            run_dir: dir.clone(),
            confusion_csv,
            model_path,
            wall_time_secs: started.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let json = serde_json::to_string_pretty(&result).map_err(|e| Error::Serde(e.to_string()))?;
        write_atomic(&dir.join("result.json"), &json)?;
        Ok(result)
    };
    persist().stage("write")
}

/// Write the train/dev split described by `config` as OLID TSVs.
pub fn write_split(config: &ExperimentConfig, out: &Path) -> Result<(PathBuf, PathBuf)> {
    let data = prepare_data(config)?;
    let (train, dev) = (out.join("train.tsv"), out.join("dev.tsv"));
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    data.train.write_tsv(&train)?;
    data.dev.write_tsv(&dev)?;
    Ok((train, dev))
}

/// Write the text-level enhanced training set (and the embeddings, when
/// paraphrases were generated) for inspection.
pub fn write_augmented(config: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    config.validate()?;
    if config.enhancement.class_plan(config.task)?.is_none() {
        return Err(Error::Config(format!(
            "enhancement {} is not a text-level method",
            config.enhancement.method()
        )));
    }
    let data = prepare_data(config).stage("load")?;
    let trainer = Trainer::new(config, &data);
    let enhanced = trainer.enhanced_dataset(&config.enhancement).stage("enhance")?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join("train_enhanced.tsv");
    enhanced.write_tsv(&path)?;
    if let Some(m) = trainer.embeddings.get() {
        m.save(out.join("embeddings.txt"))?;
    }
    Ok(path)
}
