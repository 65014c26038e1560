//! Trained text-to-label chains and their on-disk artifacts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{preprocess, Task};
use crate::ensemble::{Ensemble, Scorer, VoteMode};
use crate::error::{Error, Result};
use crate::features::{Representation, Vocabulary};
use crate::learners::{FittedModel, ProbabilisticClassifier};

const ARTIFACT_VERSION: u32 = 1;

/// Vocabulary, representation and fitted model for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    task: Task,
    representation: Representation,
    vocabulary: Vocabulary,
    model: FittedModel,
}

impl Pipeline {
    pub fn new(task: Task, representation: Representation, vocabulary: Vocabulary, model: FittedModel) -> Result<Self> {
        let dim = vocabulary.output_dim(representation);
        if model.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: model.dim(),
            });
        }
        Ok(Pipeline {
            task,
            representation,
            vocabulary,
            model,
        })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn model(&self) -> &FittedModel {
        &self.model
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }
}

impl Scorer<[String]> for Pipeline {
    fn n_classes(&self) -> usize {
        self.task.n_classes()
    }

    fn proba(&self, tokens: &[String]) -> Result<Vec<f64>> {
        self.model
            .predict_proba(&self.vocabulary.encode(tokens, self.representation))
    }
}

/// A single pipeline or an ensemble of predictors, each with its own features.
#[derive(Debug, Clone)]
pub enum Predictor {
    Pipeline(Box<Pipeline>),
    Ensemble(Ensemble<Predictor>),
}

impl Scorer<[String]> for Predictor {
    fn n_classes(&self) -> usize {
        match self {
            Predictor::Pipeline(p) => p.n_classes(),
            Predictor::Ensemble(e) => e.n_classes(),
        }
    }

    fn proba(&self, tokens: &[String]) -> Result<Vec<f64>> {
        match self {
            Predictor::Pipeline(p) => p.proba(tokens),
            Predictor::Ensemble(e) => e.proba(tokens),
        }
    }
}

impl Predictor {
    pub fn task(&self) -> Task {
        match self {
            Predictor::Pipeline(p) => p.task,
            Predictor::Ensemble(e) => e.members()[0].task(),
        }
    }

    pub fn predict_text(&self, raw: &str) -> Result<usize> {
        self.label(preprocess(raw).as_slice())
    }

    /// Write the predictor under `dir` and return the path of its root file.
    /// Ensembles become a manifest plus one artifact per member.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(format!("{stem}.json"));
        let file = match self {
            Predictor::Pipeline(p) => ArtifactFile::Pipeline(PipelineArtifact {
                version: ARTIFACT_VERSION,
                task: p.task,
                representation: p.representation,
                vocab_fingerprint: p.vocabulary.fingerprint(),
                vocabulary: p.vocabulary.clone(),
                model: p.model.clone(),
            }),
            Predictor::Ensemble(e) => {
                let mut members = Vec::new();
                for (i, m) in e.members().iter().enumerate() {
                    let member_stem = format!("{stem}.member{i}");
                    let member_path = m.save(dir, &member_stem)?;
                    members.push(PathBuf::from(member_path.file_name().unwrap_or_default()));
                }
                ArtifactFile::Ensemble(EnsembleManifest {
                    version: ARTIFACT_VERSION,
                    mode: e.mode(),
                    weights: e.weights().map(<[f64]>::to_vec),
                    members,
                })
            }
        };
        let text = serde_json::to_string(&file).map_err(|e| Error::Serde(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Load a pipeline artifact or ensemble manifest. Member paths in a
    /// manifest are relative to the manifest's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ArtifactFile = serde_json::from_str(&text)
            .map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
        match file {
            ArtifactFile::Pipeline(a) => {
                check_version(a.version)?;
                let actual = a.vocabulary.fingerprint();
                if actual != a.vocab_fingerprint {
                    return Err(Error::FingerprintMismatch {
                        expected: a.vocab_fingerprint,
                        actual,
                    });
                }
                let p = Pipeline::new(a.task, a.representation, a.vocabulary, a.model)?;
                Ok(Predictor::Pipeline(Box::new(p)))
            }
            ArtifactFile::Ensemble(m) => {
                check_version(m.version)?;
                let base = path.parent().unwrap_or(Path::new("."));
                let members = m
                    .members
                    .iter()
                    .map(|p| Predictor::load(base.join(p)))
                    .collect::<Result<Vec<_>>>()?;
                if members.iter().any(|p| p.task() != members[0].task()) {
                    return Err(Error::Validation("ensemble members disagree on the task".into()));
                }
                Ok(Predictor::Ensemble(Ensemble::new(members, m.mode, m.weights)?))
            }
        }
    }
}

fn check_version(v: u32) -> Result<()> {
    if v != ARTIFACT_VERSION {
        return Err(Error::Serde(format!("unsupported artifact version {v}")));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case")]
enum ArtifactFile {
    Pipeline(PipelineArtifact),
    Ensemble(EnsembleManifest),
}

#[derive(Serialize, Deserialize)]
struct PipelineArtifact {
    version: u32,
    task: Task,
    representation: Representation,
    vocab_fingerprint: String,
    vocabulary: Vocabulary,
    model: FittedModel,
}

#[derive(Serialize, Deserialize)]
struct EnsembleManifest {
    version: u32,
    mode: VoteMode,
    weights: Option<Vec<f64>>,
    members: Vec<PathBuf>,
}

/// Rows of an `id`/`tweet` TSV (extra columns ignored). An empty file or a
/// header without rows yields no rows.
pub fn read_unlabeled(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut lines = text.lines();
    let Some(header) = lines.next() else {
        return Ok(Vec::new());
    };
    let cols: Vec<&str> = header.split('\t').collect();
    let find = |name: &str| {
        cols.iter().position(|c| *c == name).ok_or_else(|| Error::Parse {
            path: origin.to_string(),
            line: 1,
            message: format!("missing `{name}` column"),
        })
    };
    let (id_col, tweet_col) = (find("id")?, find("tweet")?);
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != cols.len() {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: i + 2,
                message: format!("expected {} columns, found {}", cols.len(), fields.len()),
            });
        }
        rows.push((fields[id_col].to_string(), fields[tweet_col].to_string()));
    }
    Ok(rows)
}

/// Label every row of `input` with the artifact at `artifact`, writing
/// `id\tlabel` lines to `output`. Returns the number of rows labeled.
pub fn predict_file(artifact: &Path, input: &Path, output: &Path) -> Result<usize> {
    let predictor = Predictor::load(artifact)?;
    let text = std::fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let rows = read_unlabeled(&text, &input.display().to_string())?;
    let task = predictor.task();
    let mut out = String::from("id\tlabel\n");
    for (id, tweet) in &rows {
        let class = predictor.predict_text(tweet)?;
        let label = task
            .label(class)
            .ok_or_else(|| Error::InvalidInput(format!("class {class} out of range")))?;
        out.push_str(id);
        out.push('\t');
        out.push_str(label.code());
        out.push('\n');
    }
    std::fs::write(output, out).map_err(|e| Error::io(output, e))?;
    Ok(rows.len())
}
