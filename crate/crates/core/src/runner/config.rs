//! Declarative experiment configuration (TOML).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::corpus::{Label, SplitSpec, Task};
use crate::ensemble::VoteMode;
use crate::error::{Error, Result};
use crate::features::{NGramConfig, Representation};
use crate::learners::LearnerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub task: Task,
    /// Master seed; every stage seed is derived from it.
    #[serde(default)]
    pub seed: u64,
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub enhancement: EnhancementConfig,
    /// Paraphrase settings; `seed` is replaced by one derived from the master seed.
    #[serde(default)]
    pub augment: AugmentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learner: Option<LearnerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
    /// Output root; runs land in `<output>/<fingerprint>/`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingCorpus {
    /// Only the training split (no dev leakage).
    #[default]
    TrainSplit,
    /// Every labeled row of the training file, including rows later held out.
    TrainFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train: PathBuf,
    /// Held-out file; when absent the training file is split per `[split]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev: Option<PathBuf>,
    /// Extra labeled file scored after training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    #[serde(default)]
    pub embedding_corpus: EmbeddingCorpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub min_n: usize,
    pub max_n: usize,
    pub min_df: usize,
    pub representation: Representation,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            min_n: 1,
            max_n: 1,
            min_df: 1,
            representation: Representation::Tfidf,
        }
    }
}

impl FeatureConfig {
    pub fn ngram(&self) -> NGramConfig {
        NGramConfig {
            min_n: self.min_n,
            max_n: self.max_n,
            min_df: self.min_df,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnhancementMethod {
    #[default]
    None,
    Ros,
    Rus,
    Smote,
    Nearmiss1,
    Nearmiss2,
    Nearmiss3,
    Synthetic,
    /// Task C: ROS on GRP and OTH.
    C1,
    /// Task C: paraphrase synthesis on GRP and OTH.
    C2,
    /// Task C: ROS on GRP, synthesis on OTH.
    C3,
    /// Task C: synthesis on GRP, ROS on OTH.
    C4,
    /// Task B: synthesis on UNT.
    BalancedSynth,
    /// Task B: the original training data.
    Org,
    /// Explicit per-class choice from `per_class`.
    PerClass,
}

impl fmt::Display for EnhancementMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        let s = s.as_ref().and_then(|v| v.as_str()).unwrap_or("?");
        f.write_str(s)
    }
}

/// How a class is raised to the majority count at the text level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassEnhancement {
    Ros,
    Synthetic,
}

/// Text-level enhancement applied before the vocabulary is fit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TextPlan {
    /// Every class below the majority count.
    AllMinority(ClassEnhancement),
    PerClass(BTreeMap<Label, ClassEnhancement>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnhancementTable {
    #[serde(default)]
    pub method: EnhancementMethod,
    #[serde(default = "default_k")]
    pub k_neighbors: usize,
    #[serde(default = "default_n_ref")]
    pub n_ref: usize,
    /// Label code (e.g. `GRP`) to per-class method.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_class: BTreeMap<String, ClassEnhancement>,
}

fn default_k() -> usize {
    5
}

fn default_n_ref() -> usize {
    3
}

/// Written either as a bare method name or as a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "EnhancementRepr", into = "EnhancementTable")]
pub struct EnhancementConfig(pub EnhancementTable);

#[derive(Deserialize)]
#[serde(untagged)]
enum EnhancementRepr {
    Name(EnhancementMethod),
    Table(EnhancementTable),
}

impl From<EnhancementRepr> for EnhancementConfig {
    fn from(r: EnhancementRepr) -> Self {
        match r {
            EnhancementRepr::Name(method) => EnhancementConfig::from(method),
            EnhancementRepr::Table(t) => EnhancementConfig(t),
        }
    }
}

impl From<EnhancementConfig> for EnhancementTable {
    fn from(c: EnhancementConfig) -> Self {
        c.0
    }
}

impl From<EnhancementMethod> for EnhancementConfig {
    fn from(method: EnhancementMethod) -> Self {
        EnhancementConfig(EnhancementTable {
            method,
            k_neighbors: default_k(),
            n_ref: default_n_ref(),
            per_class: BTreeMap::new(),
        })
    }
}

impl Default for EnhancementConfig {
    fn default() -> Self {
        EnhancementMethod::None.into()
    }
}

impl EnhancementConfig {
    pub fn method(&self) -> EnhancementMethod {
        self.0.method
    }

    /// Text-level per-class plan, or `None` for the vector-level methods.
    pub fn class_plan(&self, task: Task) -> Result<Option<TextPlan>> {
        use ClassEnhancement::{Ros, Synthetic};
        use EnhancementMethod as M;
        let need = |t: Task| -> Result<()> {
            if t == task {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "enhancement {} applies to task {t}, not task {task}",
                    self.method()
                )))
            }
        };
        let plan: Vec<(Label, ClassEnhancement)> = match self.method() {
            M::None | M::Ros | M::Rus | M::Smote | M::Nearmiss1 | M::Nearmiss2 | M::Nearmiss3 => {
                return Ok(None)
            }
            M::Org => {
                need(Task::B)?;
                return Ok(None);
            }
            M::Synthetic => return Ok(Some(TextPlan::AllMinority(Synthetic))),
            M::BalancedSynth => {
                need(Task::B)?;
                vec![(Label::Untargeted, Synthetic)]
            }
            M::C1 => {
                need(Task::C)?;
                vec![(Label::Group, Ros), (Label::Other, Ros)]
            }
            M::C2 => {
                need(Task::C)?;
                vec![(Label::Group, Synthetic), (Label::Other, Synthetic)]
            }
            M::C3 => {
                need(Task::C)?;
                vec![(Label::Group, Ros), (Label::Other, Synthetic)]
            }
            M::C4 => {
                need(Task::C)?;
                vec![(Label::Group, Synthetic), (Label::Other, Ros)]
            }
            M::PerClass => {
                if self.0.per_class.is_empty() {
                    return Err(Error::Config("per_class enhancement needs a per_class table".into()));
                }
                self.0
                    .per_class
                    .iter()
                    .map(|(code, m)| {
                        Label::from_code(task, code)
                            .map(|l| (l, *m))
                            .map_err(|e| Error::Config(e.to_string()))
                    })
                    .collect::<Result<_>>()?
            }
        };
        Ok(Some(TextPlan::PerClass(plan.into_iter().collect())))
    }

    pub fn validate(&self, task: Task) -> Result<()> {
        if self.0.k_neighbors == 0 || self.0.n_ref == 0 {
            return Err(Error::Config("k_neighbors and n_ref must be at least 1".into()));
        }
        if !self.0.per_class.is_empty() && self.method() != EnhancementMethod::PerClass {
            return Err(Error::Config("per_class is only used with method = \"per_class\"".into()));
        }
        self.class_plan(task).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub mode: VoteMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub members: Vec<MemberConfig>,
}

/// One ensemble member: a learner or a nested ensemble, optionally trained
/// with its own features and enhancement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learner: Option<LearnerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<Box<EnsembleConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enhancement: Option<EnhancementConfig>,
}

fn validate_features(f: &FeatureConfig) -> Result<()> {
    f.ngram().validate().map_err(|e| Error::Config(e.to_string()))
}

fn one_model(learner: &Option<LearnerConfig>, ensemble: &Option<impl Sized>, what: &str) -> Result<()> {
    match (learner.is_some(), ensemble.is_some()) {
        (true, false) | (false, true) => Ok(()),
        _ => Err(Error::Config(format!("{what} needs exactly one of `learner` or `ensemble`"))),
    }
}

impl EnsembleConfig {
    fn validate(&self, task: Task) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::Config("ensemble has no members".into()));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.members.len() {
                return Err(Error::Config(format!(
                    "{} weights for {} ensemble members",
                    w.len(),
                    self.members.len()
                )));
            }
        }
        for m in &self.members {
            one_model(&m.learner, &m.ensemble, "ensemble member")?;
            if let Some(l) = &m.learner {
                l.validate()?;
            }
            if let Some(e) = &m.ensemble {
                e.validate(task)?;
            }
            if let Some(f) = &m.features {
                validate_features(f)?;
            }
            if let Some(e) = &m.enhancement {
                e.validate(task)?;
            }
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Parse a config file; relative data paths are resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.train);
        if let Some(p) = self.data.dev.as_mut() {
            fix(p);
        }
        if let Some(p) = self.data.test.as_mut() {
            fix(p);
        }
        if let Some(p) = self.output.as_mut() {
            fix(p);
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        one_model(&self.learner, &self.ensemble, "experiment")?;
        validate_features(&self.features)?;
        self.enhancement.validate(self.task)?;
        self.augment.validate()?;
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(Error::Config("split.train_fraction must lie in (0, 1)".into()));
        }
        if let Some(l) = &self.learner {
            l.validate()?;
        }
        if let Some(e) = &self.ensemble {
            e.validate(self.task)?;
        }
        Ok(())
    }

    /// Human-readable label for reports.
    pub fn display_name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        let model = match (&self.learner, &self.ensemble) {
            (Some(l), _) => l.name().to_string(),
            (_, Some(e)) => format!("{:?}_ENSEMBLE", e.mode).to_uppercase(),
            _ => "?".into(),
        };
        format!(
            "{model}/{}/{}-{}gram",
            self.enhancement.method(),
            self.features.min_n,
            self.features.max_n
        )
    }
}
