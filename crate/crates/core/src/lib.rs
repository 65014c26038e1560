//! Imbalanced offensive-tweet classification.
//!
//! The crate covers the whole experimental pipeline: OLID ingestion and
//! preprocessing ([`corpus`]), n-gram features ([`features`]), resampling
//! ([`resample`]), embedding-based paraphrase augmentation ([`augment`]),
//! classical classifiers ([`learners`]), voting and averaging ensembles
//! ([`ensemble`]), metrics ([`eval`]) and the config-driven experiment
//! runner ([`runner`]).

pub mod augment;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod features;
pub mod learners;
pub mod resample;
pub mod rng;
pub mod runner;
pub mod synth;

pub use corpus::{Dataset, Example, Label, Provenance, SplitSpec, Task, Tweet};
pub use ensemble::{Ensemble, Scorer, VoteMode};
pub use error::{Error, ErrorCategory, Result};
pub use eval::{ClassReport, ConfusionMatrix};
pub use features::{FeatureMatrix, NGramConfig, Representation, SparseVector, Vocabulary};
pub use learners::{fit, FittedModel, LearnerConfig, ProbabilisticClassifier};
pub use resample::{Method as ResampleMethod, ResamplePlan, Resampled, RowOrigin};
pub use runner::{run_experiment, run_grid, ExperimentConfig, GridSpec, Predictor, RunResult};
