//! Cross-product grids of experiments with resumable, parallel execution.

use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EnhancementConfig, ExperimentConfig};
use super::{run_dir, run_experiment, write_atomic, RunResult};
use crate::error::{Error, Result};
use crate::features::Representation;
use crate::learners::LearnerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Shared settings; every axis value overrides the matching field.
    pub base: ExperimentConfig,
    #[serde(default)]
    pub axes: GridAxes,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxes {
    /// `[min_n, max_n]` pairs.
    pub ngram: Option<Vec<[usize; 2]>>,
    pub representation: Option<Vec<Representation>>,
    pub enhancement: Option<Vec<EnhancementConfig>>,
    pub learner: Option<Vec<LearnerConfig>>,
    pub seed: Option<Vec<u64>>,
}

impl GridSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        spec.base.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(spec)
    }
}

fn axis<T: Clone>(values: &Option<Vec<T>>, name: &str) -> Result<Vec<Option<T>>> {
    match values {
        None => Ok(vec![None]),
        Some(v) if v.is_empty() => Err(Error::Config(format!("grid axis `{name}` is empty"))),
        Some(v) => Ok(v.iter().cloned().map(Some).collect()),
    }
}

/// Every combination of axis values, in a fixed nesting order
/// (ngram, representation, enhancement, learner, seed).
pub fn expand_grid(spec: &GridSpec) -> Result<Vec<ExperimentConfig>> {
    let a = &spec.axes;
    let mut out = Vec::new();
    for ngram in axis(&a.ngram, "ngram")? {
        for rep in axis(&a.representation, "representation")? {
            for enh in axis(&a.enhancement, "enhancement")? {
                for learner in axis(&a.learner, "learner")? {
                    for seed in axis(&a.seed, "seed")? {
                        let mut c = spec.base.clone();
                        if let Some([lo, hi]) = ngram {
                            c.features.min_n = lo;
                            c.features.max_n = hi;
                        }
                        if let Some(r) = rep {
                            c.features.representation = r;
                        }
                        if let Some(e) = enh.clone() {
                            c.enhancement = e;
                        }
                        if let Some(l) = learner.clone() {
                            c.learner = Some(l);
                            c.ensemble = None;
                        }
                        if let Some(s) = seed {
                            c.seed = s;
                        }
                        c.name = None;
                        c.validate()?;
                        out.push(c);
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub fingerprint: String,
    pub name: String,
    pub ngram: String,
    pub representation: Representation,
    pub enhancement: String,
    pub model: String,
    pub seed: u64,
    pub macro_f1: Option<f64>,
    pub recall: Vec<f64>,
    pub error: Option<String>,
}

impl GridRow {
    fn new(config: &ExperimentConfig, fingerprint: String, outcome: std::result::Result<&RunResult, String>) -> Self {
        let model = match (&config.learner, &config.ensemble) {
            (Some(l), _) => l.name().to_string(),
            (_, Some(e)) => format!("{:?}", e.mode).to_uppercase() + "_ENSEMBLE",
            _ => String::new(),
        };
        let (macro_f1, recall, error) = match outcome {
            Ok(r) => (Some(r.macro_f1), r.dev.classes.iter().map(|c| c.recall).collect(), None),
            Err(e) => (None, Vec::new(), Some(e)),
        };
        GridRow {
            fingerprint,
            name: config.display_name(),
            ngram: format!("{}-{}", config.features.min_n, config.features.max_n),
            representation: config.features.representation,
            enhancement: config.enhancement.method().to_string(),
            model,
            seed: config.seed,
            macro_f1,
            recall,
            error,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    /// Sorted by dev macro-F1, best first; failed runs last.
    pub rows: Vec<GridRow>,
    pub computed: usize,
    pub skipped: usize,
    pub failed: usize,
    pub table: PathBuf,
}

#[derive(Serialize)]
struct LedgerEntry<'a> {
    fingerprint: &'a str,
    name: &'a str,
    status: &'a str,
    macro_f1: Option<f64>,
    wall_time_secs: Option<f64>,
    error: Option<&'a str>,
}

enum Status {
    Done(Box<RunResult>),
    Resumed(Box<RunResult>),
    Failed(String),
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render_table(rows: &[GridRow]) -> String {
    let mut out = String::from("rank,fingerprint,name,ngram,representation,enhancement,model,seed,macro_f1,recall,error\n");
    for (i, r) in rows.iter().enumerate() {
        let rep = serde_json::to_value(r.representation)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        let recall: Vec<String> = r.recall.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            i + 1,
            r.fingerprint,
            csv_field(&r.name),
            r.ngram,
            rep,
            r.enhancement,
            r.model,
            r.seed,
            r.macro_f1.map(|v| v.to_string()).unwrap_or_default(),
            recall.join(";"),
            csv_field(r.error.as_deref().unwrap_or("")),
        );
    }
    out
}

/// Run every grid cell on a pool of `jobs` threads. Cells whose
/// `result.json` already exists are loaded instead of recomputed; failures
/// are recorded and do not stop the grid. Writes `grid_results.csv` and
/// appends one line per new run to `ledger.jsonl` under `out_root`.
pub fn run_grid(spec: &GridSpec, out_root: &Path, jobs: usize) -> Result<GridOutcome> {
    let configs = expand_grid(spec)?;
    std::fs::create_dir_all(out_root).map_err(|e| Error::io(out_root, e))?;
    let ledger_path = out_root.join("ledger.jsonl");
    let ledger = Mutex::new(
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&ledger_path)
            .map_err(|e| Error::io(&ledger_path, e))?,
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;

    let run_one = |config: &ExperimentConfig| -> (String, Status) {
        let dir = match run_dir(config, Some(out_root)) {
            Ok(d) => d,
            Err(e) => return (String::new(), Status::Failed(e.to_string())),
        };
        let fingerprint = dir.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        if let Ok(r) = RunResult::load(dir.join("result.json")) {
            return (fingerprint, Status::Resumed(Box::new(r)));
        }
        let status = match run_experiment(config, Some(out_root)) {
            Ok(r) => Status::Done(Box::new(r)),
            Err(e) => Status::Failed(e.to_string()),
        };
        let entry = match &status {
            Status::Done(r) => LedgerEntry {
                fingerprint: &fingerprint,
                name: &r.name,
                status: "ok",
                macro_f1: Some(r.macro_f1),
                wall_time_secs: Some(r.wall_time_secs),
                error: None,
            },
            Status::Failed(e) => LedgerEntry {
                fingerprint: &fingerprint,
                name: "",
                status: "failed",
                macro_f1: None,
                wall_time_secs: None,
                error: Some(e),
            },
            Status::Resumed(_) => unreachable!("resumed runs return early"),
        };
        if let Ok(mut line) = serde_json::to_string(&entry) {
            line.push('\n');
            if let Ok(mut f) = ledger.lock() {
                let _ = f.write_all(line.as_bytes());
            }
        }
        (fingerprint, status)
    };

    let results: Vec<(String, Status)> = pool.install(|| configs.par_iter().map(run_one).collect());

    let (mut computed, mut skipped, mut failed) = (0, 0, 0);
    let mut rows: Vec<GridRow> = configs
        .iter()
        .zip(results)
        .map(|(config, (fp, status))| match status {
            Status::Done(r) => {
                computed += 1;
                GridRow::new(config, fp, Ok(&r))
            }
            Status::Resumed(r) => {
                skipped += 1;
                GridRow::new(config, fp, Ok(&r))
            }
            Status::Failed(e) => {
                failed += 1;
                GridRow::new(config, fp, Err(e))
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        let key = |r: &GridRow| r.macro_f1.unwrap_or(f64::NEG_INFINITY);
        key(b)
            .total_cmp(&key(a))
            .then_with(|| a.fingerprint.cmp(&b.fingerprint))
    });
    let table = out_root.join("grid_results.csv");
    write_atomic(&table, &render_table(&rows))?;
    Ok(GridOutcome {
        rows,
        computed,
        skipped,
        failed,
        table,
    })
}
