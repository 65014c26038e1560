//! OLID-format ingestion, tweet preprocessing and stratified splitting.
//!
//! The on-disk format is the tab-separated OLID release layout:
//!
//! ```text
//! id	tweet	subtask_a	subtask_b	subtask_c
//! ```
//!
//! with `NULL` for absent labels. Rows derived by resampling or augmentation
//! carry their provenance in the id (`<source>#dup<n>`, `<source>#syn<n>`) so a
//! serialized training set loads back unchanged.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::LazyLock;

use rand::seq::SliceRandom;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub const OLID_HEADER: &str = "id\ttweet\tsubtask_a\tsubtask_b\tsubtask_c";
const NULL_LABEL: &str = "NULL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    /// Targeted vs. untargeted offense.
    B,
    /// Offense target: individual, group or other.
    C,
}

impl Task {
    pub fn labels(self) -> &'static [Label] {
        match self {
            Task::B => &[Label::Targeted, Label::Untargeted],
            Task::C => &[Label::Individual, Label::Group, Label::Other],
        }
    }

    pub fn n_classes(self) -> usize {
        self.labels().len()
    }

    pub fn label(self, class_index: usize) -> Option<Label> {
        self.labels().get(class_index).copied()
    }

    fn column(self) -> usize {
        match self {
            Task::B => 3,
            Task::C => 4,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::B => f.write_str("B"),
            Task::C => f.write_str("C"),
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "B" => Ok(Task::B),
            "C" => Ok(Task::C),
            other => Err(Error::Config(format!("unknown task `{other}` (expected B or C)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Targeted,
    Untargeted,
    Individual,
    Group,
    Other,
}

impl Label {
    pub fn task(self) -> Task {
        match self {
            Label::Targeted | Label::Untargeted => Task::B,
            Label::Individual | Label::Group | Label::Other => Task::C,
        }
    }

    /// Position of the label in its task's class ordering.
    pub fn class_index(self) -> usize {
        match self {
            Label::Targeted | Label::Individual => 0,
            Label::Untargeted | Label::Group => 1,
            Label::Other => 2,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Label::Targeted => "TIN",
            Label::Untargeted => "UNT",
            Label::Individual => "IND",
            Label::Group => "GRP",
            Label::Other => "OTH",
        }
    }

    pub fn from_code(task: Task, code: &str) -> Result<Self> {
        task.labels()
            .iter()
            .copied()
            .find(|l| l.code() == code)
            .ok_or_else(|| {
                Error::Validation(format!("unknown sub-task {task} label `{code}`"))
            })
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Where a training example came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Original,
    Duplicate { source: String },
    Synthetic { source: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub raw_text: String,
    pub tokens: Vec<String>,
}

impl Tweet {
    pub fn new(id: impl Into<String>, raw_text: impl Into<String>) -> Self {
        let raw_text = raw_text.into();
        let tokens = preprocess(&raw_text);
        Tweet {
            id: id.into(),
            raw_text,
            tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub tweet: Tweet,
    pub label: Label,
    pub provenance: Provenance,
}

impl Example {
    pub fn new(tweet: Tweet, label: Label) -> Self {
        let provenance = provenance_from_id(&tweet.id);
        Example {
            tweet,
            label,
            provenance,
        }
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self.provenance, Provenance::Synthetic { .. })
    }
}

/// Build the id of a row derived from `source`.
pub fn derived_id(source: &str, synthetic: bool, n: usize) -> String {
    if synthetic {
        format!("{source}#syn{n}")
    } else {
        format!("{source}#dup{n}")
    }
}

fn provenance_from_id(id: &str) -> Provenance {
    if let Some((source, suffix)) = id.rsplit_once('#') {
        let numbered = |prefix: &str| {
            suffix
                .strip_prefix(prefix)
                .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
        };
        if numbered("syn") {
            return Provenance::Synthetic {
                source: source.to_string(),
            };
        }
        if numbered("dup") {
            return Provenance::Duplicate {
                source: source.to_string(),
            };
        }
    }
    Provenance::Original
}

/// Labeled tweets for a single sub-task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    task: Task,
    examples: Vec<Example>,
}

impl Dataset {
    pub fn new(task: Task, examples: Vec<Example>) -> Result<Self> {
        if let Some(bad) = examples.iter().find(|e| e.label.task() != task) {
            return Err(Error::Validation(format!(
                "example {} has label {} which does not belong to sub-task {task}",
                bad.tweet.id, bad.label
            )));
        }
        Ok(Dataset { task, examples })
    }

    pub fn empty(task: Task) -> Self {
        Dataset {
            task,
            examples: Vec::new(),
        }
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<Example> {
        self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Histogram over every label of the task, zero counts included.
    pub fn class_counts(&self) -> BTreeMap<Label, usize> {
        let mut counts: BTreeMap<Label, usize> =
            self.task.labels().iter().map(|&l| (l, 0)).collect();
        for e in &self.examples {
            *counts.entry(e.label).or_default() += 1;
        }
        counts
    }

    /// Class counts indexed by class index.
    pub fn class_count_vec(&self) -> Vec<usize> {
        let mut counts = vec![0; self.task.n_classes()];
        for e in &self.examples {
            counts[e.label.class_index()] += 1;
        }
        counts
    }

    pub fn token_lists(&self) -> Vec<Vec<String>> {
        self.examples.iter().map(|e| e.tweet.tokens.clone()).collect()
    }

    pub fn class_indices(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label.class_index()).collect()
    }

    pub fn push(&mut self, example: Example) -> Result<()> {
        if example.label.task() != self.task {
            return Err(Error::Validation(format!(
                "label {} does not belong to sub-task {}",
                example.label, self.task
            )));
        }
        self.examples.push(example);
        Ok(())
    }

    /// Serialize in the OLID TSV layout.
    pub fn to_tsv(&self) -> Result<String> {
        let mut out = String::with_capacity(64 * (self.examples.len() + 1));
        out.push_str(OLID_HEADER);
        out.push('\n');
        for e in &self.examples {
            for field in [&e.tweet.id, &e.tweet.raw_text] {
                if field.contains(['\t', '\n', '\r']) {
                    return Err(Error::InvalidInput(format!(
                        "field {field:?} of example {} contains a tab or newline",
                        e.tweet.id
                    )));
                }
            }
            let (b, c) = match self.task {
                Task::B => (e.label.code(), NULL_LABEL),
                Task::C => (Label::Targeted.code(), e.label.code()),
            };
            out.push_str(&format!(
                "{}\t{}\tOFF\t{b}\t{c}\n",
                e.tweet.id, e.tweet.raw_text
            ));
        }
        Ok(out)
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()?).map_err(|e| Error::io(path, e))
    }
}

/// Load an OLID TSV file, keeping only rows labeled for `task`.
pub fn load_olid(path: impl AsRef<Path>, task: Task) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_olid(&text, &path.display().to_string(), task)
}

/// Parse OLID TSV text. `origin` is only used in error messages.
pub fn parse_olid(text: &str, origin: &str, task: Task) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l.trim_end_matches('\r'));
    if header != Some(OLID_HEADER) {
        return Err(Error::Parse {
            path: origin.to_string(),
            line: 1,
            message: format!("expected header `{}`", OLID_HEADER.replace('\t', "\\t")),
        });
    }
    let mut examples = Vec::new();
    for (i, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                message: format!("expected 5 tab-separated columns, found {}", cols.len()),
            });
        }
        let code = cols[task.column()].trim();
        if code.is_empty() || code == NULL_LABEL {
            continue;
        }
        let label = Label::from_code(task, code).map_err(|e| match e {
            Error::Validation(msg) => Error::Validation(format!("{origin}: line {}: {msg}", i + 1)),
            other => other,
        })?;
        examples.push(Example::new(Tweet::new(cols[0], cols[1]), label));
    }
    Dataset::new(task, examples)
}

static URL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:https?://\S*|\bwww\.\S*|\bt\.co/\S*)").expect("valid url regex")
});
static MENTION_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|\s)@\S*").expect("valid mention regex"));

/// Lowercase, drop URLs and `@` mentions, strip every character that is not
/// a letter, digit or whitespace, then split on whitespace.
pub fn preprocess(raw_text: &str) -> Vec<String> {
    let lowered = raw_text.to_lowercase();
    let no_urls = URL_RE.replace_all(&lowered, " ");
    let no_mentions = MENTION_RE.replace_all(&no_urls, " ");
    let cleaned: String = no_mentions
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    cleaned.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 0,
            stratified: true,
        }
    }
}

/// Number of training rows out of `n`: everything except `ceil((1 - fraction) * n)`.
pub fn train_total(fraction: f64, n: usize) -> usize {
    let held_out = ((1.0 - fraction) * n as f64 - 1e-9).ceil().max(0.0) as usize;
    n - held_out.min(n)
}

/// Per-class training counts. The training total from [`train_total`] is
/// shared out proportionally; floors first, then the leftover rows go to the
/// classes with the largest fractional parts (ties to the lower class index).
pub fn stratified_allocation(counts: &[usize], fraction: f64) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return vec![0; counts.len()];
    }
    let n_train = train_total(fraction, n);
    let exact: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 * n_train as f64 / n as f64)
        .collect();
    let mut alloc: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut leftover = n_train - alloc.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &c in order.iter().cycle().take(counts.len() * 2) {
        if leftover == 0 {
            break;
        }
        if alloc[c] < counts[c] {
            alloc[c] += 1;
            leftover -= 1;
        }
    }
    alloc
}

/// Split into train and dev. Each split keeps the input order.
pub fn stratified_split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    let mut rng = rng_from_seed(spec.seed);
    let mut in_train = vec![false; dataset.len()];

    if spec.stratified {
        let mut by_class: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
        for (i, e) in dataset.examples.iter().enumerate() {
            by_class.entry(e.label).or_default().push(i);
        }
        if by_class.len() < 2 {
            return Err(Error::Validation(format!(
                "cannot stratify: {} class(es) present, need at least 2",
                by_class.len()
            )));
        }
        if let Some((label, rows)) = by_class.iter().find(|(_, rows)| rows.len() < 2) {
            return Err(Error::Validation(format!(
                "cannot stratify: class {label} has {} example(s), need at least 2",
                rows.len()
            )));
        }
        let counts: Vec<usize> = by_class.values().map(Vec::len).collect();
        let alloc = stratified_allocation(&counts, spec.train_fraction);
        for (rows, n_train) in by_class.values_mut().zip(alloc) {
            rows.shuffle(&mut rng);
            for &i in &rows[..n_train] {
                in_train[i] = true;
            }
        }
    } else {
        let mut rows: Vec<usize> = (0..dataset.len()).collect();
        rows.shuffle(&mut rng);
        let n_train = train_total(spec.train_fraction, rows.len());
        for &i in &rows[..n_train] {
            in_train[i] = true;
        }
    }

    let (mut train, mut dev) = (Vec::new(), Vec::new());
    for (e, &t) in dataset.examples.iter().zip(&in_train) {
        if t {
            train.push(e.clone());
        } else {
            dev.push(e.clone());
        }
    }
    Ok((
        Dataset::new(dataset.task, train)?,
        Dataset::new(dataset.task, dev)?,
    ))
}
