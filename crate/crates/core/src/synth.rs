//! Deterministic OLID-format mini-corpora for tests, demos and benchmarks.
//!
//! Each class owns a small set of cue words. A tweet mixes filler words
//! (Zipf-distributed), cues of its own class and, less often, cues of other
//! classes, wrapped in the usual tweet noise (mentions, URLs, punctuation).

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Example, Task, Tweet};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, StageRng};

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ne", "ru", "ta", "so", "vi", "de", "po", "zu", "be", "ga", "fi", "ho", "ji", "ku", "le",
    "ma", "no", "ri", "te", "su", "wa",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub task: Task,
    /// Exact number of tweets per class, in class-index order.
    pub class_sizes: Vec<usize>,
    pub filler_words: usize,
    pub cues_per_class: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Chance that a token is a cue of the tweet's own class.
    pub own_cue_prob: f64,
    /// Chance that a token is a cue of some other class.
    pub other_cue_prob: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec::task_b()
    }
}

impl SynthSpec {
    /// Two classes at 95:5, 2,000 tweets.
    pub fn task_b() -> Self {
        SynthSpec {
            task: Task::B,
            class_sizes: vec![1900, 100],
            filler_words: 600,
            cues_per_class: 40,
            min_len: 6,
            max_len: 18,
            own_cue_prob: 0.3,
            other_cue_prob: 0.06,
            seed: 2019,
        }
    }

    /// Three classes in roughly the OLID sub-task C proportions, 1,200 tweets.
    pub fn task_c() -> Self {
        SynthSpec {
            task: Task::C,
            class_sizes: vec![744, 336, 120],
            filler_words: 600,
            cues_per_class: 40,
            min_len: 6,
            max_len: 18,
            own_cue_prob: 0.15,
            other_cue_prob: 0.05,
            seed: 2019,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.class_sizes.len() != self.task.n_classes() {
            return Err(Error::Config(format!(
                "task {} needs {} class sizes",
                self.task,
                self.task.n_classes()
            )));
        }
        if self.min_len == 0 || self.min_len > self.max_len || self.filler_words == 0 || self.cues_per_class == 0 {
            return Err(Error::Config("invalid synthetic corpus shape".into()));
        }
        if !(self.own_cue_prob >= 0.0 && self.other_cue_prob >= 0.0 && self.own_cue_prob + self.other_cue_prob <= 1.0) {
            return Err(Error::Config("cue probabilities must be non-negative and sum to at most 1".into()));
        }
        Ok(())
    }
}

fn lexicon(n: usize, rng: &mut StageRng, taken: &mut BTreeSet<String>) -> Vec<String> {
    let mut words = Vec::with_capacity(n);
    while words.len() < n {
        let syllables = rng.gen_range(2..=3);
        let w: String = (0..syllables)
            .map(|_| SYLLABLES[rng.gen_range(0..SYLLABLES.len())])
            .collect();
        if taken.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

/// Cumulative Zipf(1) weights for ranks `1..=n`.
fn zipf_table(n: usize) -> Vec<f64> {
    let mut acc = 0.0;
    (1..=n)
        .map(|r| {
            acc += 1.0 / r as f64;
            acc
        })
        .collect()
}

fn draw(table: &[f64], rng: &mut StageRng) -> usize {
    let u = rng.gen::<f64>() * table[table.len() - 1];
    table.partition_point(|&c| c < u).min(table.len() - 1)
}

/// Generate the corpus; classes are interleaved in a shuffled order.
pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let mut taken = BTreeSet::new();
    let filler = lexicon(spec.filler_words, &mut rng, &mut taken);
    let cues: Vec<Vec<String>> = (0..spec.class_sizes.len())
        .map(|_| lexicon(spec.cues_per_class, &mut rng, &mut taken))
        .collect();
    let zipf = zipf_table(filler.len());

    let mut labels: Vec<usize> = spec
        .class_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat(c).take(n))
        .collect();
    for i in (1..labels.len()).rev() {
        labels.swap(i, rng.gen_range(0..=i));
    }

    let k = spec.class_sizes.len();
    let mut examples = Vec::with_capacity(labels.len());
    for (i, &class) in labels.iter().enumerate() {
        let len = rng.gen_range(spec.min_len..=spec.max_len);
        let mut words: Vec<String> = Vec::with_capacity(len + 3);
        if rng.gen_bool(0.4) {
            words.push("@USER".into());
        }
        for _ in 0..len {
            let u: f64 = rng.gen();
            let w = if u < spec.own_cue_prob {
                &cues[class][rng.gen_range(0..cues[class].len())]
            } else if u < spec.own_cue_prob + spec.other_cue_prob {
                let other = (class + rng.gen_range(1..k)) % k;
                &cues[other][rng.gen_range(0..cues[other].len())]
            } else {
                &filler[draw(&zipf, &mut rng)]
            };
            words.push(w.clone());
        }
        if rng.gen_bool(0.2) {
            words.push(["!!", "?", "...", "#maga"][rng.gen_range(0..4)].into());
        }
        if rng.gen_bool(0.15) {
            words.push("URL".into());
        }
        let mut text = words.join(" ");
        if let Some(first) = text.get(..1) {
            text = first.to_uppercase() + &text[1..];
        }
        let label = spec.task.label(class).ok_or_else(|| Error::Config("class out of range".into()))?;
        let id = format!("{}{:05}", if spec.task == Task::B { "b" } else { "c" }, i + 1);
        examples.push(Example::new(Tweet::new(id, text), label));
    }
    Dataset::new(spec.task, examples)
}
