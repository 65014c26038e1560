//! Confusion matrices and per-class precision / recall / F1 reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are gold classes, columns are predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<Vec<u64>>,
}

pub fn confusion(golds: &[usize], preds: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if golds.len() != preds.len() {
        return Err(Error::InvalidInput(format!(
            "{} gold labels but {} predictions",
            golds.len(),
            preds.len()
        )));
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&g, &p) in golds.iter().zip(preds) {
        if g >= n_classes || p >= n_classes {
            return Err(Error::InvalidInput(format!(
                "label pair ({g}, {p}) out of range for {n_classes} classes"
            )));
        }
        counts[g][p] += 1;
    }
    Ok(ConfusionMatrix { n_classes, counts })
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n_classes = counts.len();
        if counts.iter().any(|r| r.len() != n_classes) {
            return Err(Error::InvalidInput("confusion matrix must be square".into()));
        }
        Ok(ConfusionMatrix { n_classes, counts })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, gold: usize, pred: usize) -> u64 {
        self.counts[gold][pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, gold: usize) -> u64 {
        self.counts[gold].iter().sum()
    }

    pub fn column_sum(&self, pred: usize) -> u64 {
        self.counts.iter().map(|r| r[pred]).sum()
    }

    pub fn to_csv(&self, labels: &[&str]) -> String {
        self.render_csv(labels, |g, p| self.counts[g][p].to_string())
    }

    /// Each gold row divided by its total; empty rows stay zero.
    pub fn to_normalized_csv(&self, labels: &[&str]) -> String {
        self.render_csv(labels, |g, p| {
            let row = self.row_sum(g);
            let v = if row == 0 {
                0.0
            } else {
                self.counts[g][p] as f64 / row as f64
            };
            v.to_string()
        })
    }

    fn render_csv(&self, labels: &[&str], cell: impl Fn(usize, usize) -> String) -> String {
        let mut out = String::from("gold\\pred");
        for l in labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (g, label) in labels.iter().enumerate().take(self.n_classes) {
            out.push_str(label);
            for p in 0..self.n_classes {
                out.push(',');
                out.push_str(&cell(g, p));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Nothing was predicted as this class, so precision was taken as 0.
    pub precision_undefined: bool,
    /// The class has no gold examples, so recall was taken as 0.
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub classes: Vec<ClassMetrics>,
    /// Mean F1 over the classes that occur in the gold labels.
    pub macro_f1: f64,
    pub total: u64,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn report(matrix: &ConfusionMatrix) -> ClassReport {
    let classes: Vec<ClassMetrics> = (0..matrix.n_classes())
        .map(|c| {
            let tp = matrix.get(c, c);
            let (precision, precision_undefined) = ratio(tp, matrix.column_sum(c));
            let support = matrix.row_sum(c);
            let (recall, recall_undefined) = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
                precision_undefined,
                recall_undefined,
            }
        })
        .collect();
    let present: Vec<f64> = classes.iter().filter(|m| m.support > 0).map(|m| m.f1).collect();
    let macro_f1 = if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    ClassReport {
        classes,
        macro_f1,
        total: matrix.total(),
    }
}

impl ClassReport {
    /// Notes for every precision or recall that was defined as 0 by convention.
    pub fn warnings(&self, labels: &[&str]) -> Vec<String> {
        let mut out = Vec::new();
        for (m, label) in self.classes.iter().zip(labels) {
            if m.precision_undefined {
                out.push(format!("{label}: no predictions, precision set to 0"));
            }
            if m.recall_undefined {
                out.push(format!("{label}: no gold examples, recall set to 0"));
            }
        }
        out
    }

    pub fn to_csv(&self, labels: &[&str]) -> String {
        let mut out = String::from("class,precision,recall,f1,support\n");
        for (m, label) in self.classes.iter().zip(labels) {
            let _ = writeln!(out, "{label},{},{},{},{}", m.precision, m.recall, m.f1, m.support);
        }
        let _ = writeln!(out, "macro,,,{},{}", self.macro_f1, self.total);
        out
    }

    pub fn render_text(&self, labels: &[&str]) -> String {
        let width = labels.iter().map(|l| l.len()).max().unwrap_or(0).max(8);
        let mut out = format!(
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>7}\n",
            "class", "precision", "recall", "f1", "support"
        );
        for (m, label) in self.classes.iter().zip(labels) {
            let _ = writeln!(
                out,
                "{label:<width$}  {:>9.5}  {:>9.5}  {:>9.5}  {:>7}",
                m.precision, m.recall, m.f1, m.support
            );
        }
        let _ = writeln!(out, "{:<width$}  {:>9}  {:>9}  {:>9.5}  {:>7}", "macro", "", "", self.macro_f1, self.total);
        for w in self.warnings(labels) {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}
