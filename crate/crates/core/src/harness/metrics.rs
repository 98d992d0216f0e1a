use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub stddev: f64,
}

impl RepeatSummary {
    pub fn new(accuracies: Vec<f64>) -> Self {
        let n = accuracies.len() as f64;
        let mean = accuracies.iter().sum::<f64>() / n;
        let var = if accuracies.len() > 1 {
            accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        RepeatSummary {
            accuracies,
            mean,
            stddev: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub dataset: String,
    pub classifier: String,
    pub accuracy: f64,
    pub precision: [f64; 2],
    pub recall: [f64; 2],
    /// `confusion[true][predicted]`
    pub confusion: [[usize; 2]; 2],
    pub n_eval: usize,
    pub fingerprint: String,
    /// Only recorded on request, so that repeated runs stay byte-identical.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_clock_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub repeats: Option<RepeatSummary>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_predictions(
        labels: &[u8],
        predicted: &[u8],
        dataset: &str,
        classifier: &str,
        fingerprint: &str,
    ) -> Result<Self> {
        if labels.is_empty() || labels.len() != predicted.len() {
            return Err(Error::invalid(
                "metrics need a non-empty, aligned set of labels and predictions",
            ));
        }
        let mut confusion = [[0usize; 2]; 2];
        for (&y, &p) in labels.iter().zip(predicted) {
            confusion[usize::from(y)][usize::from(p)] += 1;
        }
        let n = labels.len();
        let col = |c: usize| confusion[0][c] + confusion[1][c];
        let row = |c: usize| confusion[c][0] + confusion[c][1];
        Ok(Metrics {
            dataset: dataset.to_string(),
            classifier: classifier.to_string(),
            accuracy: ratio(confusion[0][0] + confusion[1][1], n),
            precision: [
                ratio(confusion[0][0], col(0)),
                ratio(confusion[1][1], col(1)),
            ],
            recall: [
                ratio(confusion[0][0], row(0)),
                ratio(confusion[1][1], row(1)),
            ],
            confusion,
            n_eval: n,
            fingerprint: fingerprint.to_string(),
            wall_clock_seconds: None,
            repeats: None,
        })
    }

    /// JSON with keys sorted at every level.
    pub fn to_json(&self) -> String {
        // serde_json's map type is ordered by key.
        let value = serde_json::to_value(self).expect("metrics serialize");
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// One Table-2-style line: dataset, classifier, accuracy in percent.
    pub fn table_row(&self) -> String {
        let mut row = format!(
            "{}\t{}\t{:.2}",
            self.dataset,
            self.classifier,
            self.accuracy * 100.0
        );
        if let Some(r) = &self.repeats {
            row.push_str(&format!(
                "\t(mean {:.2} ± {:.2} over {})",
                r.mean * 100.0,
                r.stddev * 100.0,
                r.accuracies.len()
            ));
        }
        row
    }
}
