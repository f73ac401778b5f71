//! Connection-weights input importance.
//!
//! The contribution of input `i` is `c_i = sum_j w1[j][i] * w2[0][j]`, i.e. the
//! `i`-th entry of `w2 · w1`. Biases play no part. Relative importance is
//! `|c_i| / sum_k |c_k|` in percent; the signed contributions are kept as well.
//!
//! The network consumes min-max scaled inputs, so importances are relative to
//! the scaled input ranges seen during training.

use serde::{Deserialize, Serialize};

use crate::data::FEATURE_COLUMNS;
use crate::network::Network;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputImportance {
    pub input: String,
    pub contribution: f64,
    /// `None` when every contribution is exactly zero.
    pub importance_pct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub inputs: Vec<InputImportance>,
}

impl SensitivityReport {
    /// True when all contributions are zero and percentages are undefined.
    pub fn is_degenerate(&self) -> bool {
        self.inputs.iter().all(|i| i.importance_pct.is_none())
    }

    pub fn contributions(&self) -> Vec<f64> {
        self.inputs.iter().map(|i| i.contribution).collect()
    }

    pub fn percentages(&self) -> Option<Vec<f64>> {
        self.inputs.iter().map(|i| i.importance_pct).collect()
    }

    /// Index of the input with the largest relative importance.
    pub fn most_important(&self) -> Option<usize> {
        let pct = self.percentages()?;
        (0..pct.len()).max_by(|&a, &b| pct[a].total_cmp(&pct[b]))
    }
}

/// Input labels for a network of the given width: the six measurement columns
/// for six-input networks, `x1..xn` otherwise.
pub fn default_labels(input_dim: usize) -> Vec<String> {
    if input_dim == FEATURE_COLUMNS.len() {
        FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect()
    } else {
        (1..=input_dim).map(|i| format!("x{i}")).collect()
    }
}

pub fn connection_weights(net: &Network) -> SensitivityReport {
    connection_weights_labeled(net, &default_labels(net.input_dim()))
}

pub fn connection_weights_labeled(net: &Network, labels: &[String]) -> SensitivityReport {
    let w2 = net.w2.row(0);
    let contributions: Vec<f64> = (0..net.input_dim())
        .map(|i| {
            (0..net.hidden_width())
                .map(|j| net.w1.get(j, i) * w2[j])
                .sum()
        })
        .collect();
    let total: f64 = contributions.iter().map(|c| c.abs()).sum();
    let inputs = contributions
        .iter()
        .enumerate()
        .map(|(i, &c)| InputImportance {
            input: labels
                .get(i)
                .cloned()
                .unwrap_or_else(|| format!("x{}", i + 1)),
            contribution: c,
            importance_pct: (total > 0.0).then(|| c.abs() / total * 100.0),
        })
        .collect();
    SensitivityReport { inputs }
}
