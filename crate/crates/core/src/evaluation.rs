//! Error metrics in physical units (S/m) and parity data.

use serde::{Deserialize, Serialize};

use crate::data::{Sample, Scaler, NUM_FEATURES};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::training::loss::check_pair;
pub use crate::training::loss::rmse;

/// Average absolute error.
pub fn aae(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    let sum: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).sum();
    Ok(sum / y_true.len() as f64)
}

/// Population standard deviation of the signed deviations `y_true - y_pred`.
pub fn stdev_of_deviation(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    if y_true.len() < 2 {
        return Err(Error::Shape(
            "standard deviation of deviations needs at least 2 samples".into(),
        ));
    }
    let n = y_true.len() as f64;
    let deviations: Vec<f64> = y_true.iter().zip(y_pred).map(|(t, p)| t - p).collect();
    let mean = deviations.iter().sum::<f64>() / n;
    let var = deviations.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    Ok(var.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityPair {
    pub conductivity_true: f64,
    pub conductivity_pred: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub aae: f64,
    pub stdev_of_deviation: f64,
    pub rmse: f64,
    pub n: usize,
    #[serde(skip)]
    pub parity: Vec<ParityPair>,
}

impl EvalReport {
    pub fn from_predictions(y_true: &[f64], y_pred: &[f64]) -> Result<Self> {
        Ok(Self {
            aae: aae(y_true, y_pred)?,
            stdev_of_deviation: stdev_of_deviation(y_true, y_pred)?,
            rmse: rmse(y_true, y_pred)?,
            n: y_true.len(),
            parity: y_true
                .iter()
                .zip(y_pred)
                .map(|(&t, &p)| ParityPair {
                    conductivity_true: t,
                    conductivity_pred: p,
                })
                .collect(),
        })
    }
}

/// Predicted conductivity in S/m for raw (unscaled) predictors.
///
/// The scaler's last column is the target; the leading columns are the
/// network inputs.
pub fn predict_conductivity(net: &Network, scaler: &Scaler, features: &[f64]) -> Result<f64> {
    let target_col = scaler.columns() - 1;
    if target_col != net.input_dim() || features.len() != net.input_dim() {
        return Err(Error::Shape(format!(
            "scaler has {} columns and input has {} features for a network with {} inputs",
            scaler.columns(),
            features.len(),
            net.input_dim()
        )));
    }
    let y = net.predict(&scaler.normalize(features))?;
    Ok(scaler.denormalize_value(target_col, y))
}

pub fn predict_samples(net: &Network, scaler: &Scaler, samples: &[Sample]) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|s| predict_conductivity(net, scaler, &s.features()))
        .collect()
}

pub fn predict_rows(
    net: &Network,
    scaler: &Scaler,
    rows: &[[f64; NUM_FEATURES]],
) -> Result<Vec<f64>> {
    rows.iter()
        .map(|r| predict_conductivity(net, scaler, r))
        .collect()
}

/// Metrics of the network on `samples`, with predictions mapped back to S/m.
pub fn evaluate(net: &Network, scaler: &Scaler, samples: &[Sample]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let y_pred = predict_samples(net, scaler, samples)?;
    let y_true: Vec<f64> = samples.iter().map(|s| s.conductivity).collect();
    EvalReport::from_predictions(&y_true, &y_pred)
}
