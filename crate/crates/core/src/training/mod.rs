//! Training pipeline: preprocessing, Adam epoch loop and the hidden-width sweep.

pub mod adam;
pub mod loss;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adam::{AdamConfig, AdamState};
pub use loss::{backward, dataset_rmse, rmse, Example, Gradients};

use crate::data::{self, Dataset, Sample, Scaler, SplitIndices, NUM_FEATURES};
use crate::error::{Error, Result};
use crate::evaluation::{self, EvalReport};
use crate::network::{check_min_width, glorot_uniform_init, Network};
use crate::rng::{stream, RngState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden_width: usize,
    pub norm_lo: f64,
    pub norm_hi: f64,
    pub train_fraction: f64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            batch_size: 32,
            seed: 42,
            hidden_width: 100,
            norm_lo: 0.0,
            norm_hi: 1.0,
            train_fraction: data::DEFAULT_TRAIN_FRACTION,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, input_dim: usize) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.norm_lo.is_finite() && self.norm_hi.is_finite() && self.norm_lo < self.norm_hi) {
            return Err(Error::Config(format!(
                "normalization range [{}, {}] must satisfy lo < hi",
                self.norm_lo, self.norm_hi
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction {} must lie strictly between 0 and 1",
                self.train_fraction
            )));
        }
        self.adam.validate()?;
        check_min_width(input_dim, self.hidden_width).into_result()?;
        Ok(())
    }
}

/// Preprocessed data shared by every run with the same seed and split.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub retained: Dataset,
    pub removed_outliers: usize,
    pub split: SplitIndices,
    pub scaler: Scaler,
}

impl Prepared {
    pub fn train_samples(&self) -> Vec<Sample> {
        self.retained.select(&self.split.train_indices)
    }

    pub fn test_samples(&self) -> Vec<Sample> {
        self.retained.select(&self.split.test_indices)
    }
}

/// Outlier removal, seeded split, and a scaler fitted on the training part.
pub fn prepare(
    d: &Dataset,
    train_fraction: f64,
    seed: u64,
    norm_lo: f64,
    norm_hi: f64,
) -> Result<Prepared> {
    let (retained, removed_outliers) = data::remove_outliers(d)?;
    let split = data::split(&retained, train_fraction, seed)?;
    let scaler = data::fit_scaler(&retained.select(&split.train_indices), norm_lo, norm_hi)?;
    Ok(Prepared {
        retained,
        removed_outliers,
        split,
        scaler,
    })
}

/// Normalized inputs and target for each sample.
pub fn to_examples(scaler: &Scaler, samples: &[Sample]) -> Vec<Example> {
    samples
        .iter()
        .map(|s| Example {
            x: scaler.normalize(&s.features()),
            y: scaler.normalize_value(NUM_FEATURES, s.conductivity),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Full training-set RMSE in normalized target units after the epoch.
    pub rmse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub loss_per_epoch: Vec<EpochLoss>,
    /// Held-out metrics in S/m.
    pub test: EvalReport,
    pub removed_outliers: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub optimizer_steps: u64,
    pub wall_clock_seconds: f64,
}

/// Full pipeline on raw measurements. Deterministic given `(d, cfg)`.
pub fn train(d: &Dataset, cfg: &TrainConfig) -> Result<(Network, Scaler, TrainReport)> {
    cfg.validate(NUM_FEATURES)?;
    let prepared = prepare(d, cfg.train_fraction, cfg.seed, cfg.norm_lo, cfg.norm_hi)?;
    train_prepared(&prepared, cfg)
}

pub fn train_prepared(
    prepared: &Prepared,
    cfg: &TrainConfig,
) -> Result<(Network, Scaler, TrainReport)> {
    cfg.validate(NUM_FEATURES)?;
    let started = Instant::now();
    let scaler = prepared.scaler.clone();
    let train_set = to_examples(&scaler, &prepared.train_samples());
    let test_samples = prepared.test_samples();

    let mut init_rng = RngState::with_stream(cfg.seed, stream::INIT);
    let mut net = glorot_uniform_init(NUM_FEATURES, cfg.hidden_width, 1, &mut init_rng)?;
    let (loss_per_epoch, optimizer_steps) = fit(&mut net, &train_set, cfg)?;

    let test = evaluation::evaluate(&net, &scaler, &test_samples)?;
    let report = TrainReport {
        config: cfg.clone(),
        loss_per_epoch,
        test,
        removed_outliers: prepared.removed_outliers,
        train_samples: train_set.len(),
        test_samples: test_samples.len(),
        optimizer_steps,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    Ok((net, scaler, report))
}

/// Epoch loop over normalized examples. Each epoch reshuffles the example
/// order from the run seed and applies one Adam step per mini-batch.
///
/// Returns the per-epoch training RMSE and the number of optimizer steps.
pub fn fit(
    net: &mut Network,
    examples: &[Example],
    cfg: &TrainConfig,
) -> Result<(Vec<EpochLoss>, u64)> {
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let shapes: Vec<usize> = net.parameters().iter().map(|t| t.len()).collect();
    let mut adam = AdamState::new(cfg.adam, &shapes);
    let mut batch_rng = RngState::with_stream(cfg.seed, stream::BATCHES);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        batch_rng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            let (batch_loss, grads) =
                loss::backward_subset(net, examples, batch.iter().copied()).map_err(|e| {
                    if e.is_numeric() {
                        Error::NanLoss { epoch }
                    } else {
                        e
                    }
                })?;
            if !batch_loss.is_finite() {
                return Err(Error::NanLoss { epoch });
            }
            adam.step(&mut net.parameters_mut(), &grads.tensors())?;
        }
        let epoch_rmse = match dataset_rmse(net, examples) {
            Ok(v) if v.is_finite() => v,
            Ok(_) => return Err(Error::NanLoss { epoch }),
            Err(e) if e.is_numeric() => return Err(Error::NanLoss { epoch }),
            Err(e) => return Err(e),
        };
        history.push(EpochLoss {
            epoch,
            rmse: epoch_rmse,
        });
    }
    Ok((history, adam.t))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub width: usize,
    pub test_aae: f64,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub table: Vec<SweepRow>,
    pub best_width: usize,
    pub network: Network,
    pub scaler: Scaler,
    pub report: TrainReport,
    /// Widths that appeared more than once in the request and were dropped.
    pub duplicates: Vec<usize>,
}

/// Trains one network per distinct width on the same partitions and seed and
/// keeps the one with the lowest test AAE; ties go to the narrower network.
///
/// Widths train in parallel; each run depends only on its own config, so the
/// outcome equals serial execution.
pub fn sweep(d: &Dataset, widths: &[usize], base_cfg: &TrainConfig) -> Result<SweepOutcome> {
    if widths.is_empty() {
        return Err(Error::Config("width list is empty".into()));
    }
    let mut distinct = Vec::new();
    let mut duplicates = Vec::new();
    for &w in widths {
        if distinct.contains(&w) {
            duplicates.push(w);
        } else {
            distinct.push(w);
        }
    }
    for &w in &distinct {
        check_min_width(NUM_FEATURES, w).into_result()?;
    }
    let base = TrainConfig {
        hidden_width: distinct[0],
        ..base_cfg.clone()
    };
    base.validate(NUM_FEATURES)?;
    let prepared = prepare(d, base.train_fraction, base.seed, base.norm_lo, base.norm_hi)?;

    let runs = distinct
        .par_iter()
        .map(|&width| {
            let cfg = TrainConfig {
                hidden_width: width,
                ..base.clone()
            };
            train_prepared(&prepared, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;

    let table: Vec<SweepRow> = distinct
        .iter()
        .zip(&runs)
        .map(|(&width, (_, _, report))| SweepRow {
            width,
            test_aae: report.test.aae,
        })
        .collect();
    let best = (0..runs.len())
        .min_by(|&a, &b| {
            table[a]
                .test_aae
                .total_cmp(&table[b].test_aae)
                .then(table[a].width.cmp(&table[b].width))
        })
        .expect("non-empty sweep");
    let best_width = table[best].width;
    let (network, scaler, report) = runs.into_iter().nth(best).expect("index in range");
    Ok(SweepOutcome {
        table,
        best_width,
        network,
        scaler,
        report,
        duplicates,
    })
}
