#![allow(dead_code)]

//! Reference implementations used as oracles by the integration tests. None
//! of these call into the code paths they are compared against.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slagcond::data::Sample;
use slagcond::network::{Matrix, Network};
use slagcond::training::Example;

pub fn test_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Loss of a network given as flat parameter vectors, computed from scratch.
pub fn reference_rmse(
    d: usize,
    h: usize,
    w1: &[f64],
    b1: &[f64],
    w2: &[f64],
    b2: f64,
    batch: &[Example],
) -> f64 {
    let mut sum = 0.0;
    for ex in batch {
        let mut y = b2;
        for j in 0..h {
            let mut z = b1[j];
            for k in 0..d {
                z += w1[j * d + k] * ex.x[k];
            }
            y += w2[j] * if z > 0.0 { z } else { 0.0 };
        }
        sum += (y - ex.y) * (y - ex.y);
    }
    (sum / batch.len() as f64).sqrt()
}

fn relu_mask(d: usize, h: usize, w1: &[f64], b1: &[f64], batch: &[Example]) -> Vec<bool> {
    let mut mask = Vec::with_capacity(h * batch.len());
    for ex in batch {
        for j in 0..h {
            let mut z = b1[j];
            for k in 0..d {
                z += w1[j * d + k] * ex.x[k];
            }
            mask.push(z > 0.0);
        }
    }
    mask
}

/// Central finite-difference gradient of the batch RMSE for every parameter,
/// in the order w1, b1, w2, b2. Entries whose ±step evaluation flips any ReLU
/// gate are `None`: the loss is not differentiable across that step.
pub fn finite_difference_gradient(
    net: &Network,
    batch: &[Example],
    step: f64,
) -> Vec<Option<f64>> {
    let d = net.input_dim();
    let h = net.hidden_width();
    let base: Vec<Vec<f64>> = net.parameters().iter().map(|t| t.to_vec()).collect();
    let base_mask = relu_mask(d, h, &base[0], &base[1], batch);
    let mut out = Vec::new();
    for tensor in 0..4 {
        for idx in 0..base[tensor].len() {
            let eval = |delta: f64| {
                let mut p = base.clone();
                p[tensor][idx] += delta;
                let kinked = relu_mask(d, h, &p[0], &p[1], batch) != base_mask;
                (reference_rmse(d, h, &p[0], &p[1], &p[2], p[3][0], batch), kinked)
            };
            let (plus, kink_plus) = eval(step);
            let (minus, kink_minus) = eval(-step);
            out.push(if kink_plus || kink_minus {
                None
            } else {
                Some((plus - minus) / (2.0 * step))
            });
        }
    }
    out
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-10 {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale
    }
}

pub fn random_network(rng: &mut ChaCha8Rng, d: usize, h: usize) -> Network {
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    Network::from_parameters(
        Matrix::from_vec(h, d, draw(h * d)).unwrap(),
        draw(h),
        Matrix::from_vec(1, h, draw(h)).unwrap(),
        draw(1),
    )
    .unwrap()
}

pub fn random_batch(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Vec<Example> {
    (0..n)
        .map(|_| Example {
            x: (0..d).map(|_| rng.gen_range(0.1..1.0)).collect(),
            y: rng.gen_range(-1.0..1.0),
        })
        .collect()
}

/// Max relative error between backprop and finite differences over the
/// parameters not straddling a kink, and the number of parameters compared.
pub fn gradient_check(net: &Network, batch: &[Example]) -> (f64, usize) {
    let (_, grads) = slagcond::training::backward(net, batch).unwrap();
    let analytic: Vec<f64> = grads.tensors().iter().flat_map(|t| t.to_vec()).collect();
    let numeric = finite_difference_gradient(net, batch, 1e-5);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for (a, n) in analytic.iter().zip(&numeric) {
        if let Some(n) = n {
            worst = worst.max(relative_error(*a, *n));
            compared += 1;
        }
    }
    (worst, compared)
}

/// Indices kept by a three-sigma filter, recomputed with explicit loops.
pub fn brute_force_outlier_keep(values: &[f64]) -> Vec<usize> {
    let n = values.len() as f64;
    let mut mean = 0.0;
    for v in values {
        mean += v;
    }
    mean /= n;
    let mut var = 0.0;
    for v in values {
        var += (v - mean).powi(2);
    }
    let sigma = (var / n).sqrt();
    let mut keep = Vec::new();
    for (i, v) in values.iter().enumerate() {
        if (v - mean).abs() <= 3.0 * sigma {
            keep.push(i);
        }
    }
    keep
}

pub struct Metrics {
    pub aae: f64,
    pub stdev: f64,
    pub rmse: f64,
}

/// Metrics recomputed with compensated summation.
pub fn brute_force_metrics(t: &[f64], p: &[f64]) -> Metrics {
    fn kahan(xs: impl Iterator<Item = f64>) -> f64 {
        let (mut sum, mut c) = (0.0f64, 0.0f64);
        for x in xs {
            let y = x - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        sum
    }
    let n = t.len() as f64;
    let dev: Vec<f64> = t.iter().zip(p).map(|(a, b)| a - b).collect();
    let mu = kahan(dev.iter().copied()) / n;
    Metrics {
        aae: kahan(dev.iter().map(|d| d.abs())) / n,
        stdev: (kahan(dev.iter().map(|d| (d - mu) * (d - mu))) / n).sqrt(),
        rmse: (kahan(dev.iter().map(|d| d * d)) / n).sqrt(),
    }
}

/// Random sample on the slag composition domain.
pub fn random_sample(rng: &mut ChaCha8Rng, conductivity: f64) -> Sample {
    let mut raw = [0.0; 5];
    for r in &mut raw {
        *r = rng.gen_range(0.01..1.0);
    }
    let s: f64 = raw.iter().sum();
    Sample::from_features(
        [
            rng.gen_range(1300.0..2000.0),
            raw[0] / s,
            raw[1] / s,
            raw[2] / s,
            raw[3] / s,
            raw[4] / s,
        ],
        conductivity,
    )
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_slagcond")
}

pub fn slagcond(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("run slagcond")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Writes a synthetic linear-target measurement file and returns its path.
pub fn write_linear_csv(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let path = dir.join(format!("linear_{seed}.csv"));
    let d = slagcond::synthetic::linear_dataset(n, seed);
    slagcond::data::write_csv(&d.samples, &path).unwrap();
    path
}
