//! Synthetic measurement sets with known structure, for demos and tests.
//!
//! Compositions are drawn by normalizing five independent `U[0.05, 1)` draws,
//! so every oxide varies independently apart from the closure constraint.
//! Temperatures are uniform on `[1400, 1900)` K.

use crate::data::{Dataset, Sample};
use crate::rng::RngState;

const STREAM: u64 = 0x5EED;

fn random_sample(rng: &mut RngState) -> [f64; 6] {
    let temperature = rng.uniform_in(1400.0, 1900.0);
    let mut raw = [0.0; 5];
    for r in &mut raw {
        *r = rng.uniform_in(0.05, 1.0);
    }
    let sum: f64 = raw.iter().sum();
    [
        temperature,
        raw[0] / sum,
        raw[1] / sum,
        raw[2] / sum,
        raw[3] / sum,
        raw[4] / sum,
    ]
}

/// `conductivity = 100 * x_cao + 0.05 * T`, noise free.
pub fn linear_target(features: &[f64; 6]) -> f64 {
    100.0 * features[2] + 0.05 * features[0]
}

pub fn linear_dataset(n: usize, seed: u64) -> Dataset {
    let mut rng = RngState::with_stream(seed, STREAM);
    let samples = (0..n)
        .map(|_| {
            let f = random_sample(&mut rng);
            Sample::from_features(f, linear_target(&f))
        })
        .collect();
    Dataset {
        samples,
        source_path: String::new(),
        provenance_notes: format!("synthetic linear target, seed {seed}"),
    }
}

/// `conductivity = 20 + 300 * x_cao` plus uniform noise of half-width
/// `noise` S/m; every other input is irrelevant.
pub fn cao_only_dataset(n: usize, seed: u64, noise: f64) -> Dataset {
    let mut rng = RngState::with_stream(seed, STREAM + 1);
    let samples = (0..n)
        .map(|_| {
            let f = random_sample(&mut rng);
            let y = 20.0 + 300.0 * f[2] + rng.uniform_in(-noise, noise);
            Sample::from_features(f, y.max(0.0))
        })
        .collect();
    Dataset {
        samples,
        source_path: String::new(),
        provenance_notes: format!("synthetic CaO-only target, seed {seed}"),
    }
}
