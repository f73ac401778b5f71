//! Acceptance criteria. Each test prints one `[PASS]`/`[FAIL]` line with its
//! measured runtime and then asserts. Run with `--nocapture` to see the lines:
//!
//! ```text
//! cargo test -p slagcond --test acceptance -- --nocapture --test-threads 1
//! ```

mod common;

use std::fs;
use std::time::{Duration, Instant};

use rand::Rng;
use slagcond::data::{self, Dataset, Sample};
use slagcond::evaluation::{aae, rmse, stdev_of_deviation};
use slagcond::network::{check_min_width, glorot_limit, glorot_uniform_fill, glorot_uniform_init, Matrix, Network};
use slagcond::rng::RngState;
use slagcond::sensitivity::connection_weights;
use slagcond::synthetic;
use slagcond::training::{self, AdamConfig, AdamState, TrainConfig};

use common::{path_str, slagcond, test_rng};

/// Prints the verdict line for one criterion and fails the test if any check
/// failed or the runtime budget was exceeded.
fn criterion(name: &str, budget: Duration, body: impl FnOnce() -> Vec<(String, bool)>) {
    let started = Instant::now();
    let checks = body();
    let elapsed = started.elapsed();
    let failed: Vec<&String> = checks.iter().filter(|(_, ok)| !ok).map(|(m, _)| m).collect();
    let in_time = elapsed <= budget;
    let verdict = if failed.is_empty() && in_time { "PASS" } else { "FAIL" };
    println!(
        "[{verdict}] {name} ({:.2}s of {:.0}s budget; {} checks)",
        elapsed.as_secs_f64(),
        budget.as_secs_f64(),
        checks.len()
    );
    for m in &failed {
        println!("        failed: {m}");
    }
    assert!(failed.is_empty(), "{name}: {failed:?}");
    assert!(in_time, "{name}: took {elapsed:?}, budget {budget:?}");
}

fn check(ok: bool, msg: impl Into<String>) -> (String, bool) {
    (msg.into(), ok)
}

#[test]
fn gradient_oracle() {
    criterion("gradient oracle: backprop vs central differences", Duration::from_secs(10), || {
        let mut rng = test_rng(2024);
        let mut checks = Vec::new();
        for k in 0..20 {
            let hidden = 7 + k % 10; // 6-7-1 through 6-16-1
            let net = common::random_network(&mut rng, 6, hidden);
            let batch = common::random_batch(&mut rng, 6, 4);
            let (worst, compared) = common::gradient_check(&net, &batch);
            checks.push(check(
                worst < 1e-5 && compared > 0,
                format!("net {k} (6-{hidden}-1): max rel err {worst:.3e} over {compared} params"),
            ));
        }
        checks
    });
}

#[test]
fn adam_oracle() {
    criterion("Adam oracle: t = 1..5 at default hyperparameters", Duration::from_secs(1), || {
        let mut checks = Vec::new();
        let cfg = AdamConfig::default();

        // constant unit gradient: m_hat = v_hat = 1 every step
        let mut state = AdamState::new(cfg, &[1]);
        let mut theta = [0.0];
        for t in 1..=5 {
            state.step(&mut [&mut theta], &[&[1.0]]).unwrap();
            let expected = -(t as f64) * 0.001 / (1.0 + 1e-8);
            checks.push(check(
                (theta[0] - expected).abs() < 1e-12,
                format!("g = 1, t = {t}: {} vs {expected}", theta[0]),
            ));
        }

        // varying gradients against a scalar transcription of the update rule
        let grads = [0.5, -1.25, 2.0, 0.0, -0.3];
        let mut state = AdamState::new(cfg, &[1]);
        let mut theta = [0.7];
        let (mut m, mut v, mut th) = (0.0f64, 0.0f64, 0.7f64);
        for (i, g) in grads.iter().enumerate() {
            let t = (i + 1) as i32;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let m_hat = m / (1.0 - 0.9f64.powi(t));
            let v_hat = v / (1.0 - 0.999f64.powi(t));
            th -= 0.001 * m_hat / (v_hat.sqrt() + 1e-8);
            state.step(&mut [&mut theta], &[&[*g]]).unwrap();
            checks.push(check(
                (theta[0] - th).abs() < 1e-12,
                format!("varying g, t = {t}: {} vs {th}", theta[0]),
            ));
        }
        checks.push(check(state.t == 5, "step counter"));
        checks
    });
}

#[test]
fn glorot_statistics() {
    criterion("Glorot uniform statistics over 1e5 draws per layer", Duration::from_secs(5), || {
        let n = 100_000usize;
        let mut checks = Vec::new();
        for (layer, (fan_in, fan_out)) in [(6usize, 100usize), (100, 1)].into_iter().enumerate() {
            let limit = glorot_limit(fan_in, fan_out);
            let mut draws = vec![0.0; n];
            glorot_uniform_fill(&mut RngState::new(31 + layer as u64), fan_in, fan_out, &mut draws);
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n as f64;
            let target_var = limit * limit / 3.0;
            checks.push(check(
                mean.abs() < 3.0 * limit / (3.0 * n as f64).sqrt(),
                format!("layer {fan_in}->{fan_out}: mean {mean:.3e}"),
            ));
            checks.push(check(
                ((var - target_var) / target_var).abs() < 0.05,
                format!("layer {fan_in}->{fan_out}: var {var:.5} vs {target_var:.5}"),
            ));
            checks.push(check(
                draws.iter().all(|w| w.abs() <= limit),
                format!("layer {fan_in}->{fan_out}: all draws within ±{limit:.5}"),
            ));
        }
        let net = glorot_uniform_init(6, 100, 1, &mut RngState::new(5)).unwrap();
        checks.push(check(
            net.w1.as_slice().iter().all(|w| w.abs() <= (6.0f64 / 106.0).sqrt()),
            "initialized w1 within sqrt(6/106)",
        ));
        checks
    });
}

#[test]
fn minimum_width_gate() {
    criterion("minimum width gate (library and CLI)", Duration::from_secs(1), || {
        let dir = tempfile::tempdir().unwrap();
        let data = common::write_linear_csv(dir.path(), 30, 1);
        let cli = |hidden: &str| {
            slagcond(&[
                "train", "--data", path_str(&data), "--hidden", hidden, "--epochs", "1",
                "--outdir", path_str(dir.path()),
            ])
            .status
            .code()
        };
        vec![
            check(!check_min_width(6, 6).passed, "library rejects 6"),
            check(check_min_width(6, 7).passed, "library accepts 7"),
            check(check_min_width(6, 7).minimum == 7, "minimum is 7"),
            check(cli("6") == Some(1), "CLI rejects 6 with exit 1"),
            check(cli("7") == Some(0), "CLI accepts 7"),
        ]
    });
}

/// Magnitude up to which a 1e-12 absolute round trip is representable; one
/// ulp at 4096 is 9.1e-13. Larger values are held to 1e-12 relative.
const ABSOLUTE_RANGE: f64 = 4096.0;

#[test]
fn preprocessing_oracle() {
    criterion("preprocessing oracle on 200 random datasets", Duration::from_secs(10), || {
        let mut rng = test_rng(77);
        let mut checks = Vec::new();
        let (mut outlier_ok, mut scaler_ok, mut split_ok) = (true, true, true);
        let mut worst_round_trip: f64 = 0.0;
        let mut worst_outside_rel: f64 = 0.0;
        for case in 0..200 {
            let n = rng.gen_range(2..60);
            let mut cs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..300.0)).collect();
            if rng.gen_bool(0.5) {
                cs.push(rng.gen_range(2_000.0..50_000.0));
            }
            let samples: Vec<Sample> = cs.iter().map(|&c| common::random_sample(&mut rng, c)).collect();
            let d = Dataset::new(samples.clone());

            let (kept, removed) = data::remove_outliers(&d).unwrap();
            let keep = common::brute_force_outlier_keep(&cs);
            let expected: Vec<Sample> = keep.iter().map(|&i| samples[i]).collect();
            if kept.samples != expected || removed != cs.len() - keep.len() {
                outlier_ok = false;
            }

            let total = kept.len();
            if total < 2 {
                continue;
            }
            let seed = rng.gen::<u64>();
            let split = data::split(&kept, 0.8, seed).unwrap();
            let mut all: Vec<usize> = split.train_indices.iter().chain(&split.test_indices).copied().collect();
            all.sort_unstable();
            let floor = (0..=total).filter(|&k| 5 * k <= 4 * total).max().unwrap();
            if all != (0..total).collect::<Vec<_>>()
                || split.train_indices.len() != floor
                || data::split(&kept, 0.8, seed).unwrap() != split
            {
                split_ok = false;
                checks.push(check(false, format!("case {case}: split of {total}")));
            }

            // fitted on the training part, applied to every retained sample
            let train = kept.select(&split.train_indices);
            let scaler = data::fit_scaler(&train, 0.0, 1.0).unwrap();
            for k in 0..7 {
                let lo = train.iter().map(|t| column(t, k)).fold(f64::INFINITY, f64::min);
                let hi = train.iter().map(|t| column(t, k)).fold(f64::NEG_INFINITY, f64::max);
                if scaler.min[k] != lo || scaler.max[k] != hi {
                    scaler_ok = false;
                }
                if hi == lo {
                    continue;
                }
                let round_trip = |x: f64| scaler.denormalize_value(k, scaler.normalize_value(k, x));
                // retained and removed samples alike; spikes lie outside the fitted range
                for s in &samples {
                    let x = column(s, k);
                    let err = (round_trip(x) - x).abs();
                    if x.abs() <= ABSOLUTE_RANGE {
                        worst_round_trip = worst_round_trip.max(err);
                    } else {
                        worst_outside_rel = worst_outside_rel.max(err / x.abs());
                    }
                }
            }
        }
        checks.push(check(outlier_ok, "outlier filter equals brute force"));
        checks.push(check(scaler_ok, "scaler min/max equal brute force"));
        checks.push(check(
            scaler_ok && worst_round_trip <= 1e-12,
            format!("scaler round trip for |x| <= {ABSOLUTE_RANGE}, worst abs {worst_round_trip:.3e}"),
        ));
        checks.push(check(
            worst_outside_rel <= 1e-12,
            format!("scaler round trip for |x| > {ABSOLUTE_RANGE}, worst rel {worst_outside_rel:.3e}"),
        ));
        checks.push(check(split_ok, "split is a deterministic partition with floor(0.8 N) train"));
        checks
    });
}

fn column(s: &Sample, k: usize) -> f64 {
    if k < 6 {
        s.features()[k]
    } else {
        s.conductivity
    }
}

#[test]
fn metrics_oracle() {
    criterion("metrics oracle: AAE, StDev, RMSE", Duration::from_secs(5), || {
        let mut rng = test_rng(5);
        let (mut worst, mut jensen) = (0.0f64, true);
        for _ in 0..2000 {
            let n = rng.gen_range(2..100);
            let t: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..500.0)).collect();
            let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..500.0)).collect();
            let oracle = common::brute_force_metrics(&t, &p);
            let a = aae(&t, &p).unwrap();
            let s = stdev_of_deviation(&t, &p).unwrap();
            let r = rmse(&t, &p).unwrap();
            worst = worst
                .max((a - oracle.aae).abs())
                .max((s - oracle.stdev).abs())
                .max((r - oracle.rmse).abs());
            jensen &= a <= r;
        }
        let ten_t = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let ten_p = [1.5, 1.0, 3.5, 4.5, 4.0, 7.0, 6.0, 8.5, 9.5, 12.0];
        let o = common::brute_force_metrics(&ten_t, &ten_p);
        vec![
            check(worst < 1e-12, format!("max deviation from oracle {worst:.3e}")),
            check(jensen, "AAE <= RMSE on every vector"),
            check((aae(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.5).abs() < 1e-15, "AAE hand case 3.5"),
            check((stdev_of_deviation(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 0.5).abs() < 1e-15, "StDev hand case 0.5"),
            check((aae(&ten_t, &ten_p).unwrap() - o.aae).abs() < 1e-12, "10-sample AAE"),
        ]
    });
}

#[test]
fn sensitivity_oracle() {
    criterion("sensitivity oracle: connection weights", Duration::from_secs(5), || {
        let mut rng = test_rng(9);
        let (mut worst, mut sums) = (0.0f64, true);
        for _ in 0..500 {
            let net = common::random_network(&mut rng, 3, 5);
            let report = connection_weights(&net);
            // explicit w2 (1x5) times w1 (5x3)
            for i in 0..3 {
                let mut product = 0.0;
                for j in 0..5 {
                    product += net.w2.as_slice()[j] * net.w1.as_slice()[j * 3 + i];
                }
                worst = worst.max((report.contributions()[i] - product).abs());
            }
            let total: f64 = report.percentages().unwrap().iter().sum();
            sums &= (total - 100.0).abs() < 1e-9;
        }
        let hand = Network::from_parameters(
            Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 1.0]]).unwrap(),
            vec![0.0, 0.0],
            Matrix::from_vec(1, 2, vec![1.0, 0.5]).unwrap(),
            vec![0.0],
        )
        .unwrap();
        let pct = connection_weights(&hand).percentages().unwrap();
        vec![
            check(worst < 1e-12, format!("max |c - (w2 w1)| {worst:.3e}")),
            check(sums, "RI sums to 100 within 1e-9"),
            check((pct[0] - 45.45).abs() < 0.01, format!("2-2-1 first input {:.4}%", pct[0])),
            check((pct[1] - 54.55).abs() < 0.01, format!("2-2-1 second input {:.4}%", pct[1])),
        ]
    });
}

#[test]
fn cao_ranks_first_on_cao_only_target() {
    criterion("CaO-only synthetic target ranks CaO first", Duration::from_secs(120), || {
        let mut checks = Vec::new();
        for seed in [1u64, 2, 3, 4, 42] {
            let d = synthetic::cao_only_dataset(500, seed, 1.0);
            let cfg = TrainConfig {
                hidden_width: 100,
                epochs: 2000,
                seed,
                ..TrainConfig::default()
            };
            let (net, _, _) = training::train(&d, &cfg).unwrap();
            let report = connection_weights(&net);
            let pct = report.percentages().unwrap();
            checks.push(check(
                report.most_important() == Some(2),
                format!(
                    "seed {seed}: importances {}",
                    pct.iter().map(|p| format!("{p:.1}")).collect::<Vec<_>>().join("/")
                ),
            ));
        }
        checks
    });
}

#[test]
fn end_to_end_learning() {
    criterion("end-to-end learning on synthetic linear target", Duration::from_secs(120), || {
        let d = synthetic::linear_dataset(500, 42);
        let ys = d.conductivities();
        let range = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - ys.iter().copied().fold(f64::INFINITY, f64::min);
        let cfg = TrainConfig {
            hidden_width: 16,
            epochs: 2000,
            seed: 42,
            ..TrainConfig::default()
        };
        let (_, _, report) = training::train(&d, &cfg).unwrap();
        let first = report.loss_per_epoch[0].rmse;
        let last = report.loss_per_epoch.last().unwrap().rmse;
        vec![
            check(
                report.test.aae < 0.02 * range,
                format!("test AAE {:.4} S/m vs 2% of range {:.4}", report.test.aae, 0.02 * range),
            ),
            check(first / last >= 100.0, format!("train RMSE reduced {:.1}x", first / last)),
            check(report.loss_per_epoch.len() == 2000, "one loss entry per epoch"),
        ]
    });
}

#[test]
fn training_is_deterministic() {
    criterion("determinism: identical train runs give identical model files", Duration::from_secs(120), || {
        let dir = tempfile::tempdir().unwrap();
        let data = common::write_linear_csv(dir.path(), 300, 3);
        let run = |name: &str| {
            let model = dir.path().join(name);
            let out = slagcond(&[
                "train", "--data", path_str(&data), "--hidden", "16", "--epochs", "200", "--seed",
                "11", "--out", path_str(&model),
            ]);
            assert!(out.status.success());
            fs::read(model).unwrap()
        };
        let (a, b) = (run("a.model"), run("b.model"));
        let d = data::load_csv(&data, Default::default()).unwrap();
        let cfg = TrainConfig {
            hidden_width: 16,
            epochs: 50,
            seed: 11,
            ..TrainConfig::default()
        };
        let (n1, s1, r1) = training::train(&d, &cfg).unwrap();
        let (n2, s2, r2) = training::train(&d, &cfg).unwrap();
        vec![
            check(a == b, "model files byte-identical"),
            check(n1 == n2 && s1 == s2, "library networks and scalers identical"),
            check(r1.loss_per_epoch == r2.loss_per_epoch, "loss curves identical"),
        ]
    });
}

