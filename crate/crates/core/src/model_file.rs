//! Text model format.
//!
//! A model file is a list of `key = value` lines. `#` starts a comment line.
//! Arrays are comma separated and every real number is written in scientific
//! notation with 17 significant digits, which round-trips `f64` exactly.
//!
//! ```text
//! format_version = 1
//! input_dim = 6
//! hidden_width = 100
//! output_dim = 1
//! hidden_activation = relu
//! output_activation = identity
//! seed = 7
//! train_fraction = 8.0000000000000004e-1
//! input_labels = temperature_K,SiO2,CaO,MgO,Al2O3,FeO
//! norm_range = 0.0000000000000000e0,1.0000000000000000e0
//! scaler_min = ...        # input_dim + 1 values, target last
//! scaler_max = ...
//! w1 = ...                # hidden_width x input_dim, row-major
//! b1 = ...                # hidden_width values
//! w2 = ...                # 1 x hidden_width
//! b2 = ...                # 1 value
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::data::Scaler;
use crate::error::{Error, Result};
use crate::network::{Activation, Matrix, Network};
use crate::sensitivity::default_labels;

pub const FORMAT_VERSION: u32 = 1;

const KEYS: [&str; 16] = [
    "format_version",
    "input_dim",
    "hidden_width",
    "output_dim",
    "hidden_activation",
    "output_activation",
    "seed",
    "train_fraction",
    "input_labels",
    "norm_range",
    "scaler_min",
    "scaler_max",
    "w1",
    "b1",
    "w2",
    "b2",
];

/// A trained network together with everything needed to use it on raw data.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub network: Network,
    pub scaler: Scaler,
    pub seed: u64,
    pub train_fraction: f64,
    pub input_labels: Vec<String>,
}

impl Model {
    pub fn new(network: Network, scaler: Scaler, seed: u64, train_fraction: f64) -> Self {
        let input_labels = default_labels(network.input_dim());
        Self {
            network,
            scaler,
            seed,
            train_fraction,
            input_labels,
        }
    }

    pub fn to_text(&self) -> String {
        let net = &self.network;
        let mut out = String::from("# slagcond model\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("format_version", FORMAT_VERSION.to_string());
        kv("input_dim", net.input_dim().to_string());
        kv("hidden_width", net.hidden_width().to_string());
        kv("output_dim", net.output_dim().to_string());
        kv("hidden_activation", net.hidden_activation.to_string());
        kv("output_activation", net.output_activation.to_string());
        kv("seed", self.seed.to_string());
        kv("train_fraction", real(self.train_fraction));
        kv("input_labels", self.input_labels.join(","));
        kv(
            "norm_range",
            reals(&[self.scaler.target_lo, self.scaler.target_hi]),
        );
        kv("scaler_min", reals(&self.scaler.min));
        kv("scaler_max", reals(&self.scaler.max));
        kv("w1", reals(net.w1.as_slice()));
        kv("b1", reals(&net.b1));
        kv("w2", reals(net.w2.as_slice()));
        kv("b2", reals(&net.b2));
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fmt_err(format!("line {}: expected `key = value`", n + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(fmt_err(format!("line {}: unknown key `{key}`", n + 1)));
            }
            if fields.insert(key, value.trim()).is_some() {
                return Err(fmt_err(format!("line {}: duplicate key `{key}`", n + 1)));
            }
        }
        let get = |key: &str| {
            fields
                .get(key)
                .copied()
                .ok_or_else(|| fmt_err(format!("missing key `{key}`")))
        };

        let version: u32 = parse_scalar(get("format_version")?, "format_version")?;
        if version != FORMAT_VERSION {
            return Err(fmt_err(format!(
                "format version mismatch: file is version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let input_dim: usize = parse_scalar(get("input_dim")?, "input_dim")?;
        let hidden: usize = parse_scalar(get("hidden_width")?, "hidden_width")?;
        let output_dim: usize = parse_scalar(get("output_dim")?, "output_dim")?;
        if output_dim != 1 {
            return Err(fmt_err(format!("output_dim must be 1, got {output_dim}")));
        }
        let hidden_activation: Activation = get("hidden_activation")?.parse()?;
        let output_activation: Activation = get("output_activation")?.parse()?;
        let seed: u64 = parse_scalar(get("seed")?, "seed")?;
        let train_fraction: f64 = parse_scalar(get("train_fraction")?, "train_fraction")?;
        let input_labels: Vec<String> = get("input_labels")?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        if input_labels.len() != input_dim {
            return Err(fmt_err(format!(
                "input_labels has {} entries, expected {input_dim}",
                input_labels.len()
            )));
        }

        let array = |key: &str, len: usize| -> Result<Vec<f64>> {
            let values = parse_reals(get(key)?, key)?;
            if values.len() != len {
                return Err(fmt_err(format!(
                    "`{key}` has {} values, expected {len}",
                    values.len()
                )));
            }
            Ok(values)
        };
        let range = array("norm_range", 2)?;
        let scaler = Scaler::new(
            array("scaler_min", input_dim + 1)?,
            array("scaler_max", input_dim + 1)?,
            range[0],
            range[1],
        )
        .map_err(|e| fmt_err(format!("scaler: {e}")))?;

        let mut network = Network::from_parameters(
            Matrix::from_vec(hidden, input_dim, array("w1", hidden * input_dim)?)?,
            array("b1", hidden)?,
            Matrix::from_vec(1, hidden, array("w2", hidden)?)?,
            array("b2", 1)?,
        )?;
        network.hidden_activation = hidden_activation;
        network.output_activation = output_activation;
        network.validate()?;

        Ok(Self {
            network,
            scaler,
            seed,
            train_fraction,
            input_labels,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn fmt_err(msg: String) -> Error {
    Error::ModelFormat(msg)
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn reals(values: &[f64]) -> String {
    values.iter().map(|&v| real(v)).collect::<Vec<_>>().join(",")
}

fn parse_scalar<T: std::str::FromStr>(raw: &str, key: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| fmt_err(format!("`{key}`: cannot parse `{raw}`")))
}

fn parse_reals(raw: &str, key: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|s| {
            let v: f64 = parse_scalar(s.trim(), key)?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(fmt_err(format!("`{key}`: non-finite value `{s}`")))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::glorot_uniform_init;
    use crate::rng::RngState;

    fn sample_model() -> Model {
        let net = glorot_uniform_init(6, 9, 1, &mut RngState::new(3)).unwrap();
        let scaler = Scaler::new(
            vec![1400.0, 0.1, 0.1, 0.0, 0.0, 0.0, 1.0],
            vec![1900.0, 0.6, 0.5, 0.2, 0.2, 0.3, 300.0],
            0.0,
            1.0,
        )
        .unwrap();
        Model::new(net, scaler, 3, 0.8)
    }

    #[test]
    fn text_round_trip_is_exact() {
        let m = sample_model();
        let text = m.to_text();
        let back = Model::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn version_mismatch_rejected() {
        let text = sample_model()
            .to_text()
            .replace("format_version = 1", "format_version = 2");
        match Model::from_text(&text) {
            Err(Error::ModelFormat(msg)) => assert!(msg.contains("version"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_array_length_rejected() {
        let text = sample_model().to_text().replace("b2 = ", "b2 = 1.0,");
        assert!(Model::from_text(&text).is_err());
    }

    #[test]
    fn scaler_width_must_match_inputs() {
        let m = sample_model();
        let text = m.to_text();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        for l in &mut lines {
            if l.starts_with("scaler_min") {
                *l = format!("scaler_min = {}", reals(&m.scaler.min[..6]));
            }
        }
        assert!(Model::from_text(&lines.join("\n")).is_err());
    }
}
