//! Measurement ingestion and preprocessing.
//!
//! Records are read from a comma-separated file with the header
//! `temperature_K,SiO2,CaO,MgO,Al2O3,FeO,conductivity_S_per_m`. Lines starting
//! with `#` and blank lines are ignored.
//!
//! Preprocessing is a single outlier pass on conductivity followed by a seeded
//! train/test split and min-max scaling fitted on the training partition.
//! Z-score standardization is a known alternative to min-max scaling; it is
//! not offered here because it reshapes each variable's distribution.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, RngState};

/// Names of the six predictor columns, in model input order.
pub const FEATURE_COLUMNS: [&str; 6] = ["temperature_K", "SiO2", "CaO", "MgO", "Al2O3", "FeO"];
pub const TARGET_COLUMN: &str = "conductivity_S_per_m";
pub const NUM_FEATURES: usize = FEATURE_COLUMNS.len();

/// Allowed deviation of the oxide fraction sum from 1.
pub const FRACTION_SUM_TOLERANCE: f64 = 1e-6;

/// Outlier cut-off in population standard deviations.
pub const OUTLIER_SIGMAS: f64 = 3.0;

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

/// One conductivity measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Kelvin.
    pub temperature: f64,
    pub x_sio2: f64,
    pub x_cao: f64,
    pub x_mgo: f64,
    pub x_al2o3: f64,
    pub x_feo: f64,
    /// Siemens per metre.
    pub conductivity: f64,
}

impl Sample {
    pub fn from_features(features: [f64; NUM_FEATURES], conductivity: f64) -> Self {
        let [temperature, x_sio2, x_cao, x_mgo, x_al2o3, x_feo] = features;
        Self {
            temperature,
            x_sio2,
            x_cao,
            x_mgo,
            x_al2o3,
            x_feo,
            conductivity,
        }
    }

    pub fn features(&self) -> [f64; NUM_FEATURES] {
        [
            self.temperature,
            self.x_sio2,
            self.x_cao,
            self.x_mgo,
            self.x_al2o3,
            self.x_feo,
        ]
    }

    pub fn fractions(&self) -> [f64; 5] {
        [self.x_sio2, self.x_cao, self.x_mgo, self.x_al2o3, self.x_feo]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub source_path: String,
    pub provenance_notes: String,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self {
            samples,
            source_path: String::new(),
            provenance_notes: String::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn conductivities(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.conductivity).collect()
    }

    /// Samples at the given indices, in index order.
    pub fn select(&self, indices: &[usize]) -> Vec<Sample> {
        indices.iter().map(|&i| self.samples[i]).collect()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Divide the five oxide fractions by their sum instead of rejecting rows
    /// whose fractions do not sum to 1.
    pub renormalize_fractions: bool,
}

/// A parsed row; `conductivity` is absent when the file has no target column.
#[derive(Clone, Copy, Debug)]
struct Row {
    features: [f64; NUM_FEATURES],
    conductivity: Option<f64>,
}

fn parse_rows(path: &Path, opts: LoadOptions, target_required: bool) -> Result<Vec<Row>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(file);

    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("cannot read header: {e}")))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyDataset);
    }
    let position = |name: &str| headers.iter().position(|h| h == name);

    let mut feature_cols = [0usize; NUM_FEATURES];
    for (slot, name) in feature_cols.iter_mut().zip(FEATURE_COLUMNS) {
        *slot = position(name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))?;
    }
    let target_col = position(TARGET_COLUMN);
    if target_required && target_col.is_none() {
        return Err(Error::Schema(format!("missing column `{TARGET_COLUMN}`")));
    }
    for h in headers.iter() {
        if h != TARGET_COLUMN && !FEATURE_COLUMNS.contains(&h) {
            return Err(Error::Schema(format!("unexpected column `{h}`")));
        }
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Row {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row_err = |message: String| Error::Row { line, message };
        let field = |col: usize, name: &str| -> Result<f64> {
            let raw = &record[col];
            let value: f64 = raw
                .parse()
                .map_err(|_| row_err(format!("`{name}`: cannot parse `{raw}` as a number")))?;
            if !value.is_finite() {
                return Err(row_err(format!("`{name}`: non-finite value `{raw}`")));
            }
            Ok(value)
        };

        let mut features = [0.0; NUM_FEATURES];
        for (k, (&col, name)) in feature_cols.iter().zip(FEATURE_COLUMNS).enumerate() {
            features[k] = field(col, name)?;
        }
        if features[0] <= 0.0 {
            return Err(row_err(format!(
                "`temperature_K` must be positive, got {}",
                features[0]
            )));
        }
        for (value, name) in features[1..].iter().zip(&FEATURE_COLUMNS[1..]) {
            if !(0.0..=1.0).contains(value) {
                return Err(row_err(format!(
                    "`{name}` molar fraction {value} is outside [0, 1]"
                )));
            }
        }
        let sum: f64 = features[1..].iter().sum();
        if opts.renormalize_fractions {
            if sum <= 0.0 {
                return Err(row_err("oxide fractions sum to zero".into()));
            }
            for f in &mut features[1..] {
                *f /= sum;
            }
        } else if (sum - 1.0).abs() > FRACTION_SUM_TOLERANCE {
            return Err(row_err(format!(
                "oxide fractions sum to {sum}, expected 1 within {FRACTION_SUM_TOLERANCE}"
            )));
        }

        let conductivity = match target_col {
            Some(col) if target_required => {
                let c = field(col, TARGET_COLUMN)?;
                if c < 0.0 {
                    return Err(row_err(format!("negative conductivity {c}")));
                }
                Some(c)
            }
            _ => None,
        };
        rows.push(Row {
            features,
            conductivity,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(rows)
}

/// Reads a measurement file; rows keep file order.
pub fn load_csv(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let rows = parse_rows(path, opts, true)?;
    let samples = rows
        .into_iter()
        .map(|r| Sample::from_features(r.features, r.conductivity.unwrap_or_default()))
        .collect();
    Ok(Dataset {
        samples,
        source_path: path.display().to_string(),
        provenance_notes: if opts.renormalize_fractions {
            "oxide fractions renormalized to sum to 1".into()
        } else {
            String::new()
        },
    })
}

/// Reads predictor rows for inference. The conductivity column may be present
/// and is ignored.
pub fn load_features(
    path: impl AsRef<Path>,
    opts: LoadOptions,
) -> Result<Vec<[f64; NUM_FEATURES]>> {
    Ok(parse_rows(path.as_ref(), opts, false)?
        .into_iter()
        .map(|r| r.features)
        .collect())
}

/// Writes samples with shortest round-trip float formatting, so
/// `load_csv(write_csv(d))` reproduces every value bit for bit.
pub fn write_csv(samples: &[Sample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "{},{}", FEATURE_COLUMNS.join(","), TARGET_COLUMN)?;
        for s in samples {
            let f = s.features();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                f[0], f[1], f[2], f[3], f[4], f[5], s.conductivity
            )?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

/// Mean and population standard deviation.
pub fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Drops samples whose conductivity lies more than three population standard
/// deviations from the mean. Statistics come from the full input and the pass
/// runs once; survivors keep their relative order.
pub fn remove_outliers(d: &Dataset) -> Result<(Dataset, usize)> {
    if d.len() < 2 {
        return Err(Error::DegenerateDataset(format!(
            "outlier removal needs at least 2 samples, got {}",
            d.len()
        )));
    }
    let (mean, std) = mean_and_population_std(&d.conductivities());
    let limit = OUTLIER_SIGMAS * std;
    let samples: Vec<Sample> = d
        .samples
        .iter()
        .filter(|s| (s.conductivity - mean).abs() <= limit)
        .copied()
        .collect();
    let removed = d.len() - samples.len();
    if samples.is_empty() {
        return Err(Error::DegenerateDataset("every sample was removed".into()));
    }
    Ok((
        Dataset {
            samples,
            source_path: d.source_path.clone(),
            provenance_notes: d.provenance_notes.clone(),
        },
        removed,
    ))
}

/// Per-column min-max scaling onto `[target_lo, target_hi]`.
///
/// A column with `max == min` maps every value to the midpoint of the target
/// range, and maps back to `min`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub target_lo: f64,
    pub target_hi: f64,
}

impl Scaler {
    pub fn new(min: Vec<f64>, max: Vec<f64>, target_lo: f64, target_hi: f64) -> Result<Self> {
        if min.len() != max.len() || min.is_empty() {
            return Err(Error::Shape(format!(
                "scaler min has {} columns, max has {}",
                min.len(),
                max.len()
            )));
        }
        check_target_range(target_lo, target_hi)?;
        for (k, (lo, hi)) in min.iter().zip(&max).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || hi < lo {
                return Err(Error::Config(format!(
                    "scaler column {k}: invalid range [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self {
            min,
            max,
            target_lo,
            target_hi,
        })
    }

    /// Fits one (min, max) pair per column of `rows`.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R], target_lo: f64, target_hi: f64) -> Result<Self> {
        check_target_range(target_lo, target_hi)?;
        let first = rows.first().ok_or(Error::EmptyDataset)?.as_ref();
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for row in rows {
            let row = row.as_ref();
            if row.len() != min.len() {
                return Err(Error::Shape(format!(
                    "row has {} columns, expected {}",
                    row.len(),
                    min.len()
                )));
            }
            for (k, &x) in row.iter().enumerate() {
                min[k] = min[k].min(x);
                max[k] = max[k].max(x);
            }
        }
        Self::new(min, max, target_lo, target_hi)
    }

    pub fn columns(&self) -> usize {
        self.min.len()
    }

    fn span(&self) -> f64 {
        self.target_hi - self.target_lo
    }

    pub fn normalize_value(&self, column: usize, x: f64) -> f64 {
        let (lo, hi) = (self.min[column], self.max[column]);
        if hi > lo {
            self.target_lo + (x - lo) / (hi - lo) * self.span()
        } else {
            self.target_lo + 0.5 * self.span()
        }
    }

    pub fn denormalize_value(&self, column: usize, y: f64) -> f64 {
        let (lo, hi) = (self.min[column], self.max[column]);
        if hi > lo {
            ((y - self.target_lo) / self.span()).mul_add(hi - lo, lo)
        } else {
            lo
        }
    }

    /// Scales the leading `x.len()` columns.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, &v)| self.normalize_value(k, v))
            .collect()
    }

    pub fn denormalize(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(k, &v)| self.denormalize_value(k, v))
            .collect()
    }
}

fn check_target_range(lo: f64, hi: f64) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "normalization range [{lo}, {hi}] must satisfy lo < hi"
        )))
    }
}

/// Fits a scaler over the six predictors followed by conductivity.
pub fn fit_scaler(samples: &[Sample], target_lo: f64, target_hi: f64) -> Result<Scaler> {
    let rows: Vec<[f64; NUM_FEATURES + 1]> = samples.iter().map(sample_row).collect();
    Scaler::fit(&rows, target_lo, target_hi)
}

fn sample_row(s: &Sample) -> [f64; NUM_FEATURES + 1] {
    let f = s.features();
    [f[0], f[1], f[2], f[3], f[4], f[5], s.conductivity]
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

/// Number of training samples for `n` samples: `floor(fraction * n)`.
pub fn train_count(n: usize, train_fraction: f64) -> usize {
    // the small offset keeps products such as 0.29 * 100 from flooring to 28
    ((train_fraction * n as f64) + 1e-9).floor() as usize
}

/// Seeded shuffle of `0..n`; the first `floor(fraction * n)` indices train.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<SplitIndices> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    if n < 2 {
        return Err(Error::DegenerateDataset(format!(
            "cannot split {n} samples into train and test"
        )));
    }
    let n_train = train_count(n, train_fraction);
    if n_train == 0 || n_train == n {
        return Err(Error::DegenerateDataset(format!(
            "train fraction {train_fraction} of {n} samples leaves an empty partition"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    RngState::with_stream(seed, stream::SPLIT).shuffle(&mut order);
    let test_indices = order.split_off(n_train);
    Ok(SplitIndices {
        train_indices: order,
        test_indices,
        seed,
    })
}

pub fn split(d: &Dataset, train_fraction: f64, seed: u64) -> Result<SplitIndices> {
    split_indices(d.len(), train_fraction, seed)
}
