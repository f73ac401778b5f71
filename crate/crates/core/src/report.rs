//! Plot-ready CSV outputs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::data::FEATURE_COLUMNS;
use crate::error::{Error, Result};
use crate::evaluation::ParityPair;
use crate::sensitivity::SensitivityReport;
use crate::training::{EpochLoss, SweepRow};

pub const DEFAULT_BINS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width histogram over `[min, max]` of `values`. The last bin is
/// closed on the right. When all values coincide every bin has zero width and
/// all values land in the first bin.
pub fn histogram(values: &[f64], bins: usize) -> Result<Vec<Bin>> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    if values.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (max - min) / bins as f64;
    let mut out: Vec<Bin> = (0..bins)
        .map(|k| Bin {
            lo: min + width * k as f64,
            hi: if k + 1 == bins {
                max
            } else {
                min + width * (k + 1) as f64
            },
            count: 0,
        })
        .collect();
    for &v in values {
        let k = if width > 0.0 {
            (((v - min) / width) as usize).min(bins - 1)
        } else {
            0
        };
        out[k].count += 1;
    }
    Ok(out)
}

fn write_lines(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn write_histogram(path: &Path, bins: &[Bin]) -> Result<()> {
    write_lines(path, |w| {
        writeln!(w, "bin_lo,bin_hi,count")?;
        for b in bins {
            writeln!(w, "{},{},{}", b.lo, b.hi, b.count)?;
        }
        Ok(())
    })
}

pub fn write_loss_curve(path: &Path, losses: &[EpochLoss]) -> Result<()> {
    write_lines(path, |w| {
        writeln!(w, "epoch,rmse")?;
        for l in losses {
            writeln!(w, "{},{}", l.epoch, l.rmse)?;
        }
        Ok(())
    })
}

pub fn write_parity(path: &Path, pairs: &[ParityPair]) -> Result<()> {
    write_lines(path, |w| {
        writeln!(w, "conductivity_true,conductivity_pred")?;
        for p in pairs {
            writeln!(w, "{},{}", p.conductivity_true, p.conductivity_pred)?;
        }
        Ok(())
    })
}

/// Degenerate reports (all contributions zero) carry `NaN` percentages.
pub fn write_importance(path: &Path, report: &SensitivityReport) -> Result<()> {
    write_lines(path, |w| {
        writeln!(w, "input,contribution,importance_pct")?;
        for i in &report.inputs {
            writeln!(
                w,
                "{},{},{}",
                i.input,
                i.contribution,
                i.importance_pct.unwrap_or(f64::NAN)
            )?;
        }
        Ok(())
    })
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_lines(path, |w| {
        writeln!(w, "width,test_aae")?;
        for r in rows {
            writeln!(w, "{},{}", r.width, r.test_aae)?;
        }
        Ok(())
    })
}

pub fn write_predictions(path: &Path, rows: &[[f64; 6]], predictions: &[f64]) -> Result<()> {
    write_lines(path, |w| {
        writeln!(w, "{},conductivity_pred", FEATURE_COLUMNS.join(","))?;
        for (r, p) in rows.iter().zip(predictions) {
            writeln!(w, "{},{},{},{},{},{},{}", r[0], r[1], r[2], r[3], r[4], r[5], p)?;
        }
        Ok(())
    })
}
