//! Soft labels and kernel-density curves over `[0, 1]`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::AnnotationMatrix;
use crate::error::{Error, Result};
use crate::par;

pub const GRID_POINTS: usize = 201;
const MIN_BANDWIDTH: f64 = 0.01;

/// Per-instance fraction of positive labels, for instances with at least
/// one label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLabelSeries {
    pub instance_ids: Vec<String>,
    pub values: Vec<f64>,
}

impl SoftLabelSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["instance_id", "soft_label"])?;
        for (id, v) in self.instance_ids.iter().zip(&self.values) {
            w.write_record([id.clone(), format!("{v:.6}")])?;
        }
        w.flush().map_err(|e| Error::io("<soft labels>", e))
    }
}

pub fn soft_labels(matrix: &AnnotationMatrix) -> SoftLabelSeries {
    let mut series = SoftLabelSeries { instance_ids: Vec::new(), values: Vec::new() };
    for (i, id) in matrix.instance_ids().iter().enumerate() {
        let (zeros, ones) = matrix.label_counts(i);
        if zeros + ones > 0 {
            series.instance_ids.push(id.clone());
            series.values.push(ones as f64 / (zeros + ones) as f64);
        }
    }
    series
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl PdfCurve {
    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }

    pub fn argmax(&self) -> f64 {
        let (k, _) = self
            .density
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |best, (k, &d)| if d > best.1 { (k, d) } else { best });
        self.grid[k]
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "density"])?;
        for (x, d) in self.grid.iter().zip(&self.density) {
            w.write_record([format!("{x:.3}"), format!("{d:.8}")])?;
        }
        w.flush().map_err(|e| Error::io("<pdf>", e))
    }
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Silverman's rule of thumb, `0.9 · min(σ, IQR/1.34) · n^(-1/5)`, floored at 0.01.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => 0.0,
    };
    (0.9 * spread * n.powf(-0.2)).max(MIN_BANDWIDTH)
}

/// Gaussian kernel density on 201 evenly spaced points of `[0, 1]`,
/// renormalized so the grid integral is 1.
pub fn estimate_pdf(series: &SoftLabelSeries, bandwidth: Bandwidth) -> Result<PdfCurve> {
    if series.len() < 2 {
        return Err(Error::InsufficientData(format!("{} soft label(s); need at least 2", series.len())));
    }
    let h = match bandwidth {
        Bandwidth::Auto => silverman_bandwidth(&series.values),
        Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
        Bandwidth::Fixed(h) => return Err(Error::InvalidArgument(format!("bandwidth {h} must be positive"))),
    };
    let grid: Vec<f64> = (0..GRID_POINTS).map(|k| k as f64 / (GRID_POINTS - 1) as f64).collect();
    let values = &series.values;
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let mut density = par::map(&grid, |&x| {
        values.iter().map(|&v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum::<f64>() * norm
    });
    let mass = trapezoid(&grid, &density);
    if !(mass > 0.0) {
        return Err(Error::DegenerateData("kernel density vanished on the grid".into()));
    }
    density.iter_mut().for_each(|d| *d /= mass);
    Ok(PdfCurve { grid, density, bandwidth: h })
}
