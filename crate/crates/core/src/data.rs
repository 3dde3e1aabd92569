//! Data points, labelled datasets and their CSV form.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KerrError, Result};
use crate::rng::keyed_rng;

/// A point in the unit hypercube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    coords: Vec<f64>,
}

impl DataPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(KerrError::InvalidInput("data point needs at least one coordinate".into()));
        }
        if let Some(bad) = coords.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(KerrError::Domain(format!("coordinate {bad} outside [0, 1]")));
        }
        Ok(Self { coords })
    }

    pub fn two(x1: f64, x2: f64) -> Result<Self> {
        Self::new(vec![x1, x2])
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub x1: f64,
    pub x2: f64,
    pub label: i8,
}

impl LabeledPoint {
    pub fn point(&self) -> Result<DataPoint> {
        DataPoint::two(self.x1, self.x2)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct PointRow {
    x1: f64,
    x2: f64,
}

/// `n` points uniform on `[0,1]^dims`, one keyed stream per point.
pub fn uniform_points(n: usize, dims: usize, seed: u64) -> Vec<DataPoint> {
    (0..n)
        .map(|i| {
            let mut rng = keyed_rng(seed, i as u64);
            DataPoint {
                coords: (0..dims).map(|_| rng.random::<f64>()).collect(),
            }
        })
        .collect()
}

fn require_two(points: &[DataPoint]) -> Result<()> {
    if let Some(p) = points.iter().find(|p| p.dim() != 2) {
        return Err(KerrError::ShapeMismatch(format!(
            "expected two-coordinate points, found {}",
            p.dim()
        )));
    }
    Ok(())
}

pub fn write_points_csv<W: Write>(points: &[DataPoint], out: W) -> Result<()> {
    require_two(points)?;
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(PointRow {
            x1: p.coords[0],
            x2: p.coords[1],
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_points_csv<R: Read>(input: R) -> Result<Vec<DataPoint>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize::<PointRow>()
        .map(|row| {
            let row = row?;
            DataPoint::two(row.x1, row.x2)
        })
        .collect()
}

pub fn write_labeled_csv<W: Write>(rows: &[LabeledPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labeled_csv<R: Read>(input: R) -> Result<Vec<LabeledPoint>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for row in r.deserialize::<LabeledPoint>() {
        let row = row?;
        if row.label != 1 && row.label != -1 {
            return Err(KerrError::InvalidInput(format!("label {} is not +1 or -1", row.label)));
        }
        row.point()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Descriptive statistics of one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    pub skew: f64,
    pub kurtosis: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Sample statistics; `std` uses the `n - 1` denominator, skew and kurtosis
/// are the bias-adjusted estimators (excess kurtosis). Undefined moments are NaN.
pub fn column_stats(values: &[f64]) -> Result<ColumnStats> {
    if values.is_empty() {
        return Err(KerrError::InvalidInput("no values".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m = |p: i32| values.iter().map(|v| (v - mean).powi(p)).sum::<f64>() / n;
    let (m2, m3, m4) = (m(2), m(3), m(4));
    let std = if values.len() > 1 { (m2 * n / (n - 1.0)).sqrt() } else { f64::NAN };
    let skew = if values.len() > 2 && m2 > 0.0 {
        (n * (n - 1.0)).sqrt() / (n - 2.0) * m3 / m2.powf(1.5)
    } else {
        f64::NAN
    };
    let kurtosis = if values.len() > 3 && m2 > 0.0 {
        let g2 = m4 / (m2 * m2) - 3.0;
        (n - 1.0) / ((n - 2.0) * (n - 3.0)) * ((n + 1.0) * g2 + 6.0)
    } else {
        f64::NAN
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(ColumnStats {
        count: values.len(),
        mean,
        std,
        min: sorted[0],
        q25: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q75: quantile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        skew,
        kurtosis,
    })
}

/// Counts and proportions of each label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub total: usize,
    pub positive: usize,
    pub negative: usize,
    pub positive_proportion: f64,
    pub negative_proportion: f64,
}

pub fn label_summary(labels: &[i8]) -> LabelSummary {
    let positive = labels.iter().filter(|&&l| l > 0).count();
    let total = labels.len();
    let negative = total - positive;
    let frac = |k: usize| if total == 0 { 0.0 } else { k as f64 / total as f64 };
    LabelSummary {
        total,
        positive,
        negative,
        positive_proportion: frac(positive),
        negative_proportion: frac(negative),
    }
}
