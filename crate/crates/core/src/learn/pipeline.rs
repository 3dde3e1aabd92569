//! Train/evaluate pipeline: split, Gram, SMO, metrics, reports and grid search.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DataPoint, LabeledPoint};
use crate::error::{KerrError, Result};
use crate::kernels::{gram_cross, gram_exact, Gamma, GramMatrix, KernelKind, KernelSpec};
use crate::learn::metrics::{evaluate, Metrics};
use crate::learn::smo::{smo_train, svm_predict, SmoParams, SmoReport, SvmModel};
use crate::rng::keyed_rng;

/// Stream key reserved for the train/test shuffle.
const SPLIT_KEY: u64 = 0x5f11_7000;

/// Step of the decision-boundary mesh over the unit square.
pub const MESH_STEP: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub set_name: String,
    pub kernel: KernelSpec,
    #[serde(rename = "C")]
    pub c: f64,
    pub tol: f64,
    pub max_passes: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(set_name: impl Into<String>, kernel: KernelSpec, seed: u64) -> Self {
        let smo = SmoParams::default();
        Self {
            set_name: set_name.into(),
            kernel,
            c: smo.c,
            tol: smo.tol,
            max_passes: smo.max_passes,
            train_fraction: 0.7,
            seed,
        }
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn smo_params(&self) -> SmoParams {
        SmoParams {
            c: self.c,
            tol: self.tol,
            max_passes: self.max_passes,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(KerrError::InvalidInput(format!(
                "train fraction {} outside (0, 1)",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Seeded shuffle split into `(train, test)` index lists.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(KerrError::InvalidInput(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let n_train = (n as f64 * train_fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(KerrError::InvalidInput(format!(
            "{n} points leave an empty train or test split"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut keyed_rng(seed, SPLIT_KEY));
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

/// A trained classifier that carries its own support points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kernel: KernelSpec,
    pub support_points: Vec<DataPoint>,
    pub dual_coeffs: Vec<f64>,
    pub bias: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

impl TrainedModel {
    fn from_svm(svm: &SvmModel, train: &[DataPoint], kernel: KernelSpec) -> Self {
        Self {
            kernel,
            support_points: svm.support_indices.iter().map(|&i| train[i].clone()).collect(),
            dual_coeffs: svm.dual_coeffs.clone(),
            bias: svm.bias,
            c: svm.c,
        }
    }

    pub fn decision_values(&self, points: &[DataPoint]) -> Result<Vec<f64>> {
        if points.is_empty() {
            return Ok(Vec::new());
        }
        if self.support_points.is_empty() {
            return Ok(vec![-self.bias; points.len()]);
        }
        let cross = gram_cross(points, &self.support_points, &self.kernel)?;
        Ok((0..points.len())
            .map(|r| {
                self.dual_coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w * cross.get(r, j))
                    .sum::<f64>()
                    - self.bias
            })
            .collect())
    }

    /// Sign of the decision value; exact zero maps to `+1`.
    pub fn predict(&self, points: &[DataPoint]) -> Result<Vec<i8>> {
        Ok(self
            .decision_values(points)?
            .into_iter()
            .map(|d| if d >= 0.0 { 1 } else { -1 })
            .collect())
    }

    /// Predicted labels on a square mesh over `[0,1]^2`, rows `(x1, x2, label)`.
    pub fn decision_mesh(&self, step: f64) -> Result<Vec<LabeledPoint>> {
        if !(step > 0.0 && step <= 1.0) {
            return Err(KerrError::InvalidInput(format!("mesh step {step} outside (0, 1]")));
        }
        let n = (1.0 / step + 1e-9).floor() as usize + 1;
        let mut coords = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                coords.push(((i as f64 * step).min(1.0), (j as f64 * step).min(1.0)));
            }
        }
        let points = coords
            .iter()
            .map(|&(a, b)| DataPoint::two(a, b))
            .collect::<Result<Vec<_>>>()?;
        let labels = self.predict(&points)?;
        Ok(coords
            .into_iter()
            .zip(labels)
            .map(|((x1, x2), label)| LabeledPoint { x1, x2, label })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub set_name: String,
    pub set_size: usize,
    #[serde(rename = "C")]
    pub c: f64,
    /// Resolved RBF width; absent for quantum kernels.
    pub gamma: Option<f64>,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: [[usize; 2]; 2],
    pub n_support: usize,
    pub seed: u64,
    pub kernel_kind: KernelKind,
    pub cutoff: usize,
    pub alpha0: [f64; 2],
    pub r0: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub converged: bool,
    pub iterations: usize,
    pub kkt_gap: f64,
    pub config: TrainConfig,
}

impl TrainReport {
    pub fn metrics(&self) -> Metrics {
        Metrics {
            accuracy: self.accuracy,
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
            confusion: self.confusion,
        }
    }

    /// Pretty JSON with keys sorted at every level.
    pub fn to_json_pretty(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string_pretty(&value)?)
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.to_json_pretty()?.as_bytes())?;
        out.write_all(b"\n")?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub model: TrainedModel,
    pub smo: SmoReport,
    pub predictions: Vec<i8>,
    pub truth: Vec<i8>,
}

fn unpack(data: &[LabeledPoint]) -> Result<(Vec<DataPoint>, Vec<i8>)> {
    let points = data.iter().map(LabeledPoint::point).collect::<Result<Vec<_>>>()?;
    let labels = data.iter().map(|p| p.label).collect();
    Ok((points, labels))
}

fn gather<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

struct Split {
    train: Vec<DataPoint>,
    train_y: Vec<i8>,
    test: Vec<DataPoint>,
    test_y: Vec<i8>,
}

fn split(data: &[LabeledPoint], cfg: &TrainConfig) -> Result<Split> {
    cfg.validate()?;
    let (points, labels) = unpack(data)?;
    let (tr, te) = split_indices(points.len(), cfg.train_fraction, cfg.seed)?;
    Ok(Split {
        train: gather(&points, &tr),
        train_y: gather(&labels, &tr),
        test: gather(&points, &te),
        test_y: gather(&labels, &te),
    })
}

fn report(
    cfg: &TrainConfig,
    kernel: &KernelSpec,
    set_size: usize,
    s: &Split,
    svm: &SvmModel,
    smo: &SmoReport,
    m: &Metrics,
) -> TrainReport {
    TrainReport {
        set_name: cfg.set_name.clone(),
        set_size,
        c: cfg.c,
        gamma: match (kernel.kind, kernel.gamma) {
            (KernelKind::Rbf, Gamma::Value(g)) => Some(g),
            _ => None,
        },
        accuracy: m.accuracy,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        confusion: m.confusion,
        n_support: svm.n_support(),
        seed: cfg.seed,
        kernel_kind: kernel.kind,
        cutoff: kernel.policy.cutoff,
        alpha0: [kernel.alpha0.re, kernel.alpha0.im],
        r0: kernel.r0,
        n_train: s.train.len(),
        n_test: s.test.len(),
        converged: smo.converged,
        iterations: smo.iterations,
        kkt_gap: smo.final_gap,
        config: cfg.clone(),
    }
}

/// Seeded 70/30 (configurable) split, exact Gram on the training part, SMO,
/// and metrics on the held-out part.
pub fn train_eval(data: &[LabeledPoint], cfg: &TrainConfig) -> Result<TrainOutcome> {
    let s = split(data, cfg)?;
    let kernel = cfg.kernel.resolved(&s.train)?;
    let gram = gram_exact(&s.train, &kernel)?;
    let (svm, smo) = smo_train(&gram, &s.train_y, cfg.smo_params())?;
    let cross = gram_cross(&s.test, &s.train, &kernel)?;
    let predictions = svm_predict(&svm, &cross)?;
    let m = evaluate(&predictions, &s.test_y)?;
    Ok(TrainOutcome {
        report: report(cfg, &kernel, data.len(), &s, &svm, &smo, &m),
        model: TrainedModel::from_svm(&svm, &s.train, kernel),
        smo,
        predictions,
        truth: s.test_y,
    })
}

/// The same pipeline with an RBF kernel.
pub fn rbf_baseline_run(
    data: &[LabeledPoint],
    set_name: &str,
    c: f64,
    gamma: Gamma,
    seed: u64,
) -> Result<TrainOutcome> {
    train_eval(data, &TrainConfig::new(set_name, KernelSpec::rbf(gamma), seed).with_c(c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    #[serde(rename = "C")]
    pub c: f64,
    pub gamma: Gamma,
    /// `gamma` after resolving `scale`; the kernel's own value for non-RBF kinds.
    pub gamma_value: Option<f64>,
    pub metrics: Metrics,
    pub n_support: usize,
    pub kkt_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: GridCell,
    pub cells: Vec<GridCell>,
}

fn better(a: &GridCell, b: &GridCell) -> bool {
    let ga = a.gamma_value.unwrap_or(0.0);
    let gb = b.gamma_value.unwrap_or(0.0);
    a.metrics.accuracy > b.metrics.accuracy
        || (a.metrics.accuracy == b.metrics.accuracy && (a.c < b.c || (a.c == b.c && ga < gb)))
}

/// Exhaustive search over `C x gamma` on the fixed split of `base`. The gamma
/// grid only applies to RBF kernels; other kinds use `base.kernel` as is.
/// Ties go to the smaller `C`, then the smaller gamma.
pub fn grid_search(data: &[LabeledPoint], base: &TrainConfig, c_grid: &[f64], gamma_grid: &[Gamma]) -> Result<GridResult> {
    if c_grid.is_empty() || gamma_grid.is_empty() {
        return Err(KerrError::InvalidInput("grid search needs nonempty C and gamma grids".into()));
    }
    let s = split(data, base)?;
    let gammas: Vec<Gamma> = if base.kernel.kind == KernelKind::Rbf {
        gamma_grid.to_vec()
    } else {
        vec![base.kernel.gamma]
    };

    let mut cells = Vec::with_capacity(gammas.len() * c_grid.len());
    for gamma in gammas {
        let kernel = KernelSpec { gamma, ..base.kernel }.resolved(&s.train)?;
        let gram: GramMatrix = gram_exact(&s.train, &kernel)?;
        let cross = gram_cross(&s.test, &s.train, &kernel)?;
        let gamma_value = match kernel.gamma {
            Gamma::Value(g) if kernel.kind == KernelKind::Rbf => Some(g),
            _ => None,
        };
        let row = c_grid
            .par_iter()
            .map(|&c| {
                let params = SmoParams { c, ..base.smo_params() };
                let (svm, smo) = smo_train(&gram, &s.train_y, params)?;
                let pred = svm_predict(&svm, &cross)?;
                Ok(GridCell {
                    c,
                    gamma,
                    gamma_value,
                    metrics: evaluate(&pred, &s.test_y)?,
                    n_support: svm.n_support(),
                    kkt_gap: smo.final_gap,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        cells.extend(row);
    }
    let best = cells
        .iter()
        .fold(None::<&GridCell>, |acc, cell| match acc {
            Some(b) if !better(cell, b) => Some(b),
            _ => Some(cell),
        })
        .expect("grid is nonempty")
        .clone();
    Ok(GridResult { best, cells })
}

/// `x1,x2,label` rows of a decision mesh.
pub fn write_mesh_csv<W: Write>(mesh: &[LabeledPoint], out: W) -> Result<()> {
    crate::data::write_labeled_csv(mesh, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::uniform_points;

    fn stripes(n: usize, seed: u64) -> Vec<LabeledPoint> {
        uniform_points(n, 2, seed)
            .iter()
            .map(|p| LabeledPoint {
                x1: p.coords()[0],
                x2: p.coords()[1],
                label: if p.coords()[0] < 0.5 { 1 } else { -1 },
            })
            .collect()
    }

    #[test]
    fn split_is_seeded_partition() {
        let (a, b) = split_indices(100, 0.7, 3).unwrap();
        assert_eq!((a.len(), b.len()), (70, 30));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(split_indices(100, 0.7, 3).unwrap(), (a.clone(), b));
        assert_ne!(split_indices(100, 0.7, 4).unwrap().0, a);
        assert!(split_indices(1, 0.7, 0).is_err());
        assert!(split_indices(10, 1.0, 0).is_err());
    }

    #[test]
    fn rbf_learns_stripes() {
        let data = stripes(200, 1);
        let out = rbf_baseline_run(&data, "stripes", 10.0, Gamma::Value(10.0), 2).unwrap();
        assert!(out.report.accuracy > 0.9, "{}", out.report.accuracy);
        assert_eq!(out.report.n_test, 60);
        assert_eq!(out.report.confusion.iter().flatten().sum::<usize>(), 60);
        // The portable model reproduces the in-pipeline predictions.
        let s = split(&data, &out.report.config).unwrap();
        assert_eq!(out.model.predict(&s.test).unwrap(), out.predictions);
    }

    #[test]
    fn single_class_gives_constant_predictions() {
        let data: Vec<_> = stripes(40, 5).into_iter().map(|p| LabeledPoint { label: 1, ..p }).collect();
        let out = rbf_baseline_run(&data, "one", 1.0, Gamma::Scale, 0).unwrap();
        assert!(out.predictions.iter().all(|&y| y == 1));
        assert_eq!(out.report.accuracy, 1.0);
    }

    #[test]
    fn report_json_has_sorted_fields() {
        let data = stripes(60, 7);
        let out = rbf_baseline_run(&data, "stripes", 1.0, Gamma::Scale, 1).unwrap();
        let json = out.report.to_json_pretty().unwrap();
        for key in [
            "\"C\"", "\"accuracy\"", "\"alpha0\"", "\"confusion\"", "\"cutoff\"", "\"f1\"", "\"gamma\"",
            "\"kernel_kind\"", "\"n_support\"", "\"precision\"", "\"r0\"", "\"recall\"", "\"seed\"",
            "\"set_name\"", "\"set_size\"",
        ] {
            assert!(json.contains(key), "{key}");
        }
        assert!(json.find("\"accuracy\"").unwrap() < json.find("\"set_name\"").unwrap());
        let back: TrainReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, out.report);
        let again = train_eval(&data, &back.config).unwrap();
        assert_eq!(again.report, out.report);
    }

    #[test]
    fn mesh_covers_unit_square() {
        let data = stripes(60, 8);
        let out = rbf_baseline_run(&data, "s", 1.0, Gamma::Value(5.0), 0).unwrap();
        let mesh = out.model.decision_mesh(MESH_STEP).unwrap();
        assert_eq!(mesh.len(), 51 * 51);
        assert_eq!((mesh.last().unwrap().x1, mesh.last().unwrap().x2), (1.0, 1.0));
    }

    #[test]
    fn grid_search_single_cell_and_ties() {
        let data = stripes(80, 9);
        let base = TrainConfig::new("s", KernelSpec::rbf(Gamma::Scale), 4);
        let one = grid_search(&data, &base, &[1.0], &[Gamma::Value(3.0)]).unwrap();
        assert_eq!(one.cells.len(), 1);
        assert_eq!(one.best, one.cells[0]);

        let grid = grid_search(&data, &base, &[1.0, 10.0, 100.0], &[Gamma::Value(1.0), Gamma::Value(10.0)]).unwrap();
        assert_eq!(grid.cells.len(), 6);
        let top = grid.cells.iter().map(|c| c.metrics.accuracy).fold(0.0, f64::max);
        assert_eq!(grid.best.metrics.accuracy, top);
        for c in &grid.cells {
            if c.metrics.accuracy == top {
                assert!(grid.best.c < c.c || (grid.best.c == c.c && grid.best.gamma_value <= c.gamma_value));
            }
        }
        assert_eq!(grid, grid_search(&data, &base, &[1.0, 10.0, 100.0], &[Gamma::Value(1.0), Gamma::Value(10.0)]).unwrap());
        assert!(grid_search(&data, &base, &[], &[Gamma::Scale]).is_err());
    }
}
