//! Soft-margin SVM dual solved by sequential minimal optimization.
//!
//! Minimizes `1/2 a^T Q a - e^T a` with `Q_ij = y_i y_j K_ij`, `0 <= a_i <= C`
//! and `y^T a = 0`. Each step moves the maximal violating pair.

use log::{debug, warn};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{KerrError, Result};
use crate::kernels::{GramMatrix, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoParams {
    pub c: f64,
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for SmoParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-3,
            max_passes: 200,
        }
    }
}

impl SmoParams {
    pub fn with_c(c: f64) -> Self {
        Self { c, ..Self::default() }
    }
}

/// Decision function `d(x) = sum_j y_j a_j k(x, x_j) - b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_indices: Vec<usize>,
    /// `y_j a_j` for each support vector.
    pub dual_coeffs: Vec<f64>,
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub n_train: usize,
}

impl SvmModel {
    pub fn n_support(&self) -> usize {
        self.support_indices.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoReport {
    pub iterations: usize,
    pub converged: bool,
    /// `max_{I_up} -y G - min_{I_low} -y G` at exit.
    pub final_gap: f64,
    /// Dual objective `e^T a - 1/2 a^T Q a` after each step.
    pub objective_trace: Vec<f64>,
    /// Diagonal shift applied to restore positive semidefiniteness.
    pub psd_shift: f64,
}

fn in_up(y: i8, a: f64, c: f64) -> bool {
    (y > 0 && a < c) || (y < 0 && a > 0.0)
}

fn in_low(y: i8, a: f64, c: f64) -> bool {
    (y > 0 && a > 0.0) || (y < 0 && a < c)
}

/// Maximal violating pair `(i, j, gap)`; ties go to the lowest index.
fn select_pair(grad: &[f64], labels: &[i8], alphas: &[f64], c: f64) -> Option<(usize, usize, f64)> {
    let mut best_up: Option<(usize, f64)> = None;
    let mut best_low: Option<(usize, f64)> = None;
    for (k, (&g, (&y, &a))) in grad.iter().zip(labels.iter().zip(alphas)).enumerate() {
        let v = -(y as f64) * g;
        if in_up(y, a, c) && best_up.is_none_or(|(_, b)| v > b) {
            best_up = Some((k, v));
        }
        if in_low(y, a, c) && best_low.is_none_or(|(_, b)| v < b) {
            best_low = Some((k, v));
        }
    }
    match (best_up, best_low) {
        (Some((i, m)), Some((j, mm))) => Some((i, j, m - mm)),
        _ => None,
    }
}

/// KKT gap of a dual point on a kernel matrix.
pub fn kkt_gap(kernel: &DMatrix<f64>, labels: &[i8], alphas: &[f64], c: f64) -> f64 {
    let n = labels.len();
    let grad: Vec<f64> = (0..n)
        .map(|i| {
            let s: f64 = (0..n).map(|j| labels[j] as f64 * alphas[j] * kernel[(i, j)]).sum();
            labels[i] as f64 * s - 1.0
        })
        .collect();
    select_pair(&grad, labels, alphas, c).map_or(0.0, |(_, _, gap)| gap.max(0.0))
}

/// Dual objective `sum a - 1/2 a^T Q a`.
pub fn dual_objective(kernel: &DMatrix<f64>, labels: &[i8], alphas: &[f64]) -> f64 {
    let n = labels.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alphas[i] * alphas[j] * (labels[i] * labels[j]) as f64 * kernel[(i, j)];
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

fn validate(gram: &GramMatrix, labels: &[i8], params: &SmoParams) -> Result<()> {
    if !gram.is_square() {
        return Err(KerrError::ShapeMismatch("training Gram matrix must be square".into()));
    }
    if gram.nrows() != labels.len() {
        return Err(KerrError::ShapeMismatch(format!(
            "{} labels for a {}x{} Gram matrix",
            labels.len(),
            gram.nrows(),
            gram.ncols()
        )));
    }
    if labels.is_empty() {
        return Err(KerrError::InvalidInput("no training points".into()));
    }
    if labels.iter().any(|&y| y != 1 && y != -1) {
        return Err(KerrError::InvalidInput("labels must be +1 or -1".into()));
    }
    if !(params.c > 0.0) || !(params.tol > 0.0) || params.max_passes == 0 {
        return Err(KerrError::InvalidInput("need C > 0, tol > 0 and max_passes >= 1".into()));
    }
    Ok(())
}

const TAU: f64 = 1e-12;

pub fn smo_train(gram: &GramMatrix, labels: &[i8], params: SmoParams) -> Result<(SvmModel, SmoReport)> {
    validate(gram, labels, &params)?;
    let n = labels.len();
    let c = params.c;

    if labels.iter().all(|&y| y == labels[0]) {
        // One class: no constraint to balance, predict that class everywhere.
        let model = SvmModel {
            support_indices: Vec::new(),
            dual_coeffs: Vec::new(),
            alphas: vec![0.0; n],
            bias: -(labels[0] as f64),
            c,
            n_train: n,
        };
        let report = SmoReport {
            iterations: 0,
            converged: true,
            final_gap: 0.0,
            objective_trace: Vec::new(),
            psd_shift: 0.0,
        };
        return Ok((model, report));
    }

    let mut psd_shift = 0.0;
    let shifted;
    let k: &DMatrix<f64> = if matches!(gram.provenance, Provenance::Sampled { .. }) {
        let lmin = gram.min_eigenvalue()?;
        if lmin < -1e-8 {
            psd_shift = -lmin + 1e-8;
            warn!("sampled Gram matrix has eigenvalue {lmin:.3e}; adding {psd_shift:.3e} to the diagonal");
            shifted = &gram.entries + DMatrix::identity(n, n) * psd_shift;
            &shifted
        } else {
            &gram.entries
        }
    } else {
        &gram.entries
    };

    let y: Vec<f64> = labels.iter().map(|&v| v as f64).collect();
    let mut alphas = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut objective = 0.0;
    let mut trace = Vec::new();
    let max_iter = params.max_passes.saturating_mul(n);
    let mut iterations = 0;
    let mut converged = false;
    let mut gap = f64::INFINITY;

    while iterations < max_iter {
        let Some((i, j, g)) = select_pair(&grad, labels, &alphas, c) else {
            gap = 0.0;
            converged = true;
            break;
        };
        gap = g;
        if gap < params.tol {
            converged = true;
            break;
        }
        let mut curv = k[(i, i)] + k[(j, j)] - 2.0 * k[(i, j)];
        if curv <= 0.0 {
            curv = TAU;
        }
        let room_i = if labels[i] > 0 { c - alphas[i] } else { alphas[i] };
        let room_j = if labels[j] > 0 { alphas[j] } else { c - alphas[j] };
        let t = (gap / curv).min(room_i).min(room_j);

        // a_i += y_i t, a_j -= y_j t keeps y^T a fixed.
        let new_i = alphas[i] + y[i] * t;
        let new_j = alphas[j] - y[j] * t;
        alphas[i] = if t == room_i { if labels[i] > 0 { c } else { 0.0 } } else { new_i };
        alphas[j] = if t == room_j { if labels[j] > 0 { 0.0 } else { c } } else { new_j };

        let (ki, kj) = (k.column(i), k.column(j));
        for (m, g) in grad.iter_mut().enumerate() {
            *g += y[m] * t * (ki[m] - kj[m]);
        }
        objective += gap * t - 0.5 * curv * t * t;
        trace.push(objective);
        iterations += 1;
    }
    if !converged {
        warn!("SMO stopped after {iterations} iterations with KKT gap {gap:.3e}");
    }
    debug!("SMO finished: {iterations} iterations, gap {gap:.3e}");

    // Bias from free vectors, or the midpoint of the feasible interval.
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for m in 0..n {
        let yg = y[m] * grad[m];
        if alphas[m] >= c {
            if labels[m] < 0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alphas[m] <= 0.0 {
            if labels[m] > 0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free_count += 1;
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        0.5 * (ub + lb)
    };

    let support_indices: Vec<usize> = (0..n).filter(|&m| alphas[m] > 0.0).collect();
    let dual_coeffs = support_indices.iter().map(|&m| y[m] * alphas[m]).collect();
    let model = SvmModel {
        support_indices,
        dual_coeffs,
        alphas,
        bias,
        c,
        n_train: n,
    };
    let report = SmoReport {
        iterations,
        converged,
        final_gap: gap.max(0.0),
        objective_trace: trace,
        psd_shift,
    };
    Ok((model, report))
}

/// Decision values for rows of a cross-kernel matrix (columns = training points).
pub fn svm_decision_values(model: &SvmModel, cross: &GramMatrix) -> Result<Vec<f64>> {
    if cross.ncols() != model.n_train {
        return Err(KerrError::ShapeMismatch(format!(
            "cross-kernel has {} columns, model was trained on {} points",
            cross.ncols(),
            model.n_train
        )));
    }
    Ok((0..cross.nrows())
        .map(|r| {
            model
                .support_indices
                .iter()
                .zip(&model.dual_coeffs)
                .map(|(&j, &w)| w * cross.get(r, j))
                .sum::<f64>()
                - model.bias
        })
        .collect())
}

/// `sign(d(x))` with exact zeros sent to `+1`.
pub fn svm_predict(model: &SvmModel, cross: &GramMatrix) -> Result<Vec<i8>> {
    Ok(svm_decision_values(model, cross)?
        .into_iter()
        .map(|d| if d >= 0.0 { 1 } else { -1 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_gram(xs: &[[f64; 2]]) -> GramMatrix {
        let n = xs.len();
        GramMatrix::new(
            DMatrix::from_fn(n, n, |i, j| xs[i][0] * xs[j][0] + xs[i][1] * xs[j][1]),
            Provenance::Exact,
        )
    }

    #[test]
    fn separable_toy_set() {
        let xs = [[2.0, 2.0], [1.5, 2.5], [-2.0, -1.0], [-1.0, -2.5]];
        let y = [1, 1, -1, -1];
        let g = linear_gram(&xs);
        let (model, report) = smo_train(&g, &y, SmoParams::with_c(10.0)).unwrap();
        assert!(report.converged);
        assert_eq!(svm_predict(&model, &g).unwrap(), y.to_vec());
        let sum: f64 = model.dual_coeffs.iter().sum();
        assert!(sum.abs() < 1e-8);
        assert!(model.alphas.iter().all(|&a| (0.0..=10.0).contains(&a)));
        // Margin vectors sit at |d| = 1.
        let d = svm_decision_values(&model, &g).unwrap();
        for &i in &model.support_indices {
            if model.alphas[i] < model.c {
                assert!((d[i].abs() - 1.0).abs() < 1e-3);
            }
        }
        assert!(report.objective_trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        let obj = dual_objective(&g.entries, &y, &model.alphas);
        assert!((obj - report.objective_trace.last().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn single_class_is_trivial() {
        let g = linear_gram(&[[1.0, 0.0], [0.0, 1.0]]);
        let (model, _) = smo_train(&g, &[1, 1], SmoParams::default()).unwrap();
        assert_eq!(model.n_support(), 0);
        assert_eq!(svm_predict(&model, &g).unwrap(), vec![1, 1]);
        let (model, _) = smo_train(&g, &[-1, -1], SmoParams::default()).unwrap();
        assert_eq!(svm_predict(&model, &g).unwrap(), vec![-1, -1]);
    }

    #[test]
    fn input_validation() {
        let g = linear_gram(&[[1.0, 0.0], [0.0, 1.0]]);
        assert!(smo_train(&g, &[1], SmoParams::default()).is_err());
        assert!(smo_train(&g, &[1, 0], SmoParams::default()).is_err());
        assert!(smo_train(&g, &[1, -1], SmoParams::with_c(0.0)).is_err());
        let (model, _) = smo_train(&g, &[1, -1], SmoParams::default()).unwrap();
        let bad = GramMatrix::new(DMatrix::zeros(1, 3), Provenance::Exact);
        assert!(svm_predict(&model, &bad).is_err());
    }

    #[test]
    fn sampled_gram_gets_psd_shift() {
        let mut e = DMatrix::identity(3, 3);
        e[(0, 1)] = 1.0;
        e[(1, 0)] = 1.0;
        e[(1, 2)] = 1.0;
        e[(2, 1)] = 1.0;
        let g = GramMatrix::new(e, Provenance::Sampled { shots: 10, seed: 0 });
        let (_, report) = smo_train(&g, &[1, -1, 1], SmoParams::default()).unwrap();
        assert!(report.psd_shift > 0.4);
    }
}
