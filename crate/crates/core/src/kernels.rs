//! Kerr kernels, Gram matrices and the RBF baseline.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::DataPoint;
use crate::encode::{encode_p_mode, fiducial_amplitudes, TwoModeEncoder};
use crate::error::{KerrError, Result};
use crate::fock::{FockVector, TruncationPolicy};
use crate::rng::{keyed_rng, pair_key};
use crate::specialfn::ln_factorial;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    #[serde(rename = "kerr-coherent-1mode")]
    KerrCoherent1mode,
    #[serde(rename = "kerr-coherent-2mode")]
    KerrCoherent2mode,
    #[serde(rename = "kerr-squeezed-2mode")]
    KerrSqueezed2mode,
    FidelityGeneric,
    Rbf,
}

impl KernelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::KerrCoherent1mode => "kerr-coherent-1mode",
            Self::KerrCoherent2mode => "kerr-coherent-2mode",
            Self::KerrSqueezed2mode => "kerr-squeezed-2mode",
            Self::FidelityGeneric => "fidelity-generic",
            Self::Rbf => "rbf",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelKind {
    type Err = KerrError;

    fn from_str(s: &str) -> Result<Self> {
        [
            Self::KerrCoherent1mode,
            Self::KerrCoherent2mode,
            Self::KerrSqueezed2mode,
            Self::FidelityGeneric,
            Self::Rbf,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| KerrError::InvalidInput(format!("unknown kernel kind '{s}'")))
    }
}

/// RBF width: a fixed value or resolved from the training data.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Gamma {
    #[default]
    Scale,
    Value(f64),
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Scale => f.write_str("scale"),
            Self::Value(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Gamma {
    type Err = KerrError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "scale" {
            return Ok(Self::Scale);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| KerrError::InvalidInput(format!("gamma must be 'scale' or a number, got '{s}'")))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(KerrError::InvalidInput(format!("gamma must be positive, got {v}")));
        }
        Ok(Self::Value(v))
    }
}

impl Serialize for Gamma {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Scale => s.serialize_str("scale"),
            Self::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Self::Value(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub alpha0: Complex64,
    pub r0: f64,
    pub gamma: Gamma,
    pub policy: TruncationPolicy,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, alpha0: Complex64) -> Self {
        let policy = match kind {
            KernelKind::KerrCoherent1mode => TruncationPolicy::single_mode(),
            _ => TruncationPolicy::two_mode(),
        };
        Self {
            kind,
            alpha0,
            r0: 0.0,
            gamma: Gamma::Scale,
            policy,
        }
    }

    pub fn rbf(gamma: Gamma) -> Self {
        Self {
            gamma,
            ..Self::new(KernelKind::Rbf, Complex64::new(0.0, 0.0))
        }
    }

    pub fn with_r0(mut self, r0: f64) -> Self {
        self.r0 = r0;
        self
    }

    pub fn with_policy(mut self, policy: TruncationPolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Replaces `Gamma::Scale` by its value on `points`; other kinds pass through.
    pub fn resolved(mut self, points: &[DataPoint]) -> Result<Self> {
        if self.kind == KernelKind::Rbf && self.gamma == Gamma::Scale {
            self.gamma = Gamma::Value(resolve_gamma_scale(points)?);
        }
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha0.re.is_finite() && self.alpha0.im.is_finite()) {
            return Err(KerrError::InvalidInput("alpha0 must be finite".into()));
        }
        if let Gamma::Value(g) = self.gamma {
            if !(g > 0.0) {
                return Err(KerrError::InvalidInput(format!("gamma must be positive, got {g}")));
            }
        }
        Ok(())
    }
}

/// Normalized Poisson weights `|a|^{2n}/n!` for `n <= cutoff`.
fn poisson_weights(alpha0: Complex64, cutoff: usize) -> Vec<f64> {
    let s = alpha0.norm_sqr();
    let raw: Vec<f64> = if s == 0.0 {
        (0..=cutoff).map(|n| if n == 0 { 1.0 } else { 0.0 }).collect()
    } else {
        (0..=cutoff)
            .map(|n| (n as f64 * s.ln() - ln_factorial(n) - s).exp())
            .collect()
    };
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn kerr_phase(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, -PI * theta)
}

/// `|sum_n w_n e^{-i pi (x - y) n^2}|^2` with weights normalized over the
/// truncated series, so that `k(x, x) = 1`.
pub fn kernel_1mode(x: f64, y: f64, alpha0: Complex64, cutoff: usize) -> f64 {
    let w = poisson_weights(alpha0, cutoff);
    let d = x - y;
    let s: Complex64 = w
        .iter()
        .enumerate()
        .map(|(n, wn)| wn * kerr_phase(d * (n * n) as f64))
        .sum();
    s.norm_sqr()
}

fn two_mode_series(x: &DataPoint, y: &DataPoint, p: &[f64]) -> Result<f64> {
    if x.dim() != 2 || y.dim() != 2 {
        return Err(KerrError::ShapeMismatch("two-mode kernel needs two coordinates".into()));
    }
    let (x, y) = (x.coords(), y.coords());
    let mut s = Complex64::new(0.0, 0.0);
    for (n, pn) in p.iter().enumerate() {
        for (m, pm) in p.iter().enumerate() {
            let th = TwoModeEncoder::phase(n, m, x[0], x[1]) - TwoModeEncoder::phase(n, m, y[0], y[1]);
            s += pn * pm * kerr_phase(th);
        }
    }
    Ok(s.norm_sqr())
}

/// Two-mode coherent Kerr kernel, series over `n, m <= cutoff`, normalized
/// by its value at `x = y`.
pub fn kernel_2mode_coherent(x: &DataPoint, y: &DataPoint, alpha0: Complex64, cutoff: usize) -> Result<f64> {
    two_mode_series(x, y, &poisson_weights(alpha0, cutoff))
}

/// Two-mode squeezed Kerr kernel with weights `|f_n(alpha0, r0)|^2`,
/// normalized by its value at `x = y`.
pub fn kernel_2mode_squeezed(
    x: &DataPoint,
    y: &DataPoint,
    alpha0: Complex64,
    r0: f64,
    policy: TruncationPolicy,
) -> Result<f64> {
    let f = fiducial_amplitudes(alpha0, r0, policy)?;
    let p: Vec<f64> = f.amps().iter().map(|a| a.norm_sqr()).collect();
    two_mode_series(x, y, &p)
}

/// `|<a|b>|^2`.
pub fn fidelity_kernel(a: &FockVector, b: &FockVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr())
}

pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

/// `1 / (d * v)` with `v` the mean over features of the population variance.
pub fn resolve_gamma_scale(points: &[DataPoint]) -> Result<f64> {
    let first = points
        .first()
        .ok_or_else(|| KerrError::InvalidInput("cannot resolve gamma on an empty dataset".into()))?;
    let d = first.dim();
    if points.iter().any(|p| p.dim() != d) {
        return Err(KerrError::ShapeMismatch("points differ in dimension".into()));
    }
    let n = points.len() as f64;
    let mut var_sum = 0.0;
    for k in 0..d {
        let mean = points.iter().map(|p| p.coords()[k]).sum::<f64>() / n;
        var_sum += points.iter().map(|p| (p.coords()[k] - mean).powi(2)).sum::<f64>() / n;
    }
    let var = var_sum / d as f64;
    if !(var > 0.0) {
        return Err(KerrError::Numerical("dataset variance is zero; gamma=scale is undefined".into()));
    }
    Ok(1.0 / (d as f64 * var))
}

/// Trapezoid estimate of `(1/2) int_0^2 k(y, x) dx` for the one-mode kernel.
pub fn kernel_normalization_check(y: f64, alpha0: Complex64, cutoff: usize, quadrature_n: usize) -> Result<f64> {
    if quadrature_n < 2 {
        return Err(KerrError::InvalidInput("quadrature needs at least 2 points".into()));
    }
    let h = 2.0 / (quadrature_n - 1) as f64;
    let sum: f64 = (0..quadrature_n)
        .map(|i| {
            let w = if i == 0 || i == quadrature_n - 1 { 0.5 } else { 1.0 };
            w * kernel_1mode(y, i as f64 * h, alpha0, cutoff)
        })
        .sum();
    Ok(0.5 * h * sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum Provenance {
    Exact,
    Sampled { shots: u64, seed: u64 },
}

/// Kernel matrix, square (training) or rectangular (test rows by training columns).
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub provenance: Provenance,
}

impl GramMatrix {
    pub fn new(entries: DMatrix<f64>, provenance: Provenance) -> Self {
        Self { entries, provenance }
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Smallest eigenvalue of the symmetric part.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(KerrError::ShapeMismatch("eigenvalues need a square matrix".into()));
        }
        let sym = (&self.entries + self.entries.transpose()) * 0.5;
        Ok(sym.symmetric_eigenvalues().min())
    }

    /// Row-major CSV without header, shortest round-trip decimals.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for i in 0..self.nrows() {
            w.write_record(self.entries.row(i).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, provenance: Provenance) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| KerrError::InvalidInput(format!("{s}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(KerrError::ShapeMismatch("ragged Gram CSV".into()));
        }
        let entries = DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
        Ok(Self::new(entries, provenance))
    }
}

/// Per-point vectors whose overlap modulus squared is the kernel.
enum Features {
    Overlap { dim: usize, data: Vec<Complex64> },
    Rbf { gamma: f64, points: Vec<Vec<f64>> },
}

impl Features {
    fn build(points: &[DataPoint], spec: &KernelSpec) -> Result<Self> {
        spec.validate()?;
        let require = |p: usize| -> Result<()> {
            match points.iter().find(|x| x.dim() != p) {
                Some(x) => Err(KerrError::ShapeMismatch(format!(
                    "{} kernel needs {p} coordinates, got {}",
                    spec.kind,
                    x.dim()
                ))),
                None => Ok(()),
            }
        };
        let (dim, data): (usize, Vec<Complex64>) = match spec.kind {
            KernelKind::KerrCoherent1mode => {
                require(1)?;
                let w = poisson_weights(spec.alpha0, spec.policy.cutoff);
                let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
                let data = points
                    .par_iter()
                    .flat_map_iter(|p| {
                        let x = p.coords()[0];
                        sw.iter()
                            .enumerate()
                            .map(move |(n, s)| s * kerr_phase(x * (n * n) as f64))
                            .collect::<Vec<_>>()
                    })
                    .collect();
                (sw.len(), data)
            }
            KernelKind::KerrCoherent2mode | KernelKind::KerrSqueezed2mode => {
                require(2)?;
                let r0 = if spec.kind == KernelKind::KerrCoherent2mode { 0.0 } else { spec.r0 };
                let enc = TwoModeEncoder::new(spec.alpha0, r0, spec.policy)?;
                // Only |f_n| matters for the kernel; drop the fiducial phases.
                let mags: Vec<f64> = enc.fiducial().iter().map(|a| a.norm()).collect();
                let d = mags.len();
                let data = points
                    .par_iter()
                    .flat_map_iter(|p| {
                        let c = p.coords();
                        let (x1, x2) = (c[0], c[1]);
                        let mags = &mags;
                        (0..d * d)
                            .map(move |i| {
                                let (n, m) = (i / d, i % d);
                                mags[n] * mags[m] * kerr_phase(TwoModeEncoder::phase(n, m, x1, x2))
                            })
                            .collect::<Vec<_>>()
                    })
                    .collect();
                (d * d, data)
            }
            KernelKind::FidelityGeneric => {
                let p = points.first().map_or(1, DataPoint::dim);
                require(p)?;
                let states = points
                    .par_iter()
                    .map(|x| encode_p_mode(x, spec.alpha0, spec.r0, spec.policy).map(FockVector::into_amps))
                    .collect::<Result<Vec<_>>>()?;
                let dim = spec.policy.dim().pow(p as u32);
                (dim, states.into_iter().flatten().collect())
            }
            KernelKind::Rbf => {
                let gamma = match spec.gamma {
                    Gamma::Value(g) => g,
                    Gamma::Scale => {
                        return Err(KerrError::InvalidInput(
                            "gamma=scale must be resolved on the training set first".into(),
                        ))
                    }
                };
                let d = points.first().map_or(0, DataPoint::dim);
                require(d)?;
                return Ok(Self::Rbf {
                    gamma,
                    points: points.iter().map(|p| p.coords().to_vec()).collect(),
                });
            }
        };
        Ok(Self::Overlap { dim, data })
    }

    fn len(&self) -> usize {
        match self {
            Self::Overlap { dim, data } => data.len() / dim,
            Self::Rbf { points, .. } => points.len(),
        }
    }

    fn kernel(&self, other: &Self, i: usize, j: usize) -> f64 {
        match (self, other) {
            (Self::Overlap { dim, data: a }, Self::Overlap { data: b, .. }) => {
                let u = &a[i * dim..(i + 1) * dim];
                let v = &b[j * dim..(j + 1) * dim];
                let (mut re, mut im) = (0.0, 0.0);
                for (p, q) in u.iter().zip(v) {
                    re += p.re * q.re + p.im * q.im;
                    im += p.re * q.im - p.im * q.re;
                }
                (re * re + im * im).min(1.0)
            }
            (Self::Rbf { gamma, points: a }, Self::Rbf { points: b, .. }) => rbf_kernel(&a[i], &b[j], *gamma),
            _ => unreachable!("feature kinds always match"),
        }
    }
}

/// Exact square Gram matrix. `Gamma::Scale` is resolved on `points`.
pub fn gram_exact(points: &[DataPoint], spec: &KernelSpec) -> Result<GramMatrix> {
    if points.is_empty() {
        return Err(KerrError::InvalidInput("Gram matrix of an empty point set".into()));
    }
    let spec = spec.resolved(points)?;
    let f = Features::build(points, &spec)?;
    let n = f.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| if i == j { 1.0 } else { f.kernel(&f, i, j) }).collect())
        .collect();
    let mut entries = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (off, v) in row.iter().enumerate() {
            entries[(i, i + off)] = *v;
            entries[(i + off, i)] = *v;
        }
    }
    Ok(GramMatrix::new(entries, Provenance::Exact))
}

/// Exact cross-kernel matrix with `rows[i]` against `cols[j]`. An RBF spec
/// must carry a resolved gamma.
pub fn gram_cross(rows: &[DataPoint], cols: &[DataPoint], spec: &KernelSpec) -> Result<GramMatrix> {
    let fr = Features::build(rows, spec)?;
    let fc = Features::build(cols, spec)?;
    let (n, m) = (fr.len(), fc.len());
    let data: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..m).map(|j| fr.kernel(&fc, i, j)).collect())
        .collect();
    Ok(GramMatrix::new(
        DMatrix::from_fn(n, m, |i, j| data[i][j]),
        Provenance::Exact,
    ))
}

/// Shot-sampled Gram matrix: each entry `i <= j` is `Binomial(shots, k_ij) / shots`
/// drawn from the stream keyed by `(seed, i, j)`.
pub fn gram_sampled(points: &[DataPoint], spec: &KernelSpec, shots: u64, seed: u64) -> Result<GramMatrix> {
    if shots == 0 {
        return Err(KerrError::InvalidInput("shots must be >= 1".into()));
    }
    let exact = gram_exact(points, spec)?;
    Ok(sample_gram(&exact, shots, seed))
}

/// Shot-samples an exact square Gram matrix.
pub fn sample_gram(exact: &GramMatrix, shots: u64, seed: u64) -> GramMatrix {
    let n = exact.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| {
                    let p = exact.get(i, j).clamp(0.0, 1.0);
                    let mut rng = keyed_rng(seed, pair_key(i, j));
                    let hits = Binomial::new(shots, p).expect("p in [0,1]").sample(&mut rng);
                    hits as f64 / shots as f64
                })
                .collect()
        })
        .collect();
    let mut entries = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (off, v) in row.iter().enumerate() {
            entries[(i, i + off)] = *v;
            entries[(i + off, i)] = *v;
        }
    }
    GramMatrix::new(entries, Provenance::Sampled { shots, seed })
}

/// Kernel between two points under `spec` (Gamma must be resolved for RBF).
pub fn kernel_value(x: &DataPoint, y: &DataPoint, spec: &KernelSpec) -> Result<f64> {
    Ok(gram_cross(std::slice::from_ref(x), std::slice::from_ref(y), spec)?.get(0, 0))
}
