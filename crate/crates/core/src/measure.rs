//! Displaced-parity measurements, decision functions and data labelling.

use std::io::{Read, Write};
use std::sync::atomic::{AtomicBool, Ordering};

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataPoint;
use crate::encode::{encode_one_mode, TwoModeEncoder};
use crate::error::{KerrError, Result};
use crate::fock::{displacement_matrix, displacement_matrix_with, DisplacementElements, TruncationPolicy};
use crate::rng::keyed_rng;

/// Displacement coefficients for the two parity measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementPair {
    pub mu: Complex64,
    pub nu: Complex64,
}

impl DisplacementPair {
    pub fn new(mu: Complex64, nu: Complex64) -> Self {
        Self { mu, nu }
    }
}

/// JSON form `{"name": ..., "mu": [re, im], "nu": [re, im]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedDisplacement {
    pub name: String,
    pub mu: [f64; 2],
    pub nu: [f64; 2],
}

impl NamedDisplacement {
    pub fn pair(&self) -> DisplacementPair {
        DisplacementPair::new(
            Complex64::new(self.mu[0], self.mu[1]),
            Complex64::new(self.nu[0], self.nu[1]),
        )
    }

    pub fn from_pair(name: impl Into<String>, p: &DisplacementPair) -> Self {
        Self {
            name: name.into(),
            mu: [p.mu.re, p.mu.im],
            nu: [p.nu.re, p.nu.im],
        }
    }
}

const REFERENCE_SETS: &str = include_str!("../fixtures/munu.json");

/// The four bundled displacement sets `munu1..munu4`.
pub fn reference_displacements() -> Vec<NamedDisplacement> {
    serde_json::from_str(REFERENCE_SETS).expect("bundled fixture is valid JSON")
}

pub fn reference_displacement(name: &str) -> Option<NamedDisplacement> {
    reference_displacements().into_iter().find(|d| d.name == name)
}

/// Reads either a single displacement object or an array of them.
pub fn read_displacements<R: Read>(input: R) -> Result<Vec<NamedDisplacement>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(NamedDisplacement),
        Many(Vec<NamedDisplacement>),
    }
    Ok(match serde_json::from_reader(input)? {
        OneOrMany::One(d) => vec![d],
        OneOrMany::Many(v) => v,
    })
}

pub fn write_displacements<W: Write>(sets: &[NamedDisplacement], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, sets)?;
    Ok(())
}

/// How the two-mode labelling function is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelConvention {
    /// `sum (-1)^{n+m} |<n,m| D(mu,nu) |Phi>|^2` with the displacement matrix
    /// elements mirrored across the diagonal. Reproduces the reference label
    /// tables.
    #[default]
    Reference,
    /// The two-mode displaced parity `<Phi| D Pi D^dag |Phi>` with unitary
    /// displacements, proportional to the Wigner function at `(mu, nu)`.
    Wigner,
}

static WARNED_LARGE: AtomicBool = AtomicBool::new(false);

/// Warns once per process.
fn warn_large_displacement(alpha: Complex64, policy: &TruncationPolicy) {
    if alpha.norm() > (policy.cutoff as f64).sqrt() / 2.0 && !WARNED_LARGE.swap(true, Ordering::Relaxed) {
        warn!(
            "|displacement| = {:.3} exceeds sqrt(cutoff)/2 = {:.3}; truncation effects may be visible",
            alpha.norm(),
            (policy.cutoff as f64).sqrt() / 2.0
        );
    }
}

fn parity_sum(amps: impl Iterator<Item = (usize, Complex64)>) -> f64 {
    amps.map(|(k, a)| if k % 2 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
        .sum()
}

/// One-mode decision function `sum_k (-1)^k |<k|D(mu)^dag|phi(x)>|^2`, the
/// Wigner function of the encoded state at `mu` scaled by `pi/2`. Clamped to `[-1, 1]`.
pub fn decision_1mode(mu: Complex64, x: f64, alpha0: Complex64, policy: TruncationPolicy) -> Result<f64> {
    warn_large_displacement(mu, &policy);
    let psi = encode_one_mode(x, alpha0, policy)?;
    let dm = displacement_matrix(-mu, policy)?;
    let shifted = dm.apply(psi.amps());
    Ok(parity_sum(shifted.into_iter().enumerate()).clamp(-1.0, 1.0))
}

/// Precomputed two-mode decision function for a fixed displacement pair.
#[derive(Debug, Clone)]
pub struct TwoModeDecision {
    encoder: TwoModeEncoder,
    left: DMatrix<Complex64>,
    right_t: DMatrix<Complex64>,
}

impl TwoModeDecision {
    pub fn new(
        pair: DisplacementPair,
        alpha0: Complex64,
        r0: f64,
        policy: TruncationPolicy,
        convention: LabelConvention,
    ) -> Result<Self> {
        warn_large_displacement(pair.mu, &policy);
        warn_large_displacement(pair.nu, &policy);
        let encoder = TwoModeEncoder::new(alpha0, r0, policy)?;
        let (left, right) = match convention {
            LabelConvention::Wigner => (
                displacement_matrix(-pair.mu, policy)?.entries,
                displacement_matrix(-pair.nu, policy)?.entries,
            ),
            LabelConvention::Reference => (
                displacement_matrix_with(pair.mu, policy, DisplacementElements::Mirrored)?.entries,
                displacement_matrix_with(pair.nu, policy, DisplacementElements::Mirrored)?.entries,
            ),
        };
        Ok(Self {
            encoder,
            left,
            right_t: right.transpose(),
        })
    }

    /// Value before clamping.
    pub fn raw(&self, x1: f64, x2: f64) -> f64 {
        let a = self.encoder.amplitude_matrix(x1, x2);
        let b = &self.left * a * &self.right_t;
        let d = b.nrows();
        let mut acc = 0.0;
        for m in 0..d {
            for n in 0..d {
                let p = b[(n, m)].norm_sqr();
                acc += if (n + m) % 2 == 0 { p } else { -p };
            }
        }
        acc
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        self.raw(x1, x2).clamp(-1.0, 1.0)
    }

    pub fn label(&self, x1: f64, x2: f64) -> i8 {
        sign_label(self.eval(x1, x2))
    }
}

/// Two-mode displaced parity (Wigner convention), clamped to `[-1, 1]`.
pub fn decision_2mode(
    pair: DisplacementPair,
    x: &DataPoint,
    alpha0: Complex64,
    r0: f64,
    policy: TruncationPolicy,
) -> Result<f64> {
    let c = two_coords(x)?;
    Ok(TwoModeDecision::new(pair, alpha0, r0, policy, LabelConvention::Wigner)?.eval(c.0, c.1))
}

fn two_coords(x: &DataPoint) -> Result<(f64, f64)> {
    match x.coords() {
        [a, b] => Ok((*a, *b)),
        other => Err(KerrError::ShapeMismatch(format!(
            "expected two coordinates, got {}",
            other.len()
        ))),
    }
}

/// `+1` for non-negative values, `-1` otherwise.
pub fn sign_label(d: f64) -> i8 {
    if d >= 0.0 {
        1
    } else {
        -1
    }
}

pub fn label_point(
    x: &DataPoint,
    pair: DisplacementPair,
    alpha0: Complex64,
    r0: f64,
    policy: TruncationPolicy,
    convention: LabelConvention,
) -> Result<i8> {
    let c = two_coords(x)?;
    Ok(TwoModeDecision::new(pair, alpha0, r0, policy, convention)?.label(c.0, c.1))
}

/// Labels many points with one precomputed decision function.
pub fn label_points(
    points: &[DataPoint],
    pair: DisplacementPair,
    alpha0: Complex64,
    r0: f64,
    policy: TruncationPolicy,
    convention: LabelConvention,
) -> Result<Vec<i8>> {
    let dec = TwoModeDecision::new(pair, alpha0, r0, policy, convention)?;
    points
        .par_iter()
        .map(|p| two_coords(p).map(|(a, b)| dec.label(a, b)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParitySample {
    pub empirical_mean: f64,
    pub outcomes: Vec<i8>,
}

/// `shots` parity outcomes with `P(+1) = (1 + d)/2`.
pub fn sample_parity(d: f64, shots: usize, seed: u64) -> Result<ParitySample> {
    if !(d.abs() <= 1.0 + 1e-9) {
        return Err(KerrError::Domain(format!("decision value {d} outside [-1, 1]")));
    }
    if shots == 0 {
        return Err(KerrError::InvalidInput("shots must be >= 1".into()));
    }
    let p = ((1.0 + d) / 2.0).clamp(0.0, 1.0);
    let mut rng = keyed_rng(seed, 0);
    let outcomes: Vec<i8> = (0..shots)
        .map(|_| if rng.random_bool(p) { 1 } else { -1 })
        .collect();
    let empirical_mean = outcomes.iter().map(|&y| y as f64).sum::<f64>() / shots as f64;
    Ok(ParitySample {
        empirical_mean,
        outcomes,
    })
}

/// Random displacement pairs with i.i.d. `N(0, sigma)` real and imaginary
/// parts, resampled until `|mu|^2 < max_abs2` and `|nu|^2 < max_abs2`.
pub fn sample_displacements(sigma: f64, count: usize, max_abs2: f64, seed: u64) -> Result<Vec<DisplacementPair>> {
    if !(sigma > 0.0) {
        return Err(KerrError::InvalidInput(format!("sigma must be positive, got {sigma}")));
    }
    if !(max_abs2 > 0.0) {
        return Err(KerrError::InvalidInput(format!("max_abs2 must be positive, got {max_abs2}")));
    }
    let normal = Normal::new(0.0, sigma.sqrt()).map_err(|e| KerrError::InvalidInput(e.to_string()))?;
    Ok((0..count)
        .map(|i| {
            let mut rng = keyed_rng(seed, i as u64);
            loop {
                let mut z = || Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
                let (mu, nu) = (z(), z());
                if mu.norm_sqr() < max_abs2 && nu.norm_sqr() < max_abs2 {
                    break DisplacementPair::new(mu, nu);
                }
            }
        })
        .collect())
}

/// `sign(cos(pi x))`, with the tie at `x = 1/2` sent to `+1`.
pub fn true_label_1mode(x: f64) -> i8 {
    if x <= 0.5 {
        1
    } else {
        -1
    }
}
