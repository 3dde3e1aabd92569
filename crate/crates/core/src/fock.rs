//! Truncated Fock-space amplitudes and displacement-operator matrix elements.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KerrError, Result};
use crate::specialfn::{ln_factorial, laguerre_unchecked, MAX_ORDER};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Number-basis truncation: levels `0..=cutoff` per mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub cutoff: usize,
    pub tail_tol: f64,
}

impl TruncationPolicy {
    pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

    pub fn new(cutoff: usize) -> Self {
        Self {
            cutoff,
            tail_tol: Self::DEFAULT_TAIL_TOL,
        }
    }

    pub fn with_tail_tol(mut self, tail_tol: f64) -> Self {
        self.tail_tol = tail_tol;
        self
    }

    /// Cutoff 30, used for single-mode analytic checks.
    pub fn single_mode() -> Self {
        Self::new(30)
    }

    /// Cutoff 10, the two-mode experimental setting. The Poisson tail of a
    /// unit-amplitude coherent state above n = 10 is 1.004e-8, so the tail
    /// tolerance is widened to 1e-7 here.
    pub fn two_mode() -> Self {
        Self::new(10).with_tail_tol(1e-7)
    }

    /// Levels per mode.
    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.cutoff < 1 {
            return Err(KerrError::InvalidInput("cutoff must be >= 1".into()));
        }
        if self.cutoff > MAX_ORDER {
            return Err(KerrError::CutoffExceeded {
                order: self.cutoff,
                max: MAX_ORDER,
            });
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(KerrError::InvalidInput(format!(
                "tail_tol must lie in (0, 1), got {}",
                self.tail_tol
            )));
        }
        Ok(())
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self::two_mode()
    }
}

/// Amplitudes over a truncated multi-mode number basis, lexicographic in
/// `(n_1, ..., n_P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    num_modes: usize,
    cutoff: usize,
    amps: Vec<Complex64>,
}

impl FockVector {
    pub fn new(num_modes: usize, cutoff: usize, amps: Vec<Complex64>) -> Result<Self> {
        let expected = (cutoff + 1).pow(num_modes as u32);
        if num_modes == 0 || amps.len() != expected {
            return Err(KerrError::ShapeMismatch(format!(
                "{} amplitudes for {num_modes} modes at cutoff {cutoff} (expected {expected})",
                amps.len()
            )));
        }
        Ok(Self {
            num_modes,
            cutoff,
            amps,
        })
    }

    pub fn vacuum(num_modes: usize, cutoff: usize) -> Self {
        let mut amps = vec![ZERO; (cutoff + 1).pow(num_modes as u32)];
        amps[0] = ONE;
        Self {
            num_modes,
            cutoff,
            amps,
        }
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim_per_mode(&self) -> usize {
        self.cutoff + 1
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amps(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= n);
        }
    }

    /// Amplitude at occupation vector `occ`.
    pub fn get(&self, occ: &[usize]) -> Option<Complex64> {
        if occ.len() != self.num_modes || occ.iter().any(|&n| n > self.cutoff) {
            return None;
        }
        let d = self.dim_per_mode();
        let idx = occ.iter().fold(0, |acc, &n| acc * d + n);
        Some(self.amps[idx])
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.num_modes != other.num_modes || self.cutoff != other.cutoff {
            return Err(KerrError::ShapeMismatch(format!(
                "({} modes, cutoff {}) vs ({} modes, cutoff {})",
                self.num_modes, self.cutoff, other.num_modes, other.cutoff
            )));
        }
        Ok(())
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_compatible(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Tensor product `self ⊗ other` (same cutoff).
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.cutoff != other.cutoff {
            return Err(KerrError::ShapeMismatch("tensor of differing cutoffs".into()));
        }
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        Ok(Self {
            num_modes: self.num_modes + other.num_modes,
            cutoff: self.cutoff,
            amps,
        })
    }

    /// Two-mode amplitudes as a matrix indexed `[n, m]`.
    pub fn as_two_mode_matrix(&self) -> Result<DMatrix<Complex64>> {
        if self.num_modes != 2 {
            return Err(KerrError::ShapeMismatch(format!(
                "expected a two-mode state, got {} modes",
                self.num_modes
            )));
        }
        let d = self.dim_per_mode();
        Ok(DMatrix::from_fn(d, d, |n, m| self.amps[n * d + m]))
    }

    /// Mean photon number of a single-mode state.
    pub fn mean_photon_number(&self) -> Result<f64> {
        self.require_single_mode()?;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(n, a)| n as f64 * a.norm_sqr())
            .sum())
    }

    /// `<a>` for a single-mode state, within the truncated space.
    pub fn mean_amplitude(&self) -> Result<Complex64> {
        self.require_single_mode()?;
        Ok(self
            .amps
            .windows(2)
            .enumerate()
            .map(|(n, w)| w[0].conj() * w[1] * ((n + 1) as f64).sqrt())
            .sum())
    }

    fn require_single_mode(&self) -> Result<()> {
        if self.num_modes != 1 {
            return Err(KerrError::ShapeMismatch(format!(
                "expected a single-mode state, got {} modes",
                self.num_modes
            )));
        }
        Ok(())
    }
}

/// Poisson mass above `cutoff` for mean `mean`, summed directly.
fn poisson_tail(mean: f64, cutoff: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let mut tail = 0.0;
    for n in cutoff + 1..=MAX_ORDER {
        let term = (-mean + n as f64 * mean.ln() - ln_factorial(n)).exp();
        tail += term;
        if term < 1e-30 * tail.max(1e-300) && n as f64 > mean {
            break;
        }
    }
    tail
}

/// Truncated coherent state `|alpha0>`, renormalized after truncation.
pub fn coherent_amplitudes(alpha0: Complex64, policy: TruncationPolicy) -> Result<FockVector> {
    policy.validate()?;
    let mean = alpha0.norm_sqr();
    if mean > policy.cutoff as f64 / 3.0 {
        return Err(KerrError::Truncation(format!(
            "|alpha0|^2 = {mean} exceeds cutoff/3 = {}",
            policy.cutoff as f64 / 3.0
        )));
    }
    let tail = poisson_tail(mean, policy.cutoff);
    if tail > policy.tail_tol {
        return Err(KerrError::Truncation(format!(
            "Poisson tail {tail:.3e} above cutoff {} exceeds tail_tol {:.1e}",
            policy.cutoff, policy.tail_tol
        )));
    }
    let d = policy.dim();
    let mut amps = vec![ZERO; d];
    if mean == 0.0 {
        amps[0] = ONE;
    } else {
        let ln_abs = alpha0.norm().ln();
        let phase = alpha0.arg();
        for (n, a) in amps.iter_mut().enumerate() {
            let nf = n as f64;
            let mag = (-0.5 * mean + nf * ln_abs - 0.5 * ln_factorial(n)).exp();
            *a = Complex64::from_polar(mag, nf * phase);
        }
    }
    let mut v = FockVector::new(1, policy.cutoff, amps)?;
    v.normalize();
    Ok(v)
}

/// Squeezing below this threshold is treated as the coherent limit.
pub const SQUEEZE_EPS: f64 = 1e-8;

/// Truncated displaced squeezed state `D(alpha0) S(r0) |0>` (real squeezing
/// axis), renormalized after truncation.
///
/// The amplitudes are `(n! cosh r)^{-1/2} lambda^{n/2} exp(-|a|^2/2 - lambda a*^2) H_n(z)`
/// with `lambda = tanh(r)/2` and `z = a/(2 sqrt(lambda)) + sqrt(lambda) a*`.
/// The product `lambda^{n/2} H_n(z) / sqrt(n!)` is generated by its own
/// recurrence, which stays finite as `r -> 0`.
pub fn squeezed_amplitudes(
    alpha0: Complex64,
    r0: f64,
    policy: TruncationPolicy,
) -> Result<FockVector> {
    policy.validate()?;
    if !(r0 >= 0.0) {
        return Err(KerrError::Domain(format!(
            "squeezing r0 must be >= 0, got {r0}"
        )));
    }
    if r0 < SQUEEZE_EPS {
        return coherent_amplitudes(alpha0, policy);
    }
    let mean = alpha0.norm_sqr() + r0.sinh().powi(2);
    if mean > policy.cutoff as f64 / 3.0 {
        return Err(KerrError::Truncation(format!(
            "mean photon number {mean} exceeds cutoff/3 = {}",
            policy.cutoff as f64 / 3.0
        )));
    }
    let lambda = 0.5 * r0.tanh();
    // 2 z sqrt(lambda)
    let two_z_sqrt_l = alpha0 + 2.0 * lambda * alpha0.conj();
    let prefactor =
        (-0.5 * alpha0.norm_sqr() - lambda * alpha0.conj() * alpha0.conj()).exp() / r0.cosh().sqrt();
    let d = policy.dim();
    let mut scaled = Vec::with_capacity(d);
    scaled.push(ONE);
    if d > 1 {
        scaled.push(two_z_sqrt_l);
    }
    for n in 1..d - 1 {
        let nf = n as f64;
        let next = (two_z_sqrt_l * scaled[n] - 2.0 * lambda * nf.sqrt() * scaled[n - 1])
            / (nf + 1.0).sqrt();
        scaled.push(next);
    }
    let amps: Vec<Complex64> = scaled.into_iter().map(|s| prefactor * s).collect();
    let mut v = FockVector::new(1, policy.cutoff, amps)?;
    let lost = 1.0 - v.norm_sqr();
    if lost > policy.tail_tol {
        return Err(KerrError::Truncation(format!(
            "squeezed-state norm deficit {lost:.3e} exceeds tail_tol {:.1e}",
            policy.tail_tol
        )));
    }
    v.normalize();
    Ok(v)
}

/// Which extension of the `n >= m` displacement formula fills the upper
/// triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisplacementElements {
    /// `d_nm(a) = conj(d_mn(-a))` for `n < m`: the matrix of the unitary `D(a)`.
    #[default]
    Unitary,
    /// `d_nm = d_mn` for `n < m`: the `n >= m` formula mirrored across the
    /// diagonal. Not unitary; this is the convention under which the reference
    /// two-mode label tables are reproduced.
    Mirrored,
}

/// Matrix elements `<n|D(alpha)|m>` on the truncated space.
#[derive(Debug, Clone)]
pub struct DisplacementMatrix {
    pub alpha: Complex64,
    pub entries: DMatrix<Complex64>,
}

impl DisplacementMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `D |psi>` for a single-mode vector.
    pub fn apply(&self, amps: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim();
        (0..d)
            .map(|n| (0..d).map(|m| self.entries[(n, m)] * amps[m]).sum())
            .collect()
    }
}

/// `<n|D(alpha)|m>` for `n, m <= cutoff` using the Laguerre closed form.
pub fn displacement_matrix(alpha: Complex64, policy: TruncationPolicy) -> Result<DisplacementMatrix> {
    displacement_matrix_with(alpha, policy, DisplacementElements::Unitary)
}

pub fn displacement_matrix_with(
    alpha: Complex64,
    policy: TruncationPolicy,
    elements: DisplacementElements,
) -> Result<DisplacementMatrix> {
    policy.validate()?;
    let x = alpha.norm_sqr();
    if !(x < policy.cutoff as f64) {
        return Err(KerrError::Truncation(format!(
            "|alpha|^2 = {x} must be below the cutoff {}",
            policy.cutoff
        )));
    }
    let d = policy.dim();
    if x == 0.0 {
        return Ok(DisplacementMatrix {
            alpha,
            entries: DMatrix::identity(d, d),
        });
    }
    let ln_abs = alpha.norm().ln();
    let phase = alpha.arg();
    // Lower triangle n >= m with k = n - m:
    // sqrt(m!/n!) e^{-x/2} alpha^k L_m^k(x)
    let lower = |n: usize, m: usize, ph: f64| -> Complex64 {
        let k = n - m;
        let mag = (0.5 * (ln_factorial(m) - ln_factorial(n)) - 0.5 * x + k as f64 * ln_abs).exp();
        Complex64::from_polar(mag * laguerre_unchecked(m, k as f64, x), k as f64 * ph)
    };
    let mut entries = DMatrix::from_element(d, d, ZERO);
    for n in 0..d {
        for m in 0..=n {
            entries[(n, m)] = lower(n, m, phase);
        }
    }
    match elements {
        DisplacementElements::Unitary => {
            // conj(d_mn(-alpha)); -alpha has phase + pi.
            for n in 0..d {
                for m in n + 1..d {
                    entries[(n, m)] = lower(m, n, phase + std::f64::consts::PI).conj();
                }
            }
        }
        DisplacementElements::Mirrored => {
            for n in 0..d {
                for m in n + 1..d {
                    entries[(n, m)] = entries[(m, n)];
                }
            }
        }
    }
    Ok(DisplacementMatrix { alpha, entries })
}

/// Truncated annihilation operator, `a|n> = sqrt(n)|n-1>`.
pub fn annihilation_matrix(cutoff: usize) -> DMatrix<Complex64> {
    let d = cutoff + 1;
    DMatrix::from_fn(d, d, |i, j| {
        if j == i + 1 {
            Complex64::new((j as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    })
}
