//! Kerr-phase data encodings.
//!
//! A data point `x` is written onto a fiducial product state through phases
//! `exp(-i pi phi(x) . g(n))` that are diagonal in the number basis.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::data::DataPoint;
use crate::density::DensityMatrix;
use crate::error::{KerrError, Result};
use crate::fock::{coherent_amplitudes, squeezed_amplitudes, FockVector, TruncationPolicy};

pub const MAX_MODES: usize = 3;

/// Phase conventions for the multi-mode encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KerrPhaseSpec {
    /// Two modes, phase `n^2 x1 + m^2 x2 + 2 n m x1 x2`.
    Experimental,
    /// `P` modes with `phi_k = x_k^2` on `n_k^2` and
    /// `phi_jk = (1 - x_j)(1 - x_k)` on `2 n_j n_k` for every pair `j < k`.
    General { num_modes: usize },
}

impl KerrPhaseSpec {
    pub fn num_modes(&self) -> usize {
        match self {
            Self::Experimental => 2,
            Self::General { num_modes } => *num_modes,
        }
    }

    /// Number of feature components `K = P(P+1)/2`.
    pub fn num_features(&self) -> usize {
        let p = self.num_modes();
        p * (p + 1) / 2
    }

    fn pairs(p: usize) -> impl Iterator<Item = (usize, usize)> {
        (0..p).flat_map(move |j| (j + 1..p).map(move |k| (j, k)))
    }

    pub fn feature_map(&self, x: &[f64]) -> Result<Vec<f64>> {
        let p = self.num_modes();
        if x.len() != p {
            return Err(KerrError::ShapeMismatch(format!(
                "{} coordinates for a {p}-mode encoding",
                x.len()
            )));
        }
        Ok(match self {
            Self::Experimental => vec![x[0], x[1], x[0] * x[1]],
            Self::General { .. } => x
                .iter()
                .map(|v| v * v)
                .chain(Self::pairs(p).map(|(j, k)| (1.0 - x[j]) * (1.0 - x[k])))
                .collect(),
        })
    }

    pub fn generator_eval(&self, occ: &[usize]) -> Vec<f64> {
        let p = self.num_modes();
        occ.iter()
            .map(|&n| (n * n) as f64)
            .chain(Self::pairs(p).map(|(j, k)| 2.0 * (occ[j] * occ[k]) as f64))
            .collect()
    }

    /// `phi(x) . g(n)`.
    pub fn phase(&self, phi: &[f64], occ: &[usize]) -> f64 {
        self.generator_eval(occ)
            .iter()
            .zip(phi)
            .map(|(g, f)| g * f)
            .sum()
    }
}

/// Fiducial single-mode amplitudes: coherent when `r0 == 0`, displaced
/// squeezed otherwise.
pub fn fiducial_amplitudes(alpha0: Complex64, r0: f64, policy: TruncationPolicy) -> Result<FockVector> {
    if r0 == 0.0 {
        coherent_amplitudes(alpha0, policy)
    } else {
        squeezed_amplitudes(alpha0, r0, policy)
    }
}

fn kerr_phase(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, -PI * theta)
}

/// `exp(-i pi x n^2) |alpha0>`. Any finite `x` is accepted; the map has period 2.
pub fn encode_one_mode(x: f64, alpha0: Complex64, policy: TruncationPolicy) -> Result<FockVector> {
    if !x.is_finite() {
        return Err(KerrError::Domain(format!("x = {x} is not finite")));
    }
    let base = coherent_amplitudes(alpha0, policy)?;
    let amps = base
        .amps()
        .iter()
        .enumerate()
        .map(|(n, a)| a * kerr_phase(x * (n * n) as f64))
        .collect();
    FockVector::new(1, policy.cutoff, amps)
}

/// Precomputed fiducial weights for encoding many two-mode points.
#[derive(Debug, Clone)]
pub struct TwoModeEncoder {
    fiducial: Vec<Complex64>,
    cutoff: usize,
}

impl TwoModeEncoder {
    pub fn new(alpha0: Complex64, r0: f64, policy: TruncationPolicy) -> Result<Self> {
        Ok(Self {
            fiducial: fiducial_amplitudes(alpha0, r0, policy)?.into_amps(),
            cutoff: policy.cutoff,
        })
    }

    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }

    pub fn fiducial(&self) -> &[Complex64] {
        &self.fiducial
    }

    pub fn phase(n: usize, m: usize, x1: f64, x2: f64) -> f64 {
        let (n, m) = (n as f64, m as f64);
        n * n * x1 + m * m * x2 + 2.0 * n * m * x1 * x2
    }

    /// Amplitudes in row-major `(n, m)` order.
    pub fn amplitudes(&self, x1: f64, x2: f64) -> Vec<Complex64> {
        let d = self.dim();
        let f = &self.fiducial;
        let mut out = Vec::with_capacity(d * d);
        for n in 0..d {
            for m in 0..d {
                out.push(f[n] * f[m] * kerr_phase(Self::phase(n, m, x1, x2)));
            }
        }
        out
    }

    pub fn amplitude_matrix(&self, x1: f64, x2: f64) -> DMatrix<Complex64> {
        let d = self.dim();
        let a = self.amplitudes(x1, x2);
        DMatrix::from_fn(d, d, |n, m| a[n * d + m])
    }

    pub fn encode(&self, x1: f64, x2: f64) -> FockVector {
        FockVector::new(2, self.cutoff, self.amplitudes(x1, x2)).expect("shape is fixed by construction")
    }
}

fn require_modes(x: &DataPoint, p: usize) -> Result<()> {
    if x.dim() != p {
        return Err(KerrError::ShapeMismatch(format!(
            "expected {p} coordinates, got {}",
            x.dim()
        )));
    }
    Ok(())
}

/// Two-mode state under the experimental phase convention.
pub fn encode_two_mode(
    x: &DataPoint,
    alpha0: Complex64,
    r0: f64,
    policy: TruncationPolicy,
) -> Result<FockVector> {
    require_modes(x, 2)?;
    let c = x.coords();
    Ok(TwoModeEncoder::new(alpha0, r0, policy)?.encode(c[0], c[1]))
}

/// `P`-mode state under the general feature map, `P <= 3`.
pub fn encode_p_mode(
    x: &DataPoint,
    alpha0: Complex64,
    r0: f64,
    policy: TruncationPolicy,
) -> Result<FockVector> {
    let p = x.dim();
    if p > MAX_MODES {
        return Err(KerrError::Unsupported(format!(
            "{p} modes requested, at most {MAX_MODES} supported"
        )));
    }
    let spec = KerrPhaseSpec::General { num_modes: p };
    let phi = spec.feature_map(x.coords())?;
    let f = fiducial_amplitudes(alpha0, r0, policy)?.into_amps();
    let d = policy.dim();
    let total = d.pow(p as u32);
    let mut occ = vec![0usize; p];
    let mut amps = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rem = idx;
        for slot in occ.iter_mut().rev() {
            *slot = rem % d;
            rem /= d;
        }
        let weight: Complex64 = occ.iter().map(|&n| f[n]).product();
        amps.push(weight * kerr_phase(spec.phase(&phi, &occ)));
    }
    FockVector::new(p, policy.cutoff, amps)
}

/// Closed-form mean amplitude `<phi(x)|a|phi(x)>` of the one-mode encoding,
/// `alpha0 e^{-i pi x} exp(-|alpha0|^2 (1 - e^{-2 pi i x}))`.
pub fn bias(x: f64, alpha0: Complex64) -> Complex64 {
    let s = alpha0.norm_sqr();
    let rot = Complex64::from_polar(1.0, -2.0 * PI * x);
    alpha0 * Complex64::from_polar(1.0, -PI * x) * (-s * (1.0 - rot)).exp()
}

/// Reduced state of the first mode of the coherent two-mode encoding.
pub fn reduced_state_two_mode(
    x: &DataPoint,
    alpha0: Complex64,
    policy: TruncationPolicy,
) -> Result<DensityMatrix> {
    require_modes(x, 2)?;
    let c = x.coords();
    let a = TwoModeEncoder::new(alpha0, 0.0, policy)?.amplitude_matrix(c[0], c[1]);
    DensityMatrix::new(&a * a.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn fidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
        let ip: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
        let na: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
        ip.norm_sqr() / (na * nb)
    }

    fn coh(alpha: Complex64) -> Vec<Complex64> {
        coherent_amplitudes(alpha, TruncationPolicy::single_mode()).unwrap().into_amps()
    }

    fn combine(terms: &[(Complex64, &[Complex64])]) -> Vec<Complex64> {
        let d = terms[0].1.len();
        (0..d).map(|i| terms.iter().map(|(w, v)| w * v[i]).sum()).collect()
    }

    fn kron(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
    }

    #[test]
    fn zero_phase_is_the_fiducial_state() {
        let p = TruncationPolicy::single_mode();
        let alpha = c(0.8, 0.1);
        assert_eq!(encode_one_mode(0.0, alpha, p).unwrap(), coherent_amplitudes(alpha, p).unwrap());
        let x = DataPoint::two(0.0, 0.0).unwrap();
        let two = encode_two_mode(&x, alpha, 0.0, TruncationPolicy::two_mode()).unwrap();
        let single = coherent_amplitudes(alpha, TruncationPolicy::two_mode()).unwrap();
        let prod = single.tensor(&single).unwrap();
        for (a, b) in two.amps().iter().zip(prod.amps()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn quarter_period_cat() {
        let one = c(1.0, 0.0);
        let s = encode_one_mode(0.25, one, TruncationPolicy::single_mode()).unwrap();
        let (pi, mi, p1, m1) = (coh(c(0.0, 1.0)), coh(c(0.0, -1.0)), coh(one), coh(-one));
        let h = c(0.5, 0.0);
        let odd = Complex64::from_polar(0.5, -PI / 4.0);
        let cat = combine(&[(h, &pi), (h, &mi), (odd, &p1), (-odd, &m1)]);
        assert!(fidelity(s.amps(), &cat) > 1.0 - 1e-10);
        // At x = 3/4 the odd component carries e^{-3 i pi/4}.
        let s3 = encode_one_mode(0.75, one, TruncationPolicy::single_mode()).unwrap();
        let odd3 = Complex64::from_polar(0.5, -3.0 * PI / 4.0);
        let cat3 = combine(&[(h, &pi), (h, &mi), (odd3, &p1), (-odd3, &m1)]);
        assert!(fidelity(s3.amps(), &cat3) > 1.0 - 1e-10);
    }

    #[test]
    fn quarter_period_cat_overlap() {
        // Even and odd cat components have weights e^{-1} cosh 1 and e^{-1} sinh 1,
        // and the relative phase between x = 1/4 and 3/4 on the odd part is i.
        let p = TruncationPolicy::single_mode();
        let a = encode_one_mode(0.25, c(1.0, 0.0), p).unwrap();
        let b = encode_one_mode(0.75, c(1.0, 0.0), p).unwrap();
        let ov = b.inner(&a).unwrap();
        let e = (-1.0f64).exp();
        let expected = c(e * 1f64.cosh(), e * 1f64.sinh());
        assert!((ov - expected).norm() < 1e-12);
        assert!((ov.norm_sqr() - (1.0 + (-4.0f64).exp()) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_mode_cats() {
        let policy = TruncationPolicy::new(20);
        let one = c(1.0, 0.0);
        let (p1, m1) = (
            coherent_amplitudes(one, policy).unwrap().into_amps(),
            coherent_amplitudes(-one, policy).unwrap().into_amps(),
        );
        let even: Vec<Complex64> = p1.iter().zip(&m1).map(|(a, b)| a + b).collect();
        let odd: Vec<Complex64> = p1.iter().zip(&m1).map(|(a, b)| a - b).collect();
        let w1 = Complex64::from_polar(1.0, PI / 4.0);
        let w2 = Complex64::from_polar(1.0, -PI / 4.0);

        let s = encode_two_mode(&DataPoint::two(1.0, 0.5).unwrap(), one, 0.0, policy).unwrap();
        let (ka, kb) = (kron(&m1, &even), kron(&p1, &odd));
        let cat = combine(&[(w1, &ka), (w2, &kb)]);
        assert!(fidelity(s.amps(), &cat) > 1.0 - 1e-10);

        let s = encode_two_mode(&DataPoint::two(0.5, 1.0).unwrap(), one, 0.0, policy).unwrap();
        let (ka, kb) = (kron(&even, &m1), kron(&odd, &p1));
        let cat = combine(&[(w1, &ka), (w2, &kb)]);
        assert!(fidelity(s.amps(), &cat) > 1.0 - 1e-10);
    }

    #[test]
    fn general_map_features() {
        let spec = KerrPhaseSpec::General { num_modes: 3 };
        assert_eq!(spec.num_features(), 6);
        let phi = spec.feature_map(&[0.5, 0.0, 1.0]).unwrap();
        assert_eq!(phi, vec![0.25, 0.0, 1.0, 0.5, 0.0, 0.0]);
        assert_eq!(spec.generator_eval(&[1, 2, 3]), vec![1.0, 4.0, 9.0, 4.0, 6.0, 12.0]);
        let exp = KerrPhaseSpec::Experimental;
        let phi = exp.feature_map(&[0.3, 0.6]).unwrap();
        let occ = [2, 3];
        assert!((exp.phase(&phi, &occ) - TwoModeEncoder::phase(2, 3, 0.3, 0.6)).abs() < 1e-14);
    }

    #[test]
    fn general_map_special_cases() {
        let policy = TruncationPolicy::two_mode();
        let alpha = c(1.0, 0.0);
        // P = 1 squares the coordinate.
        let x = 0.6;
        let g = encode_p_mode(&DataPoint::new(vec![x]).unwrap(), alpha, 0.0, policy).unwrap();
        let o = encode_one_mode(x * x, alpha, policy).unwrap();
        for (a, b) in g.amps().iter().zip(o.amps()) {
            assert!((a - b).norm() < 1e-14);
        }
        // x = (1, 1) leaves only own-mode phases: a product state.
        let g = encode_p_mode(&DataPoint::two(1.0, 1.0).unwrap(), alpha, 0.0, policy).unwrap();
        let m = g.as_two_mode_matrix().unwrap();
        let sv = m.singular_values();
        assert!(sv[1] < 1e-12 * sv[0]);
        // x = 0 applies the full cross-Kerr phase e^{-2 i pi n m}, which is trivial.
        let g = encode_p_mode(&DataPoint::two(0.0, 0.0).unwrap(), alpha, 0.0, policy).unwrap();
        let prod = coherent_amplitudes(alpha, policy).unwrap();
        let prod = prod.tensor(&prod).unwrap();
        for (a, b) in g.amps().iter().zip(prod.amps()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(matches!(
            encode_p_mode(&DataPoint::new(vec![0.1; 4]).unwrap(), alpha, 0.0, policy),
            Err(KerrError::Unsupported(_))
        ));
    }

    #[test]
    fn bias_matches_fock_expectation() {
        let p = TruncationPolicy::single_mode();
        for alpha in [c(1.0, 0.0), c(0.5, 0.4)] {
            assert!((bias(0.0, alpha) - alpha).norm() < 1e-15);
            for x in [0.1, 0.25, 0.5, 0.75, 0.9] {
                let fock = encode_one_mode(x, alpha, p).unwrap().mean_amplitude().unwrap();
                assert!((bias(x, alpha) - fock).norm() < 1e-8);
            }
            let half = bias(0.5, alpha).norm();
            assert!((half - alpha.norm() * (-2.0 * alpha.norm_sqr()).exp()).abs() < 1e-12);
        }
        let b14 = bias(0.25, c(1.0, 0.0));
        let expected = Complex64::from_polar(1.0, -PI / 4.0) * c(-1.0, -1.0).exp();
        assert!((b14 - expected).norm() < 1e-14);
        // The conjugate pair is x = 1/4 and x = -1/4 (equivalently 7/4);
        // x = 3/4 differs from it by a sign.
        assert!((bias(-0.25, c(1.0, 0.0)) - b14.conj()).norm() < 1e-14);
        assert!((bias(0.75, c(1.0, 0.0)) + b14.conj()).norm() < 1e-14);
    }

    #[test]
    fn reduced_state_separable_cases() {
        let policy = TruncationPolicy::new(20);
        let one = c(1.0, 0.0);
        for (x, target) in [((0.0, 0.7), coh(one)), ((1.0, 1.0), coh(-one))] {
            let rho = reduced_state_two_mode(&DataPoint::two(x.0, x.1).unwrap(), one, policy).unwrap();
            assert!((rho.trace().re - 1.0).abs() < 1e-10);
            assert!((rho.purity() - 1.0).abs() < 1e-10);
            // x = (0, x2) leaves mode one untouched.
            let t = &target[..21];
            let pop: Complex64 = (0..21)
                .flat_map(|n| (0..21).map(move |m| (n, m)))
                .map(|(n, m)| t[n].conj() * rho.get(n, m) * t[m])
                .sum();
            assert!((pop.re - 1.0).abs() < 1e-8, "{x:?}: {pop}");
        }
    }

    #[test]
    fn reduced_state_half_is_two_component_mixture() {
        let policy = TruncationPolicy::new(20);
        let one = c(1.0, 0.0);
        let rho = reduced_state_two_mode(&DataPoint::two(1.0, 0.5).unwrap(), one, policy).unwrap();
        assert!(rho.purity() < 0.99);
        // Mode 2 in even/odd sectors rotates mode 1 to |+-alpha>, then e^{-i pi n^2}
        // maps |+-alpha> to |-+alpha>. Weights e^{-1} cosh 1 and e^{-1} sinh 1.
        let e = (-1.0f64).exp();
        let (wp, wm) = (e * 1f64.cosh(), e * 1f64.sinh());
        let a = coherent_amplitudes(-one, policy).unwrap().into_amps();
        let b = coherent_amplitudes(one, policy).unwrap().into_amps();
        let d = 21;
        let mix = DMatrix::from_fn(d, d, |n, m| {
            a[n] * a[m].conj() * wp + b[n] * b[m].conj() * wm
        });
        let mix = DensityMatrix::new(mix).unwrap();
        let (e1, e2) = (rho.eigenvalues(), mix.eigenvalues());
        for (x, y) in e1.iter().zip(&e2) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn encodings_preserve_norm_and_period(x in 0.0f64..1.0, y in 0.0f64..1.0, re in -1.0f64..1.0, im in -1.0f64..1.0) {
            let alpha = c(re, im);
            let p = TruncationPolicy::single_mode();
            let a = encode_one_mode(x, alpha, p).unwrap();
            prop_assert!((a.norm_sqr() - 1.0).abs() < 1e-10);
            let b = encode_one_mode(x + 2.0, alpha, p).unwrap();
            for (u, v) in a.amps().iter().zip(b.amps()) {
                prop_assert!((u - v).norm() < 1e-9);
            }
            let t = encode_two_mode(&DataPoint::two(x, y).unwrap(), alpha * 0.8, 0.2, TruncationPolicy::new(16)).unwrap();
            prop_assert!((t.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }
}
