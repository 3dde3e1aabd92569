//! Kerr evolution with photon loss and phase diffusion.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::encode::encode_one_mode;
use crate::error::{KerrError, Result};
use crate::fock::{coherent_amplitudes, displacement_matrix, TruncationPolicy};
use crate::rng::keyed_rng;

/// Kerr rate `chi`, loss rate `gamma` and elapsed time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub chi: f64,
    pub gamma: f64,
    pub t: f64,
}

impl LossParams {
    pub fn new(chi: f64, gamma: f64, t: f64) -> Result<Self> {
        let p = Self { chi, gamma, t };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with `chi t = pi x`, i.e. the encoding of `x` at unit time.
    pub fn for_encoding(x: f64, gamma_over_chi: f64) -> Result<Self> {
        let chi = PI * x;
        Self::new(chi, gamma_over_chi * chi, 1.0)
    }

    pub fn chi_t(&self) -> f64 {
        self.chi * self.t
    }

    pub fn gamma_t(&self) -> f64 {
        self.gamma * self.t
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !(self.t >= 0.0) || !self.chi.is_finite() {
            return Err(KerrError::InvalidInput(format!(
                "need gamma >= 0, t >= 0 and finite chi; got chi = {}, gamma = {}, t = {}",
                self.chi, self.gamma, self.t
            )));
        }
        Ok(())
    }
}

/// Density matrix of an initial coherent state after Kerr evolution with loss:
/// `rho_nm(0) f^{(n+m)/2} exp[|a|^2 (1 - f)/(1 + i delta)]` with
/// `f = exp(-gamma t - 2 i chi t (n - m))` and `delta = 2 chi (n - m)/gamma`.
/// The power `f^{(n+m)/2}` is taken on the exponent, not the principal branch.
pub fn damped_state(alpha0: Complex64, params: LossParams, policy: TruncationPolicy) -> Result<DensityMatrix> {
    params.validate()?;
    let f = coherent_amplitudes(alpha0, policy)?.into_amps();
    let s = alpha0.norm_sqr();
    let (gt, ct) = (params.gamma_t(), params.chi_t());
    let d = policy.dim();
    let entries = DMatrix::from_fn(d, d, |n, m| {
        let rho0 = f[n] * f[m].conj();
        let diff = n as f64 - m as f64;
        if params.gamma == 0.0 {
            let sq = (n * n) as f64 - (m * m) as f64;
            return rho0 * Complex64::from_polar(1.0, -ct * sq);
        }
        let log_f = Complex64::new(-gt, -2.0 * ct * diff);
        let one_minus_f = Complex64::new(1.0, 0.0) - log_f.exp();
        let denom = Complex64::new(1.0, 2.0 * params.chi * diff / params.gamma);
        rho0 * (log_f * (0.5 * (n + m) as f64) + one_minus_f / denom * s).exp()
    });
    let mut rho = DensityMatrix::new(entries)?;
    rho.normalize_trace();
    Ok(rho)
}

/// `sum_k (-1)^k sum_{n,m} d_mk(alpha) d_kn(-alpha) rho_nm(t)`.
pub fn damped_decision(
    alpha: Complex64,
    params: LossParams,
    alpha0: Complex64,
    policy: TruncationPolicy,
) -> Result<f64> {
    let rho = damped_state(alpha0, params, policy)?;
    displaced_parity_of(&rho, alpha, policy)
}

/// Displaced parity of a density matrix via the displacement matrix elements.
pub fn displaced_parity_of(rho: &DensityMatrix, alpha: Complex64, policy: TruncationPolicy) -> Result<f64> {
    if rho.cutoff() != policy.cutoff {
        return Err(KerrError::ShapeMismatch("density matrix and policy cutoffs differ".into()));
    }
    let plus = displacement_matrix(alpha, policy)?.entries;
    let minus = displacement_matrix(-alpha, policy)?.entries;
    let m = minus * rho.entries() * plus;
    let v: Complex64 = (0..m.nrows())
        .map(|k| if k % 2 == 0 { m[(k, k)] } else { -m[(k, k)] })
        .sum();
    if v.im.abs() > 1e-6 {
        return Err(KerrError::Numerical(format!(
            "decision value has imaginary part {:.3e}",
            v.im
        )));
    }
    Ok(v.re.clamp(-1.0, 1.0))
}

/// Real-axis cross-section `(u, d(u))` of the damped decision function.
pub fn damped_cross_section(
    us: &[f64],
    params: LossParams,
    alpha0: Complex64,
    policy: TruncationPolicy,
) -> Result<Vec<(f64, f64)>> {
    let rho = damped_state(alpha0, params, policy)?;
    us.par_iter()
        .map(|&u| displaced_parity_of(&rho, Complex64::new(u, 0.0), policy).map(|d| (u, d)))
        .collect()
}

/// Short-time coherence factor `exp(-gamma t |a_i - a_j|^2)`.
pub fn short_time_coherence(alpha_i: Complex64, alpha_j: Complex64, gamma: f64, t: f64) -> f64 {
    (-gamma * t * (alpha_i - alpha_j).norm_sqr()).exp()
}

/// `|<a_i|a_j>|^{2(1 - e^{-gamma t})}`.
pub fn exact_coherence(alpha_i: Complex64, alpha_j: Complex64, gamma: f64, t: f64) -> f64 {
    (-(alpha_i - alpha_j).norm_sqr() * (1.0 - (-gamma * t).exp())).exp()
}

/// Monte-Carlo phase diffusion: the average of encoded states built from
/// `alpha0 e^{i theta}` with `theta ~ N(0, 2 Gamma t)`.
pub fn phase_diffused_state(
    alpha0: Complex64,
    big_gamma: f64,
    t: f64,
    n_samples: usize,
    seed: u64,
    x: f64,
    policy: TruncationPolicy,
) -> Result<DensityMatrix> {
    if !(big_gamma >= 0.0 && t >= 0.0) {
        return Err(KerrError::InvalidInput("need Gamma >= 0 and t >= 0".into()));
    }
    if n_samples == 0 {
        return Err(KerrError::InvalidInput("n_samples must be >= 1".into()));
    }
    let std = (2.0 * big_gamma * t).sqrt();
    let states: Vec<Vec<Complex64>> = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let theta = if std > 0.0 {
                Normal::new(0.0, std)
                    .expect("std is positive")
                    .sample(&mut keyed_rng(seed, s as u64))
            } else {
                0.0
            };
            encode_one_mode(x, alpha0 * Complex64::from_polar(1.0, theta), policy).map(|v| v.into_amps())
        })
        .collect::<Result<_>>()?;
    let d = policy.dim();
    let mut acc = DMatrix::<Complex64>::zeros(d, d);
    for a in &states {
        for m in 0..d {
            let am = a[m].conj();
            for n in 0..d {
                acc[(n, m)] += a[n] * am;
            }
        }
    }
    acc /= Complex64::new(n_samples as f64, 0.0);
    DensityMatrix::new(acc)
}

/// Solution of `d rho/dt = -Gamma [n, [n, rho]]` from the encoded pure state:
/// off-diagonals damped by `exp(-Gamma t (n - m)^2)`.
pub fn phase_diffused_analytic(
    alpha0: Complex64,
    big_gamma: f64,
    t: f64,
    x: f64,
    policy: TruncationPolicy,
) -> Result<DensityMatrix> {
    let pure = DensityMatrix::from_pure(&encode_one_mode(x, alpha0, policy)?)?;
    let d = policy.dim();
    let e = DMatrix::from_fn(d, d, |n, m| {
        let k = n as f64 - m as f64;
        pure.get(n, m) * (-big_gamma * t * k * k).exp()
    });
    DensityMatrix::new(e)
}

/// Writes `alpha_real,d_value,gamma` rows.
pub fn write_cross_section_csv<W: Write>(rows: &[(f64, f64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha_real", "d_value", "gamma"])?;
    for (u, d, g) in rows {
        w.write_record([u.to_string(), d.to_string(), g.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::decision_1mode;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn lossless_limit_is_encoded_projector() {
        let p = TruncationPolicy::single_mode();
        let a = c(1.0, 0.0);
        let params = LossParams::for_encoding(0.25, 0.0).unwrap();
        let rho = damped_state(a, params, p).unwrap();
        let pure = DensityMatrix::from_pure(&encode_one_mode(0.25, a, p).unwrap()).unwrap();
        assert!((rho.entries() - pure.entries()).iter().all(|z| z.norm() < 1e-8));
        // A tiny loss rate approaches the same state.
        let near = damped_state(a, LossParams::for_encoding(0.25, 1e-9).unwrap(), p).unwrap();
        assert!((near.entries() - pure.entries()).iter().all(|z| z.norm() < 1e-7));
    }

    #[test]
    fn long_time_limit_is_vacuum() {
        let p = TruncationPolicy::single_mode();
        let rho = damped_state(c(1.0, 0.0), LossParams::new(1.0, 1.0, 60.0).unwrap(), p).unwrap();
        assert!((rho.get(0, 0).re - 1.0).abs() < 1e-12);
        let rest: f64 = rho.entries().iter().skip(1).map(|z| z.norm()).sum();
        assert!(rest < 1e-12);
        let d = damped_decision(c(0.0, 0.0), LossParams::new(1.0, 1.0, 60.0).unwrap(), c(1.0, 0.0), p).unwrap();
        assert!((d - 1.0).abs() < 1e-10);
    }

    #[test]
    fn damped_state_is_a_state() {
        let p = TruncationPolicy::new(20);
        for gt in [0.01, 0.1, 0.5, 1.0] {
            let rho = damped_state(c(1.0, 0.0), LossParams::new(PI / 4.0, gt, 1.0).unwrap(), p).unwrap();
            assert!((rho.trace().re - 1.0).abs() < 1e-9);
            assert!(rho.hermiticity_error() < 1e-10);
            assert!(rho.min_eigenvalue() > -1e-8);
        }
    }

    #[test]
    fn decay_only_keeps_coherent_form() {
        // chi = 0: the state stays coherent with amplitude a e^{-gamma t/2}.
        let p = TruncationPolicy::single_mode();
        let a = c(0.9, 0.3);
        let rho = damped_state(a, LossParams::new(0.0, 0.4, 1.0).unwrap(), p).unwrap();
        let target = coherent_amplitudes(a * (-0.2f64).exp(), p).unwrap();
        let pure = DensityMatrix::from_pure(&target).unwrap();
        assert!((rho.entries() - pure.entries()).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn damped_decision_lossless_matches_pure() {
        let p = TruncationPolicy::single_mode();
        let a = c(1.0, 0.0);
        let params = LossParams::for_encoding(0.25, 0.0).unwrap();
        for mu in [c(0.0, 0.0), c(0.5, 0.0), c(-0.4, 0.3)] {
            let d = damped_decision(mu, params, a, p).unwrap();
            assert!((d - decision_1mode(mu, 0.25, a, p).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn coherence_laws() {
        let (a, b) = (c(1.0, 0.0), c(-1.0, 0.0));
        assert_eq!(short_time_coherence(a, a, 0.3, 2.0), 1.0);
        assert!((short_time_coherence(a, b, 0.01, 1.0) - (-0.04f64).exp()).abs() < 1e-15);
        let exact = exact_coherence(a, b, 0.01, 1.0);
        let approx = short_time_coherence(a, b, 0.01, 1.0);
        let rel = ((approx.ln() - exact.ln()) / exact.ln()).abs();
        assert!(rel < 0.05);
    }

    #[test]
    fn phase_diffusion_limits() {
        let p = TruncationPolicy::new(15);
        let a = c(1.0, 0.0);
        let pure = DensityMatrix::from_pure(&encode_one_mode(0.3, a, p).unwrap()).unwrap();
        let z = phase_diffused_state(a, 0.0, 1.0, 5, 1, 0.3, p).unwrap();
        assert!((z.entries() - pure.entries()).iter().all(|v| v.norm() < 1e-14));
        let far = phase_diffused_analytic(a, 50.0, 1.0, 0.3, p).unwrap();
        for n in 0..16 {
            assert!((far.get(n, n) - pure.get(n, n)).norm() < 1e-15);
            for m in 0..16 {
                if n != m {
                    assert!(far.get(n, m).norm() < 1e-20);
                }
            }
        }
        let s1 = phase_diffused_state(a, 0.05, 1.0, 200, 9, 0.3, p).unwrap();
        let s2 = phase_diffused_state(a, 0.05, 1.0, 200, 9, 0.3, p).unwrap();
        assert_eq!(s1, s2);
        assert!((s1.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_section_csv() {
        let mut buf = Vec::new();
        write_cross_section_csv(&[(0.5, -0.25, 0.1)], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "alpha_real,d_value,gamma\n0.5,-0.25,0.1\n");
    }
}
