//! Sequential learning: tune a displacement `mu` by parity feedback so that
//! the sign of the displaced parity matches the label.

use std::io::Write;

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::encode::bias;
use crate::error::{KerrError, Result};
use crate::fock::TruncationPolicy;
use crate::measure::decision_1mode;
use crate::rng::keyed_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    /// Central differences of the parity probability at `mu +- delta`, `mu +- i delta`.
    FiniteDifference,
    /// `dp/dmu* = mu (1 - p) - b(x)`.
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Evaluation {
    /// Parity estimated from `shots` simulated measurements.
    Sampled,
    /// Exact expectation values, no sampling noise.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequentialConfig {
    pub x: f64,
    pub true_y: i8,
    pub alpha0: Complex64,
    pub mu0: Complex64,
    pub epochs: usize,
    pub shots: u64,
    pub eta: f64,
    /// Probe offset for sampled finite differences.
    pub delta: f64,
    pub seed: u64,
    pub gradient: GradientMode,
    pub evaluation: Evaluation,
    pub policy: TruncationPolicy,
}

impl Default for SequentialConfig {
    fn default() -> Self {
        Self {
            x: 0.25,
            true_y: 1,
            alpha0: Complex64::new(1.0, 0.0),
            mu0: Complex64::new(0.0, 0.0),
            epochs: 200,
            shots: 10_000,
            eta: 0.1,
            delta: 0.05,
            seed: 0,
            gradient: GradientMode::FiniteDifference,
            evaluation: Evaluation::Sampled,
            policy: TruncationPolicy::single_mode(),
        }
    }
}

/// Step used for finite differences of exact expectation values.
pub const EXACT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mu: Complex64,
    pub empirical_d: f64,
    pub avg_error: f64,
    pub shots: u64,
}

/// `(1 - y d)/2`.
pub fn average_error(y: i8, d: f64) -> f64 {
    (1.0 - y as f64 * d) / 2.0
}

/// `(dd/du, dd/dv)` at `mu = u + i v` by central differences of the exact
/// decision function.
pub fn exact_gradient(mu: Complex64, x: f64, alpha0: Complex64, policy: TruncationPolicy, h: f64) -> Result<(f64, f64)> {
    let d = |m: Complex64| decision_1mode(m, x, alpha0, policy);
    let du = (d(mu + h)? - d(mu - h)?) / (2.0 * h);
    let iv = Complex64::new(0.0, h);
    let dv = (d(mu + iv)? - d(mu - iv)?) / (2.0 * h);
    Ok((du, dv))
}

/// `mu (1 - p) - b(x)` with `p = (1 + d)/2`.
pub fn analytic_gradient(mu: Complex64, d: f64, x: f64, alpha0: Complex64) -> Complex64 {
    let p = 0.5 * (1.0 + d);
    mu * (1.0 - p) - bias(x, alpha0)
}

/// Update `mu <- mu + 2 eta y dp/dmu*`, which lowers the average error by
/// `eta/4 |grad d|^2` to first order.
pub fn update_step(mu: Complex64, y: i8, eta: f64, dp_dmu_conj: Complex64) -> Complex64 {
    mu + 2.0 * eta * y as f64 * dp_dmu_conj
}

struct Estimator<'a> {
    cfg: &'a SequentialConfig,
}

impl Estimator<'_> {
    fn exact(&self, mu: Complex64) -> Result<f64> {
        decision_1mode(mu, self.cfg.x, self.cfg.alpha0, self.cfg.policy)
    }

    /// Empirical or exact `d` at `mu`; `key` selects the random stream.
    fn measure(&self, mu: Complex64, key: u64) -> Result<f64> {
        let d = self.exact(mu)?;
        match self.cfg.evaluation {
            Evaluation::Exact => Ok(d),
            Evaluation::Sampled => {
                let p = (0.5 * (1.0 + d)).clamp(0.0, 1.0);
                let k = Binomial::new(self.cfg.shots, p)
                    .expect("p in [0,1]")
                    .sample(&mut keyed_rng(self.cfg.seed, key));
                Ok(2.0 * k as f64 / self.cfg.shots as f64 - 1.0)
            }
        }
    }

    fn dp_dmu_conj(&self, mu: Complex64, d: f64, epoch: usize) -> Result<Complex64> {
        match self.cfg.gradient {
            GradientMode::Analytic => Ok(analytic_gradient(mu, d, self.cfg.x, self.cfg.alpha0)),
            GradientMode::FiniteDifference => {
                let (du, dv) = match self.cfg.evaluation {
                    Evaluation::Exact => exact_gradient(mu, self.cfg.x, self.cfg.alpha0, self.cfg.policy, EXACT_FD_STEP)?,
                    Evaluation::Sampled => {
                        let h = self.cfg.delta;
                        let base = 5 * epoch as u64;
                        let iv = Complex64::new(0.0, h);
                        let du = (self.measure(mu + h, base + 1)? - self.measure(mu - h, base + 2)?) / (2.0 * h);
                        let dv = (self.measure(mu + iv, base + 3)? - self.measure(mu - iv, base + 4)?) / (2.0 * h);
                        (du, dv)
                    }
                };
                // p = (1 + d)/2 and d/dmu* = (d/du + i d/dv)/2.
                Ok(Complex64::new(du, dv) * 0.25)
            }
        }
    }
}

fn validate(cfg: &SequentialConfig) -> Result<()> {
    if cfg.true_y != 1 && cfg.true_y != -1 {
        return Err(KerrError::InvalidInput("label must be +1 or -1".into()));
    }
    if cfg.shots == 0 && cfg.evaluation == Evaluation::Sampled {
        return Err(KerrError::InvalidInput("shots must be >= 1".into()));
    }
    if !(cfg.eta > 0.0) {
        return Err(KerrError::InvalidInput("eta must be positive".into()));
    }
    if cfg.gradient == GradientMode::FiniteDifference && !(cfg.delta > 0.0) {
        return Err(KerrError::InvalidInput("probe delta must be positive".into()));
    }
    Ok(())
}

/// Runs `epochs` measure-and-update rounds. Each record holds `mu` before
/// its update.
pub fn sequential_run(cfg: &SequentialConfig) -> Result<Vec<EpochRecord>> {
    validate(cfg)?;
    let est = Estimator { cfg };
    let limit = (cfg.policy.cutoff as f64).sqrt();
    let mut mu = cfg.mu0;
    let mut records = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let d = est.measure(mu, 5 * epoch as u64)?;
        records.push(EpochRecord {
            epoch,
            mu,
            empirical_d: d,
            avg_error: average_error(cfg.true_y, d),
            shots: if cfg.evaluation == Evaluation::Exact { 0 } else { cfg.shots },
        });
        let g = est.dp_dmu_conj(mu, d, epoch)?;
        mu = update_step(mu, cfg.true_y, cfg.eta, g);
        if mu.norm() > limit {
            return Err(KerrError::Diverged {
                epoch,
                mu_abs: mu.norm(),
                limit,
            });
        }
    }
    Ok(records)
}

/// `epoch,mu_re,mu_im,empirical_d,avg_error` rows.
pub fn write_trace_csv<W: Write>(records: &[EpochRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "mu_re", "mu_im", "empirical_d", "avg_error"])?;
    for r in records {
        w.write_record([
            r.epoch.to_string(),
            r.mu.re.to_string(),
            r.mu.im.to_string(),
            r.empirical_d.to_string(),
            r.avg_error.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
