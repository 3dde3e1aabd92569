//! Single-mode density matrices over a truncated number basis.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{KerrError, Result};
use crate::fock::FockVector;
use crate::specialfn::{laguerre_unchecked, ln_factorial};

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    cutoff: usize,
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() < 2 {
            return Err(KerrError::ShapeMismatch(format!(
                "density matrix must be square with dim >= 2, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self {
            cutoff: entries.nrows() - 1,
            entries,
        })
    }

    /// `|psi><psi|` for a single-mode state.
    pub fn from_pure(psi: &FockVector) -> Result<Self> {
        if psi.num_modes() != 1 {
            return Err(KerrError::ShapeMismatch(format!(
                "expected a single-mode state, got {} modes",
                psi.num_modes()
            )));
        }
        let a = psi.amps();
        let d = a.len();
        Self::new(DMatrix::from_fn(d, d, |n, m| a[n] * a[m].conj()))
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        self.entries[(n, m)]
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn normalize_trace(&mut self) {
        let tr = self.trace().re;
        if tr > 0.0 {
            self.entries /= Complex64::new(tr, 0.0);
        }
    }

    /// Largest `|rho - rho^dag|` entry.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for n in 0..d {
            for m in n..d {
                worst = worst.max((self.entries[(n, m)] - self.entries[(m, n)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues in ascending order, computed on the Hermitian part.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn expectation(&self, op: &DMatrix<Complex64>) -> Result<Complex64> {
        if op.shape() != self.entries.shape() {
            return Err(KerrError::ShapeMismatch("operator and state differ in dimension".into()));
        }
        Ok((&self.entries * op).trace())
    }

    /// `Tr[rho D(alpha) Pi D(alpha)^dag]`, using the closed form
    /// `D(alpha) Pi D(alpha)^dag = D(2 alpha) Pi`.
    pub fn displaced_parity(&self, alpha: Complex64) -> f64 {
        let d = self.dim();
        let beta = 2.0 * alpha;
        let x = beta.norm_sqr();
        let mut acc = Complex64::new(0.0, 0.0);
        for n in 0..d {
            for m in 0..d {
                // <n|D(beta)|m> (-1)^m
                let (hi, lo) = if n >= m { (n, m) } else { (m, n) };
                let k = hi - lo;
                let mag = (0.5 * (ln_factorial(lo) - ln_factorial(hi)) - 0.5 * x).exp();
                let lag = laguerre_unchecked(lo, k as f64, x);
                let elem = if n >= m {
                    beta.powu(k as u32) * mag * lag
                } else {
                    (-beta.conj()).powu(k as u32) * mag * lag
                };
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                acc += self.entries[(m, n)] * elem * sign;
            }
        }
        acc.re
    }

    pub fn photon_number_distribution(&self) -> Vec<f64> {
        (0..self.dim()).map(|n| self.entries[(n, n)].re).collect()
    }
}
