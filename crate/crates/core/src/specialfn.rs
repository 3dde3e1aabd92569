//! Special functions used by the Fock-space formulas.
//!
//! Factorials are handled in log space so that ratios such as `sqrt(m!/n!)`
//! stay finite for cutoffs well beyond the point where `n!` overflows.
//! Polynomials are evaluated by their three-term recurrences.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{KerrError, Result};

/// Largest polynomial order / factorial argument served by this module.
pub const MAX_ORDER: usize = 200;

/// Table of `ln(n!)` for `n = 0..=n_max`.
#[derive(Debug, Clone)]
pub struct LogFactorialTable {
    values: Vec<f64>,
}

impl LogFactorialTable {
    pub fn new(n_max: usize) -> Self {
        let mut values = Vec::with_capacity(n_max + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for n in 1..=n_max {
            acc += (n as f64).ln();
            values.push(acc);
        }
        Self { values }
    }

    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, n: usize) -> Option<f64> {
        self.values.get(n).copied()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn shared_table() -> &'static LogFactorialTable {
    static TABLE: OnceLock<LogFactorialTable> = OnceLock::new();
    TABLE.get_or_init(|| LogFactorialTable::new(MAX_ORDER))
}

/// `ln(n!)`. Panics if `n > MAX_ORDER`.
pub fn ln_factorial(n: usize) -> f64 {
    shared_table()
        .get(n)
        .unwrap_or_else(|| panic!("ln_factorial: {n} exceeds MAX_ORDER = {MAX_ORDER}"))
}

/// `sqrt(m! / n!)` evaluated in log space.
pub fn sqrt_factorial_ratio(m: usize, n: usize) -> f64 {
    (0.5 * (ln_factorial(m) - ln_factorial(n))).exp()
}

/// Physicists' Hermite polynomial `H_n(z)` for complex argument.
pub fn hermite(n: usize, z: Complex64) -> Result<Complex64> {
    if n > MAX_ORDER {
        return Err(KerrError::CutoffExceeded {
            order: n,
            max: MAX_ORDER,
        });
    }
    let mut prev = Complex64::new(1.0, 0.0);
    if n == 0 {
        return Ok(prev);
    }
    let mut cur = 2.0 * z;
    for k in 1..n {
        let next = 2.0 * z * cur - 2.0 * (k as f64) * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Generalized (associated) Laguerre polynomial `L_n^k(x)`.
///
/// Requires `n + k >= 0` and `x >= 0`.
pub fn assoc_laguerre(n: usize, k: i64, x: f64) -> Result<f64> {
    if (n as i64) + k < 0 {
        return Err(KerrError::Domain(format!(
            "assoc_laguerre requires n + k >= 0, got n = {n}, k = {k}"
        )));
    }
    if !(x >= 0.0) {
        return Err(KerrError::Domain(format!(
            "assoc_laguerre requires x >= 0, got {x}"
        )));
    }
    Ok(laguerre_unchecked(n, k as f64, x))
}

/// Recurrence without argument validation, for hot loops that already know
/// their indices are in range.
pub(crate) fn laguerre_unchecked(n: usize, k: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + k - x;
    for i in 1..n {
        let fi = i as f64;
        let next = ((2.0 * fi + 1.0 + k - x) * cur - (fi + k) * prev) / (fi + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}
