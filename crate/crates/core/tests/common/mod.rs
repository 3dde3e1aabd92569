//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Coherent amplitudes from the Poisson formula, without renormalization.
pub fn coherent_direct(alpha: Complex64, cutoff: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(cutoff + 1);
    let mut term = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..=cutoff {
        if n > 0 {
            term = term * alpha / (n as f64).sqrt();
        }
        out.push(term);
    }
    out
}

/// Right-hand side of the Kerr master equation with photon loss in the Fock basis:
/// `d rho_nm/dt = -i chi (n^2 - m^2) rho_nm
///               + gamma (sqrt((n+1)(m+1)) rho_{n+1,m+1} - (n+m)/2 rho_nm)`.
fn master_rhs(rho: &DMatrix<Complex64>, chi: f64, gamma: f64) -> DMatrix<Complex64> {
    let d = rho.nrows();
    DMatrix::from_fn(d, d, |n, m| {
        let (nf, mf) = (n as f64, m as f64);
        let mut v = Complex64::new(0.0, -chi * (nf * nf - mf * mf)) * rho[(n, m)];
        v -= gamma * 0.5 * (nf + mf) * rho[(n, m)];
        if n + 1 < d && m + 1 < d {
            v += gamma * ((nf + 1.0) * (mf + 1.0)).sqrt() * rho[(n + 1, m + 1)];
        }
        v
    })
}

fn rk4(rho0: &DMatrix<Complex64>, chi: f64, gamma: f64, t: f64, steps: usize) -> DMatrix<Complex64> {
    let h = t / steps as f64;
    let mut rho = rho0.clone();
    for _ in 0..steps {
        let k1 = master_rhs(&rho, chi, gamma);
        let k2 = master_rhs(&(&rho + &k1 * Complex64::new(h / 2.0, 0.0)), chi, gamma);
        let k3 = master_rhs(&(&rho + &k2 * Complex64::new(h / 2.0, 0.0)), chi, gamma);
        let k4 = master_rhs(&(&rho + &k3 * Complex64::new(h, 0.0)), chi, gamma);
        rho += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4) * Complex64::new(h / 6.0, 0.0);
    }
    rho
}

fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Integrates the master equation from `rho0` to `t`, doubling the RK4 step
/// count until two successive runs agree to `tol`.
pub fn integrate_master(rho0: &DMatrix<Complex64>, chi: f64, gamma: f64, t: f64, tol: f64) -> DMatrix<Complex64> {
    let d = rho0.nrows() as f64;
    let mut steps = ((chi.abs() * d * d + gamma * d) * t).ceil().max(16.0) as usize;
    let mut prev = rk4(rho0, chi, gamma, t, steps);
    loop {
        steps *= 2;
        let next = rk4(rho0, chi, gamma, t, steps);
        if max_abs_diff(&prev, &next) < tol || steps > 1 << 20 {
            return next;
        }
        prev = next;
    }
}

/// `Tr[rho D(a) Pi D(a)^dag]` with `D` built by matrix exponentiation on a
/// padded space and `Pi` the parity operator.
pub fn parity_by_expm(rho: &DMatrix<Complex64>, alpha: Complex64, pad: usize) -> f64 {
    let d = rho.nrows();
    let big = d + pad;
    let a = DMatrix::from_fn(big, big, |i, j| {
        if j == i + 1 {
            Complex64::new((j as f64).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let gen = &a.adjoint() * alpha - &a * alpha.conj();
    let disp = expm(&gen);
    let block = disp.view((0, 0), (d, d)).into_owned();
    let parity = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            Complex64::new(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let op = &block * parity * block.adjoint();
    (rho * op).trace().re
}

/// Matrix exponential by scaling, Taylor series and squaring.
pub fn expm(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let norm: f64 = m.iter().map(|z| z.norm()).sum::<f64>().max(1e-300);
    let s = norm.log2().ceil().max(0.0) as i32 + 1;
    let scaled = m / Complex64::new(2f64.powi(s), 0.0);
    let n = m.nrows();
    let mut term = DMatrix::<Complex64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..40 {
        term = &term * &scaled / Complex64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// `D(alpha) S(r) |0>` with `S(r) = exp(r/2 (a^2 - a^dag^2))`, by matrix
/// exponentials on a padded space, truncated to `cutoff`.
pub fn squeezed_by_expm(alpha: Complex64, r: f64, cutoff: usize) -> Vec<Complex64> {
    let big = cutoff + 60;
    let a = DMatrix::from_fn(big, big, |i, j| if j == i + 1 { Complex64::new((j as f64).sqrt(), 0.0) } else { Complex64::new(0.0, 0.0) });
    let ad = a.adjoint();
    let sq = expm(&((&a * &a - &ad * &ad) * Complex64::new(r / 2.0, 0.0)));
    let disp = expm(&(&ad * alpha - &a * alpha.conj()));
    let state = disp * sq.column(0);
    state.iter().take(cutoff + 1).copied().collect()
}

/// Projection onto `{0 <= a <= c, y^T a = 0}` by bisection on the multiplier.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - lam * yi).clamp(0.0, c)).collect() };
    let g = |lam: f64| -> f64 { at(lam).iter().zip(y).map(|(a, yi)| a * yi).sum() };
    let span = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Maximizes the soft-margin dual `sum a - 1/2 a^T Q a` by accelerated
/// projected gradient. Returns `(alphas, objective)`.
pub fn brute_force_dual(kernel: &DMatrix<f64>, labels: &[i8], c: f64) -> (Vec<f64>, f64) {
    let n = labels.len();
    let y: Vec<f64> = labels.iter().map(|&v| v as f64).collect();
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * kernel[(i, j)]);
    let lip = q.symmetric_eigenvalues().max().max(1e-12);
    let step = 1.0 / lip;
    let objective = |a: &[f64]| -> f64 {
        let av = nalgebra::DVector::from_column_slice(a);
        a.iter().sum::<f64>() - 0.5 * (av.transpose() * &q * &av)[(0, 0)]
    };
    let pg_step = |x: &[f64]| -> Vec<f64> {
        let g = &q * nalgebra::DVector::from_column_slice(x);
        let v: Vec<f64> = (0..n).map(|i| x[i] + step * (1.0 - g[i])).collect();
        project(&v, &y, c)
    };
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut tk: f64 = 1.0;
    let mut best = objective(&a);
    for it in 0..2_000_000 {
        let next = pg_step(&z);
        let value = objective(&next);
        if value < best - 1e-14 * (1.0 + best.abs()) && tk > 1.0 {
            // Restart momentum when the objective drops.
            z = a.clone();
            tk = 1.0;
            continue;
        }
        best = best.max(value);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
        let mom = (tk - 1.0) / t_next;
        z = next.iter().zip(&a).map(|(p, q)| p + mom * (p - q)).collect();
        a = next;
        tk = t_next;
        if it % 100 == 0 {
            let moved = pg_step(&a).iter().zip(&a).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            if moved < 1e-13 {
                break;
            }
        }
    }
    let obj = objective(&a);
    (a, obj)
}

/// Small labelled instances for solver checks: `(name, kernel, labels, C)`.
pub fn smo_fixtures() -> Vec<(String, DMatrix<f64>, Vec<i8>, f64)> {
    use kerr_core::data::uniform_points;
    use kerr_core::fock::TruncationPolicy;
    use kerr_core::kernels::{gram_exact, Gamma, KernelKind, KernelSpec};

    let mut out = Vec::new();
    let specs = [
        KernelSpec::new(KernelKind::KerrCoherent2mode, Complex64::new(1.0, 0.0)),
        KernelSpec::new(KernelKind::KerrSqueezed2mode, Complex64::new(1.0, 0.0))
            .with_r0(0.3)
            .with_policy(TruncationPolicy::new(16).with_tail_tol(1e-7)),
        KernelSpec::rbf(Gamma::Value(5.0)),
        KernelSpec::rbf(Gamma::Scale),
    ];
    for (s, spec) in specs.iter().enumerate() {
        for (k, &n) in [4usize, 7, 12].iter().enumerate() {
            let seed = 100 + 10 * s as u64 + k as u64;
            let pts = uniform_points(n, 2, seed);
            let mut labels: Vec<i8> = pts
                .iter()
                .map(|p| if p.coords()[0] + 0.3 * p.coords()[1] < 0.6 { 1 } else { -1 })
                .collect();
            labels[0] = 1;
            labels[1] = -1;
            let gram = gram_exact(&pts, spec).unwrap();
            for c in [0.5, 1.0, 10.0] {
                out.push((format!("{}-n{}-c{}", spec.kind, n, c), gram.entries.clone(), labels.clone(), c));
            }
        }
    }
    out
}
