use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use kerr_core::data::{
    column_stats, label_summary, read_labeled_csv, read_points_csv, uniform_points, write_labeled_csv,
    write_points_csv, DataPoint, LabeledPoint,
};
use kerr_core::fock::TruncationPolicy;
use kerr_core::kernels::{gram_exact, gram_sampled, KernelKind, KernelSpec};
use kerr_core::learn::pipeline::{split_indices, write_mesh_csv, TrainReport, TrainedModel, MESH_STEP};
use kerr_core::learn::sequential::write_trace_csv;
use kerr_core::learn::{grid_search, sequential_run, train_eval, SequentialConfig, TrainConfig};
use kerr_core::lossmodel::{damped_cross_section, damped_state, displaced_parity_of, write_cross_section_csv, LossParams};
use kerr_core::measure::{
    decision_1mode, label_points, read_displacements, reference_displacement, sample_displacements, true_label_1mode,
    write_displacements, DisplacementPair, LabelConvention, NamedDisplacement, TwoModeDecision,
};
use kerr_core::KerrError;

use crate::args::*;

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(BufReader::new(f))
}

/// Pretty JSON with sorted keys, to a file or stdout.
fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&serde_json::to_value(value)?)?;
    text.push('\n');
    match out {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn require_seed(seed: Option<u64>, what: &str) -> Result<u64> {
    seed.ok_or_else(|| anyhow!(KerrError::InvalidInput(format!("--seed is required for {what}"))))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        bail!(KerrError::InvalidInput(format!("grid bounds [{lo}, {hi}] must be finite and ordered")));
    }
    if n == 0 {
        bail!(KerrError::InvalidInput("grid needs at least one step".into()));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

fn complex_pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn modes_of(kind: KernelKind) -> usize {
    if kind == KernelKind::KerrCoherent1mode {
        1
    } else {
        2
    }
}

pub fn gen_data(a: &GenData) -> Result<()> {
    if a.n == 0 {
        bail!(KerrError::InvalidInput("n must be >= 1".into()));
    }
    let points = uniform_points(a.n, 2, a.seed);
    let mut w = create(&a.out)?;
    write_points_csv(&points, &mut w)?;
    w.flush()?;
    let col = |k: usize| points.iter().map(|p| p.coords()[k]).collect::<Vec<_>>();
    emit_json(&json!({ "x1": column_stats(&col(0))?, "x2": column_stats(&col(1))? }), None)
}

pub fn sample_displacements_cmd(a: &SampleDisplacements) -> Result<()> {
    let pairs = sample_displacements(a.sigma, a.count, a.max_abs2, a.seed)?;
    let named: Vec<NamedDisplacement> = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| NamedDisplacement::from_pair(format!("{}{}", a.prefix, i + 1), p))
        .collect();
    let mut w = create(&a.out)?;
    write_displacements(&named, &mut w)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn resolve_displacement(set: Option<&str>, file: Option<&Path>) -> Result<NamedDisplacement> {
    match (file, set) {
        (Some(path), name) => {
            let sets = read_displacements(open(path)?)?;
            match name {
                Some(n) => sets
                    .into_iter()
                    .find(|d| d.name == n)
                    .ok_or_else(|| anyhow!(KerrError::InvalidInput(format!("no set '{n}' in {}", path.display())))),
                None if sets.len() == 1 => Ok(sets.into_iter().next().expect("one set")),
                None => bail!(KerrError::InvalidInput(format!(
                    "{} holds {} sets; pick one with --set",
                    path.display(),
                    sets.len()
                ))),
            }
        }
        (None, Some(n)) => reference_displacement(n)
            .ok_or_else(|| anyhow!(KerrError::InvalidInput(format!("unknown bundled set '{n}' (munu1..munu4)")))),
        (None, None) => bail!(KerrError::InvalidInput("give --set or --displacements".into())),
    }
}

pub fn label(a: &Label) -> Result<()> {
    let disp = resolve_displacement(a.set.as_deref(), a.displacements.as_deref())?;
    let policy = a.fock.policy(2);
    let mean_n = a.fock.alpha0.norm_sqr() + a.fock.r0.sinh().powi(2);
    if (policy.cutoff as f64) < mean_n {
        warn!("cutoff {} is below the mean photon number {mean_n:.3}", policy.cutoff);
    }
    let points = read_points_csv(open(&a.data)?)?;
    let convention: LabelConvention = a.label_convention.into();
    let labels = label_points(&points, disp.pair(), a.fock.alpha0, a.fock.r0, policy, convention)?;
    let rows: Vec<LabeledPoint> = points
        .iter()
        .zip(&labels)
        .map(|(p, &label)| LabeledPoint {
            x1: p.coords()[0],
            x2: p.coords()[1],
            label,
        })
        .collect();
    let mut w = create(&a.out)?;
    write_labeled_csv(&rows, &mut w)?;
    w.flush()?;
    let summary = json!({
        "set": disp,
        "alpha0": complex_pair(a.fock.alpha0),
        "r0": a.fock.r0,
        "cutoff": policy.cutoff,
        "label_convention": convention,
        "counts": label_summary(&labels),
    });
    emit_json(&summary, a.summary.as_deref())
}

fn load_labeled(path: &Path, sample: usize) -> Result<Vec<LabeledPoint>> {
    let mut data = read_labeled_csv(open(path)?)?;
    if sample == 0 {
        bail!(KerrError::InvalidInput("--sample must be >= 1".into()));
    }
    if data.len() > sample {
        info!("using the first {sample} of {} rows", data.len());
        data.truncate(sample);
    }
    Ok(data)
}

fn require_two_classes(data: &[LabeledPoint], cfg: &TrainConfig) -> Result<()> {
    let (train, _) = split_indices(data.len(), cfg.train_fraction, cfg.seed)?;
    let first = data[train[0]].label;
    if train.iter().all(|&i| data[i].label == first) {
        bail!(KerrError::InvalidInput(format!(
            "training split holds only label {first}; need both classes"
        )));
    }
    Ok(())
}

fn base_config(t: &TrainArgs, seed: u64) -> TrainConfig {
    let set_name = t.set_name.clone().unwrap_or_else(|| {
        t.data
            .file_stem()
            .map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned())
    });
    let kernel = KernelSpec::new(t.kernel, t.fock.alpha0)
        .with_r0(t.fock.r0)
        .with_policy(t.fock.policy(modes_of(t.kernel)));
    TrainConfig {
        tol: t.tol,
        max_passes: t.max_passes,
        train_fraction: t.train_fraction,
        ..TrainConfig::new(set_name, kernel, seed)
    }
}

/// A report (its `config` and `set_size`) or a bare config.
fn load_config(path: &Path) -> Result<(TrainConfig, Option<usize>)> {
    let v: Value = serde_json::from_reader(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    match v.get("config") {
        Some(cfg) => {
            let size = v.get("set_size").and_then(Value::as_u64).map(|s| s as usize);
            Ok((serde_json::from_value(cfg.clone())?, size))
        }
        None => Ok((serde_json::from_value(v)?, None)),
    }
}

pub fn train(a: &Train) -> Result<()> {
    let t = &a.common;
    let (cfg, sample) = match &a.config {
        Some(path) => {
            let (cfg, size) = load_config(path)?;
            (cfg, size.unwrap_or(t.sample))
        }
        None => {
            let seed = require_seed(t.seed, "train")?;
            let mut cfg = base_config(t, seed).with_c(a.c);
            cfg.kernel.gamma = a.gamma;
            (cfg, t.sample)
        }
    };
    let data = load_labeled(&t.data, sample)?;
    require_two_classes(&data, &cfg)?;
    let outcome = train_eval(&data, &cfg)?;
    let report: &TrainReport = &outcome.report;
    info!(
        "{}: accuracy {:.4}, {} support vectors, kkt gap {:.2e}",
        report.set_name, report.accuracy, report.n_support, report.kkt_gap
    );
    if !report.converged {
        warn!("SMO stopped after {} iterations without converging", report.iterations);
    }
    if let Some(p) = &a.model {
        emit_json(&outcome.model, Some(p))?;
    }
    if let Some(p) = &a.mesh {
        let mesh = outcome.model.decision_mesh(MESH_STEP)?;
        let mut w = create(p)?;
        write_mesh_csv(&mesh, &mut w)?;
        w.flush()?;
    }
    emit_json(report, a.out.as_deref())
}

pub fn predict(a: &Predict) -> Result<()> {
    let model: TrainedModel =
        serde_json::from_reader(open(&a.model)?).with_context(|| format!("reading {}", a.model.display()))?;
    let points = read_points_csv(open(&a.data)?)?;
    let labels = model.predict(&points)?;
    let rows: Vec<LabeledPoint> = points
        .iter()
        .zip(labels)
        .map(|(p, label)| LabeledPoint {
            x1: p.coords()[0],
            x2: p.coords()[1],
            label,
        })
        .collect();
    let mut w = create(&a.out)?;
    write_labeled_csv(&rows, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn wigner(a: &Wigner) -> Result<()> {
    let g = &a.grid;
    let res = linspace(g.re_min, g.re_max, g.steps)?;
    let ims = linspace(g.im_min, g.im_max, g.steps)?;
    let mut rows = Vec::with_capacity(res.len() * ims.len());
    match (a.x, a.x1, a.x2) {
        (Some(x), _, _) => {
            let policy = a.fock.policy(1);
            let rho = match a.gamma_over_chi {
                Some(ratio) => Some(damped_state(a.fock.alpha0, LossParams::for_encoding(x, ratio)?, policy)?),
                None => None,
            };
            for &re in &res {
                for &im in &ims {
                    let mu = Complex64::new(re, im);
                    let d = match &rho {
                        Some(rho) => displaced_parity_of(rho, mu, policy)?,
                        None => decision_1mode(mu, x, a.fock.alpha0, policy)?,
                    };
                    rows.push((re, im, d));
                }
            }
        }
        (None, Some(x1), Some(x2)) => {
            let policy = a.fock.policy(2);
            for &re in &res {
                for &im in &ims {
                    let pair = DisplacementPair::new(Complex64::new(re, im), a.nu);
                    let dec = TwoModeDecision::new(pair, a.fock.alpha0, a.fock.r0, policy, a.label_convention.into())?;
                    rows.push((re, im, dec.eval(x1, x2)));
                }
            }
        }
        _ => bail!(KerrError::InvalidInput("give --x, or both --x1 and --x2".into())),
    }
    let mut w = create(&a.out)?;
    writeln!(w, "re,im,d_value")?;
    for (re, im, d) in rows {
        writeln!(w, "{re},{im},{d}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn sequential(a: &Sequential) -> Result<()> {
    let evaluation = a.evaluation.into();
    let seed = match a.evaluation {
        EvalMode::Sampled => require_seed(a.seed, "sampled sequential runs")?,
        EvalMode::Exact => a.seed.unwrap_or(0),
    };
    let cfg = SequentialConfig {
        x: a.x,
        true_y: a.label.unwrap_or_else(|| true_label_1mode(a.x)),
        alpha0: a.alpha0,
        mu0: a.mu0,
        epochs: a.epochs,
        shots: a.shots,
        eta: a.eta,
        delta: a.delta,
        seed,
        gradient: a.gradient.into(),
        evaluation,
        policy: TruncationPolicy::new(a.cutoff),
    };
    let records = sequential_run(&cfg)?;
    if let (Some(first), Some(last)) = (records.first(), records.last()) {
        info!("average error {:.4} -> {:.4}", first.avg_error, last.avg_error);
    }
    let mut w = create(&a.out)?;
    write_trace_csv(&records, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Points from the `x*` columns of a headed CSV.
fn read_coordinate_csv(path: &Path) -> Result<Vec<DataPoint>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let cols: Vec<usize> = r
        .headers()?
        .iter()
        .enumerate()
        .filter(|(_, h)| h.trim().starts_with('x'))
        .map(|(i, _)| i)
        .collect();
    if cols.is_empty() {
        bail!(KerrError::InvalidInput(format!("{} has no x* columns", path.display())));
    }
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let coords = cols
            .iter()
            .map(|&i| {
                let s = rec.get(i).unwrap_or("").trim();
                s.parse::<f64>()
                    .map_err(|e| anyhow!(KerrError::InvalidInput(format!("'{s}': {e}"))))
            })
            .collect::<Result<Vec<_>>>()?;
        points.push(DataPoint::new(coords)?);
    }
    Ok(points)
}

pub fn kernel(a: &KernelCmd) -> Result<()> {
    let points = read_coordinate_csv(&a.points)?;
    let mut spec = KernelSpec::new(a.kernel, a.fock.alpha0)
        .with_r0(a.fock.r0)
        .with_policy(a.fock.policy(modes_of(a.kernel)));
    spec.gamma = a.gamma;
    let spec = spec.resolved(&points)?;
    let gram = match a.mode {
        EvalMode::Exact => gram_exact(&points, &spec)?,
        EvalMode::Sampled => gram_sampled(&points, &spec, a.shots, require_seed(a.seed, "sampled Gram matrices")?)?,
    };
    let mut w = create(&a.out)?;
    gram.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SweepMinimum {
    gamma_over_chi: f64,
    alpha_real: f64,
    d_value: f64,
}

pub fn loss_sweep(a: &LossSweep) -> Result<()> {
    let us = linspace(a.u_min, a.u_max, a.steps)?;
    let policy = TruncationPolicy::new(a.cutoff);
    let mut rows = Vec::with_capacity(us.len() * a.gammas.len());
    let mut minima = Vec::with_capacity(a.gammas.len());
    for &ratio in &a.gammas {
        let section = damped_cross_section(&us, LossParams::for_encoding(a.x, ratio)?, a.alpha0, policy)?;
        let (u, d) = section
            .iter()
            .copied()
            .fold((f64::NAN, f64::INFINITY), |best, p| if p.1 < best.1 { p } else { best });
        minima.push(SweepMinimum {
            gamma_over_chi: ratio,
            alpha_real: u,
            d_value: d,
        });
        rows.extend(section.into_iter().map(|(u, d)| (u, d, ratio)));
    }
    let mut w = create(&a.out)?;
    write_cross_section_csv(&rows, &mut w)?;
    w.flush()?;
    emit_json(&json!({ "minima": minima }), None)
}

pub fn grid_search_cmd(a: &GridSearch) -> Result<()> {
    let t = &a.common;
    let cfg = base_config(t, require_seed(t.seed, "grid-search")?);
    let data = load_labeled(&t.data, t.sample)?;
    require_two_classes(&data, &cfg)?;
    let result = grid_search(&data, &cfg, &a.c_grid, &a.gamma_grid)?;
    info!(
        "best C = {} gamma = {}: accuracy {:.4}",
        result.best.c, result.best.gamma, result.best.metrics.accuracy
    );
    emit_json(&json!({ "config": cfg, "set_size": data.len(), "result": result }), a.out.as_deref())
}
