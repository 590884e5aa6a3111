//! The work behind each command. Every function writes its files under `out`
//! atomically and returns what it wrote for further use.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::Direction;
use crate::optimizer::{multistart, Iterate, MultistartResult, Status};
use crate::ridge::{krr_fit, RidgeFit};
use crate::scenario::{anova_check, generate};
use crate::variation::{coordinate_decomposition, finite_difference_check, DirectionalReport};

use super::config::{DataSource, ExperimentConfig};
use super::output::{atomic_write, jsonl, num, Check, ResultRecord, Table};
use super::suites::run_suite;

const FD_STEPS: [f64; 4] = [1e-3, 1e-4, 1e-5, 1e-6];

fn x_header(d: usize) -> Vec<String> {
    (1..=d).map(|k| format!("x{k}")).collect()
}

fn beta_header(d: usize) -> Vec<String> {
    (0..d).map(|k| format!("beta_{k}")).collect()
}

/// Fits at the configured `β` (all ones by default) for every `λ` and writes `fit.csv`.
pub fn run_fit(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<RidgeFit>> {
    let (data, _) = cfg.sample()?;
    let beta = cfg.beta.clone().unwrap_or_else(|| vec![1.0; data.d()]);
    if beta.len() != data.d() {
        return Err(Error::Config(format!(
            "beta of length {} does not match d={}",
            beta.len(),
            data.d()
        )));
    }
    let mut table = Table::new(&[
        "seed",
        "lambda",
        "objective",
        "residual_rms",
        "rkhs_norm_sq",
        "mean_y_sq",
    ])?;
    let mut fits = Vec::new();
    for &lambda in &cfg.lambda_list {
        let fit = krr_fit(&cfg.kernel, &data, &beta, lambda)?;
        let rms = (fit.residuals.iter().map(|r| r * r).sum::<f64>() / data.n() as f64).sqrt();
        table.row([
            cfg.seed.to_string(),
            num(lambda),
            num(fit.objective),
            num(rms),
            num(fit.rkhs_norm_sq),
            num(data.mean_y_sq()),
        ])?;
        fits.push(fit);
    }
    atomic_write(&out.join("fit.csv"), &table.into_bytes()?)?;
    Ok(fits)
}

/// Evaluates the coordinate decomposition of `DJ` at three probes (origin,
/// known support or all ones, random positive) and checks it against finite differences.
/// Writes `derivs.csv` and `fd.csv`.
pub fn run_derivs(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<DirectionalReport>> {
    let (data, truth) = cfg.sample()?;
    let d = data.d();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let support = match &truth {
        Some(t) => (0..d)
            .map(|k| if t.s_star.contains(&k) { 1.0 } else { 0.0 })
            .collect(),
        None => vec![1.0; d],
    };
    let probes: Vec<(&str, Vec<f64>)> = vec![
        ("origin", vec![0.0; d]),
        ("support", support),
        (
            "random",
            (0..d).map(|_| rng.random_range(0.1..2.0)).collect(),
        ),
    ];
    let directions: Vec<Vec<f64>> = probes
        .iter()
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();

    let mut derivs = Table::new(&[
        "probe",
        "lambda",
        "coord",
        "beta",
        "part",
        "coefficient",
        "stationary",
    ])?;
    let mut fd = Table::new(&["probe", "lambda", "step", "analytic", "numeric", "rel_err"])?;
    let mut reports = Vec::new();
    for &lambda in &cfg.lambda_list {
        for ((name, beta), dir) in probes.iter().zip(&directions) {
            let fit = krr_fit(&cfg.kernel, &data, beta, lambda)?;
            let report = coordinate_decomposition(&cfg.kernel, &data, &fit)?;
            for (k, b) in beta.iter().enumerate() {
                let part = if report.onesided_coeff.contains_key(&k) {
                    "onesided"
                } else {
                    "smooth"
                };
                derivs.row([
                    name.to_string(),
                    num(lambda),
                    k.to_string(),
                    num(*b),
                    part.to_string(),
                    num(report.coefficient(k)),
                    report.is_stationary.to_string(),
                ])?;
            }
            let v = Direction::new(dir.clone())?;
            for row in finite_difference_check(&cfg.kernel, &data, beta, lambda, &v, &FD_STEPS)? {
                fd.row([
                    name.to_string(),
                    num(lambda),
                    num(row.step),
                    num(row.analytic),
                    num(row.numeric),
                    num(row.rel_err),
                ])?;
            }
            reports.push(report);
        }
    }
    atomic_write(&out.join("derivs.csv"), &derivs.into_bytes()?)?;
    atomic_write(&out.join("fd.csv"), &fd.into_bytes()?)?;
    Ok(reports)
}

#[derive(Serialize)]
struct TraceLine<'a> {
    lambda: f64,
    start: usize,
    best: bool,
    status: Status,
    support: Vec<usize>,
    iterates: &'a [Iterate],
    terminal_report: &'a DirectionalReport,
}

/// Runs the multistart optimizer for every `λ`. Starts default to all zeros,
/// all ones and one random positive point.
/// Writes `traces.jsonl`, `support.csv`, `beta_path.csv` and `objective_path.csv`.
pub fn run_optimize(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<MultistartResult>> {
    let (data, _) = cfg.sample()?;
    let d = data.d();
    let starts = match &cfg.starts {
        Some(s) => {
            if let Some(bad) = s.iter().find(|b| b.len() != d) {
                return Err(Error::Config(format!(
                    "start of length {} does not match d={d}",
                    bad.len()
                )));
            }
            s.clone()
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            vec![
                vec![0.0; d],
                vec![1.0; d],
                (0..d).map(|_| rng.random_range(0.1..2.0)).collect(),
            ]
        }
    };
    let mut opt = cfg.optimizer.clone();
    opt.seed = cfg.seed;

    let mut lines = Vec::new();
    let mut support = Table::new(&[
        "lambda",
        "start",
        "status",
        "iterations",
        "objective",
        "support",
        "best",
    ])?;
    let mut header = vec!["lambda".to_string(), "start".into(), "iteration".into()];
    header.extend(beta_header(d));
    let mut beta_path = Table::new(&header.iter().map(String::as_str).collect::<Vec<_>>())?;
    let mut obj_path = Table::new(&[
        "lambda",
        "start",
        "iteration",
        "objective",
        "worst_violation",
    ])?;
    let mut results = Vec::new();
    for &lambda in &cfg.lambda_list {
        let res = multistart(&cfg.kernel, &data, lambda, &opt, &starts)?;
        for (s, tr) in res.traces.iter().enumerate() {
            let summary = &res.starts[s];
            let best = s == res.best_start;
            lines.push(serde_json::to_value(TraceLine {
                lambda,
                start: s,
                best,
                status: tr.status,
                support: summary.support.clone(),
                iterates: &tr.iterates,
                terminal_report: &tr.terminal_report,
            })?);
            let status = serde_json::to_value(tr.status)?;
            support.row([
                num(lambda),
                s.to_string(),
                status.as_str().unwrap_or_default().to_string(),
                summary.iterations.to_string(),
                num(summary.objective),
                summary
                    .support
                    .iter()
                    .map(|k| k.to_string())
                    .collect::<Vec<_>>()
                    .join(" "),
                best.to_string(),
            ])?;
            for (it, step) in tr.iterates.iter().enumerate() {
                let mut row = vec![num(lambda), s.to_string(), it.to_string()];
                row.extend(step.beta.iter().map(|b| num(*b)));
                beta_path.row(row)?;
                obj_path.row([
                    num(lambda),
                    s.to_string(),
                    it.to_string(),
                    num(step.objective),
                    num(step.worst_violation),
                ])?;
            }
        }
        results.push(res);
    }
    atomic_write(&out.join("traces.jsonl"), &jsonl(&lines)?)?;
    atomic_write(&out.join("support.csv"), &support.into_bytes()?)?;
    atomic_write(&out.join("beta_path.csv"), &beta_path.into_bytes()?)?;
    atomic_write(&out.join("objective_path.csv"), &obj_path.into_bytes()?)?;
    Ok(results)
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub records: Vec<ResultRecord>,
    pub all_pass: bool,
}

impl VerifyOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &ResultRecord> {
        self.records.iter().filter(|r| !r.pass)
    }
}

/// Runs the named suites in order. Writes `verify/<suite>.jsonl`, `summary.csv`
/// (one row per record) and `timings.csv`. Wall times only appear in the latter.
pub fn run_verify(suites: &[String], seed: u64, out: &Path) -> Result<VerifyOutcome> {
    let mut records = Vec::new();
    for name in suites {
        let recs = run_suite(name, seed)?;
        atomic_write(
            &out.join("verify").join(format!("{name}.jsonl")),
            &jsonl(&recs)?,
        )?;
        records.extend(recs);
    }
    let mut summary = Table::new(&[
        "suite",
        "case",
        "seed",
        "check",
        "key",
        "value",
        "tolerance",
        "pass",
    ])?;
    let mut timings = Table::new(&["suite", "case", "runtime_ms"])?;
    for r in &records {
        let (check, key) = match &r.check {
            Check::AtMost(k) => ("at_most", k.as_str()),
            Check::AtLeast(k) => ("at_least", k.as_str()),
            Check::Report => ("report", ""),
        };
        let value = r.quantities.get(key).map(|v| num(*v)).unwrap_or_default();
        summary.row([
            r.suite.clone(),
            r.case.clone(),
            r.seed.to_string(),
            check.to_string(),
            key.to_string(),
            value,
            num(r.tolerance),
            r.pass.to_string(),
        ])?;
        timings.row([r.suite.clone(), r.case.clone(), r.runtime_ms.to_string()])?;
    }
    atomic_write(&out.join("summary.csv"), &summary.into_bytes()?)?;
    atomic_write(&out.join("timings.csv"), &timings.into_bytes()?)?;
    let all_pass = records.iter().all(|r| r.pass);
    Ok(VerifyOutcome { records, all_pass })
}

/// Samples the configured scenario and writes `scenario.csv` (`x1..xd,y`) and `truth.json`.
pub fn run_scenario_gen(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let spec = match &cfg.scenario {
        Some(DataSource::Scenario(s)) => s,
        _ => {
            return Err(Error::Config(
                "`scenario gen` needs a scenario spec, not a csv".into(),
            ))
        }
    };
    let sc = generate(spec)?;
    let mut header = x_header(sc.data.d());
    header.push("y".into());
    let mut table = Table::new(&header.iter().map(String::as_str).collect::<Vec<_>>())?;
    for i in 0..sc.data.n() {
        let mut row: Vec<String> = sc.data.row(i).iter().map(|v| num(*v)).collect();
        row.push(num(sc.data.y()[i]));
        table.row(row)?;
    }
    let anova = anova_check(spec, &sc.data)?;
    let truth = serde_json::json!({
        "spec": spec,
        "s_star": sc.truth.s_star,
        "noise_coords": sc.truth.noise_coords,
        "mean_y_sq": sc.data.mean_y_sq(),
        "anova": anova,
    });
    atomic_write(&out.join("scenario.csv"), &table.into_bytes()?)?;
    atomic_write(&out.join("truth.json"), &serde_json::to_vec_pretty(&truth)?)?;
    Ok(())
}
