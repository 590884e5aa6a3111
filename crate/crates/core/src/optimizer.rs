//! Projected nonsmooth descent on `β ≥ 0`.
//!
//! Active coordinates follow `−g_k`; inactive ones are switched on only when
//! their one-sided coefficient `h_k` is below `−tol_h`. Trial points are
//! projected onto `[0, box_bound]^d` with exact zeros, and a step is accepted
//! only if it strictly decreases `J` by an Armijo fraction of the predicted
//! decrease.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::kernel::KernelSpec;
use crate::ridge::{krr_fit, RidgeFit, SampleSet};
use crate::variation::{coordinate_decomposition_with, DirectionalReport, Tolerances};

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Largest coordinate move of a trial step.
    pub step0: f64,
    pub backtrack: f64,
    pub max_iters: usize,
    /// `None` uses [`Tolerances::default_for`].
    pub tol_g: Option<f64>,
    pub tol_h: Option<f64>,
    /// Cap on the value given to a coordinate when it is activated.
    pub activation_threshold: f64,
    pub box_bound: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            step0: 1.0,
            backtrack: 0.5,
            max_iters: 300,
            tol_g: None,
            tol_h: None,
            activation_threshold: 0.1,
            box_bound: 1e3,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return bad("step0 must be positive");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack must lie in (0, 1)");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        for t in [self.tol_g, self.tol_h].into_iter().flatten() {
            if !(t > 0.0 && t.is_finite()) {
                return bad("tolerances must be positive");
            }
        }
        if !(self.activation_threshold >= 0.0 && self.activation_threshold.is_finite()) {
            return bad("activation_threshold must be nonnegative");
        }
        if !(self.box_bound > 0.0 && self.box_bound.is_finite()) {
            return bad("box_bound must be positive and finite");
        }
        Ok(())
    }

    pub fn tolerances(&self, data: &SampleSet, lambda: f64) -> Tolerances {
        let def = Tolerances::default_for(data, lambda);
        Tolerances {
            g: self.tol_g.unwrap_or(def.g),
            h: self.tol_h.unwrap_or(def.h),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    StationaryCertified,
    MaxIters,
    BoxBoundary,
    /// No trial step along a descent direction lowered `J` above round-off.
    LineSearchStalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub beta: Vec<f64>,
    pub objective: f64,
    pub worst_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerTrace {
    pub iterates: Vec<Iterate>,
    pub terminal_fit: RidgeFit,
    pub terminal_report: DirectionalReport,
    pub status: Status,
    pub tolerances: Tolerances,
}

impl OptimizerTrace {
    pub fn terminal_beta(&self) -> &[f64] {
        &self.terminal_fit.beta
    }

    pub fn terminal_objective(&self) -> f64 {
        self.terminal_fit.objective
    }

    /// Coordinates that are exactly nonzero at termination.
    pub fn support(&self) -> Vec<usize> {
        let b = self.terminal_beta();
        (0..b.len()).filter(|&k| b[k] != 0.0).collect()
    }
}

fn decompose(
    spec: &KernelSpec,
    data: &SampleSet,
    fit: &RidgeFit,
    tol: Tolerances,
) -> Result<DirectionalReport> {
    let rep = coordinate_decomposition_with(spec, data, fit, tol)?;
    if !rep.worst_violation.is_finite() {
        return Err(Error::Numerical(
            "non-finite directional coefficients".into(),
        ));
    }
    Ok(rep)
}

/// Descent direction in coordinate form: `−g_k` on the support, `−h_k > 0`
/// for inactive coordinates that should be switched on, zero elsewhere.
fn direction(report: &DirectionalReport, d: usize, tol_h: f64) -> Vec<f64> {
    (0..d)
        .map(|k| match report.onesided_coeff.get(&k) {
            Some(&h) if h < -tol_h => -h,
            Some(_) => 0.0,
            None => -report.smooth_grad.get(&k).copied().unwrap_or(0.0),
        })
        .collect()
}

/// Minimizes `J(·, λ)` from `|β⁰|`.
pub fn optimize(
    spec: &KernelSpec,
    data: &SampleSet,
    beta0: &[f64],
    lambda: f64,
    cfg: &OptimizerConfig,
) -> Result<OptimizerTrace> {
    cfg.validate()?;
    check_len("beta0", data.d(), beta0.len())?;
    if beta0.iter().any(|b| !b.is_finite()) {
        return Err(Error::Domain("beta0 must be finite".into()));
    }
    let d = data.d();
    let tol = cfg.tolerances(data, lambda);
    let mut beta: Vec<f64> = beta0.iter().map(|b| b.abs().min(cfg.box_bound)).collect();
    let mut fit = krr_fit(spec, data, &beta, lambda)?;
    let mut report = decompose(spec, data, &fit, tol)?;
    let mut iterates = vec![Iterate {
        beta: beta.clone(),
        objective: fit.objective,
        worst_violation: report.worst_violation,
    }];
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut step = f64::NAN;

    let status = loop {
        if report.is_stationary {
            break Status::StationaryCertified;
        }
        if iterates.len() > cfg.max_iters {
            break Status::MaxIters;
        }
        let dir = direction(&report, d, tol.h);
        let dmax = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if dmax == 0.0 {
            // violation comes from a coordinate we may not move
            break Status::LineSearchStalled;
        }

        // Barzilai–Borwein guess from the last accepted pair, capped to step0 per coordinate.
        let cap = cfg.step0 / dmax;
        let mut t = match &prev {
            Some((s, yv)) => {
                let sy: f64 = s.iter().zip(yv).map(|(a, b)| a * b).sum();
                let ss: f64 = s.iter().map(|a| a * a).sum();
                if sy > 0.0 {
                    ss / sy
                } else {
                    2.0 * step
                }
            }
            None => cap,
        };
        if !(t > 0.0 && t.is_finite()) || t > cap {
            t = cap;
        }

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial = beta.clone();
            for k in 0..d {
                if dir[k] == 0.0 {
                    continue;
                }
                let next = if beta[k] == 0.0 {
                    (t * dir[k]).min(cfg.activation_threshold)
                } else {
                    let v = beta[k] + t * dir[k];
                    if v <= 0.0 {
                        0.0
                    } else {
                        v
                    }
                };
                trial[k] = next.min(cfg.box_bound);
            }
            // predicted = −DJ[trial − β] = Σ |dir_k| |Δ_k| because every move follows dir's sign
            let predicted: f64 = (0..d)
                .map(|k| dir[k].abs() * (trial[k] - beta[k]).abs())
                .sum();
            if trial != beta {
                let cand = krr_fit(spec, data, &trial, lambda)?;
                if !cand.objective.is_finite() {
                    return Err(Error::Numerical("objective is not finite".into()));
                }
                if cand.objective < fit.objective
                    && cand.objective <= fit.objective - ARMIJO * predicted
                {
                    accepted = Some((trial, cand));
                    break;
                }
            }
            t *= cfg.backtrack;
        }
        let Some((next_beta, next_fit)) = accepted else {
            break Status::LineSearchStalled;
        };

        let next_report = decompose(spec, data, &next_fit, tol)?;
        let next_dir = direction(&next_report, d, tol.h);
        let s: Vec<f64> = next_beta.iter().zip(&beta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = dir.iter().zip(&next_dir).map(|(a, b)| a - b).collect();
        prev = Some((s, yv));
        step = t;
        beta = next_beta;
        fit = next_fit;
        report = next_report;
        iterates.push(Iterate {
            beta: beta.clone(),
            objective: fit.objective,
            worst_violation: report.worst_violation,
        });
        if beta.iter().any(|&b| b >= cfg.box_bound) {
            break if report.is_stationary {
                Status::StationaryCertified
            } else {
                Status::BoxBoundary
            };
        }
    };

    Ok(OptimizerTrace {
        iterates,
        terminal_fit: fit,
        terminal_report: report,
        status,
        tolerances: tol,
    })
}

/// `J` never increases along the trace and, if it starts below `mean(y²)`, stays there.
pub fn monotone_guard(trace: &OptimizerTrace, mean_y_sq: f64) -> bool {
    let j: Vec<f64> = trace.iterates.iter().map(|it| it.objective).collect();
    let monotone = j.windows(2).all(|w| w[1] <= w[0]);
    let below = match j.first() {
        Some(&j0) if j0 < mean_y_sq => j.iter().all(|&v| v < mean_y_sq),
        _ => true,
    };
    monotone && below
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub start: usize,
    pub support: Vec<usize>,
    pub objective: f64,
    pub status: Status,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistartResult {
    pub best_start: usize,
    /// One trace per start, in input order.
    pub traces: Vec<OptimizerTrace>,
    pub starts: Vec<StartSummary>,
}

impl MultistartResult {
    pub fn best(&self) -> &OptimizerTrace {
        &self.traces[self.best_start]
    }

    /// Coordinates active in at least one terminal point.
    pub fn union_support(&self) -> BTreeSet<usize> {
        self.starts
            .iter()
            .flat_map(|s| s.support.iter().copied())
            .collect()
    }
}

/// Runs [`optimize`] from every start and keeps the lowest terminal `J`
/// (ties go to the earliest start).
pub fn multistart(
    spec: &KernelSpec,
    data: &SampleSet,
    lambda: f64,
    cfg: &OptimizerConfig,
    starts: &[Vec<f64>],
) -> Result<MultistartResult> {
    if starts.is_empty() {
        return Err(Error::Domain("multistart needs at least one start".into()));
    }
    let traces: Vec<OptimizerTrace> = starts
        .par_iter()
        .map(|b| optimize(spec, data, b, lambda, cfg))
        .collect::<Result<_>>()?;
    let summaries = traces
        .iter()
        .enumerate()
        .map(|(i, t)| StartSummary {
            start: i,
            support: t.support(),
            objective: t.terminal_objective(),
            status: t.status,
            iterations: t.iterates.len() - 1,
        })
        .collect();
    let best_start = (0..traces.len())
        .min_by(|&a, &b| {
            traces[a]
                .terminal_objective()
                .total_cmp(&traces[b].terminal_objective())
                .then(a.cmp(&b))
        })
        .expect("nonempty");
    Ok(MultistartResult {
        best_start,
        traces,
        starts: summaries,
    })
}
