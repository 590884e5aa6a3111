//! Verification suites. Each suite is a list of cases; every case derives its
//! randomness from `case_seed(seed, suite, case)` and yields one or more
//! records whose verdicts can be recomputed from the stored quantities.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::{Atom, Direction, KernelFamily, KernelSpec, MixtureMeasure};
use crate::optimizer::{monotone_guard, optimize, OptimizerConfig, Status};
use crate::par;
use crate::proxy::{
    cnd_double_sum, cnd_quadrature_oracle, decomposition_gap, gap_scaling,
    grouped_conditional_mean, proxy_anova, WeightedPoint, ZetaGrid,
};
use crate::ridge::{identity_defects, krr_fit, objective_value, SampleSet};
use crate::scenario::{generate, ScenarioSpec};
use crate::variation::{
    coordinate_decomposition, directional_derivative, finite_difference_check,
    noise_descent_direction, origin_second_order_quotient, relative_error,
};

use super::output::{case_seed, ResultRecord};

pub const SUITES: &[&str] = &[
    "identities",
    "first-variation",
    "laplace-vs-gaussian",
    "cnd-oracle",
    "proxy-scaling",
    "noise-elimination",
    "main-effect-recovery",
    "interaction-trap",
    "escape",
];

/// Seeds per statistical suite.
const SEEDS: u64 = 10;
const PROXY_DRAWS: usize = 20_000;
const FD_STEP: f64 = 1e-6;

/// Runs one named suite.
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<ResultRecord>> {
    match name {
        "identities" => identities(seed),
        "first-variation" => first_variation(seed),
        "laplace-vs-gaussian" => laplace_vs_gaussian(seed),
        "cnd-oracle" => cnd_oracle(seed),
        "proxy-scaling" => proxy_scaling(seed),
        "noise-elimination" => noise_elimination(seed),
        "main-effect-recovery" => main_effect_recovery(seed),
        "interaction-trap" => interaction_trap(seed),
        "escape" => escape(seed),
        other => Err(Error::Config(format!("unknown suite '{other}'"))),
    }
}

/// Runs `cases` in parallel, keeps case order, and stamps each record with its case's wall time.
fn cases<F>(count: usize, f: F) -> Result<Vec<ResultRecord>>
where
    F: Fn(usize) -> Result<Vec<ResultRecord>> + Sync + Send,
{
    let out = par::map_rows(count, |i| {
        let start = Instant::now();
        let recs = f(i)?;
        let ms = start.elapsed().as_millis() as u64;
        Ok(recs
            .into_iter()
            .map(|mut r| {
                r.runtime_ms = ms;
                r
            })
            .collect::<Vec<_>>())
    });
    Ok(out.into_iter().collect::<Result<Vec<_>>>()?.concat())
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = par::pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    (mean, (par::pairwise_sum(&dev) / (n - 1.0) / n).sqrt())
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn mixture() -> MixtureMeasure {
    MixtureMeasure::new(vec![Atom { t: 0.5, p: 0.3 }, Atom { t: 2.0, p: 0.7 }])
        .expect("valid atoms")
}

fn fixture_kernel(i: usize) -> KernelSpec {
    let family = if i.is_multiple_of(2) {
        KernelFamily::L1Mixture
    } else {
        KernelFamily::RadialMixture
    };
    let mu = if i % 4 < 2 {
        MixtureMeasure::dirac(1.0).expect("valid atom")
    } else {
        mixture()
    };
    KernelSpec::new(family, mu)
}

fn random_fixture(rng: &mut ChaCha8Rng, n: usize, d: usize) -> SampleSet {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| r[0].sin() + 0.5 * r[d - 1] * r[d - 1] + 0.2 * rng.random_range(-1.0..1.0))
        .collect();
    SampleSet::new(rows, y).expect("finite fixture").centered()
}

fn random_beta(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d)
        .map(|_| {
            if rng.random_bool(0.25) {
                0.0
            } else {
                rng.random_range(-2.0..2.0)
            }
        })
        .collect()
}

fn identities(seed: u64) -> Result<Vec<ResultRecord>> {
    const NAME: &str = "identities";
    cases(20, |i| {
        let s = case_seed(seed, NAME, i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let n = rng.random_range(2..=64);
        let d = rng.random_range(1..=8);
        let spec = fixture_kernel(i);
        let lambda = if i < 10 { 1e-2 } else { 1.0 };
        let data = random_fixture(&mut rng, n, d);
        let beta = random_beta(&mut rng, d);
        let fit = krr_fit(&spec, &data, &beta, lambda)?;
        let def = identity_defects(&spec, &data, &fit)?;
        let abs: Vec<f64> = beta.iter().map(|b| b.abs()).collect();
        let j_abs = objective_value(&spec, &data, &abs, lambda)?;
        let sign = (fit.objective - j_abs).abs() / fit.objective.abs().max(f64::MIN_POSITIVE);
        let worst = def.max().max(sign);
        Ok(vec![ResultRecord::new(NAME, format!("fixture-{i:02}"), s)
            .with("n", n as f64)
            .with("d", d as f64)
            .with("lambda", lambda)
            .with("euler_lagrange", def.euler_lagrange)
            .with("dual_residual", def.dual_residual)
            .with("r_r_k", def.r_r_k)
            .with("objective_excess", def.objective_excess)
            .with("norm_excess", def.norm_excess)
            .with("sign_invariance", sign)
            .with("worst", worst)
            .at_most("worst", 1e-8)])
    })
}

fn first_variation(seed: u64) -> Result<Vec<ResultRecord>> {
    const NAME: &str = "first-variation";
    cases(12, |i| {
        let s = case_seed(seed, NAME, i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let n = rng.random_range(10..=40);
        let d = rng.random_range(2..=5);
        let spec = fixture_kernel(i);
        let lambda = 0.1;
        let data = random_fixture(&mut rng, n, d);
        let mut beta: Vec<f64> = (0..d)
            .map(|_| rng.random_range(0.3..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        beta[0] = 0.0;
        let fit = krr_fit(&spec, &data, &beta, lambda)?;
        let report = coordinate_decomposition(&spec, &data, &fit)?;
        let mixed: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        // radial kernels are flat along a lone zero coordinate, so pair it with another
        let mut into_zero = Direction::unit(d, 0).into_inner();
        if !spec.is_l1() {
            into_zero[d - 1] = 0.5;
        }
        let mut out_of_zero = into_zero.clone();
        out_of_zero[0] = -1.0;
        out_of_zero[d - 1] = 0.5;
        let mut recs = Vec::new();
        for (label, v) in [
            ("mixed", mixed),
            ("zero-up", into_zero),
            ("zero-down", out_of_zero),
        ] {
            let v = Direction::new(v)?;
            let rows = finite_difference_check(
                &spec,
                &data,
                &beta,
                lambda,
                &v,
                &[FD_STEP, 2.0 * FD_STEP],
            )?;
            let dj = rows[0].analytic;
            // one-sided Richardson step: cancels the O(s) truncation of the plain quotient
            let extrapolated = 2.0 * rows[0].numeric - rows[1].numeric;
            let recon = (dj - report.reconstruct(&v)).abs() / dj.abs().max(1.0);
            let case = format!("fixture-{i:02}-{label}");
            recs.push(
                ResultRecord::new(NAME, format!("{case}-fd"), s)
                    .with("step", FD_STEP)
                    .with("analytic", dj)
                    .with("quotient", rows[0].numeric)
                    .with("quotient_rel_err", rows[0].rel_err)
                    .with("extrapolated", extrapolated)
                    .with("rel_err", relative_error(dj, extrapolated))
                    .at_most("rel_err", 1e-4),
            );
            recs.push(
                ResultRecord::new(NAME, format!("{case}-reconstruction"), s)
                    .with("derivative", dj)
                    .with("reconstruction_err", recon)
                    .at_most("reconstruction_err", 1e-10),
            );
        }
        Ok(recs)
    })
}

fn three_point() -> SampleSet {
    let x = [-1.0, 0.0, 1.0];
    let rows = x.iter().map(|&v| vec![v]).collect();
    SampleSet::new(rows, x.iter().map(|v| v * v - 2.0 / 3.0).collect()).expect("fixture")
}

fn rademacher_pair() -> SampleSet {
    SampleSet::new(vec![vec![-1.0], vec![1.0]], vec![-1.0, 1.0]).expect("fixture")
}

fn laplace_vs_gaussian(seed: u64) -> Result<Vec<ResultRecord>> {
    const NAME: &str = "laplace-vs-gaussian";
    let lambdas = [0.1, 1.0];
    cases(lambdas.len(), |i| {
        let lambda = lambdas[i];
        let s = case_seed(seed, NAME, i as u64);
        let lap = KernelSpec::laplace();
        let gauss = KernelSpec::gaussian();
        let tri = three_point();
        let pair = rademacher_pair();
        let tag = format!("lambda-{lambda}");

        let fit = krr_fit(&lap, &tri, &[0.0], lambda)?;
        let h = coordinate_decomposition(&lap, &tri, &fit)?.coefficient(0);
        let expected = -4.0 / (81.0 * lambda);
        let fit_g = krr_fit(&gauss, &tri, &[0.0], lambda)?;
        let dg = directional_derivative(&gauss, &tri, &fit_g, &Direction::unit(1, 0))?;
        let q = origin_second_order_quotient(&gauss, &tri, 0, lambda, 1e-4)?;
        let fit_p = krr_fit(&lap, &pair, &[0.0], lambda)?;
        let hp = coordinate_decomposition(&lap, &pair, &fit_p)?.coefficient(0);

        Ok(vec![
            ResultRecord::new(NAME, format!("{tag}-laplace-three-point"), s)
                .with("h", h)
                .with("expected", expected)
                .with("abs_err", (h - expected).abs())
                .at_most("abs_err", 1e-10),
            ResultRecord::new(NAME, format!("{tag}-gaussian-first-order"), s)
                .with("derivative", dg)
                .with("abs_derivative", dg.abs())
                .at_most("abs_derivative", 1e-12),
            ResultRecord::new(NAME, format!("{tag}-gaussian-second-order"), s)
                .with("step", 1e-4)
                .with("quotient", q)
                .with("abs_quotient", q.abs())
                .at_most("abs_quotient", 1e-6),
            ResultRecord::new(NAME, format!("{tag}-laplace-rademacher-pair"), s)
                .with("h", hp)
                .with("expected", -1.0 / lambda)
                .with("abs_err", (hp + 1.0 / lambda).abs())
                .at_most("abs_err", 1e-10),
        ])
    })
}

fn cnd_oracle(seed: u64) -> Result<Vec<ResultRecord>> {
    const NAME: &str = "cnd-oracle";
    cases(11, |i| {
        let s = case_seed(seed, NAME, i as u64);
        let points = if i == 10 {
            [(-1.0, -1.0), (1.0, 1.0)]
                .iter()
                .map(|&(x, f)| WeightedPoint {
                    x,
                    f: Complex64::new(f, 0.0),
                    w: 0.5,
                })
                .collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let m = rng.random_range(2..=12);
            // abscissae on a 0.05 grid so repeated points occur
            let mut pts: Vec<WeightedPoint> = (0..m)
                .map(|_| WeightedPoint {
                    x: rng.random_range(-40i32..=40) as f64 * 0.05,
                    f: Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                    w: rng.random_range(0.1..1.0),
                })
                .collect();
            let wsum: f64 = pts.iter().map(|p| p.w).sum();
            let mean: Complex64 = pts.iter().map(|p| p.f * p.w).sum::<Complex64>() / wsum;
            pts.iter_mut().for_each(|p| p.f -= mean);
            pts
        };
        let direct = cnd_double_sum(&points);
        let quad = cnd_quadrature_oracle(&points, ZetaGrid::default())?;
        let case = if i == 10 {
            "rademacher".to_string()
        } else {
            format!("fixture-{i:02}")
        };
        let mut rec = ResultRecord::new(NAME, case, s)
            .with("points", points.len() as f64)
            .with("direct", direct)
            .with("quadrature", quad)
            .with("abs_err", (quad - direct).abs());
        if i == 10 {
            rec = rec.with("rademacher_err", (quad + 1.0).abs());
            rec = rec.with("worst", (quad + 1.0).abs().max((quad - direct).abs()));
        } else {
            rec = rec.with("worst", (quad - direct).abs());
        }
        Ok(vec![rec.at_most("worst", 1e-4)])
    })
}

fn proxy_scaling(seed: u64) -> Result<Vec<ResultRecord>> {
    const NAME: &str = "proxy-scaling";
    let s = case_seed(seed, NAME, 0);
    let spec = KernelSpec::laplace();
    let sc = generate(&ScenarioSpec::main_effect(2000, 1, s))?;
    let data = &sc.data;
    let lambdas = [1e-1, 1e-2, 1e-3, 1e-4];
    cases(3, |i| match i {
        0 => {
            let cm = grouped_conditional_mean(data, &[0]);
            let rows = decomposition_gap(
                &spec,
                data,
                &[1.0, 0.0, 0.0],
                1,
                &lambdas,
                &cm,
                PROXY_DRAWS,
                s,
            )?;
            let (slope, c_hat) = gap_scaling(&rows);
            let m = rows[0].proxy;
            let se = rows[0].proxy_std_error;
            let mut gap_rec = ResultRecord::new(NAME, "main-effect-gap", s);
            for r in &rows {
                gap_rec = gap_rec.with(&format!("gap_lambda_{:e}", r.lambda), r.gap);
            }
            Ok(vec![
                gap_rec
                    .with("slope", slope)
                    .with("c_hat", c_hat)
                    .at_least("slope", 0.4),
                ResultRecord::new(NAME, "main-effect-proxy", s)
                    .with("proxy", m)
                    .with("std_error", se)
                    .with("z", m / se.max(f64::MIN_POSITIVE))
                    .at_least("z", 3.0),
            ])
        }
        1 => {
            let cm = grouped_conditional_mean(data, &[0, 1]);
            let p = proxy_anova(&spec, data, &[1.0, 1.0, 0.0], 2, Some(&cm), PROXY_DRAWS, s)?;
            Ok(vec![ResultRecord::new(NAME, "saturated-support", s)
                .with("proxy", p.value)
                .with("std_error", p.std_error)
                .with("excess", p.value - 3.0 * p.std_error)
                .at_most("excess", 0.0)])
        }
        _ => {
            // population value 0; the empirical V-statistic carries an O(1/n) bias
            let cm = grouped_conditional_mean(data, &[0]);
            let p = proxy_anova(&spec, data, &[1.0, 0.0, 0.0], 2, Some(&cm), PROXY_DRAWS, s)?;
            Ok(vec![ResultRecord::new(NAME, "noise-coordinate-bias", s)
                .with("proxy", p.value)
                .with("std_error", p.std_error)
                .with("n_times_proxy", p.value * data.n() as f64)])
        }
    })
}

const NOISE_D: usize = 8;
const NOISE_N: usize = 2000;
const NOISE_SIGMA: f64 = 0.1;

fn noise_elimination(seed: u64) -> Result<Vec<ResultRecord>> {
    const NAME: &str = "noise-elimination";
    let lambda = 1e-2;
    let spec = KernelSpec::laplace();
    let cfg = OptimizerConfig::default();
    let mut recs = cases(SEEDS as usize, |i| {
        let s = case_seed(seed, NAME, i as u64);
        let sc = generate(&ScenarioSpec::noise_elimination(
            NOISE_D,
            NOISE_N,
            NOISE_SIGMA,
            s,
        ))?;
        let beta0 = vec![1.0; NOISE_D];
        let fit0 = krr_fit(&spec, &sc.data, &beta0, lambda)?;
        let v = noise_descent_direction(&beta0, &sc.truth.noise_coords);
        let dj = directional_derivative(&spec, &sc.data, &fit0, &v)?;
        let tr = optimize(&spec, &sc.data, &beta0, lambda, &cfg)?;
        let noise_zero = sc
            .truth
            .noise_coords
            .iter()
            .all(|&k| tr.terminal_beta()[k] == 0.0);
        let certified = tr.status == Status::StationaryCertified;
        let below = tr.terminal_objective() < sc.data.mean_y_sq();
        let monotone = monotone_guard(&tr, sc.data.mean_y_sq());
        let ok = certified && noise_zero && below && monotone;
        let mut rec = ResultRecord::new(NAME, format!("seed-{i:02}"), s)
            .with("certified", flag(certified))
            .with("noise_zero", flag(noise_zero))
            .with("objective", tr.terminal_objective())
            .with("mean_y_sq", sc.data.mean_y_sq())
            .with("monotone", flag(monotone))
            .with("iterations", (tr.iterates.len() - 1) as f64)
            .with("start_noise_derivative", dj)
            .with("success", flag(ok));
        for (k, b) in tr.terminal_beta().iter().enumerate() {
            rec = rec.with(&format!("beta_{k}"), *b);
        }
        Ok(vec![rec])
    })?;
    let successes: f64 = recs.iter().map(|r| r.quantities["success"]).sum();
    let djs: Vec<f64> = recs
        .iter()
        .map(|r| r.quantities["start_noise_derivative"])
        .collect();
    let (mean, se) = mean_se(&djs);
    recs.push(
        ResultRecord::new(NAME, "summary-eliminated", seed)
            .with("successes", successes)
            .with("runs", SEEDS as f64)
            .at_least("successes", 9.0),
    );
    recs.push(
        ResultRecord::new(NAME, "summary-start-derivative", seed)
            .with("mean", mean)
            .with("std_error", se)
            .with("mean_minus_2se", mean - 2.0 * se)
            .at_most("mean_minus_2se", 0.0),
    );
    Ok(recs)
}

fn main_effect_recovery(seed: u64) -> Result<Vec<ResultRecord>> {
    const NAME: &str = "main-effect-recovery";
    let lambdas = [1e-2, 1e-3];
    let spec = KernelSpec::laplace();
    let cfg = OptimizerConfig::default();
    let n_cases = lambdas.len() * SEEDS as usize;
    let mut recs = cases(n_cases, |c| {
        let lambda = lambdas[c / SEEDS as usize];
        let i = c % SEEDS as usize;
        let s = case_seed(seed, NAME, i as u64);
        let sc = generate(&ScenarioSpec::noise_elimination(
            NOISE_D,
            NOISE_N,
            NOISE_SIGMA,
            s,
        ))?;
        let mut certified = 0usize;
        let mut recovered = 0usize;
        let mut rec = ResultRecord::new(NAME, format!("lambda-{lambda}-seed-{i:02}"), s)
            .with("lambda", lambda);
        for (label, b0) in [("zero", 0.0), ("one", 1.0)] {
            let tr = optimize(&spec, &sc.data, &[b0; NOISE_D], lambda, &cfg)?;
            if tr.status == Status::StationaryCertified {
                certified += 1;
                let b = tr.terminal_beta();
                if sc.truth.s_star.iter().all(|&k| b[k] > 0.0) {
                    recovered += 1;
                }
            }
            rec = rec.with(
                &format!("start_{label}_support_size"),
                tr.support().len() as f64,
            );
        }
        let ok = certified > 0 && recovered == certified;
        Ok(vec![rec
            .with("certified", certified as f64)
            .with("recovered", recovered as f64)
            .with("success", flag(ok))])
    })?;
    for &lambda in &lambdas {
        let successes: f64 = recs
            .iter()
            .filter(|r| r.quantities.get("lambda") == Some(&lambda))
            .map(|r| r.quantities["success"])
            .sum();
        recs.push(
            ResultRecord::new(NAME, format!("summary-lambda-{lambda}"), seed)
                .with("lambda", lambda)
                .with("successes", successes)
                .at_least("successes", 9.0),
        );
    }
    Ok(recs)
}

fn interaction_trap(seed: u64) -> Result<Vec<ResultRecord>> {
    const NAME: &str = "interaction-trap";
    let lambda = 1e-2;
    let d = 6;
    let spec = KernelSpec::laplace();
    let cfg = OptimizerConfig::default();
    let mut recs = cases(SEEDS as usize, |i| {
        let s = case_seed(seed, NAME, i as u64);
        let plain = generate(&ScenarioSpec::xor(2, 400, s))?;
        let trap = optimize(&spec, &plain.data, &[0.0, 0.0], lambda, &cfg)?;
        let trapped = trap.status == Status::StationaryCertified
            && trap.iterates.len() == 1
            && trap.support().is_empty();

        let sc = generate(&ScenarioSpec::xor(d, 800, s))?;
        let mut probe = vec![0.0; d];
        probe[0] = 1.0;
        let fit = krr_fit(&spec, &sc.data, &probe, lambda)?;
        let h = coordinate_decomposition(&spec, &sc.data, &fit)?.coefficient(1);
        probe[1] = 0.5;
        let tr = optimize(&spec, &sc.data, &probe, lambda, &cfg)?;
        let b = tr.terminal_beta();
        let active = b[0] > 0.0 && b[1] > 0.0;
        Ok(vec![ResultRecord::new(NAME, format!("seed-{i:02}"), s)
            .with("trap_certified", flag(trapped))
            .with("h_second_at_first_axis", h)
            .with(
                "escape_status_certified",
                flag(tr.status == Status::StationaryCertified),
            )
            .with("escape_support_contains_pair", flag(active))
            .with("escape_support_size", tr.support().len() as f64)])
    })?;
    let trapped: f64 = recs.iter().map(|r| r.quantities["trap_certified"]).sum();
    let active: f64 = recs
        .iter()
        .map(|r| r.quantities["escape_support_contains_pair"])
        .sum();
    let hs: Vec<f64> = recs
        .iter()
        .map(|r| r.quantities["h_second_at_first_axis"])
        .collect();
    let (mean, se) = mean_se(&hs);
    recs.push(
        ResultRecord::new(NAME, "summary-trap", seed)
            .with("certified_at_origin", trapped)
            .at_least("certified_at_origin", SEEDS as f64),
    );
    recs.push(
        ResultRecord::new(NAME, "summary-activation-coefficient", seed)
            .with("mean", mean)
            .with("std_error", se)
            .with("mean_plus_3se", mean + 3.0 * se)
            .at_most("mean_plus_3se", 0.0),
    );
    recs.push(
        ResultRecord::new(NAME, "summary-escape-support", seed)
            .with("successes", active)
            .at_least("successes", 9.0),
    );
    Ok(recs)
}

fn escape(seed: u64) -> Result<Vec<ResultRecord>> {
    const NAME: &str = "escape";
    let lambdas = [1e-2, 1e-1];
    cases(3 * lambdas.len(), |c| {
        let lambda = lambdas[c % lambdas.len()];
        let i = c / lambdas.len();
        let s = case_seed(seed, NAME, i as u64);
        let sc = generate(&ScenarioSpec::noise_elimination(4, 500, NOISE_SIGMA, s))?;
        let data = sc.data.centered();
        let j = objective_value(&KernelSpec::laplace(), &data, &[1e6; 4], lambda)?;
        let m = data.mean_y_sq();
        let band = m / (data.n() as f64 * lambda) + 1e-6;
        let gap = m - j;
        Ok(vec![ResultRecord::new(
            NAME,
            format!("seed-{i:02}-lambda-{lambda}"),
            s,
        )
        .with("objective", j)
        .with("mean_y_sq", m)
        .with("band", band)
        .with("violation", (gap - band).max(j - m))
        .at_most("violation", 0.0)])
    })
}
