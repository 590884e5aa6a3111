//! One-sided directional derivatives of `J(β, λ)` and stationarity certificates.
//!
//! On the empirical measure the first-variation formula reads
//!
//! ```text
//! DJ(β,λ)[v] = -(1/(λ n²)) Σ_{i,j} r_i r_j DK_β(x_i, x_j)[v]
//! ```
//!
//! with the double sum taken over all ordered pairs, diagonal included. For
//! ℓ1 kernels this splits into `Σ_{β_k≠0} g_k v_k + Σ_{β_k=0} h_k |v_k|`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::kernel::{w_coeff, Direction, KernelFamily, KernelSpec};
use crate::par;
use crate::ridge::{krr_fit, objective_value, RidgeFit, SampleSet};

/// Stationarity tolerances for the smooth (`g`) and one-sided (`h`) parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub g: f64,
    pub h: f64,
}

impl Tolerances {
    /// `1e-6 · mean(y²) / λ`, the natural derivative scale.
    pub fn default_for(data: &SampleSet, lambda: f64) -> Self {
        let t = 1e-6 * data.mean_y_sq() / lambda;
        Self { g: t, h: t }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalReport {
    pub beta: Vec<f64>,
    pub lambda: f64,
    /// `g_k` for coordinates where `DJ` is linear (`β_k ≠ 0`, or every `k` for radial kernels).
    pub smooth_grad: BTreeMap<usize, f64>,
    /// `h_k` for ℓ1 kernels at `β_k = 0`.
    pub onesided_coeff: BTreeMap<usize, f64>,
    pub is_stationary: bool,
    pub worst_violation: f64,
}

impl DirectionalReport {
    /// `Σ g_k v_k + Σ h_k |v_k|`.
    pub fn reconstruct(&self, v: &Direction) -> f64 {
        let mut terms: Vec<f64> = self.smooth_grad.iter().map(|(&k, g)| g * v[k]).collect();
        terms.extend(self.onesided_coeff.iter().map(|(&k, h)| h * v[k].abs()));
        par::pairwise_sum(&terms)
    }

    /// Re-evaluates the certificate at other tolerances.
    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        let (ok, worst) = stationarity_certificate(&self, tol.g, tol.h);
        self.is_stationary = ok;
        self.worst_violation = worst;
        self
    }

    /// Coefficient for coordinate `k`, whichever part holds it.
    pub fn coefficient(&self, k: usize) -> f64 {
        self.smooth_grad
            .get(&k)
            .or_else(|| self.onesided_coeff.get(&k))
            .copied()
            .unwrap_or(0.0)
    }
}

fn check_fit(data: &SampleSet, fit: &RidgeFit) -> Result<()> {
    check_len("beta", data.d(), fit.beta.len())?;
    check_len("residuals", data.n(), fit.residuals.len())
}

/// Analytic one-sided derivative `DJ(β,λ)[v]` at the fitted point.
pub fn directional_derivative(
    spec: &KernelSpec,
    data: &SampleSet,
    fit: &RidgeFit,
    v: &Direction,
) -> Result<f64> {
    check_fit(data, fit)?;
    check_len("direction", data.d(), v.len())?;
    let n = data.n();
    let beta = &fit.beta;
    let r = &fit.residuals;
    let d = data.d();
    let w: Vec<f64> = (0..d).map(|k| w_coeff(beta[k], v[k])).collect();
    // DK vanishes on the diagonal, so the ordered-pair sum is twice the strict upper triangle.
    let upper = par::sum_rows(n, |i| {
        let xi = data.row(i);
        let terms: Vec<f64> = (i + 1..n)
            .map(|j| {
                let xj = data.row(j);
                let dpsi = spec.psi_prime_unchecked(spec.reduced_distance(beta, xi, xj));
                let inner: f64 = match spec.family {
                    KernelFamily::L1Mixture => (0..d).map(|k| w[k] * (xi[k] - xj[k]).abs()).sum(),
                    KernelFamily::RadialMixture => (0..d)
                        .map(|k| {
                            let u = xi[k] - xj[k];
                            2.0 * beta[k] * v[k] * u * u
                        })
                        .sum(),
                };
                r[j] * dpsi * inner
            })
            .collect();
        r[i] * par::pairwise_sum(&terms)
    });
    Ok(-2.0 * upper / (fit.lambda * (n * n) as f64))
}

/// Per-coordinate pair sums `Σ_{i,j} r_i r_j ψ'(z_ij) φ_k(Δ_ij)` with
/// `φ_k = |Δ_k|` (ℓ1) or `2 β_k Δ_k²` (radial).
fn coordinate_sums(spec: &KernelSpec, data: &SampleSet, fit: &RidgeFit) -> Vec<f64> {
    let n = data.n();
    let d = data.d();
    let beta = &fit.beta;
    let r = &fit.residuals;
    let upper = par::sum_rows_vec(n, d, |i| {
        let xi = data.row(i);
        let mut acc = vec![Vec::with_capacity(n - i); d];
        for (j, rj) in r.iter().enumerate().skip(i + 1) {
            let xj = data.row(j);
            let c = rj * spec.psi_prime_unchecked(spec.reduced_distance(beta, xi, xj));
            for k in 0..d {
                let u = xi[k] - xj[k];
                let phi = match spec.family {
                    KernelFamily::L1Mixture => u.abs(),
                    KernelFamily::RadialMixture => 2.0 * beta[k] * u * u,
                };
                acc[k].push(c * phi);
            }
        }
        acc.iter().map(|a| r[i] * par::pairwise_sum(a)).collect()
    });
    upper.into_iter().map(|s| 2.0 * s).collect()
}

/// Splits `DJ(β,λ)` into `g_k` (linear part) and `h_k` (one-sided part at `β_k = 0`).
///
/// For radial kernels `DJ` is linear in `v` and every coordinate is reported in
/// `smooth_grad`. The certificate uses [`Tolerances::default_for`].
pub fn coordinate_decomposition(
    spec: &KernelSpec,
    data: &SampleSet,
    fit: &RidgeFit,
) -> Result<DirectionalReport> {
    coordinate_decomposition_with(spec, data, fit, Tolerances::default_for(data, fit.lambda))
}

pub fn coordinate_decomposition_with(
    spec: &KernelSpec,
    data: &SampleSet,
    fit: &RidgeFit,
    tol: Tolerances,
) -> Result<DirectionalReport> {
    check_fit(data, fit)?;
    let n = data.n() as f64;
    let scale = -1.0 / (fit.lambda * n * n);
    let sums = coordinate_sums(spec, data, fit);
    let mut smooth_grad = BTreeMap::new();
    let mut onesided_coeff = BTreeMap::new();
    for (k, s) in sums.into_iter().enumerate() {
        let c = scale * s;
        match spec.family {
            KernelFamily::RadialMixture => {
                smooth_grad.insert(k, c);
            }
            KernelFamily::L1Mixture if fit.beta[k] == 0.0 => {
                onesided_coeff.insert(k, c);
            }
            KernelFamily::L1Mixture => {
                smooth_grad.insert(k, fit.beta[k].signum() * c);
            }
        }
    }
    let report = DirectionalReport {
        beta: fit.beta.clone(),
        lambda: fit.lambda,
        smooth_grad,
        onesided_coeff,
        is_stationary: false,
        worst_violation: f64::INFINITY,
    };
    Ok(report.with_tolerances(tol))
}

/// `(all |g_k| ≤ tol_g and all h_k ≥ -tol_h, worst violation)`.
pub fn stationarity_certificate(report: &DirectionalReport, tol_g: f64, tol_h: f64) -> (bool, f64) {
    let g_max = report
        .smooth_grad
        .values()
        .fold(0.0f64, |m, g| m.max(g.abs()));
    let h_min = report
        .onesided_coeff
        .values()
        .fold(f64::INFINITY, |m, &h| m.min(h));
    let g_excess = g_max - tol_g;
    let h_excess = if h_min.is_finite() {
        -h_min - tol_h
    } else {
        f64::NEG_INFINITY
    };
    let worst = g_excess.max(h_excess).max(0.0);
    let ok = g_max <= tol_g && (h_min.is_infinite() || h_min >= -tol_h);
    (ok, worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdRow {
    pub step: f64,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

/// `|a - b| / |a|`, zero when both agree exactly.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / analytic.abs().max(f64::MIN_POSITIVE)
    }
}

/// Compares the analytic derivative with one-sided quotients `(J(β+sv) − J(β))/s`.
pub fn finite_difference_check(
    spec: &KernelSpec,
    data: &SampleSet,
    beta: &[f64],
    lambda: f64,
    v: &Direction,
    steps: &[f64],
) -> Result<Vec<FdRow>> {
    if steps.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::Domain(
            "finite-difference steps must be positive".into(),
        ));
    }
    check_len("direction", beta.len(), v.len())?;
    let fit = krr_fit(spec, data, beta, lambda)?;
    let analytic = directional_derivative(spec, data, &fit, v)?;
    steps
        .iter()
        .map(|&s| {
            let moved: Vec<f64> = beta
                .iter()
                .zip(v.as_slice())
                .map(|(b, w)| b + s * w)
                .collect();
            let numeric = (objective_value(spec, data, &moved, lambda)? - fit.objective) / s;
            Ok(FdRow {
                step: s,
                analytic,
                numeric,
                rel_err: relative_error(analytic, numeric),
            })
        })
        .collect()
}

/// `v = −Π_{noise} β`: removes weight from the given coordinates only.
pub fn noise_descent_direction(beta: &[f64], noise_coords: &[usize]) -> Direction {
    let mut v = vec![0.0; beta.len()];
    for &k in noise_coords {
        if k < beta.len() {
            v[k] = -beta[k];
        }
    }
    Direction::new(v).expect("finite beta gives a finite direction")
}

/// `(J(s e_i) − J(0)) / s²`, the second-order quotient at the origin.
pub fn origin_second_order_quotient(
    spec: &KernelSpec,
    data: &SampleSet,
    coord: usize,
    lambda: f64,
    s: f64,
) -> Result<f64> {
    let d = data.d();
    if coord >= d {
        return Err(Error::Domain(format!(
            "coordinate {coord} out of range for d={d}"
        )));
    }
    let j0 = objective_value(spec, data, &vec![0.0; d], lambda)?;
    let mut beta = vec![0.0; d];
    beta[coord] = s;
    Ok((objective_value(spec, data, &beta, lambda)? - j0) / (s * s))
}

/// Limit of [`origin_second_order_quotient`] for radial kernels and centered `y`:
/// `(2/λ) ψ'(0) (mean(y x_i))²`.
pub fn radial_origin_curvature(
    spec: &KernelSpec,
    data: &SampleSet,
    coord: usize,
    lambda: f64,
) -> f64 {
    let xi = data.column(coord);
    let prods: Vec<f64> = data.y().iter().zip(&xi).map(|(y, x)| y * x).collect();
    let m = par::pairwise_sum(&prods) / data.n() as f64;
    2.0 / lambda * spec.psi_prime_unchecked(0.0) * m * m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixture(rows: &[f64], y: &[f64]) -> SampleSet {
        SampleSet::new(rows.iter().map(|&x| vec![x]).collect(), y.to_vec()).unwrap()
    }

    // Σ_{i,j} y_i y_j |x_i − x_j| / n², enumerated over ordered pairs.
    fn pair_moment(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += y[i] * y[j] * (x[i] - x[j]).abs();
            }
        }
        s / (n * n) as f64
    }

    fn random_sample(n: usize, d: usize, seed: u64) -> SampleSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| r[0] * r[1] + r[0].abs() + 0.1 * rng.random_range(-1.0..1.0))
            .collect();
        SampleSet::new(rows, y).unwrap().centered()
    }

    #[test]
    fn rademacher_pair_at_origin() {
        let data = fixture(&[-1.0, 1.0], &[-1.0, 1.0]);
        assert_eq!(pair_moment(&[-1.0, 1.0], &[-1.0, 1.0]), -1.0);
        for lambda in [0.01, 0.5, 3.0] {
            let fit = krr_fit(&KernelSpec::laplace(), &data, &[0.0], lambda).unwrap();
            let dj =
                directional_derivative(&KernelSpec::laplace(), &data, &fit, &Direction::unit(1, 0))
                    .unwrap();
            assert!((dj + 1.0 / lambda).abs() < 1e-10 / lambda);
        }
    }

    #[test]
    fn three_point_quadratic_main_effect() {
        let x = [-1.0, 0.0, 1.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| v * v - 2.0 / 3.0).collect();
        let e = pair_moment(&x, &y);
        assert!((e + 4.0 / 81.0).abs() < 1e-15);
        let data = fixture(&x, &y);
        let lambda = 0.01;
        let fit = krr_fit(&KernelSpec::laplace(), &data, &[0.0], lambda).unwrap();
        let rep = coordinate_decomposition(&KernelSpec::laplace(), &data, &fit).unwrap();
        let h = rep.onesided_coeff[&0];
        assert!((h + 4.0 / (81.0 * lambda)).abs() < 1e-10);
        assert!(!rep.is_stationary);
        let tol_h = 1e-6;
        let (ok, worst) = stationarity_certificate(&rep, 1e-8, tol_h);
        assert!(!ok);
        assert!((worst - (4.0 / 0.81 - tol_h)).abs() < 1e-9);

        let g = KernelSpec::gaussian();
        let gfit = krr_fit(&g, &data, &[0.0], lambda).unwrap();
        let grep = coordinate_decomposition(&g, &data, &gfit).unwrap();
        assert_eq!(grep.smooth_grad[&0], 0.0);
        assert!(grep.onesided_coeff.is_empty());
    }

    #[test]
    fn zero_response_is_stationary() {
        let data = random_sample(10, 3, 1).with_y(vec![0.0; 10]).unwrap();
        let fit = krr_fit(&KernelSpec::laplace(), &data, &[1.0, 0.0, 0.5], 0.1).unwrap();
        let rep = coordinate_decomposition(&KernelSpec::laplace(), &data, &fit).unwrap();
        assert!(rep.is_stationary);
        assert_eq!(rep.worst_violation, 0.0);
        assert!(rep
            .smooth_grad
            .values()
            .chain(rep.onesided_coeff.values())
            .all(|c| *c == 0.0));
    }

    #[test]
    fn certificate_cases() {
        let mut rep = DirectionalReport {
            beta: vec![0.0, 1.0],
            lambda: 1.0,
            smooth_grad: BTreeMap::new(),
            onesided_coeff: BTreeMap::new(),
            is_stationary: false,
            worst_violation: 0.0,
        };
        assert_eq!(stationarity_certificate(&rep, 0.0, 0.0), (true, 0.0));
        rep.smooth_grad.insert(1, 1e-12);
        rep.onesided_coeff.insert(0, 3.0);
        assert!(stationarity_certificate(&rep, 1e-8, 1e-8).0);
        rep.onesided_coeff.insert(0, -0.5);
        let (ok, worst) = stationarity_certificate(&rep, 1e-8, 0.1);
        assert!(!ok && (worst - 0.4).abs() < 1e-15);
    }

    #[test]
    fn zero_direction() {
        let data = random_sample(8, 2, 2);
        let rows = finite_difference_check(
            &KernelSpec::laplace(),
            &data,
            &[0.3, 0.0],
            0.1,
            &Direction::zeros(2),
            &[1e-4, 1e-6],
        )
        .unwrap();
        for r in rows {
            assert_eq!((r.analytic, r.numeric, r.rel_err), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn noise_direction() {
        let v = noise_descent_direction(&[1.0, 2.0, 3.0], &[1, 2]);
        assert_eq!(v.as_slice(), &[0.0, -2.0, -3.0]);
        assert_eq!(
            noise_descent_direction(&[1.0, 2.0], &[]).as_slice(),
            &[0.0, 0.0]
        );
        assert!(noise_descent_direction(&[0.0; 3], &[0, 1])
            .as_slice()
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn reconstruction_and_finite_differences() {
        let data = random_sample(30, 4, 3);
        let lambda = 0.05;
        let beta = [0.7, 0.0, -1.2, 0.0];
        let spec = KernelSpec::laplace();
        let fit = krr_fit(&spec, &data, &beta, lambda).unwrap();
        let rep = coordinate_decomposition(&spec, &data, &fit).unwrap();
        assert_eq!(
            rep.onesided_coeff.keys().copied().collect::<Vec<_>>(),
            vec![1, 3]
        );
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let v = Direction::new((0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let direct = directional_derivative(&spec, &data, &fit, &v).unwrap();
            assert!((direct - rep.reconstruct(&v)).abs() <= 1e-10 * direct.abs().max(1e-300));
            let fd = finite_difference_check(&spec, &data, &beta, lambda, &v, &[1e-6]).unwrap();
            assert!(fd[0].rel_err <= 1e-4, "{fd:?}");
        }
        // one-sided quotient along e_k at a zero coordinate matches h_k
        let fd =
            finite_difference_check(&spec, &data, &beta, lambda, &Direction::unit(4, 1), &[1e-6])
                .unwrap();
        assert!(
            (fd[0].numeric - rep.onesided_coeff[&1]).abs() <= 1e-4 * rep.onesided_coeff[&1].abs()
        );
    }

    #[test]
    fn radial_derivative_is_linear_and_matches_quotients() {
        let data = random_sample(25, 3, 4);
        let spec = KernelSpec::gaussian();
        let beta = [0.9, -0.4, 1.3];
        let fit = krr_fit(&spec, &data, &beta, 0.02).unwrap();
        let rep = coordinate_decomposition(&spec, &data, &fit).unwrap();
        assert_eq!(rep.smooth_grad.len(), 3);
        let v = Direction::new(vec![0.3, -1.0, 0.2]).unwrap();
        let neg = Direction::new(vec![-0.3, 1.0, -0.2]).unwrap();
        let a = directional_derivative(&spec, &data, &fit, &v).unwrap();
        let b = directional_derivative(&spec, &data, &fit, &neg).unwrap();
        assert!((a + b).abs() <= 1e-12 * a.abs());
        assert!((a - rep.reconstruct(&v)).abs() <= 1e-10 * a.abs());
        let fd =
            finite_difference_check(&spec, &data, &beta, 0.02, &v, &[1e-4, 1e-5, 1e-6]).unwrap();
        assert!(fd[2].rel_err <= 1e-4);
        assert!(fd[2].rel_err < fd[0].rel_err);
    }

    #[test]
    fn radial_origin_is_flat_with_linear_curvature() {
        // Rademacher pair y = x: mean(yx) = 1, limit (2/λ)ψ'(0)
        let data = fixture(&[-1.0, 1.0], &[-1.0, 1.0]);
        let spec = KernelSpec::gaussian();
        let lambda = 0.5;
        let fit = krr_fit(&spec, &data, &[0.0], lambda).unwrap();
        assert_eq!(
            directional_derivative(&spec, &data, &fit, &Direction::unit(1, 0)).unwrap(),
            0.0
        );
        let limit = radial_origin_curvature(&spec, &data, 0, lambda);
        assert_eq!(limit, -4.0);
        let q = origin_second_order_quotient(&spec, &data, 0, lambda, 1e-4).unwrap();
        assert!(((q - limit) / limit).abs() < 1e-3, "{q}");
    }
}
