//! Exact kernel ridge regression on the empirical measure of a sample.
//!
//! With loss weight `1/n` the representer system is `(G + nλI)·α = y`, which
//! makes `α = r / (nλ)` hold exactly, so the population identities between
//! residuals, predictor and RKHS norm carry over to the sample verbatim.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt;
use faer::{Mat, MatMut, Par};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::kernel::KernelSpec;
use crate::par;

/// `n × d` design (row-major) and `n` responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    n: usize,
    d: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl SampleSet {
    pub fn new(rows: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Domain("sample needs at least one row".into()));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::Domain("sample needs at least one feature".into()));
        }
        check_len("responses", n, y.len())?;
        let mut x = Vec::with_capacity(n * d);
        for r in &rows {
            check_len("row", d, r.len())?;
            x.extend_from_slice(r);
        }
        Self::from_flat(n, d, x, y)
    }

    /// Builds from a row-major buffer of length `n*d`.
    pub fn from_flat(n: usize, d: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Domain("sample needs n >= 1 and d >= 1".into()));
        }
        check_len("design buffer", n * d, x.len())?;
        check_len("responses", n, y.len())?;
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Domain("sample entries must be finite".into()));
        }
        Ok(Self { n, d, x, y })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Column `k` of the design.
    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.x[i * self.d + k]).collect()
    }

    pub fn mean_y(&self) -> f64 {
        par::pairwise_sum(&self.y) / self.n as f64
    }

    /// Empirical second moment `mean(y²)`, the value of the objective at `f = 0`.
    pub fn mean_y_sq(&self) -> f64 {
        let sq: Vec<f64> = self.y.iter().map(|v| v * v).collect();
        par::pairwise_sum(&sq) / self.n as f64
    }

    /// Copy with the response shifted to empirical mean zero.
    pub fn centered(&self) -> Self {
        let m = self.mean_y();
        let mut out = self.clone();
        out.y.iter_mut().for_each(|v| *v -= m);
        out
    }

    pub fn with_y(&self, y: Vec<f64>) -> Result<Self> {
        Self::from_flat(self.n, self.d, self.x.clone(), y)
    }
}

/// A solved inner problem at `(β, λ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeFit {
    pub beta: Vec<f64>,
    pub lambda: f64,
    /// Coefficients of `f_{β,λ}` on the sections `K_β(x_i, ·)`.
    pub dual: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `J(β, λ)`.
    pub objective: f64,
    /// `‖f_{β,λ}‖²_H = αᵀGα`.
    pub rkhs_norm_sq: f64,
}

/// Dense Gram matrix `G_ij = K_β(x_i, x_j)`.
pub fn gram(spec: &KernelSpec, data: &SampleSet, beta: &[f64]) -> Result<Mat<f64>> {
    check_len("beta", data.d, beta.len())?;
    let n = data.n;
    // column j holds entries i <= j; mirrored below
    let cols = par::map_rows(n, |j| {
        let xj = data.row(j);
        (0..=j)
            .map(|i| spec.psi_unchecked(spec.reduced_distance(beta, data.row(i), xj)))
            .collect::<Vec<f64>>()
    });
    Ok(Mat::from_fn(n, n, |i, j| {
        if i <= j {
            cols[j][i]
        } else {
            cols[i][j]
        }
    }))
}

fn matvec(g: &Mat<f64>, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    par::map_rows(n, |i| {
        let terms: Vec<f64> = (0..n).map(|j| g[(i, j)] * v[j]).collect();
        par::pairwise_sum(&terms)
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let terms: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    par::pairwise_sum(&terms)
}

fn spd_solve(mut a: Mat<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = rhs.len();
    let params = Default::default();
    let mut buf = MemBuffer::new(llt::factor::cholesky_in_place_scratch::<f64>(
        n,
        Par::Seq,
        params,
    ));
    llt::factor::cholesky_in_place(
        a.as_mut(),
        Default::default(),
        Par::Seq,
        MemStack::new(&mut buf),
        params,
    )
    .map_err(|e| Error::Numerical(format!("Cholesky of G + nλI failed: {e:?}")))?;
    let mut b = Mat::from_fn(n, 1, |i, _| rhs[i]);
    let mut sbuf = MemBuffer::new(llt::solve::solve_in_place_scratch::<f64>(n, 1, Par::Seq));
    llt::solve::solve_in_place_with_conj(
        a.as_ref(),
        faer::Conj::No,
        MatMut::from(b.as_mut()),
        Par::Seq,
        MemStack::new(&mut sbuf),
    );
    let out: Vec<f64> = (0..n).map(|i| b[(i, 0)]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite dual coefficients".into()));
    }
    Ok(out)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "lambda must be finite and > 0, got {lambda}"
        )))
    }
}

/// Minimizes `(1/n)Σ(y_i − f(β∘x_i))² + λ‖f‖²_H` exactly.
pub fn krr_fit(spec: &KernelSpec, data: &SampleSet, beta: &[f64], lambda: f64) -> Result<RidgeFit> {
    check_lambda(lambda)?;
    check_len("beta", data.d, beta.len())?;
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Domain("beta entries must be finite".into()));
    }
    let n = data.n;
    let g = gram(spec, data, beta)?;
    let shift = n as f64 * lambda;
    let mut a = g.clone();
    for i in 0..n {
        a[(i, i)] += shift;
    }
    let dual = spd_solve(a, &data.y)?;
    let g_dual = matvec(&g, &dual);
    let residuals: Vec<f64> = data.y.iter().zip(&g_dual).map(|(y, p)| y - p).collect();
    let rkhs_norm_sq = dot(&dual, &g_dual).max(0.0);
    let objective = dot(&residuals, &residuals) / n as f64 + lambda * rkhs_norm_sq;
    if !objective.is_finite() {
        return Err(Error::Numerical("non-finite objective".into()));
    }
    Ok(RidgeFit {
        beta: beta.to_vec(),
        lambda,
        dual,
        residuals,
        objective,
        rkhs_norm_sq,
    })
}

/// `J(β, λ)`.
pub fn objective_value(
    spec: &KernelSpec,
    data: &SampleSet,
    beta: &[f64],
    lambda: f64,
) -> Result<f64> {
    Ok(krr_fit(spec, data, beta, lambda)?.objective)
}

/// `f_{β,λ}(β∘z) = Σ_i α_i K_β(x_i, z)`.
pub fn predict(fit: &RidgeFit, spec: &KernelSpec, data: &SampleSet, z: &[f64]) -> Result<f64> {
    check_len("query point", data.d, z.len())?;
    check_len("dual", data.n, fit.dual.len())?;
    let terms: Vec<f64> = (0..data.n)
        .map(|i| fit.dual[i] * spec.psi_unchecked(spec.reduced_distance(&fit.beta, data.row(i), z)))
        .collect();
    Ok(par::pairwise_sum(&terms))
}

/// Relative defects of the exact-on-empirical identities of a fit.
///
/// Every field is zero in exact arithmetic; the bounds use `‖y‖∞` or
/// `mean(y²)` as the scale so that a `y = 0` sample reports zeros.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityDefects {
    /// `max_j |(1/n)(G r)_j − λ(Gα)_j| / ‖y‖∞`
    pub euler_lagrange: f64,
    /// `max_j |nλ α_j − r_j| / ‖y‖∞`
    pub dual_residual: f64,
    /// `|(1/n²) rᵀGr − λ²‖f‖²| / (λ·mean(y²))`, relative to the bound on both sides,
    /// which stays positive when `f = 0`.
    pub r_r_k: f64,
    /// `max(0, J − mean(y²)) / mean(y²)`
    pub objective_excess: f64,
    /// `max(0, λ‖f‖² − mean(y²)) / mean(y²)`
    pub norm_excess: f64,
}

impl IdentityDefects {
    pub fn max(&self) -> f64 {
        [
            self.euler_lagrange,
            self.dual_residual,
            self.r_r_k,
            self.objective_excess,
            self.norm_excess,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn identity_defects(
    spec: &KernelSpec,
    data: &SampleSet,
    fit: &RidgeFit,
) -> Result<IdentityDefects> {
    check_len("dual", data.n, fit.dual.len())?;
    let n = data.n as f64;
    let lambda = fit.lambda;
    let g = gram(spec, data, &fit.beta)?;
    let ga = matvec(&g, &fit.dual);
    let gr = matvec(&g, &fit.residuals);
    let y_inf = data.y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let el = (0..data.n).fold(0.0f64, |m, j| m.max((gr[j] / n - lambda * ga[j]).abs()));
    let dr = (0..data.n).fold(0.0f64, |m, j| {
        m.max((n * lambda * fit.dual[j] - fit.residuals[j]).abs())
    });
    let rhs = lambda * lambda * fit.rkhs_norm_sq;
    let lhs = dot(&fit.residuals, &gr) / (n * n);
    let my2 = data.mean_y_sq();
    Ok(IdentityDefects {
        euler_lagrange: ratio(el, y_inf),
        dual_residual: ratio(dr, y_inf),
        r_r_k: ratio((lhs - rhs).abs(), lambda * my2),
        objective_excess: ratio((fit.objective - my2).max(0.0), my2),
        norm_excess: ratio((lambda * fit.rkhs_norm_sq - my2).max(0.0), my2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sample(n: usize, d: usize, seed: u64) -> SampleSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| r[0].sin() + 0.3 * rng.random_range(-1.0..1.0))
            .collect();
        SampleSet::new(rows, y).unwrap().centered()
    }

    #[test]
    fn single_point_closed_form() {
        let data = SampleSet::new(vec![vec![0.4, -2.0]], vec![1.7]).unwrap();
        let lambda = 0.3;
        for spec in [KernelSpec::laplace(), KernelSpec::gaussian()] {
            let fit = krr_fit(&spec, &data, &[2.0, -1.0], lambda).unwrap();
            assert!((fit.dual[0] - 1.7 / 1.3).abs() < 1e-15);
            assert!((fit.residuals[0] - lambda * 1.7 / 1.3).abs() < 1e-15);
            assert!((fit.objective - lambda * 1.7 * 1.7 / 1.3).abs() < 1e-14);
            let p = predict(&fit, &spec, &data, &[0.4, -2.0]).unwrap();
            assert!((p - 1.7 / 1.3).abs() < 1e-15);
        }
    }

    #[test]
    fn origin_with_centered_response_predicts_zero() {
        let data = random_sample(12, 3, 1);
        let fit = krr_fit(&KernelSpec::laplace(), &data, &[0.0; 3], 0.05).unwrap();
        for (r, y) in fit.residuals.iter().zip(data.y()) {
            assert!((r - y).abs() < 1e-12);
        }
        assert!((fit.objective - data.mean_y_sq()).abs() < 1e-12);
    }

    #[test]
    fn zero_response() {
        let data = random_sample(10, 2, 2).with_y(vec![0.0; 10]).unwrap();
        let fit = krr_fit(&KernelSpec::laplace(), &data, &[1.0, 1.0], 0.1).unwrap();
        assert!(fit.dual.iter().all(|a| *a == 0.0));
        assert_eq!(fit.objective, 0.0);
        assert_eq!(
            predict(&fit, &KernelSpec::laplace(), &data, &[0.3, 0.1]).unwrap(),
            0.0
        );
    }

    #[test]
    fn prediction_decays_far_away() {
        let data = random_sample(20, 2, 3);
        let spec = KernelSpec::laplace();
        let fit = krr_fit(&spec, &data, &[1.0, 1.0], 0.01).unwrap();
        let far = predict(&fit, &spec, &data, &[1e3, -1e3]).unwrap();
        assert!(far.abs() < 1e-300);
    }

    #[test]
    fn identity_gram_limit() {
        // Gram ≈ I: dual = y/(1+nλ), objective = mean(y²)·nλ/(1+nλ)
        let data = random_sample(30, 2, 4);
        let lambda = 0.01;
        let nl = 30.0 * lambda;
        let j = objective_value(&KernelSpec::laplace(), &data, &[1e6, 1e6], lambda).unwrap();
        let expect = data.mean_y_sq() * nl / (1.0 + nl);
        assert!((j - expect).abs() < 1e-12 * expect.max(1.0));
        let big = objective_value(&KernelSpec::laplace(), &data, &[1.0, 1.0], 1e8).unwrap();
        assert!((big - data.mean_y_sq()).abs() < 1e-6 * data.mean_y_sq());
    }

    #[test]
    fn empirical_identities() {
        for (seed, spec) in [(5, KernelSpec::laplace()), (6, KernelSpec::gaussian())] {
            let data = random_sample(25, 3, seed);
            let lambda = 0.02;
            let beta = [0.8, -1.3, 0.0];
            let fit = krr_fit(&spec, &data, &beta, lambda).unwrap();
            let n = data.n() as f64;
            let g = gram(&spec, &data, &beta).unwrap();
            let scale = data.y().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            // Euler–Lagrange: (1/n) Σ_i r_i G_ij = λ (G α)_j
            let ga = matvec(&g, &fit.dual);
            let gr = matvec(&g, &fit.residuals);
            for j in 0..data.n() {
                assert!((gr[j] / n - lambda * ga[j]).abs() <= 1e-8 * scale);
                assert!(
                    (fit.dual[j] - fit.residuals[j] / (n * lambda)).abs()
                        <= 1e-8 * scale / (n * lambda)
                );
            }
            // r–r′–K: (1/n²) rᵀGr = λ² ‖f‖²
            let lhs = dot(&fit.residuals, &gr) / (n * n);
            let rhs = lambda * lambda * fit.rkhs_norm_sq;
            assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs());
            assert!(fit.objective <= data.mean_y_sq() + 1e-10);
            assert!(lambda * fit.rkhs_norm_sq <= data.mean_y_sq() + 1e-10);
        }
    }

    #[test]
    fn identity_defects_are_round_off() {
        let data = random_sample(30, 4, 11);
        for spec in [KernelSpec::laplace(), KernelSpec::gaussian()] {
            let fit = krr_fit(&spec, &data, &[0.3, 0.0, -2.0, 1.0], 0.01).unwrap();
            let d = identity_defects(&spec, &data, &fit).unwrap();
            assert!(d.max() < 1e-10, "{d:?}");
        }
        // β = 0 with centered y gives f = 0
        let fit = krr_fit(&KernelSpec::laplace(), &data, &[0.0; 4], 0.01).unwrap();
        assert!(
            identity_defects(&KernelSpec::laplace(), &data, &fit)
                .unwrap()
                .max()
                < 1e-10
        );
        let zero = data.with_y(vec![0.0; 30]).unwrap();
        let fit = krr_fit(&KernelSpec::laplace(), &zero, &[1.0; 4], 0.1).unwrap();
        assert_eq!(
            identity_defects(&KernelSpec::laplace(), &zero, &fit)
                .unwrap()
                .max(),
            0.0
        );
    }

    #[test]
    fn objective_is_sign_invariant_and_continuous() {
        let data = random_sample(15, 3, 7);
        let spec = KernelSpec::laplace();
        let beta = [0.5, -0.7, 1.1];
        let abs = [0.5, 0.7, 1.1];
        let a = objective_value(&spec, &data, &beta, 0.1).unwrap();
        assert_eq!(a, objective_value(&spec, &data, &abs, 0.1).unwrap());
        let mut prev = a;
        for k in 1..=20 {
            let h = 1e-4 * k as f64;
            let b = [0.5 + h, -0.7, 1.1];
            let v = objective_value(&spec, &data, &b, 0.1).unwrap();
            assert!((v - prev).abs() < 1e-3);
            prev = v;
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let data = random_sample(4, 2, 8);
        let spec = KernelSpec::laplace();
        assert!(matches!(
            krr_fit(&spec, &data, &[1.0, 1.0], 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            krr_fit(&spec, &data, &[1.0, 1.0], -1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            krr_fit(&spec, &data, &[1.0], 1.0),
            Err(Error::Shape { .. })
        ));
        assert!(SampleSet::new(vec![], vec![]).is_err());
        assert!(SampleSet::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0.0, 0.0]).is_err());
        assert!(SampleSet::new(vec![vec![f64::NAN]], vec![0.0]).is_err());
    }
}
