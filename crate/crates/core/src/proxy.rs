//! Monte Carlo estimates of the Fourier proxy `M_i(β)`.
//!
//! For ℓ1 kernels `-ψ'(‖u‖₁) = ∫∫ exp(-2πi⟨ω,u⟩) t q_t(ω) dω μ(dt)` where
//! `q_t` is a product of Cauchy densities with scale `t/(2π)`. The measure
//! `t q_t(ω) dω μ(dt)` has total mass `Σ_k p_k t_k`, so drawing `t ∝ p_k t_k`
//! and `ω ~ q_t` turns the proxy into a plain average of
//!
//! ```text
//! A(t, ω) = -(1/n²) Σ_{m,l} h_m conj(h_l) |x_{m,i} - x_{l,i}|
//! ```
//!
//! with `h_m` a phase-modulated residual. The `ζ`-integral of the frequency
//! form never appears: it has been folded back into `|x - x'|`. The pair sum
//! is evaluated in `O(n)` per draw after one sort per coordinate.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::kernel::{Direction, KernelSpec, MixtureMeasure};
use crate::par;
use crate::ridge::{krr_fit, RidgeFit, SampleSet};
use crate::variation::directional_derivative;

/// Draw count used when the caller does not choose one.
pub const DEFAULT_DRAWS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyMode {
    /// `M_i(β, λ)` built from the ridge residuals.
    ResidualWeighted,
    /// λ-free `M_i(β)` built from `y − E[y | x_supp(β)]`.
    AnovaConditional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyEstimate {
    pub coord: usize,
    pub value: f64,
    pub std_error: f64,
    pub draws: usize,
    pub mode: ProxyMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDraw {
    pub t: f64,
    pub omega: Vec<f64>,
    /// `Σ_k p_k t_k`.
    pub total_mass: f64,
}

/// RNG for draw `index` of a run seeded with `seed`; independent of scheduling.
pub fn draw_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Samples `(t, ω)` from the normalized measure `t q_t(ω) dω μ(dt) / Σ p t`.
pub fn sample_spectral<R: Rng + ?Sized>(
    mu: &MixtureMeasure,
    d: usize,
    rng: &mut R,
) -> SpectralDraw {
    let total_mass = mu.first_moment();
    let u: f64 = rng.random::<f64>() * total_mass;
    let atoms = mu.atoms();
    let mut acc = 0.0;
    let mut t = atoms[atoms.len() - 1].t;
    for a in atoms {
        acc += a.p * a.t;
        if u < acc {
            t = a.t;
            break;
        }
    }
    let cauchy = Cauchy::new(0.0, t / (2.0 * PI)).expect("positive scale");
    let omega = (0..d).map(|_| cauchy.sample(rng)).collect();
    SpectralDraw {
        t,
        omega,
        total_mass,
    }
}

/// `Σ_{m,l} a_m conj(a_l) |x_m − x_l|` given `order`, the permutation sorting `x` ascending.
pub(crate) fn cnd_pair_sum(order: &[usize], x: &[f64], a: &[Complex64]) -> f64 {
    let mut prefix = Complex64::new(0.0, 0.0);
    let mut prefix_x = Complex64::new(0.0, 0.0);
    let terms: Vec<f64> = order
        .iter()
        .map(|&p| {
            let term = a[p] * (prefix * x[p] - prefix_x);
            let c = a[p].conj();
            prefix += c;
            prefix_x += c * x[p];
            term.re
        })
        .collect();
    2.0 * par::pairwise_sum(&terms)
}

fn sort_order(x: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    order
}

struct ProxyInput<'a> {
    spec: &'a KernelSpec,
    data: &'a SampleSet,
    beta: &'a [f64],
    coord: usize,
    weights: Vec<f64>,
    center: bool,
    draws: usize,
    seed: u64,
}

fn draw_values(inp: &ProxyInput<'_>) -> Result<Vec<f64>> {
    let ProxyInput {
        spec,
        data,
        beta,
        coord,
        ref weights,
        center,
        draws,
        seed,
    } = *inp;
    if !spec.is_l1() {
        return Err(Error::Unsupported(
            "Fourier proxy is defined for the l1 family only",
        ));
    }
    if coord >= data.d() {
        return Err(Error::Domain(format!(
            "coordinate {coord} out of range for d={}",
            data.d()
        )));
    }
    if draws == 0 {
        return Err(Error::Domain("draw count must be positive".into()));
    }
    check_len("beta", data.d(), beta.len())?;
    let n = data.n();
    let xi = data.column(coord);
    let order = sort_order(&xi);
    let active: Vec<usize> = (0..data.d()).filter(|&k| beta[k] != 0.0).collect();
    let nn = (n * n) as f64;

    Ok(par::map_rows(draws, |s| {
        let mut rng = draw_rng(seed, s as u64);
        let draw = sample_spectral(&spec.mu, data.d(), &mut rng);
        let mut h: Vec<Complex64> = (0..n)
            .map(|m| {
                let row = data.row(m);
                let phase: f64 = active
                    .iter()
                    .map(|&k| draw.omega[k] * beta[k] * row[k])
                    .sum();
                Complex64::from_polar(weights[m], -2.0 * PI * phase)
            })
            .collect();
        if center {
            let re: Vec<f64> = h.iter().map(|z| z.re).collect();
            let im: Vec<f64> = h.iter().map(|z| z.im).collect();
            let mean = Complex64::new(par::pairwise_sum(&re), par::pairwise_sum(&im)) / n as f64;
            h.iter_mut().for_each(|z| *z -= mean);
        }
        -cnd_pair_sum(&order, &xi, &h) / nn
    }))
}

fn estimate(inp: ProxyInput<'_>, mode: ProxyMode) -> Result<ProxyEstimate> {
    let samples = draw_values(&inp)?;
    let draws = samples.len();
    let total_mass = inp.spec.mu.first_moment();
    let mean = par::pairwise_sum(&samples) / draws as f64;
    let var = if draws > 1 {
        let dev: Vec<f64> = samples.iter().map(|a| (a - mean) * (a - mean)).collect();
        par::pairwise_sum(&dev) / (draws - 1) as f64
    } else {
        0.0
    };
    Ok(ProxyEstimate {
        coord: inp.coord,
        value: total_mass * mean,
        std_error: total_mass * (var / draws as f64).sqrt(),
        draws,
        mode,
    })
}

fn residual_input<'a>(
    spec: &'a KernelSpec,
    data: &'a SampleSet,
    fit: &'a RidgeFit,
    coord: usize,
    draws: usize,
    seed: u64,
) -> Result<ProxyInput<'a>> {
    check_len("residuals", data.n(), fit.residuals.len())?;
    Ok(ProxyInput {
        spec,
        data,
        beta: &fit.beta,
        coord,
        weights: fit.residuals.clone(),
        center: true,
        draws,
        seed,
    })
}

/// Per-draw values `A(t, ω)` of the residual-weighted proxy, for diagnostics.
pub fn residual_weighted_draws(
    spec: &KernelSpec,
    data: &SampleSet,
    fit: &RidgeFit,
    coord: usize,
    draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    draw_values(&residual_input(spec, data, fit, coord, draws, seed)?)
}

/// Estimates `M_i(β, λ) = −λ S_i(β, λ)` from a solved ridge problem.
pub fn proxy_residual_weighted(
    spec: &KernelSpec,
    data: &SampleSet,
    fit: &RidgeFit,
    coord: usize,
    draws: usize,
    seed: u64,
) -> Result<ProxyEstimate> {
    estimate(
        residual_input(spec, data, fit, coord, draws, seed)?,
        ProxyMode::ResidualWeighted,
    )
}

/// Estimates the λ-free `M_i(β)` given `E[y | x_supp(β)]` at every sample.
pub fn proxy_anova(
    spec: &KernelSpec,
    data: &SampleSet,
    beta: &[f64],
    coord: usize,
    conditional_mean: Option<&[f64]>,
    draws: usize,
    seed: u64,
) -> Result<ProxyEstimate> {
    let cm = conditional_mean
        .ok_or_else(|| Error::Precondition("conditional mean E[y | x_supp] is required".into()))?;
    if cm.len() != data.n() {
        return Err(Error::Precondition(format!(
            "conditional mean has {} entries, sample has {}",
            cm.len(),
            data.n()
        )));
    }
    let weights = data.y().iter().zip(cm).map(|(y, c)| y - c).collect();
    estimate(
        ProxyInput {
            spec,
            data,
            beta,
            coord,
            weights,
            center: false,
            draws,
            seed,
        },
        ProxyMode::AnovaConditional,
    )
}

/// Grouped-average estimate of `E[y | x_A]` at each sample (exact on discrete designs).
pub fn grouped_conditional_mean(data: &SampleSet, coords: &[usize]) -> Vec<f64> {
    let key = |i: usize| -> Vec<u64> { coords.iter().map(|&k| data.row(i)[k].to_bits()).collect() };
    let mut groups: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
    for i in 0..data.n() {
        groups.entry(key(i)).or_default().push(i);
    }
    let mut out = vec![0.0; data.n()];
    for members in groups.values() {
        let ys: Vec<f64> = members.iter().map(|&i| data.y()[i]).collect();
        let m = par::pairwise_sum(&ys) / ys.len() as f64;
        for &i in members {
            out[i] = m;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub lambda: f64,
    /// `λ · DJ(β, λ)[e_i]`
    pub scaled_derivative: f64,
    pub proxy: f64,
    pub proxy_std_error: f64,
    /// `λ · DJ(β, λ)[e_i] + M_i(β)`
    pub gap: f64,
}

/// Tabulates `λ·DJ(β,λ)[e_i] + M_i(β)` over a λ grid. Requires `β_i = 0`.
#[allow(clippy::too_many_arguments)]
pub fn decomposition_gap(
    spec: &KernelSpec,
    data: &SampleSet,
    beta: &[f64],
    coord: usize,
    lambdas: &[f64],
    conditional_mean: &[f64],
    draws: usize,
    seed: u64,
) -> Result<Vec<GapRow>> {
    check_len("beta", data.d(), beta.len())?;
    if coord >= beta.len() || beta[coord] != 0.0 {
        return Err(Error::Precondition(format!(
            "beta[{coord}] must be exactly 0"
        )));
    }
    let proxy = proxy_anova(spec, data, beta, coord, Some(conditional_mean), draws, seed)?;
    lambdas
        .iter()
        .map(|&lambda| {
            let fit = krr_fit(spec, data, beta, lambda)?;
            let dj = directional_derivative(spec, data, &fit, &Direction::unit(data.d(), coord))?;
            let scaled = lambda * dj;
            Ok(GapRow {
                lambda,
                scaled_derivative: scaled,
                proxy: proxy.value,
                proxy_std_error: proxy.std_error,
                gap: scaled + proxy.value,
            })
        })
        .collect()
}

/// Least-squares slope of `ln|gap|` against `ln λ`, and `Ĉ = max |gap|/√λ`.
pub fn gap_scaling(rows: &[GapRow]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.gap != 0.0)
        .map(|r| (r.lambda.ln(), r.gap.abs().ln()))
        .collect();
    let c_hat = rows
        .iter()
        .map(|r| r.gap.abs() / r.lambda.sqrt())
        .fold(0.0, f64::max);
    if pts.len() < 2 {
        return (f64::NAN, c_hat);
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxy / sxx, c_hat)
}

/// A support point of a finite measure on ℝ with a complex function value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPoint {
    pub x: f64,
    pub f: Complex64,
    pub w: f64,
}

/// Direct evaluation of `ΣΣ w_m w_l f_m conj(f_l) |x_m − x_l|`.
pub fn cnd_double_sum(points: &[WeightedPoint]) -> f64 {
    let mut terms = Vec::with_capacity(points.len() * points.len());
    for a in points {
        for b in points {
            terms.push((a.w * b.w * a.f * b.f.conj()).re * (a.x - b.x).abs());
        }
    }
    par::pairwise_sum(&terms)
}

/// Settings for [`cnd_quadrature_oracle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaGrid {
    /// Panels of the initial uniform grid on each half-line (in θ).
    pub panels: usize,
    /// Substitution scale `c` in `ζ = c·tan θ`; `None` picks `1 / spread(x)`.
    pub scale: Option<f64>,
    /// Absolute tolerance of the adaptive refinement.
    pub tol: f64,
}

impl Default for ZetaGrid {
    fn default() -> Self {
        Self {
            panels: 2000,
            scale: None,
            tol: 1e-8,
        }
    }
}

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let fx = f(c - h * XGK[j]) + f(c + h * XGK[j]);
        kron += WGK[j] * fx;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fx;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (val, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return val;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, 0.5 * tol, depth - 1) + adaptive(f, m, b, 0.5 * tol, depth - 1)
}

/// Frequency-side evaluation of the conditionally negative definite form:
///
/// ```text
/// −∫ |Σ_m w_m f_m exp(−2πiζx_m)|² / (2π²ζ²) dζ
/// ```
///
/// computed by adaptive quadrature after `ζ = c·tan θ`. The integrand is
/// replaced by its series limit `|F'(0)|²/(2π²)` at `ζ = 0`. Beyond
/// `|ζ| = Z` the oscillating cross terms are dropped and the non-oscillating
/// part (pairs with equal abscissae) is integrated in closed form, with `Z`
/// chosen so the dropped remainder is below `tol`.
pub fn cnd_quadrature_oracle(points: &[WeightedPoint], grid: ZetaGrid) -> Result<f64> {
    if points
        .iter()
        .any(|p| !(p.w >= 0.0 && p.w.is_finite() && p.x.is_finite()))
    {
        return Err(Error::Domain(
            "weights must be nonnegative and abscissae finite".into(),
        ));
    }
    let mass: Complex64 = points.iter().map(|p| p.f * p.w).sum();
    if mass.norm() > 1e-10 {
        return Err(Error::Precondition(format!(
            "mean-zero condition violated: |Σ w f| = {:.3e}",
            mass.norm()
        )));
    }
    if points.is_empty() {
        return Ok(0.0);
    }
    let lo = points.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    if spread == 0.0 {
        return Ok(0.0);
    }
    let c = grid.scale.unwrap_or(1.0 / spread);

    let mut diag = 0.0;
    let mut cross_abs = 0.0;
    let mut min_gap = f64::INFINITY;
    for a in points {
        for b in points {
            let coef = (a.w * b.w * a.f * b.f.conj()).re;
            let dx = (a.x - b.x).abs();
            if dx == 0.0 {
                diag += coef;
            } else {
                cross_abs += coef.abs();
                min_gap = min_gap.min(dx);
            }
        }
    }
    // |∫_Z^∞ cos(2πζΔ)/(2π²ζ²) dζ| ≤ 1/(2π³ Δ Z²) on each side
    let z_cut = (cross_abs / (PI.powi(3) * min_gap * grid.tol))
        .sqrt()
        .max(10.0 / min_gap);
    let theta_cut = (z_cut / c).atan();

    let slope: Complex64 = points.iter().map(|p| p.f * (p.w * p.x)).sum::<Complex64>()
        * Complex64::new(0.0, -2.0 * PI);
    let at_zero = slope.norm_sqr() / (2.0 * PI * PI);
    let integrand = |theta: f64| -> f64 {
        let zeta = c * theta.tan();
        let jac = c / (theta.cos() * theta.cos());
        if zeta.abs() < 1e-8 {
            return at_zero * jac;
        }
        let f: Complex64 = points
            .iter()
            .map(|p| p.f * Complex64::from_polar(p.w, -2.0 * PI * zeta * p.x))
            .sum();
        f.norm_sqr() / (2.0 * PI * PI * zeta * zeta) * jac
    };

    let panels = grid.panels.max(1);
    let width = theta_cut / panels as f64;
    let per_panel = grid.tol / (2 * panels) as f64;
    let halves: Vec<f64> = par::map_rows(2 * panels, |p| {
        let (a, b) = if p < panels {
            (p as f64 * width, (p + 1) as f64 * width)
        } else {
            let q = p - panels;
            (-((q + 1) as f64) * width, -(q as f64) * width)
        };
        adaptive(&integrand, a, b, per_panel, 30)
    });
    let body = par::pairwise_sum(&halves);
    let tail = 2.0 * diag / (2.0 * PI * PI * z_cut);
    Ok(-(body + tail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Atom, KernelSpec};
    use crate::ridge::krr_fit;
    use proptest::prelude::{prop, prop_assert, proptest};

    fn real_points(xs: &[f64], fs: &[f64], ws: &[f64]) -> Vec<WeightedPoint> {
        xs.iter()
            .zip(fs)
            .zip(ws)
            .map(|((&x, &f), &w)| WeightedPoint {
                x,
                f: Complex64::new(f, 0.0),
                w,
            })
            .collect()
    }

    fn brute_pair_sum(x: &[f64], a: &[Complex64]) -> f64 {
        let mut s = 0.0;
        for m in 0..x.len() {
            for l in 0..x.len() {
                s += (a[m] * a[l].conj()).re * (x[m] - x[l]).abs();
            }
        }
        s
    }

    #[test]
    fn spectral_sampling_laws() {
        let lap = KernelSpec::laplace();
        let mut rng = draw_rng(1, 0);
        let d = sample_spectral(&lap.mu, 3, &mut rng);
        assert_eq!((d.t, d.total_mass, d.omega.len()), (1.0, 1.0, 3));
        assert!(sample_spectral(&lap.mu, 0, &mut rng).omega.is_empty());

        let mu =
            MixtureMeasure::new(vec![Atom { t: 1.0, p: 0.5 }, Atom { t: 3.0, p: 0.5 }]).unwrap();
        let mut hits = 0usize;
        let total = 40_000;
        for s in 0..total {
            let draw = sample_spectral(&mu, 1, &mut draw_rng(7, s));
            assert_eq!(draw.total_mass, 2.0);
            hits += (draw.t == 3.0) as usize;
        }
        let frac = hits as f64 / total as f64;
        assert!(
            (frac - 0.75).abs() < 4.0 * (0.75f64 * 0.25 / total as f64).sqrt(),
            "{frac}"
        );

        // Cauchy(0, 1/(2π)) has quartiles ±1/(2π)
        let mut inside = 0usize;
        for s in 0..total {
            let w = sample_spectral(&lap.mu, 1, &mut draw_rng(3, s)).omega[0];
            inside += (w.abs() < 1.0 / (2.0 * PI)) as usize;
        }
        let frac = inside as f64 / total as f64;
        assert!(
            (frac - 0.5).abs() < 4.0 * (0.25 / total as f64).sqrt(),
            "{frac}"
        );
    }

    #[test]
    fn cauchy_density_matches_q_t() {
        // γ/(π(ω²+γ²)) with γ = t/(2π) equals 2t/(4π²ω²+t²)
        let spec = KernelSpec::laplace();
        for &t in &[0.5, 1.0, 2.5] {
            let g = t / (2.0 * PI);
            for &w in &[0.0, 0.1, 1.3, -4.0] {
                let cauchy = g / (PI * (w * w + g * g));
                let q = spec.spectral_density(t, &[w]).unwrap();
                assert!((cauchy - q).abs() < 1e-14 * q);
            }
        }
    }

    proptest! {
        #[test]
        fn sorted_pair_sum_matches_brute_force(
            pts in prop::collection::vec((-3.0f64..3.0, -2.0f64..2.0, -2.0f64..2.0), 1..40),
            dup in 0usize..3,
        ) {
            let mut x: Vec<f64> = pts.iter().map(|p| p.0).collect();
            for k in 0..dup.min(x.len().saturating_sub(1)) {
                x[k + 1] = x[0];
            }
            let a: Vec<Complex64> = pts.iter().map(|p| Complex64::new(p.1, p.2)).collect();
            let fast = cnd_pair_sum(&sort_order(&x), &x, &a);
            let slow = brute_pair_sum(&x, &a);
            prop_assert!((fast - slow).abs() <= 1e-10 * (1.0 + slow.abs()));
        }
    }

    #[test]
    fn quadrature_fixtures() {
        let rad = real_points(&[-1.0, 1.0], &[-1.0, 1.0], &[0.5, 0.5]);
        assert_eq!(cnd_double_sum(&rad), -1.0);
        let q = cnd_quadrature_oracle(&rad, ZetaGrid::default()).unwrap();
        assert!((q + 1.0).abs() < 1e-4, "{q}");

        let third = 1.0 / 3.0;
        let three = real_points(
            &[-1.0, 0.0, 1.0],
            &[third, -2.0 * third, third],
            &[third; 3],
        );
        let direct = cnd_double_sum(&three);
        assert!((direct + 4.0 / 81.0).abs() < 1e-15);
        let q = cnd_quadrature_oracle(&three, ZetaGrid::default()).unwrap();
        assert!((q - direct).abs() < 1e-4, "{q}");

        let zero = real_points(&[0.3, 2.0], &[0.0, 0.0], &[0.5, 0.5]);
        assert_eq!(
            cnd_quadrature_oracle(&zero, ZetaGrid::default()).unwrap(),
            0.0
        );

        let biased = real_points(&[0.0, 1.0], &[1.0, 0.5], &[0.5, 0.5]);
        assert!(matches!(
            cnd_quadrature_oracle(&biased, ZetaGrid::default()),
            Err(Error::Precondition(_))
        ));
    }

    fn main_effect_sample(n: usize, seed: u64) -> SampleSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(-1i32..=1) as f64).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| r[0] + r[1] * r[1] - 2.0 / 3.0)
            .collect();
        SampleSet::new(rows, y).unwrap()
    }

    // Σ u_m u_l ψ'(‖β∘Δ‖₁)|Δ_i| / n²: the proxy with the (t, ω) integral done in closed form.
    fn anova_closed_form(
        spec: &KernelSpec,
        data: &SampleSet,
        beta: &[f64],
        i: usize,
        u: &[f64],
    ) -> f64 {
        let n = data.n();
        let mut s = 0.0;
        for m in 0..n {
            for l in 0..n {
                let z = spec.reduced_distance(beta, data.row(m), data.row(l));
                s += u[m]
                    * u[l]
                    * spec.psi_prime(z).unwrap()
                    * (data.row(m)[i] - data.row(l)[i]).abs();
            }
        }
        s / (n * n) as f64
    }

    #[test]
    fn anova_proxy_agrees_with_closed_form() {
        let data = main_effect_sample(150, 11);
        let spec = KernelSpec::new(
            crate::kernel::KernelFamily::L1Mixture,
            MixtureMeasure::new(vec![Atom { t: 0.5, p: 0.4 }, Atom { t: 2.0, p: 0.6 }]).unwrap(),
        );
        let beta = [1.0, 0.0, 0.0];
        let cm: Vec<f64> = (0..data.n()).map(|m| data.row(m)[0]).collect();
        let u: Vec<f64> = data.y().iter().zip(&cm).map(|(y, c)| y - c).collect();
        let exact = anova_closed_form(&spec, &data, &beta, 1, &u);
        let est = proxy_anova(&spec, &data, &beta, 1, Some(&cm), 20_000, 5).unwrap();
        assert!(exact > 0.0);
        assert!(
            (est.value - exact).abs() < 4.0 * est.std_error,
            "{est:?} vs {exact}"
        );
        assert_eq!(est.mode, ProxyMode::AnovaConditional);

        // informative structure already in the support: coord 2 adds nothing
        let cm12: Vec<f64> = data.y().to_vec();
        let sat = proxy_anova(&spec, &data, &[1.0, 1.0, 0.0], 2, Some(&cm12), 500, 5).unwrap();
        assert_eq!(sat.value, 0.0);
    }

    #[test]
    fn residual_proxy_edge_cases() {
        let spec = KernelSpec::laplace();
        let data = main_effect_sample(40, 2);
        let zero = data.with_y(vec![0.0; 40]).unwrap();
        let fit = krr_fit(&spec, &zero, &[1.0, 0.0, 0.0], 0.1).unwrap();
        let est = proxy_residual_weighted(&spec, &zero, &fit, 1, 50, 1).unwrap();
        assert_eq!(est.value, 0.0);

        let single = SampleSet::new(vec![vec![0.3, 1.0]], vec![2.0]).unwrap();
        let fit = krr_fit(&spec, &single, &[1.0, 0.0], 0.1).unwrap();
        assert_eq!(
            proxy_residual_weighted(&spec, &single, &fit, 1, 10, 1)
                .unwrap()
                .value,
            0.0
        );

        // Rademacher pair at the origin: A is ω-free and equals −E_emp[YY'|ΔX|] = 1
        let pair = SampleSet::new(vec![vec![-1.0], vec![1.0]], vec![-1.0, 1.0]).unwrap();
        let fit = krr_fit(&spec, &pair, &[0.0], 0.3).unwrap();
        let est = proxy_residual_weighted(&spec, &pair, &fit, 0, 25, 4).unwrap();
        assert!((est.value - 1.0).abs() < 1e-14);
        assert!(est.std_error < 1e-14);

        let gauss = KernelSpec::gaussian();
        let fit = krr_fit(&gauss, &pair, &[0.0], 0.3).unwrap();
        assert!(matches!(
            proxy_residual_weighted(&gauss, &pair, &fit, 0, 10, 1),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            proxy_anova(&spec, &pair, &[0.0], 0, None, 10, 1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn per_draw_values_are_nonnegative_and_seeded() {
        let spec = KernelSpec::laplace();
        let data = main_effect_sample(120, 3);
        let fit = krr_fit(&spec, &data, &[0.8, 0.0, 0.3], 0.05).unwrap();
        let draws = residual_weighted_draws(&spec, &data, &fit, 1, 300, 17).unwrap();
        assert!(draws.iter().all(|a| *a >= -1e-12));
        let a = proxy_residual_weighted(&spec, &data, &fit, 1, 300, 17).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let b = pool.install(|| proxy_residual_weighted(&spec, &data, &fit, 1, 300, 17).unwrap());
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn anova_proxy_ignores_lambda_and_gap_vanishes_at_origin() {
        let spec = KernelSpec::laplace();
        let data = main_effect_sample(90, 4).centered();
        let zeros = vec![0.0; data.n()];
        let rows =
            decomposition_gap(&spec, &data, &[0.0; 3], 1, &[0.1, 0.01], &zeros, 200, 2).unwrap();
        // at β = 0 the residual is y and the two terms cancel exactly
        for r in &rows {
            assert!(r.gap.abs() < 1e-12, "{r:?}");
        }
        assert!(
            decomposition_gap(&spec, &data, &[0.0, 1.0, 0.0], 1, &[0.1], &zeros, 10, 2).is_err()
        );
        let y0 = data.with_y(vec![0.0; data.n()]).unwrap();
        let rows = decomposition_gap(&spec, &y0, &[1.0, 0.0, 0.0], 1, &[0.1, 0.01], &zeros, 50, 2)
            .unwrap();
        assert!(rows.iter().all(|r| r.gap == 0.0));
    }

    #[test]
    fn grouped_mean_is_exact_on_groups() {
        let data = SampleSet::new(
            vec![vec![1.0, 5.0], vec![1.0, 6.0], vec![-1.0, 7.0]],
            vec![2.0, 4.0, 10.0],
        )
        .unwrap();
        assert_eq!(grouped_conditional_mean(&data, &[0]), vec![3.0, 3.0, 10.0]);
        assert_eq!(grouped_conditional_mean(&data, &[]), vec![16.0 / 3.0; 3]);
    }
}
