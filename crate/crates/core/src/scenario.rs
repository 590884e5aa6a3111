//! Synthetic designs with a known core feature set and ANOVA structure.
//!
//! Coordinates are 0-based. Every effect term is `amplitude · Π_{j∈S} g(x_j)`
//! with `g` drawn from a small library; all but [`EffectKind::Square`] are
//! centered under the chosen relevant-coordinate law, so each term is its own
//! ANOVA component and conditional means have a closed form.

use std::collections::BTreeSet;

use faer::Mat;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::ridge::SampleSet;

/// Default magnitude below which a weight counts as inactive in Monte Carlo runs.
pub const DEFAULT_ZERO_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelevantDist {
    /// Uniform on {−1, 1}.
    RademacherIid,
    /// Uniform on {−1, 0, 1}.
    UniformIid,
    /// Standard normal.
    GaussianIid,
}

impl RelevantDist {
    fn second_moment(self) -> f64 {
        match self {
            Self::RademacherIid | Self::GaussianIid => 1.0,
            Self::UniformIid => 2.0 / 3.0,
        }
    }

    fn levels(self) -> Option<&'static [f64]> {
        match self {
            Self::RademacherIid => Some(&[-1.0, 1.0]),
            Self::UniformIid => Some(&[-1.0, 0.0, 1.0]),
            Self::GaussianIid => None,
        }
    }

    fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self.levels() {
            Some(levels) => levels[rng.random_range(0..levels.len())],
            None => rng.sample(StandardNormal),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    /// `x`
    Linear,
    /// `x² − E[x²]`
    CenteredQuadratic,
    /// `sgn(x)`; every supported law is symmetric so this is already centered.
    CenteredSign,
    /// `Π_j x_j` over a subset of at least two coordinates.
    Product,
    /// Uncentered `x²`, kept to exercise the ANOVA diagnostics.
    Square,
}

impl EffectKind {
    fn factor(self, x: f64, m2: f64) -> f64 {
        match self {
            Self::Linear | Self::Product => x,
            Self::CenteredQuadratic => x * x - m2,
            Self::CenteredSign => {
                if x == 0.0 {
                    0.0
                } else {
                    x.signum()
                }
            }
            Self::Square => x * x,
        }
    }

    fn factor_mean(self, m2: f64) -> f64 {
        match self {
            Self::Square => m2,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectTerm {
    pub subset: Vec<usize>,
    pub effect: EffectKind,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl EffectTerm {
    pub fn new(subset: Vec<usize>, effect: EffectKind, amplitude: f64) -> Self {
        Self {
            subset,
            effect,
            amplitude,
        }
    }
}

/// Gaussian law of the noise coordinates (the complement of `S*`, in increasing order).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Covariance matrix; identity when absent.
    #[serde(default)]
    pub covariance: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub d: usize,
    pub relevant: Vec<EffectTerm>,
    pub relevant_dist: RelevantDist,
    #[serde(default)]
    pub noise_dist: NoiseSpec,
    #[serde(default)]
    pub noise_level: f64,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// Full-factorial layout of the discrete relevant coordinates, randomly permuted.
    #[serde(default)]
    pub balanced: bool,
}

impl ScenarioSpec {
    /// `y = x₀ + (x₁² − 2/3)` on the 3-point design with `extra` Gaussian noise coordinates.
    pub fn main_effect(n: usize, extra: usize, seed: u64) -> Self {
        Self {
            d: 2 + extra,
            relevant: vec![
                EffectTerm::new(vec![0], EffectKind::Linear, 1.0),
                EffectTerm::new(vec![1], EffectKind::CenteredQuadratic, 1.0),
            ],
            relevant_dist: RelevantDist::UniformIid,
            noise_dist: NoiseSpec::default(),
            noise_level: 0.0,
            n,
            seed,
            balanced: false,
        }
    }

    /// `y = x₀ + (x₁² − 1)` with Gaussian relevant and noise coordinates.
    pub fn noise_elimination(d: usize, n: usize, noise_level: f64, seed: u64) -> Self {
        Self {
            d,
            relevant: vec![
                EffectTerm::new(vec![0], EffectKind::Linear, 1.0),
                EffectTerm::new(vec![1], EffectKind::CenteredQuadratic, 1.0),
            ],
            relevant_dist: RelevantDist::GaussianIid,
            noise_dist: NoiseSpec::default(),
            noise_level,
            n,
            seed,
            balanced: false,
        }
    }

    /// `y = x₀x₁` on Rademacher inputs, balanced, with Gaussian noise coordinates.
    pub fn xor(d: usize, n: usize, seed: u64) -> Self {
        Self {
            d,
            relevant: vec![EffectTerm::new(vec![0, 1], EffectKind::Product, 1.0)],
            relevant_dist: RelevantDist::RademacherIid,
            noise_dist: NoiseSpec::default(),
            noise_level: 0.0,
            n,
            seed,
            balanced: true,
        }
    }

    pub fn s_star(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .relevant
            .iter()
            .flat_map(|t| t.subset.iter().copied())
            .collect();
        set.into_iter().collect()
    }

    pub fn noise_coords(&self) -> Vec<usize> {
        let s = self.s_star();
        (0..self.d).filter(|k| !s.contains(k)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d == 0 || self.n == 0 {
            return bad("scenario needs d ≥ 1 and n ≥ 1".into());
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return bad(format!(
                "noise_level must be a finite σ ≥ 0, got {}",
                self.noise_level
            ));
        }
        for (idx, t) in self.relevant.iter().enumerate() {
            let uniq: BTreeSet<usize> = t.subset.iter().copied().collect();
            if t.subset.is_empty() || uniq.len() != t.subset.len() {
                return bad(format!(
                    "term {idx}: subset must be nonempty without repeats"
                ));
            }
            if let Some(&k) = t.subset.iter().find(|&&k| k >= self.d) {
                return bad(format!(
                    "term {idx}: coordinate {k} out of range for d={}",
                    self.d
                ));
            }
            if t.effect == EffectKind::Product && t.subset.len() < 2 {
                return bad(format!(
                    "term {idx}: product effect needs at least two coordinates"
                ));
            }
            if !t.amplitude.is_finite() {
                return bad(format!("term {idx}: amplitude must be finite"));
            }
        }
        let q = self.noise_coords().len();
        if let Some(cov) = &self.noise_dist.covariance {
            if cov.len() != q || cov.iter().any(|r| r.len() != q) {
                return bad(format!(
                    "noise covariance must be {q}x{q} (one row per noise coordinate)"
                ));
            }
        }
        if self.balanced {
            let Some(levels) = self.relevant_dist.levels() else {
                return bad("balanced layout requires a discrete relevant distribution".into());
            };
            let cells = levels
                .len()
                .checked_pow(self.s_star().len() as u32)
                .unwrap_or(usize::MAX);
            if !self.n.is_multiple_of(cells) {
                return bad(format!(
                    "balanced layout needs n divisible by {cells}, got n={}",
                    self.n
                ));
            }
        }
        Ok(())
    }
}

/// Closed-form ground truth attached to a generated sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub s_star: Vec<usize>,
    pub noise_coords: Vec<usize>,
    terms: Vec<EffectTerm>,
    m2: f64,
}

impl GroundTruth {
    fn term_value(&self, t: &EffectTerm, x: &[f64], cond: Option<&[usize]>) -> f64 {
        let mut v = t.amplitude;
        for &j in &t.subset {
            let known = cond.is_none_or(|a| a.contains(&j));
            v *= if known {
                t.effect.factor(x[j], self.m2)
            } else {
                t.effect.factor_mean(self.m2)
            };
        }
        v
    }

    /// Noise-free regression function `E[Y | X = x]`.
    pub fn regression(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| self.term_value(t, x, None)).sum()
    }

    /// `E[Y | X_A = x_A]`.
    pub fn conditional_mean(&self, x: &[f64], a: &[usize]) -> f64 {
        self.terms
            .iter()
            .map(|t| self.term_value(t, x, Some(a)))
            .sum()
    }

    /// `E[Y | X_A]` at every sample.
    pub fn conditional_means(&self, data: &SampleSet, a: &[usize]) -> Vec<f64> {
        (0..data.n())
            .map(|m| self.conditional_mean(data.row(m), a))
            .collect()
    }

    /// Values of each effect term at every sample, term-major.
    pub fn components(&self, data: &SampleSet) -> Vec<Vec<f64>> {
        self.terms
            .iter()
            .map(|t| {
                (0..data.n())
                    .map(|m| self.term_value(t, data.row(m), None))
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub data: SampleSet,
    pub truth: GroundTruth,
}

fn noise_factor(spec: &ScenarioSpec, q: usize) -> Result<Option<Mat<f64>>> {
    let Some(cov) = &spec.noise_dist.covariance else {
        return Ok(None);
    };
    let m = Mat::from_fn(q, q, |i, j| cov[i][j]);
    if (0..q).any(|i| (0..q).any(|j| m[(i, j)] != m[(j, i)] || !m[(i, j)].is_finite())) {
        return Err(Error::Config(
            "noise covariance must be finite and symmetric".into(),
        ));
    }
    let llt = m
        .llt(faer::Side::Lower)
        .map_err(|_| Error::Config("noise covariance must be positive definite".into()))?;
    Ok(Some(llt.L().to_owned()))
}

/// Draws a sample from `spec`. Identical specs give identical samples.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let s_star = spec.s_star();
    let noise_coords = spec.noise_coords();
    let q = noise_coords.len();
    let chol = noise_factor(spec, q)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let relevant_rows: Vec<Vec<f64>> = if spec.balanced {
        let levels = spec.relevant_dist.levels().expect("validated");
        let cells = levels.len().pow(s_star.len() as u32);
        let mut rows: Vec<Vec<f64>> = (0..spec.n)
            .map(|m| {
                let mut c = m % cells;
                (0..s_star.len())
                    .map(|_| {
                        let v = levels[c % levels.len()];
                        c /= levels.len();
                        v
                    })
                    .collect()
            })
            .collect();
        rows.shuffle(&mut rng);
        rows
    } else {
        (0..spec.n)
            .map(|_| {
                s_star
                    .iter()
                    .map(|_| spec.relevant_dist.sample(&mut rng))
                    .collect()
            })
            .collect()
    };

    let mut x = vec![0.0; spec.n * spec.d];
    let mut eps = Vec::with_capacity(spec.n);
    for (m, rel) in relevant_rows.iter().enumerate() {
        let row = &mut x[m * spec.d..(m + 1) * spec.d];
        for (&k, &v) in s_star.iter().zip(rel) {
            row[k] = v;
        }
        let z: Vec<f64> = (0..q).map(|_| rng.sample(StandardNormal)).collect();
        for (a, &k) in noise_coords.iter().enumerate() {
            row[k] = match &chol {
                Some(l) => (0..=a).map(|b| l[(a, b)] * z[b]).sum(),
                None => z[a],
            };
        }
        eps.push(rng.sample::<f64, _>(StandardNormal));
    }

    let truth = GroundTruth {
        s_star,
        noise_coords,
        terms: spec.relevant.clone(),
        m2: spec.relevant_dist.second_moment(),
    };
    let y: Vec<f64> = (0..spec.n)
        .map(|m| truth.regression(&x[m * spec.d..(m + 1) * spec.d]) + spec.noise_level * eps[m])
        .collect();
    let data = SampleSet::from_flat(spec.n, spec.d, x, y)?;
    Ok(Scenario { data, truth })
}

/// One empirical cross-moment `E[f_S · φ(X_T)]` checked against a CLT band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaMoment {
    pub term: usize,
    /// Conditioning subset `T ⊊ S`.
    pub against: Vec<usize>,
    /// Exponent of each coordinate of `T` in the test monomial.
    pub powers: Vec<u32>,
    pub moment: f64,
    pub band: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaReport {
    pub moments: Vec<AnovaMoment>,
    /// Terms with at least one moment outside its band.
    pub flagged: Vec<usize>,
}

impl AnovaReport {
    pub fn all_within(&self) -> bool {
        self.flagged.is_empty()
    }
}

fn mean_and_band(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = par::pairwise_sum(v) / n;
    let dev: Vec<f64> = v.iter().map(|a| (a - mean) * (a - mean)).collect();
    let sd = (par::pairwise_sum(&dev) / n).sqrt();
    (mean, 4.0 * sd.max(f64::EPSILON) / n.sqrt())
}

/// Empirical check of `E[f_S(X_S) | X_T] = 0` for every strict `T ⊊ S`.
///
/// Each component is tested against the monomials `Π_{j∈T} x_j^{a_j}`,
/// `a_j ∈ {1, 2}` (and the constant for `T = ∅`), each within `4·sd/√n`.
pub fn anova_check(spec: &ScenarioSpec, data: &SampleSet) -> Result<AnovaReport> {
    spec.validate()?;
    if data.d() != spec.d {
        return Err(Error::Shape {
            what: "scenario dimension",
            expected: spec.d,
            got: data.d(),
        });
    }
    let truth = GroundTruth {
        s_star: spec.s_star(),
        noise_coords: spec.noise_coords(),
        terms: spec.relevant.clone(),
        m2: spec.relevant_dist.second_moment(),
    };
    let comps = truth.components(data);
    let mut moments = Vec::new();
    let mut flagged = Vec::new();
    for (ti, (term, f)) in spec.relevant.iter().zip(&comps).enumerate() {
        let s = &term.subset;
        let mut bad = false;
        for mask in 0..(1u32 << s.len()) - 1 {
            let t: Vec<usize> = (0..s.len())
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| s[b])
                .collect();
            for pmask in 0..(1u32 << t.len()) {
                let powers: Vec<u32> = (0..t.len()).map(|b| 1 + (pmask >> b & 1)).collect();
                let prod: Vec<f64> = (0..data.n())
                    .map(|m| {
                        let row = data.row(m);
                        f[m] * t
                            .iter()
                            .zip(&powers)
                            .map(|(&j, &p)| row[j].powi(p as i32))
                            .product::<f64>()
                    })
                    .collect();
                let (moment, band) = mean_and_band(&prod);
                let within = moment.abs() <= band;
                bad |= !within;
                moments.push(AnovaMoment {
                    term: ti,
                    against: t.clone(),
                    powers,
                    moment,
                    band,
                    within,
                });
            }
        }
        if bad {
            flagged.push(ti);
        }
    }
    Ok(AnovaReport { moments, flagged })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportMetrics {
    pub terminal_support: BTreeSet<usize>,
    pub s_star: BTreeSet<usize>,
    pub false_actives: usize,
    pub missed: usize,
    pub exact_recovery: bool,
}

/// Compares `{k : |β_k| > zero_tol}` with `S*`. Use `zero_tol = 0` for bit-exact supports.
pub fn support_metrics(beta: &[f64], s_star: &[usize], zero_tol: f64) -> SupportMetrics {
    let terminal_support: BTreeSet<usize> = (0..beta.len())
        .filter(|&k| beta[k].abs() > zero_tol)
        .collect();
    let s_star: BTreeSet<usize> = s_star.iter().copied().collect();
    let false_actives = terminal_support.difference(&s_star).count();
    let missed = s_star.difference(&terminal_support).count();
    SupportMetrics {
        terminal_support,
        s_star,
        false_actives,
        missed,
        exact_recovery: false_actives == 0 && missed == 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empirical_mean(v: impl Iterator<Item = f64>) -> f64 {
        let v: Vec<f64> = v.collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    #[test]
    fn main_effect_conditional_means() {
        let mut spec = ScenarioSpec::main_effect(10, 1, 3);
        spec.relevant = vec![EffectTerm::new(vec![0], EffectKind::Linear, 1.0)];
        spec.relevant_dist = RelevantDist::RademacherIid;
        let sc = generate(&spec).unwrap();
        assert_eq!(sc.truth.s_star, vec![0]);
        for m in 0..sc.data.n() {
            let x = sc.data.row(m);
            assert_eq!(sc.truth.conditional_mean(x, &[0]), x[0]);
            assert_eq!(sc.truth.conditional_mean(x, &[1]), 0.0);
            assert_eq!(sc.data.y()[m], x[0]);
        }
    }

    #[test]
    fn quadratic_effect_is_uncorrelated_but_informative() {
        // exact enumeration over {−1, 0, 1}
        let xs = [-1.0, 0.0, 1.0];
        let f = |x: f64| x * x - 2.0 / 3.0;
        assert!(empirical_mean(xs.iter().map(|&x| x * f(x))).abs() < 1e-15);
        assert!(empirical_mean(xs.iter().map(|&x| f(x))).abs() < 1e-15);

        let spec = ScenarioSpec {
            relevant: vec![EffectTerm::new(vec![0], EffectKind::CenteredQuadratic, 1.0)],
            ..ScenarioSpec::main_effect(3, 0, 1)
        };
        let spec = ScenarioSpec {
            d: 1,
            n: 3,
            balanced: true,
            ..spec
        };
        let sc = generate(&spec).unwrap();
        let mut col = sc.data.column(0);
        col.sort_by(f64::total_cmp);
        assert_eq!(col, xs);
        for m in 0..3 {
            let x = sc.data.row(m);
            assert_eq!(sc.truth.conditional_mean(x, &[0]), f(x[0]));
        }
        assert_ne!(sc.truth.conditional_mean(&[0.0], &[0]), 0.0);
    }

    #[test]
    fn xor_structure() {
        let sc = generate(&ScenarioSpec::xor(4, 400, 9)).unwrap();
        let cm1 = sc.truth.conditional_means(&sc.data, &[0]);
        let cm2 = sc.truth.conditional_means(&sc.data, &[1]);
        let cm12 = sc.truth.conditional_means(&sc.data, &[0, 1]);
        assert!(cm1.iter().chain(&cm2).all(|&v| v == 0.0));
        assert_eq!(cm12, sc.data.y());
        // balanced layout: every (±1, ±1) cell appears n/4 times
        for a in [-1.0, 1.0] {
            for b in [-1.0, 1.0] {
                let c = (0..400)
                    .filter(|&m| sc.data.row(m)[0] == a && sc.data.row(m)[1] == b)
                    .count();
                assert_eq!(c, 100);
            }
        }
    }

    #[test]
    fn tower_property_on_nested_subsets() {
        let spec = ScenarioSpec {
            d: 4,
            relevant: vec![
                EffectTerm::new(vec![0], EffectKind::Linear, 0.7),
                EffectTerm::new(vec![1, 2], EffectKind::Product, 1.3),
                EffectTerm::new(vec![0, 1, 2], EffectKind::Product, -0.4),
                EffectTerm::new(vec![2], EffectKind::CenteredSign, 0.5),
            ],
            relevant_dist: RelevantDist::UniformIid,
            noise_dist: NoiseSpec::default(),
            noise_level: 0.0,
            n: 27,
            seed: 2,
            balanced: true,
        };
        let sc = generate(&spec).unwrap();
        // averaging E[Y | X_{0,1}] over the full design of x_1 gives E[Y | X_0]
        for m in 0..sc.data.n() {
            let x = sc.data.row(m).to_vec();
            let outer = sc.truth.conditional_mean(&x, &[0]);
            let inner: Vec<f64> = [-1.0, 0.0, 1.0]
                .iter()
                .map(|&v| {
                    let mut z = x.clone();
                    z[1] = v;
                    sc.truth.conditional_mean(&z, &[0, 1])
                })
                .collect();
            assert!((outer - inner.iter().sum::<f64>() / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn seeds_reproduce_and_differ() {
        let spec = ScenarioSpec::noise_elimination(5, 50, 0.2, 4);
        let a = generate(&spec).unwrap().data;
        let b = generate(&spec).unwrap().data;
        assert_eq!(a, b);
        let c = generate(&ScenarioSpec { seed: 5, ..spec }).unwrap().data;
        assert_ne!(a, c);
    }

    #[test]
    fn noise_coordinates_look_gaussian_and_uninformative() {
        let n = 20_000;
        let spec = ScenarioSpec::noise_elimination(4, n, 0.3, 8);
        let sc = generate(&spec).unwrap();
        let nf = n as f64;
        for &k in &sc.truth.noise_coords {
            let col = sc.data.column(k);
            let mean = empirical_mean(col.iter().copied());
            let var = empirical_mean(col.iter().map(|v| (v - mean).powi(2)));
            let skew = empirical_mean(col.iter().map(|v| (v - mean).powi(3))) / var.powf(1.5);
            let kurt = empirical_mean(col.iter().map(|v| (v - mean).powi(4))) / (var * var) - 3.0;
            assert!(skew.abs() < 4.0 * (6.0 / nf).sqrt(), "skew {skew}");
            assert!(kurt.abs() < 4.0 * (24.0 / nf).sqrt(), "kurt {kurt}");
            let y = sc.data.y();
            let my = empirical_mean(y.iter().copied());
            let vy = empirical_mean(y.iter().map(|v| (v - my).powi(2)));
            let cov = empirical_mean(col.iter().zip(y).map(|(x, y)| (x - mean) * (y - my)));
            assert!((cov / (var * vy).sqrt()).abs() < 4.0 / nf.sqrt());
        }
    }

    #[test]
    fn correlated_noise_covariance() {
        let mut spec = ScenarioSpec::noise_elimination(4, 20_000, 0.0, 1);
        spec.noise_dist.covariance = Some(vec![vec![1.0, 0.6], vec![0.6, 2.0]]);
        let sc = generate(&spec).unwrap();
        let (a, b) = (sc.data.column(2), sc.data.column(3));
        let cov = empirical_mean(a.iter().zip(&b).map(|(x, y)| x * y));
        let vb = empirical_mean(b.iter().map(|y| y * y));
        assert!((cov - 0.6).abs() < 0.05, "{cov}");
        assert!((vb - 2.0).abs() < 0.1, "{vb}");

        spec.noise_dist.covariance = Some(vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(generate(&spec), Err(Error::Config(_))));
        spec.noise_dist.covariance = Some(vec![vec![1.0]]);
        assert!(matches!(generate(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn inconsistent_specs_are_config_errors() {
        let base = ScenarioSpec::xor(3, 8, 0);
        let cases = [
            ScenarioSpec {
                relevant: vec![EffectTerm::new(vec![0, 5], EffectKind::Product, 1.0)],
                ..base.clone()
            },
            ScenarioSpec {
                relevant: vec![EffectTerm::new(vec![0], EffectKind::Product, 1.0)],
                ..base.clone()
            },
            ScenarioSpec {
                relevant: vec![EffectTerm::new(vec![1, 1], EffectKind::Product, 1.0)],
                ..base.clone()
            },
            ScenarioSpec {
                n: 6,
                ..base.clone()
            },
            ScenarioSpec {
                relevant_dist: RelevantDist::GaussianIid,
                ..base.clone()
            },
            ScenarioSpec {
                noise_level: -1.0,
                ..base.clone()
            },
        ];
        for c in cases {
            assert!(matches!(generate(&c), Err(Error::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn anova_check_flags_only_miscentered_terms() {
        let xor = ScenarioSpec {
            balanced: false,
            n: 10_000,
            ..ScenarioSpec::xor(3, 10_000, 5)
        };
        let sc = generate(&xor).unwrap();
        let rep = anova_check(&xor, &sc.data).unwrap();
        assert!(rep.all_within(), "{rep:?}");
        assert!(rep.moments.iter().all(|m| m.band <= 4.0 / 100.0 + 1e-12));

        let noisy = ScenarioSpec {
            noise_level: 2.0,
            ..xor.clone()
        };
        let sc = generate(&noisy).unwrap();
        assert!(anova_check(&noisy, &sc.data).unwrap().all_within());

        let mut bad = ScenarioSpec::main_effect(5000, 0, 3);
        bad.relevant[1].effect = EffectKind::Square;
        let sc = generate(&bad).unwrap();
        assert_eq!(anova_check(&bad, &sc.data).unwrap().flagged, vec![1]);
    }

    #[test]
    fn support_metric_examples() {
        let m = support_metrics(&[1.0, 0.0, 0.0], &[0], DEFAULT_ZERO_TOL);
        assert!(m.exact_recovery);
        let m = support_metrics(&[1.0, 0.2, 0.0], &[0], DEFAULT_ZERO_TOL);
        assert_eq!((m.false_actives, m.missed, m.exact_recovery), (1, 0, false));
        let m = support_metrics(&[0.0; 3], &[0], DEFAULT_ZERO_TOL);
        assert_eq!((m.false_actives, m.missed), (0, 1));
        let m = support_metrics(&[1e-300, 0.0], &[], 0.0);
        assert_eq!(m.false_actives, 1);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = ScenarioSpec::xor(5, 40, 3);
        let s = serde_json::to_string(&spec).unwrap();
        assert!(s.contains("\"rademacher_iid\""));
        let back: ScenarioSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(spec, back);
        let minimal: ScenarioSpec = serde_json::from_str(
            r#"{"d":2,"relevant":[{"subset":[0],"effect":"linear"}],"relevant_dist":"gaussian_iid","n":5}"#,
        )
        .unwrap();
        assert_eq!(minimal.relevant[0].amplitude, 1.0);
        assert_eq!(minimal.noise_coords(), vec![1]);
    }
}
