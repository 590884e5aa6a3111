//! Mixture-generated translation-invariant kernels.
//!
//! Both families are built from the Laplace transform of a discrete probability
//! measure on `(0, ∞)`:
//!
//! ```text
//! ψ(z)  = Σ_k p_k exp(-t_k z)
//! ψ'(z) = -Σ_k p_k t_k exp(-t_k z)
//! ```
//!
//! The ℓ1 family uses `K(u) = ψ(‖u‖₁)` (Laplace kernel for a single atom at
//! `t = 1`), the radial family uses `K(u) = ψ(‖u‖₂²)` (Gaussian kernel). The
//! reweighted kernel is `K_β(x, x') = K(β ∘ (x − x'))`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{check_len, Error, Result};

/// One atom `(t, p)` of the mixing measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    /// Scale, strictly positive.
    pub t: f64,
    /// Probability weight.
    pub p: f64,
}

/// Discrete probability measure with compact support in `(0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct MixtureMeasure {
    atoms: Vec<Atom>,
}

impl MixtureMeasure {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Config(
                "mixture measure needs at least one atom".into(),
            ));
        }
        for a in &atoms {
            if !(a.t.is_finite() && a.t > 0.0) {
                return Err(Error::Config(format!(
                    "atom scale must be finite and > 0, got {}",
                    a.t
                )));
            }
            if !(a.p.is_finite() && a.p >= 0.0) {
                return Err(Error::Config(format!(
                    "atom weight must be finite and >= 0, got {}",
                    a.p
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "atom weights must sum to 1, got {total}"
            )));
        }
        Ok(Self { atoms })
    }

    /// Point mass at `t`.
    pub fn dirac(t: f64) -> Result<Self> {
        Self::new(vec![Atom { t, p: 1.0 }])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Largest atom scale (`M_μ`).
    pub fn max_scale(&self) -> f64 {
        self.atoms.iter().map(|a| a.t).fold(0.0, f64::max)
    }

    /// First moment `Σ p_k t_k`, equal to `-ψ'(0)`.
    pub fn first_moment(&self) -> f64 {
        self.atoms.iter().map(|a| a.p * a.t).sum()
    }
}

impl TryFrom<Vec<Atom>> for MixtureMeasure {
    type Error = Error;

    fn try_from(atoms: Vec<Atom>) -> Result<Self> {
        Self::new(atoms)
    }
}

impl From<MixtureMeasure> for Vec<Atom> {
    fn from(m: MixtureMeasure) -> Self {
        m.atoms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `K(u) = ψ(‖u‖₁)`
    L1Mixture,
    /// `K(u) = ψ(‖u‖₂²)`
    RadialMixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub mu: MixtureMeasure,
}

/// A direction in β-space. Entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction(Vec<f64>);

impl Direction {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("direction entries must be finite".into()));
        }
        Ok(Self(v))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    /// Coordinate direction `e_i`.
    pub fn unit(d: usize, i: usize) -> Self {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for Direction {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// One-sided coefficient of `|β_i|` along `v_i`: `sgn(β_i)·v_i` off zero, `|v_i|` at zero.
///
/// The branch is selected by exact comparison with zero.
pub fn w_coeff(beta_i: f64, v_i: f64) -> f64 {
    if beta_i == 0.0 {
        v_i.abs()
    } else {
        beta_i.signum() * v_i
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, mu: MixtureMeasure) -> Self {
        Self { family, mu }
    }

    /// Laplace kernel `exp(-‖u‖₁)`.
    pub fn laplace() -> Self {
        Self::new(
            KernelFamily::L1Mixture,
            MixtureMeasure::dirac(1.0).expect("unit atom"),
        )
    }

    /// Gaussian kernel `exp(-‖u‖₂²)`.
    pub fn gaussian() -> Self {
        Self::new(
            KernelFamily::RadialMixture,
            MixtureMeasure::dirac(1.0).expect("unit atom"),
        )
    }

    pub fn is_l1(&self) -> bool {
        self.family == KernelFamily::L1Mixture
    }

    pub fn psi(&self, z: f64) -> Result<f64> {
        check_z(z)?;
        Ok(self.psi_unchecked(z))
    }

    /// Right-hand derivative at `z = 0`.
    pub fn psi_prime(&self, z: f64) -> Result<f64> {
        check_z(z)?;
        Ok(self.psi_prime_unchecked(z))
    }

    #[inline]
    pub(crate) fn psi_unchecked(&self, z: f64) -> f64 {
        self.mu.atoms.iter().map(|a| a.p * (-a.t * z).exp()).sum()
    }

    #[inline]
    pub(crate) fn psi_prime_unchecked(&self, z: f64) -> f64 {
        -self
            .mu
            .atoms
            .iter()
            .map(|a| a.p * a.t * (-a.t * z).exp())
            .sum::<f64>()
    }

    /// Argument of ψ: `Σ|β_i||Δ_i|` (ℓ1) or `Σ β_i² Δ_i²` (radial).
    #[inline]
    pub(crate) fn reduced_distance(&self, beta: &[f64], x: &[f64], xp: &[f64]) -> f64 {
        match self.family {
            KernelFamily::L1Mixture => beta
                .iter()
                .zip(x.iter().zip(xp))
                .map(|(b, (a, c))| (b * (a - c)).abs())
                .sum(),
            KernelFamily::RadialMixture => beta
                .iter()
                .zip(x.iter().zip(xp))
                .map(|(b, (a, c))| {
                    let u = b * (a - c);
                    u * u
                })
                .sum(),
        }
    }

    /// `K_β(x, x') = K(β ∘ (x − x'))`.
    pub fn kernel_eval(&self, beta: &[f64], x: &[f64], xp: &[f64]) -> Result<f64> {
        check_len("x", beta.len(), x.len())?;
        check_len("xp", beta.len(), xp.len())?;
        Ok(self.psi_unchecked(self.reduced_distance(beta, x, xp)))
    }

    /// One-sided derivative of `s ↦ K_{β+sv}(x, x')` at `s = 0⁺`.
    pub fn dkernel_directional(
        &self,
        beta: &[f64],
        x: &[f64],
        xp: &[f64],
        v: &Direction,
    ) -> Result<f64> {
        let d = beta.len();
        check_len("x", d, x.len())?;
        check_len("xp", d, xp.len())?;
        check_len("direction", d, v.len())?;
        let dpsi = self.psi_prime_unchecked(self.reduced_distance(beta, x, xp));
        let inner: f64 = match self.family {
            KernelFamily::L1Mixture => (0..d)
                .map(|i| w_coeff(beta[i], v[i]) * (x[i] - xp[i]).abs())
                .sum(),
            KernelFamily::RadialMixture => (0..d)
                .map(|i| {
                    let u = x[i] - xp[i];
                    2.0 * beta[i] * v[i] * u * u
                })
                .sum(),
        };
        Ok(dpsi * inner)
    }

    /// Product-Cauchy density `q_t(ω) = Π_j 2t / (4π² ω_j² + t²)`; ℓ1 family only.
    pub fn spectral_density(&self, t: f64, omega: &[f64]) -> Result<f64> {
        if !self.is_l1() {
            return Err(Error::Unsupported(
                "spectral density is defined for the l1 family only",
            ));
        }
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Domain(format!(
                "spectral scale must be > 0, got {t}"
            )));
        }
        Ok(omega
            .iter()
            .map(|w| 2.0 * t / (4.0 * PI * PI * w * w + t * t))
            .product())
    }
}

fn check_z(z: f64) -> Result<()> {
    if z.is_nan() || z < 0.0 {
        Err(Error::Domain(format!("psi is defined for z >= 0, got {z}")))
    } else {
        Ok(())
    }
}
