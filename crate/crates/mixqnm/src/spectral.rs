//! Bath spectral densities ρ_ab(k0) and the mode parameters of the two fields.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{MixError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// J(k0) = k0·exp(−k0²/Λ²)
    OhmicGaussian,
    /// J(k0) = k0·Λ⁴/(k0²+Λ²)²
    OhmicLorentzian,
}

impl Shape {
    /// J(k0) for cutoff `lambda`. Odd in k0 by construction.
    #[inline]
    pub fn j(self, k0: f64, lambda: f64) -> f64 {
        k0 * self.j_over_k(k0, lambda)
    }

    /// J(k0)/k0, an even function that is finite at the origin.
    #[inline]
    pub fn j_over_k(self, k0: f64, lambda: f64) -> f64 {
        match self {
            Shape::OhmicGaussian => (-(k0 / lambda).powi(2)).exp(),
            Shape::OhmicLorentzian => {
                let l2 = lambda * lambda;
                let d = k0 * k0 + l2;
                l2 * l2 / (d * d)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channel {
    pub g: [f64; 2],
    pub shape: Shape,
    pub lambda: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

impl Channel {
    pub fn new(g: [f64; 2], shape: Shape, lambda: f64) -> Self {
        Channel { g, shape, lambda, weight: 1.0 }
    }

    /// weight·g_a·g_b
    #[inline]
    pub fn coupling(&self, a: usize, b: usize) -> f64 {
        self.weight * self.g[a] * self.g[b]
    }

    pub fn coupling_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.coupling(0, 0), self.coupling(0, 1), self.coupling(1, 0), self.coupling(1, 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KDependence {
    #[default]
    None,
}

/// Multi-channel rank-1 spectral density, immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralModel {
    pub channels: Vec<Channel>,
    #[serde(default)]
    pub k_dependence: KDependence,
}

impl SpectralModel {
    pub fn new(channels: Vec<Channel>) -> Result<Self> {
        let m = SpectralModel { channels, k_dependence: KDependence::None };
        m.validate()?;
        Ok(m)
    }

    pub fn single(g: [f64; 2], shape: Shape, lambda: f64) -> Result<Self> {
        Self::new(vec![Channel::new(g, shape, lambda)])
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(MixError::Model("empty channel list".into()));
        }
        for (i, c) in self.channels.iter().enumerate() {
            if c.lambda.is_nan() || c.lambda <= 0.0 || c.lambda.is_infinite() {
                return Err(MixError::Model(format!("non-positive cutoff in channel {i}")));
            }
            if c.g.iter().any(|g| !g.is_finite()) {
                return Err(MixError::Model(format!("NaN coupling in channel {i}")));
            }
            if c.weight.is_nan() || c.weight < 0.0 || c.weight.is_infinite() {
                return Err(MixError::Model(format!("negative weight in channel {i}")));
            }
        }
        Ok(())
    }

    /// ρ_ab(k0) for field indices a, b ∈ {0, 1}.
    pub fn rho(&self, a: usize, b: usize, k0: f64) -> f64 {
        self.channels.iter().map(|c| c.coupling(a, b) * c.shape.j(k0, c.lambda)).sum()
    }

    pub fn rho_matrix(&self, k0: f64) -> Matrix2<f64> {
        let mut m = Matrix2::zeros();
        for c in &self.channels {
            m += c.coupling_matrix() * c.shape.j(k0, c.lambda);
        }
        m
    }

    /// Same model with every coupling multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut m = self.clone();
        for c in &mut m.channels {
            c.g = [c.g[0] * factor, c.g[1] * factor];
        }
        m
    }

    /// Same model with field-2 couplings zeroed.
    pub fn without_field2(&self) -> Self {
        let mut m = self.clone();
        for c in &mut m.channels {
            c.g[1] = 0.0;
        }
        m
    }

    /// Effective per-field coupling sqrt(Σ_ch w·g_a²).
    pub fn effective_couplings(&self) -> [f64; 2] {
        let mut s = [0.0; 2];
        for c in &self.channels {
            s[0] += c.weight * c.g[0] * c.g[0];
            s[1] += c.weight * c.g[1] * c.g[1];
        }
        [s[0].sqrt(), s[1].sqrt()]
    }

    pub fn max_coupling(&self) -> f64 {
        let e = self.effective_couplings();
        e[0].max(e[1])
    }

    pub fn max_cutoff(&self) -> f64 {
        self.channels.iter().map(|c| c.lambda).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.channels.iter().all(|c| c.weight == 0.0 || (c.g[0] == 0.0 && c.g[1] == 0.0))
    }
}

/// Mode parameters of the two fields at fixed |k|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeParams {
    pub m: [f64; 2],
    #[serde(default)]
    pub kmag: f64,
    /// Inverse temperature; `f64::INFINITY` encodes zero temperature.
    pub beta: f64,
}

impl ModeParams {
    pub fn new(m: [f64; 2], kmag: f64, beta: f64) -> Result<Self> {
        let p = ModeParams { m, kmag, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(MixError::Params("masses must be finite and non-negative".into()));
        }
        if !(self.kmag.is_finite() && self.kmag >= 0.0) {
            return Err(MixError::Params("|k| must be finite and non-negative".into()));
        }
        if self.beta.is_nan() || self.beta <= 0.0 {
            return Err(MixError::Params("beta must be positive".into()));
        }
        if self.omega(0) <= 0.0 || self.omega(1) <= 0.0 {
            return Err(MixError::Params("mode frequencies must be positive".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn omega(&self, c: usize) -> f64 {
        (self.m[c] * self.m[c] + self.kmag * self.kmag).sqrt()
    }

    pub fn omegas(&self) -> [f64; 2] {
        [self.omega(0), self.omega(1)]
    }

    /// ω̄ = (ω₁+ω₂)/2
    pub fn omega_bar(&self) -> f64 {
        0.5 * (self.omega(0) + self.omega(1))
    }

    /// δ = ω₁−ω₂ (negative when field 2 is heavier)
    pub fn delta(&self) -> f64 {
        self.omega(0) - self.omega(1)
    }

    /// ω₁² − ω₂²
    pub fn split_sq(&self) -> f64 {
        let w = self.omegas();
        w[0] * w[0] - w[1] * w[1]
    }

    pub fn zero_temperature(&self) -> bool {
        self.beta.is_infinite()
    }

    pub fn with_masses(&self, m: [f64; 2]) -> Self {
        ModeParams { m, ..*self }
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        ModeParams { beta, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryReport {
    /// max |ρ_ab(−k0) + ρ_ba(k0)|, relative to the largest |ρ| on the grid
    pub oddness: f64,
    /// max |ρ_ab(k0) − ρ_ba(k0)|, relative
    pub symmetry: f64,
    /// max(0, −λ_min(ρ(k0))) for k0 > 0, relative
    pub psd: f64,
    pub passed: bool,
}

pub const SYMMETRY_TOL: f64 = 1e-14;

/// Checks oddness, matrix symmetry and positivity of an arbitrary ρ.
pub fn validate_symmetries_with<F>(rho: F, grid: &[f64]) -> SymmetryReport
where
    F: Fn(usize, usize, f64) -> f64,
{
    assert!(!grid.is_empty(), "symmetry grid must be nonempty");
    let mut scale: f64 = 0.0;
    let (mut odd, mut sym, mut psd): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for &k in grid {
        for a in 0..2 {
            for b in 0..2 {
                scale = scale.max(rho(a, b, k).abs()).max(rho(a, b, -k).abs());
                odd = odd.max((rho(a, b, -k) + rho(b, a, k)).abs());
                sym = sym.max((rho(a, b, k) - rho(b, a, k)).abs());
            }
        }
        if k > 0.0 {
            let (p, q, r) = (rho(0, 0, k), 0.5 * (rho(0, 1, k) + rho(1, 0, k)), rho(1, 1, k));
            let disc = ((p - r) * (p - r) + 4.0 * q * q).sqrt();
            let lmin = 0.5 * (p + r - disc);
            // rounding of the 2×2 eigenvalue formula is ~ε·trace
            let slack = 4.0 * f64::EPSILON * (p.abs() + r.abs());
            psd = psd.max((-lmin - slack).max(0.0));
        }
    }
    let s = if scale > 0.0 { scale } else { 1.0 };
    let (odd, sym, psd) = (odd / s, sym / s, psd / s);
    SymmetryReport { oddness: odd, symmetry: sym, psd, passed: odd <= SYMMETRY_TOL && sym <= SYMMETRY_TOL && psd <= SYMMETRY_TOL }
}

pub fn validate_symmetries(model: &SpectralModel, grid: &[f64]) -> SymmetryReport {
    validate_symmetries_with(|a, b, k| model.rho(a, b, k), grid)
}

/// Parameter sets used throughout the tests and by `validate --builtin`.
pub mod fixtures {
    use super::*;

    pub fn bath() -> SpectralModel {
        SpectralModel::single([0.1, 0.1], Shape::OhmicGaussian, 10.0).expect("valid")
    }

    /// Non-degenerate: m = (1.0, 1.1).
    pub fn p0() -> (SpectralModel, ModeParams) {
        (bath(), ModeParams { m: [1.0, 1.1], kmag: 0.0, beta: 1.0 })
    }

    /// Nearly degenerate: m = (1.0, 1.0005).
    pub fn p1() -> (SpectralModel, ModeParams) {
        (bath(), ModeParams { m: [1.0, 1.0005], kmag: 0.0, beta: 1.0 })
    }

    /// Coupling hierarchy g₁ = 0.1, g₂ = 0.005. Two channels keep ρ full rank so
    /// that the long-lived mode decays at O(g₂²) instead of being exactly dark.
    pub fn p2() -> (SpectralModel, ModeParams) {
        let model = SpectralModel::new(vec![
            Channel::new([0.1, 0.005], Shape::OhmicGaussian, 10.0),
            Channel::new([0.0, 0.005], Shape::OhmicGaussian, 10.0),
        ])
        .expect("valid");
        (model, ModeParams { m: [1.0, 1.0005], kmag: 0.0, beta: 1.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_rho_values() {
        let m = SpectralModel::single([0.1, 0.1], Shape::OhmicGaussian, 10.0).unwrap();
        assert!((m.rho(0, 0, 1.0) - 0.01 * (-0.01f64).exp()).abs() < 1e-17);
        let m = SpectralModel::single([0.1, 0.2], Shape::OhmicGaussian, 10.0).unwrap();
        assert!((m.rho(0, 1, 1.0) - 0.0198010).abs() < 1e-7);
        assert_eq!(m.rho(0, 1, 1.0), m.rho(1, 0, 1.0));
        assert_eq!(m.rho(0, 1, 0.0), 0.0);
    }

    #[test]
    fn lorentzian_shape() {
        let j = Shape::OhmicLorentzian.j(2.0, 1.0);
        assert!((j - 2.0 / 25.0).abs() < 1e-16);
    }

    #[test]
    fn rejects_bad_models() {
        assert!(SpectralModel::single([0.1, 0.1], Shape::OhmicGaussian, -1.0).is_err());
        assert!(SpectralModel::new(vec![]).is_err());
        assert!(SpectralModel::single([f64::NAN, 0.1], Shape::OhmicGaussian, 1.0).is_err());
        let e = SpectralModel::single([0.1, 0.1], Shape::OhmicGaussian, 0.0).unwrap_err();
        assert!(e.to_string().contains("non-positive cutoff"));
    }

    #[test]
    fn zero_coupling_is_identically_zero() {
        let m = SpectralModel::single([0.0, 0.0], Shape::OhmicLorentzian, 3.0).unwrap();
        for k in [-2.0, 0.0, 0.5, 7.0] {
            assert_eq!(m.rho_matrix(k), Matrix2::zeros());
        }
        let r = validate_symmetries(&m, &[0.1, 1.0, 10.0]);
        assert_eq!((r.oddness, r.symmetry, r.psd), (0.0, 0.0, 0.0));
    }

    #[test]
    fn single_channel_is_rank_one() {
        let m = SpectralModel::single([0.3, -0.2], Shape::OhmicGaussian, 4.0).unwrap();
        let r = m.rho_matrix(1.3);
        assert!(r.determinant().abs() <= 1e-15 * r.trace().powi(2));
    }

    #[test]
    fn asymmetric_rho_is_flagged() {
        let m = fixtures::bath();
        let bad = |a: usize, b: usize, k: f64| m.rho(a, b, k) + if a == 0 && b == 1 { 1e-3 * k } else { 0.0 };
        let r = validate_symmetries_with(bad, &[0.1, 1.0, 10.0]);
        assert!(!r.passed);
        assert!(r.symmetry > 1e-6);
    }

    #[test]
    fn params_derived_quantities() {
        let p = ModeParams::new([0.6, 0.0], 0.8, 2.0).unwrap();
        assert!((p.omega(0) - 1.0).abs() < 1e-15);
        assert!((p.omega(1) - 0.8).abs() < 1e-15);
        assert!((p.omega_bar() - 0.9).abs() < 1e-15);
        assert!(ModeParams::new([0.0, 0.0], 0.0, 1.0).is_err());
        assert!(ModeParams::new([1.0, 1.0], 0.0, -1.0).is_err());
    }
}
