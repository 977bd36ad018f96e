//! Quasi-normal modes of the field-amplitude Green's function G_φ.
//!
//! G_φ(s) = [s² + diag(ω²) + Σ(s)]⁻¹ has four isolated poles near ±iω_c. Each
//! branch below truncates Σ at a fixed argument, so a pole is a closed-form
//! expression of a handful of kernel values.

use nalgebra::Matrix2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MixError, Result};
use crate::kernels::{Kernels, KernelMatrix};
use crate::spectral::{ModeParams, SpectralModel};
use crate::{c, CMat2, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    NonDegenerate,
    NearlyDegenerate,
    /// Coupling hierarchy g₁ ≫ g₂ with ω₁² − ω₂² ~ g₁².
    HierarchyG1sq,
    /// Coupling hierarchy g₁ ≫ g₂ with ω₁² − ω₂² ≲ g₁g₂.
    HierarchyG1g2,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::NonDegenerate => "non_degenerate",
            Regime::NearlyDegenerate => "nearly_degenerate",
            Regime::HierarchyG1sq => "hierarchy_g1sq",
            Regime::HierarchyG1g2 => "hierarchy_g1g2",
        }
    }

    pub fn is_hierarchy(self) -> bool {
        matches!(self, Regime::HierarchyG1sq | Regime::HierarchyG1g2)
    }

    /// Kernels sampled at ±iω̄ rather than at the individual bare poles.
    pub fn uses_mean_frequency(self) -> bool {
        self != Regime::NonDegenerate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeLabel {
    A1,
    A2,
    A1Dag,
    A2Dag,
}

impl ModeLabel {
    pub const ALL: [ModeLabel; 4] = [ModeLabel::A1, ModeLabel::A2, ModeLabel::A1Dag, ModeLabel::A2Dag];

    pub fn field(self) -> usize {
        match self {
            ModeLabel::A1 | ModeLabel::A1Dag => 0,
            ModeLabel::A2 | ModeLabel::A2Dag => 1,
        }
    }

    pub fn is_dagger(self) -> bool {
        matches!(self, ModeLabel::A1Dag | ModeLabel::A2Dag)
    }

    pub fn conj(self) -> ModeLabel {
        match self {
            ModeLabel::A1 => ModeLabel::A1Dag,
            ModeLabel::A2 => ModeLabel::A2Dag,
            ModeLabel::A1Dag => ModeLabel::A1,
            ModeLabel::A2Dag => ModeLabel::A2,
        }
    }

    pub fn index(self) -> usize {
        match self {
            ModeLabel::A1 => 0,
            ModeLabel::A2 => 1,
            ModeLabel::A1Dag => 2,
            ModeLabel::A2Dag => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModeLabel::A1 => "a1",
            ModeLabel::A2 => "a2",
            ModeLabel::A1Dag => "a1_dag",
            ModeLabel::A2Dag => "a2_dag",
        }
    }
}

/// One term 𝔾·e^{st} of a mode sum.
#[derive(Debug, Clone, PartialEq)]
pub struct QnmMode {
    pub label: ModeLabel,
    pub pole: Complex64,
    pub residue: CMat2,
    /// Bare pole the kernels were truncated at (∓iω_c, or ∓iω̄).
    pub bare: Complex64,
    /// Residue with the 1/(2s) prefactor stripped.
    pub bracket: CMat2,
    /// Σ (not ω-scaled) at the truncation point.
    pub sigma: CMat2,
}

/// Ω²(s), D(s), Δ²(s) at one truncation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aux {
    pub at: Complex64,
    pub omega_sq: Complex64,
    pub d: Complex64,
    pub delta_sq: Complex64,
}

#[derive(Debug, Clone)]
pub struct AmplitudeSpectrum {
    pub regime: Regime,
    /// Ordered a₁, a₂, a₁†, a₂†.
    pub modes: [QnmMode; 4],
    pub aux: Vec<Aux>,
    /// Dressed frequencies Ω_i = |Im s_{a_i}|.
    pub omega: [f64; 2],
    /// Amplitude decay rates Γ_i = −Re s_{a_i}.
    pub gamma: [f64; 2],
    pub params: ModeParams,
    pub diagnostics: Vec<String>,
}

impl AmplitudeSpectrum {
    pub fn mode(&self, label: ModeLabel) -> &QnmMode {
        &self.modes[label.index()]
    }

    pub fn poles(&self) -> [Complex64; 4] {
        [self.modes[0].pole, self.modes[1].pole, self.modes[2].pole, self.modes[3].pole]
    }

    fn finish(regime: Regime, modes: [QnmMode; 4], aux: Vec<Aux>, params: &ModeParams, mut diagnostics: Vec<String>) -> Self {
        let omega = [modes[0].pole.im.abs(), modes[1].pole.im.abs()];
        let gamma = [-modes[0].pole.re, -modes[1].pole.re];
        // Continuity: every dressed pole should sit closest to its own bare pole.
        let bare = bare_poles(params);
        for m in &modes {
            let own = bare[m.label.index()];
            let nearest = bare
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - m.pole).norm().total_cmp(&(b.1 - m.pole).norm()))
                .map(|(i, _)| i)
                .unwrap_or(0);
            if (bare[nearest] - own).norm() > 0.0 && (bare[nearest] - m.pole).norm() < (own - m.pole).norm() {
                diagnostics.push(format!(
                    "pole {} = {:.6e}{:+.6e}i is closer to bare pole {} than to its own",
                    m.label.name(),
                    m.pole.re,
                    m.pole.im,
                    ModeLabel::ALL[nearest].name()
                ));
            }
        }
        AmplitudeSpectrum { regime, modes, aux, omega, gamma, params: *params, diagnostics }
    }

    /// Complex mode sums Σ s_iⁿ 𝔾_i e^{s_i t} for n = 0, 1, 2.
    pub fn greens_complex(&self, t: f64) -> [CMat2; 3] {
        let mut out = [CMat2::zeros(); 3];
        for m in &self.modes {
            let e = (m.pole * t).exp();
            let g = m.residue * e;
            out[0] += g;
            out[1] += g * m.pole;
            out[2] += g * (m.pole * m.pole);
        }
        out
    }

    /// G_φ(t)
    pub fn greens_time(&self, t: f64) -> Matrix2<f64> {
        self.greens_complex(t)[0].map(|z| z.re)
    }

    /// (G_φ, Ġ_φ, G̈_φ) at t, real parts.
    pub fn greens_derivs(&self, t: f64) -> [Matrix2<f64>; 3] {
        let g = self.greens_complex(t);
        [g[0].map(|z| z.re), g[1].map(|z| z.re), g[2].map(|z| z.re)]
    }

    /// max |Im G_φ(t)| relative to max |G_φ(t)|.
    pub fn reality_defect(&self, t: f64) -> f64 {
        let g = self.greens_complex(t)[0];
        let im = g.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        let nrm = g.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if nrm == 0.0 {
            im
        } else {
            im / nrm
        }
    }
}

/// Bare poles in mode order a₁, a₂, a₁†, a₂†.
pub fn bare_poles(params: &ModeParams) -> [Complex64; 4] {
    let w = params.omegas();
    [c(0.0, -w[0]), c(0.0, -w[1]), c(0.0, w[0]), c(0.0, w[1])]
}

/// Thresholds used by [`classify_regime`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeRule {
    pub kappa: f64,
    pub hierarchy_ratio: f64,
}

impl Default for RegimeRule {
    fn default() -> Self {
        RegimeRule { kappa: 10.0, hierarchy_ratio: 10.0 }
    }
}

/// Regime from the mass splitting against the width scale max|Σ_I(iω̄)|.
///
/// The real part carries an almost frequency-independent mass shift that does
/// not decide whether the two resonances overlap, so only Σ_I sets the scale.
pub fn classify_regime(model: &SpectralModel, params: &ModeParams, at_bar: &KernelMatrix, rule: RegimeRule) -> Regime {
    let sigma = at_bar.sigma();
    let scale = at_bar.sigma_i.abs().max();
    let split = params.split_sq().abs();
    if split > rule.kappa * scale || scale == 0.0 {
        return Regime::NonDegenerate;
    }
    let g = model.effective_couplings();
    if g[0] >= rule.hierarchy_ratio * g[1] {
        if split >= (sigma[(0, 0)].norm() * sigma[(0, 1)].norm()).sqrt() {
            Regime::HierarchyG1sq
        } else {
            Regime::HierarchyG1g2
        }
    } else {
        Regime::NearlyDegenerate
    }
}

/// [`classify_regime`] with kernels evaluated here.
pub fn classify(model: &SpectralModel, params: &ModeParams, rule: RegimeRule) -> Result<Regime> {
    let k = Kernels::new(model, params).at(params.omega_bar(), false)?;
    Ok(classify_regime(model, params, &k, rule))
}

/// ±√z, picking the root aligned with `reference`; when `reference` vanishes
/// the root with Im ≥ 0 (upper) or Im ≤ 0 (lower) is chosen.
fn aligned_sqrt(z: Complex64, reference: Complex64, upper: bool) -> Complex64 {
    let r = z.sqrt();
    if reference.norm() > 1e-12 * r.norm() {
        if (r * reference.conj()).re >= 0.0 {
            r
        } else {
            -r
        }
    } else {
        let im = if upper { r.im } else { -r.im };
        if im > 0.0 || (im == 0.0 && r.re >= 0.0) {
            r
        } else {
            -r
        }
    }
}

/// Ω², D and Δ² for a given Σ; `upper` selects the tie rule for the a† family.
pub fn aux_values(params: &ModeParams, sigma: &CMat2, at: Complex64, upper: bool) -> Aux {
    let w = params.omegas();
    let omega_sq = c(w[0] * w[0] + w[1] * w[1], 0.0) + sigma[(0, 0)] + sigma[(1, 1)];
    let delta_sq = c(w[0] * w[0] - w[1] * w[1], 0.0) + sigma[(0, 0)] - sigma[(1, 1)];
    let disc = delta_sq * delta_sq + sigma[(0, 1)] * sigma[(1, 0)] * 4.0;
    let d = aligned_sqrt(disc, delta_sq, upper);
    Aux { at, omega_sq, d, delta_sq }
}

/// The 2×2 bracket [[½ ± Δ²/2D, ±Σ₁₂/D], [±Σ₂₁/D, ½ ∓ Δ²/2D]].
fn mixing_bracket(aux: &Aux, sigma: &CMat2, plus: bool) -> CMat2 {
    let sg = if plus { 1.0 } else { -1.0 };
    let r = aux.delta_sq / (aux.d * 2.0) * sg;
    CMat2::new(c(0.5, 0.0) + r, sigma[(0, 1)] / aux.d * sg, sigma[(1, 0)] / aux.d * sg, c(0.5, 0.0) - r)
}

/// Amplitude spectrum in the requested regime.
pub fn amplitude_spectrum(model: &SpectralModel, params: &ModeParams, regime: Regime) -> Result<AmplitudeSpectrum> {
    params.validate()?;
    let k = Kernels::new(model, params);
    match regime {
        Regime::NonDegenerate => non_degenerate(&k, params),
        Regime::NearlyDegenerate => nearly_degenerate(&k, params),
        Regime::HierarchyG1sq | Regime::HierarchyG1g2 => hierarchy(&k, params, regime),
    }
}

/// Square-root branch with Σ at each mode's own bare pole, no further expansion.
pub fn general_spectrum(model: &SpectralModel, params: &ModeParams) -> Result<AmplitudeSpectrum> {
    params.validate()?;
    let k = Kernels::new(model, params);
    let bare = bare_poles(params);
    let mut aux = Vec::with_capacity(4);
    let mut modes = Vec::with_capacity(4);
    for label in ModeLabel::ALL {
        let s0 = bare[label.index()];
        let sigma = k.sigma(s0.im)?;
        let a = aux_values(params, &sigma, s0, label.is_dagger());
        let thr = 1e-12 * a.omega_sq.norm();
        if a.d.norm() < thr {
            return Err(MixError::DegenerateD { d: a.d.norm(), threshold: thr });
        }
        let plus = label.field() == 0;
        let root = if plus { (a.omega_sq + a.d) * 0.5 } else { (a.omega_sq - a.d) * 0.5 };
        let r = root.sqrt();
        let s = if label.is_dagger() { I * r } else { -I * r };
        let bracket = mixing_bracket(&a, &sigma, plus);
        modes.push(QnmMode { label, pole: s, residue: bracket / (s * 2.0), bare: s0, bracket, sigma });
        aux.push(a);
    }
    let modes: [QnmMode; 4] = modes.try_into().expect("four modes");
    Ok(AmplitudeSpectrum::finish(Regime::NonDegenerate, modes, aux, params, Vec::new()))
}

fn non_degenerate(k: &Kernels, params: &ModeParams) -> Result<AmplitudeSpectrum> {
    let w = params.omegas();
    let split = params.split_sq();
    if split == 0.0 {
        return Err(MixError::RegimeMismatch("non-degenerate branch needs ω₁ ≠ ω₂".into()));
    }
    let bare = bare_poles(params);
    let mut modes = Vec::with_capacity(4);
    let mut aux = Vec::with_capacity(4);
    for label in ModeLabel::ALL {
        let s0 = bare[label.index()];
        let cf = label.field();
        let sigma = k.sigma(s0.im)?;
        // s = s⁽⁰⁾ + s⁽⁰⁾Σ_cc(s⁽⁰⁾)/(2ω_c²)
        let s = s0 + s0 * sigma[(cf, cf)] / (2.0 * w[cf] * w[cf]);
        let off = if cf == 0 { split } else { -split };
        let bracket = if cf == 0 {
            CMat2::new(c(1.0, 0.0), sigma[(0, 1)] / off, sigma[(1, 0)] / off, c(0.0, 0.0))
        } else {
            CMat2::new(c(0.0, 0.0), sigma[(0, 1)] / off, sigma[(1, 0)] / off, c(1.0, 0.0))
        };
        modes.push(QnmMode { label, pole: s, residue: bracket / (s * 2.0), bare: s0, bracket, sigma });
        aux.push(aux_values(params, &sigma, s0, label.is_dagger()));
    }
    let modes: [QnmMode; 4] = modes.try_into().expect("four modes");
    Ok(AmplitudeSpectrum::finish(Regime::NonDegenerate, modes, aux, params, Vec::new()))
}

/// Σ(−iω̄), Σ(+iω̄) and the matching aux values.
fn mean_frequency_kernels(k: &Kernels, params: &ModeParams) -> Result<([CMat2; 2], [Aux; 2])> {
    let wb = params.omega_bar();
    let lo = k.sigma(-wb)?;
    let hi = k.sigma(wb)?;
    let a_lo = aux_values(params, &lo, c(0.0, -wb), false);
    let a_hi = aux_values(params, &hi, c(0.0, wb), true);
    Ok(([lo, hi], [a_lo, a_hi]))
}

fn nearly_degenerate(k: &Kernels, params: &ModeParams) -> Result<AmplitudeSpectrum> {
    let wb = params.omega_bar();
    let (sig, aux) = mean_frequency_kernels(k, params)?;
    let mut modes = Vec::with_capacity(4);
    for label in ModeLabel::ALL {
        let (h, sign) = if label.is_dagger() { (1, 1.0) } else { (0, -1.0) };
        let sigma = sig[h];
        let a = aux[h];
        let plus = label.field() == 0;
        let dd = if plus { a.d } else { -a.d };
        let s0 = c(0.0, sign * wb);
        let s = s0 + I * sign * (dd + sigma[(0, 0)] + sigma[(1, 1)]) / (4.0 * wb);
        let bracket = mixing_bracket(&a, &sigma, plus);
        modes.push(QnmMode { label, pole: s, residue: bracket / (s0 * 2.0), bare: s0, bracket, sigma });
    }
    let modes: [QnmMode; 4] = modes.try_into().expect("four modes");
    Ok(AmplitudeSpectrum::finish(Regime::NearlyDegenerate, modes, aux.to_vec(), params, Vec::new()))
}

fn hierarchy(k: &Kernels, params: &ModeParams, regime: Regime) -> Result<AmplitudeSpectrum> {
    let wb = params.omega_bar();
    let w = params.omegas();
    let (sig, aux) = mean_frequency_kernels(k, params)?;
    let mut modes = Vec::with_capacity(4);
    for label in ModeLabel::ALL {
        let (h, sign) = if label.is_dagger() { (1, 1.0) } else { (0, -1.0) };
        let sigma = sig[h];
        let den = match regime {
            Regime::HierarchyG1sq => c(params.split_sq(), 0.0) + sigma[(0, 0)],
            _ => sigma[(0, 0)],
        };
        let num = sigma[(0, 1)] * sigma[(1, 0)];
        let cross = if num == c(0.0, 0.0) { num } else { num / den };
        let cf = label.field();
        let shift = if cf == 0 { sigma[(0, 0)] + cross } else { sigma[(1, 1)] - cross };
        let s = c(0.0, sign * w[cf]) + I * sign * shift / (2.0 * wb);
        let s0 = c(0.0, sign * wb);
        let bracket = mixing_bracket(&aux[h], &sigma, cf == 0);
        modes.push(QnmMode { label, pole: s, residue: bracket / (s0 * 2.0), bare: s0, bracket, sigma });
    }
    let modes: [QnmMode; 4] = modes.try_into().expect("four modes");
    Ok(AmplitudeSpectrum::finish(regime, modes, aux.to_vec(), params, Vec::new()))
}

/// ⟨φ⟩ and ⟨π⟩ on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeTrajectory {
    pub t: Vec<f64>,
    pub phi: Vec<[f64; 2]>,
    pub pi: Vec<[f64; 2]>,
}

/// ⟨φ⟩(t) = Ġ_φφ₀ + G_φπ₀, ⟨π⟩(t) = G̈_φφ₀ + Ġ_φπ₀.
pub fn evolve_amplitudes(spec: &AmplitudeSpectrum, phi0: [f64; 2], pi0: [f64; 2], tgrid: &[f64]) -> Result<AmplitudeTrajectory> {
    check_grid(tgrid)?;
    let p0 = nalgebra::Vector2::new(phi0[0], phi0[1]);
    let q0 = nalgebra::Vector2::new(pi0[0], pi0[1]);
    let rows: Vec<([f64; 2], [f64; 2])> = tgrid
        .par_iter()
        .map(|&t| {
            let [g, gd, gdd] = spec.greens_derivs(t);
            let phi = gd * p0 + g * q0;
            let pi = gdd * p0 + gd * q0;
            ([phi[0], phi[1]], [pi[0], pi[1]])
        })
        .collect();
    let (phi, pi) = rows.into_iter().unzip();
    Ok(AmplitudeTrajectory { t: tgrid.to_vec(), phi, pi })
}

pub(crate) fn check_grid(tgrid: &[f64]) -> Result<()> {
    if tgrid.is_empty() {
        return Err(MixError::Precondition("empty time grid".into()));
    }
    if tgrid[0] != 0.0 {
        return Err(MixError::Precondition("time grid must start at 0".into()));
    }
    if tgrid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(MixError::Precondition("time grid must be strictly ascending".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{fixtures, Shape};

    fn free() -> SpectralModel {
        SpectralModel::single([0.0, 0.0], Shape::OhmicGaussian, 10.0).unwrap()
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn zero_coupling_gives_bare_poles() {
        let model = free();
        let p = fixtures::p0().1;
        for regime in [Regime::NonDegenerate, Regime::NearlyDegenerate, Regime::HierarchyG1g2] {
            let spec = amplitude_spectrum(&model, &p, regime).unwrap();
            let bare = bare_poles(&p);
            for (m, b) in spec.modes.iter().zip(bare) {
                assert!(close(m.pole, b, 1e-15), "{regime:?} {:?}", m.label);
            }
        }
        let spec = amplitude_spectrum(&model, &p, Regime::NonDegenerate).unwrap();
        let r = spec.mode(ModeLabel::A1Dag).residue;
        let w1 = p.omega(0);
        assert!(close(r[(0, 0)], c(0.0, -1.0 / (2.0 * w1)), 1e-15));
        assert_eq!(r[(1, 1)], c(0.0, 0.0));
    }

    #[test]
    fn p0_decay_rate() {
        let spec = amplitude_spectrum(&fixtures::bath(), &fixtures::p0().1, Regime::NonDegenerate).unwrap();
        assert!((spec.gamma[0] - 0.00247512).abs() < 5e-9, "{}", spec.gamma[0]);
    }

    #[test]
    fn classification_of_fixtures() {
        let m = fixtures::bath();
        let rule = RegimeRule::default();
        assert_eq!(classify(&m, &fixtures::p0().1, rule).unwrap(), Regime::NonDegenerate);
        assert_eq!(classify(&m, &fixtures::p1().1, rule).unwrap(), Regime::NearlyDegenerate);
        assert_eq!(classify(&free(), &fixtures::p1().1, rule).unwrap(), Regime::NonDegenerate);
        let (m2, p2) = fixtures::p2();
        assert!(classify(&m2, &p2, rule).unwrap().is_hierarchy());
    }

    #[test]
    fn dark_mode_at_exact_degeneracy() {
        let p = fixtures::p1().1.with_masses([1.0, 1.0]);
        let spec = amplitude_spectrum(&fixtures::bath(), &p, Regime::NearlyDegenerate).unwrap();
        let s = spec.mode(ModeLabel::A2Dag).pole;
        assert!(close(s, c(0.0, p.omega_bar()), 1e-15), "{s}");
        assert_eq!(spec.gamma[1].abs() < 1e-17, true);
    }

    #[test]
    fn conjugate_symmetry() {
        let m = fixtures::bath();
        for (p, regime) in [(fixtures::p0().1, Regime::NonDegenerate), (fixtures::p1().1, Regime::NearlyDegenerate)] {
            let spec = amplitude_spectrum(&m, &p, regime).unwrap();
            for l in [ModeLabel::A1, ModeLabel::A2] {
                let a = spec.mode(l);
                let b = spec.mode(l.conj());
                assert!(close(a.pole.conj(), b.pole, 1e-12));
                assert!((a.residue.conjugate() - b.residue).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_d_is_reported() {
        // Equal masses with zero coupling: Δ² = D = 0 in the general branch.
        let p = fixtures::p1().1.with_masses([1.0, 1.0]);
        match general_spectrum(&free(), &p) {
            Err(MixError::DegenerateD { .. }) => {}
            other => panic!("expected degenerate-D error, got {other:?}"),
        }
    }

    #[test]
    fn free_oscillator_evolution() {
        let p = fixtures::p0().1;
        let spec = amplitude_spectrum(&free(), &p, Regime::NonDegenerate).unwrap();
        let grid: Vec<f64> = (0..200).map(|i| i as f64 * 0.37).collect();
        let tr = evolve_amplitudes(&spec, [1.0, 0.0], [0.0, 0.0], &grid).unwrap();
        for (i, t) in grid.iter().enumerate() {
            assert!((tr.phi[i][0] - (p.omega(0) * t).cos()).abs() < 1e-12);
            assert_eq!(tr.phi[i][1], 0.0);
        }
    }

    #[test]
    fn hierarchy_power_counting() {
        let (m, p) = fixtures::p2();
        let regime = classify(&m, &p, RegimeRule::default()).unwrap();
        let spec = amplitude_spectrum(&m, &p, regime).unwrap();
        let ratio = spec.gamma[0] / spec.gamma[1];
        assert!(ratio > 400.0 / 3.0 && ratio < 1200.0, "{regime:?} Γ₁/Γ₂ = {ratio}");
        let b = spec.mode(ModeLabel::A1Dag).bracket;
        let off = b[(0, 1)].norm().max(b[(1, 0)].norm()) / b[(0, 0)].norm();
        let expect = 0.005 / 0.1;
        assert!(off > expect / 3.0 && off < 3.0 * expect, "off-diagonal {off}");
    }
}
