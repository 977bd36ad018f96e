//! QNMs of the dimensionless one-point functions ⟨a_c⟩ and ⟨a_c†⟩.
//!
//! With φ = U_φ(a + a†) and π = U_π(a − a†), the amplitude solution
//! ⟨φ⟩ = Ġφ₀ + Gπ₀, ⟨π⟩ = G̈φ₀ + Ġπ₀ turns into four maps 𝔽_{xy} taking an
//! amplitude residue (with its pole) to the coefficient of y₀ in ⟨x(t)⟩.

use num_complex::Complex64;

use crate::amplitude_qnm::{AmplitudeSpectrum, ModeLabel, QnmMode, Regime};
use crate::spectral::ModeParams;
use crate::{c, CMat2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FMap {
    /// ⟨a⟩ ← a₀
    AA,
    /// ⟨a⟩ ← a₀†
    AAdag,
    /// ⟨a†⟩ ← a₀†
    AdagAdag,
    /// ⟨a†⟩ ← a₀
    AdagA,
}

impl FMap {
    /// Signs of the U_π⁻¹ sG U_π, U_φ⁻¹ G U_π and U_π⁻¹ s²G U_φ terms.
    fn signs(self) -> [f64; 3] {
        match self {
            FMap::AA => [1.0, 1.0, 1.0],
            FMap::AAdag => [-1.0, -1.0, 1.0],
            FMap::AdagAdag => [1.0, -1.0, -1.0],
            FMap::AdagA => [-1.0, 1.0, -1.0],
        }
    }
}

/// U_φ = diag(1/√(2ω_c)), U_π = diag(−i√(ω_c/2)) for the given frequencies.
pub fn u_matrices(w: [f64; 2]) -> (CMat2, CMat2) {
    let uphi = CMat2::new(c(1.0 / (2.0 * w[0]).sqrt(), 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0 / (2.0 * w[1]).sqrt(), 0.0));
    let upi = CMat2::new(c(0.0, -(w[0] / 2.0).sqrt()), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -(w[1] / 2.0).sqrt()));
    (uphi, upi)
}

/// 𝔽_{xy}[𝔾 e^{st}] with U built at frequencies `w`.
pub fn f_map(kind: FMap, residue: &CMat2, s: Complex64, w: [f64; 2]) -> CMat2 {
    let (uphi, upi) = u_matrices(w);
    let uphi_inv = uphi.try_inverse().expect("diagonal, nonzero");
    let upi_inv = upi.try_inverse().expect("diagonal, nonzero");
    let g = residue;
    let sg = g * s;
    let ssg = g * (s * s);
    let [p, q, r] = kind.signs();
    (uphi_inv * sg * uphi + upi_inv * sg * upi * c(p, 0.0) + uphi_inv * g * upi * c(q, 0.0) + upi_inv * ssg * uphi * c(r, 0.0)) * c(0.5, 0.0)
}

/// A dropped higher-order term and its size relative to the kept residue.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscardedTerm {
    /// Which kept mode the term would have corrected.
    pub label: ModeLabel,
    pub map: FMap,
    /// Amplitude mode the map was applied to.
    pub source: ModeLabel,
    pub norm: f64,
    pub relative: f64,
}

#[derive(Debug, Clone)]
pub struct OnePointSpectrum {
    pub regime: Regime,
    /// a₁, a₂
    pub modes_a: [QnmMode; 2],
    /// a₁†, a₂†
    pub modes_adag: [QnmMode; 2],
    pub discarded_orders: Vec<DiscardedTerm>,
    /// Frequencies U_φ, U_π were built at.
    pub u_omega: [f64; 2],
}

impl OnePointSpectrum {
    pub fn mode(&self, label: ModeLabel) -> &QnmMode {
        match label {
            ModeLabel::A1 => &self.modes_a[0],
            ModeLabel::A2 => &self.modes_a[1],
            ModeLabel::A1Dag => &self.modes_adag[0],
            ModeLabel::A2Dag => &self.modes_adag[1],
        }
    }

    /// Σ_c 𝔾_{a_c} e^{s_c t}
    pub fn greens_a(&self, t: f64) -> CMat2 {
        self.modes_a.iter().map(|m| m.residue * (m.pole * t).exp()).sum()
    }

    pub fn greens_adag(&self, t: f64) -> CMat2 {
        self.modes_adag.iter().map(|m| m.residue * (m.pole * t).exp()).sum()
    }

    /// Largest dropped/kept ratio.
    pub fn max_discarded(&self, map: Option<FMap>) -> f64 {
        self.discarded_orders.iter().filter(|d| map.map_or(true, |m| d.map == m)).map(|d| d.relative).fold(0.0, f64::max)
    }
}

fn max_abs(m: &CMat2) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Kept residues 𝔽_{aa}[𝔾_{φ,a_c}], 𝔽_{a†a†}[𝔾_{φ,a_c†}] at the bare poles; the
/// cross maps are evaluated with the dressed poles and recorded as dropped terms.
pub fn onepoint_spectrum(amp: &AmplitudeSpectrum, params: &ModeParams) -> OnePointSpectrum {
    let w = if amp.regime.uses_mean_frequency() {
        let wb = params.omega_bar();
        [wb, wb]
    } else {
        params.omegas()
    };
    let kept = |label: ModeLabel, map: FMap| {
        let m = amp.mode(label);
        // The table is a strict expansion about s⁽⁰⁾: prefactor and map both bare.
        let residue = f_map(map, &(m.bracket / (m.bare * 2.0)), m.bare, w);
        QnmMode { label, pole: m.pole, residue, bare: m.bare, bracket: m.bracket, sigma: m.sigma }
    };
    let modes_a = [kept(ModeLabel::A1, FMap::AA), kept(ModeLabel::A2, FMap::AA)];
    let modes_adag = [kept(ModeLabel::A1Dag, FMap::AdagAdag), kept(ModeLabel::A2Dag, FMap::AdagAdag)];

    let mut discarded = Vec::new();
    for (k, target) in modes_a.iter().chain(modes_adag.iter()).enumerate() {
        let (same, other) = if k < 2 { (FMap::AA, FMap::AAdag) } else { (FMap::AdagAdag, FMap::AdagA) };
        let kept_norm = max_abs(&target.residue).max(f64::MIN_POSITIVE);
        let source = amp.mode(target.label.conj());
        // Same-type map applied to the conjugate family: O(g⁴).
        let r = f_map(same, &source.residue, source.pole, w);
        discarded.push(DiscardedTerm { label: target.label, map: same, source: source.label, norm: max_abs(&r), relative: max_abs(&r) / kept_norm });
        // Mixed map a ← a† on the own family: O(g²).
        let own = amp.mode(target.label);
        let r = f_map(other, &own.residue, own.pole, w);
        discarded.push(DiscardedTerm { label: target.label, map: other, source: own.label, norm: max_abs(&r), relative: max_abs(&r) / kept_norm });
    }
    OnePointSpectrum { regime: amp.regime, modes_a, modes_adag, discarded_orders: discarded, u_omega: w }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude_qnm::amplitude_spectrum;
    use crate::spectral::{fixtures, Shape, SpectralModel};
    use crate::I;

    /// Entry (c,d) of 𝔽_{aa}: ½·G_cd·[s(√(ω_c/ω_d)+√(ω_d/ω_c)) − i√(ω_cω_d) + is²/√(ω_cω_d)].
    fn f_aa_entrywise(g: &CMat2, s: Complex64, w: [f64; 2]) -> CMat2 {
        CMat2::from_fn(|a, b| {
            let r = (w[a] / w[b]).sqrt();
            let q = (w[a] * w[b]).sqrt();
            g[(a, b)] * (s * (r + 1.0 / r) - I * q + I * s * s / q) * 0.5
        })
    }

    #[test]
    fn free_annihilation_operator() {
        let m = SpectralModel::single([0.0, 0.0], Shape::OhmicGaussian, 10.0).unwrap();
        let p = fixtures::p0().1;
        let amp = amplitude_spectrum(&m, &p, Regime::NonDegenerate).unwrap();
        let one = onepoint_spectrum(&amp, &p);
        let a1 = one.mode(ModeLabel::A1);
        assert_eq!(a1.pole, c(0.0, -p.omega(0)));
        assert!((a1.residue - CMat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0))).norm() < 1e-15);
        assert!(one.max_discarded(None) < 1e-15);
    }

    #[test]
    fn matrix_and_entrywise_maps_agree() {
        let (m, p) = fixtures::p1();
        let amp = amplitude_spectrum(&m, &p, Regime::NearlyDegenerate).unwrap();
        for mode in &amp.modes {
            for w in [p.omegas(), [p.omega_bar(); 2]] {
                let a = f_map(FMap::AA, &mode.residue, mode.pole, w);
                let b = f_aa_entrywise(&mode.residue, mode.pole, w);
                assert!((a - b).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn nearly_degenerate_residue_is_the_mixing_bracket() {
        let (m, p) = fixtures::p1();
        let amp = amplitude_spectrum(&m, &p, Regime::NearlyDegenerate).unwrap();
        let one = onepoint_spectrum(&amp, &p);
        let aux = amp.aux[0];
        let sg = amp.mode(ModeLabel::A1).sigma;
        let r = aux.delta_sq / (aux.d * 2.0);
        let expect = CMat2::new(c(0.5, 0.0) + r, sg[(0, 1)] / aux.d, sg[(1, 0)] / aux.d, c(0.5, 0.0) - r);
        assert!((one.mode(ModeLabel::A1).residue - expect).norm() < 1e-12);
    }

    #[test]
    fn non_degenerate_off_diagonal() {
        let (m, p) = fixtures::p0();
        let amp = amplitude_spectrum(&m, &p, Regime::NonDegenerate).unwrap();
        let one = onepoint_spectrum(&amp, &p);
        let w = p.omegas();
        let s12 = amp.mode(ModeLabel::A1).sigma[(0, 1)];
        let expect = s12 / (2.0 * (w[0] - w[1]) * (w[0] * w[1]).sqrt());
        let got = one.mode(ModeLabel::A1).residue[(0, 1)];
        assert!((got - expect).norm() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn conjugate_families() {
        for (m, p, r) in [(fixtures::p0().0, fixtures::p0().1, Regime::NonDegenerate), (fixtures::p1().0, fixtures::p1().1, Regime::NearlyDegenerate)] {
            let amp = amplitude_spectrum(&m, &p, r).unwrap();
            let one = onepoint_spectrum(&amp, &p);
            for t in [0.0, 1.3, 47.0] {
                assert!((one.greens_a(t).conjugate() - one.greens_adag(t)).norm() < 1e-12);
            }
        }
    }
}
