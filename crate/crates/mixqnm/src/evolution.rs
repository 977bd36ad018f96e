//! Closed-form populations, coherence and pair correlators from the correlator
//! QNMs, their observables, and the final-value solve.

use nalgebra::{SVector, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude_qnm::{amplitude_spectrum, check_grid, classify, evolve_amplitudes, AmplitudeSpectrum, Regime, RegimeRule};
use crate::correlator_qnm::{collapsed_block, correlator_blocks, correlator_spectrum, idx, Block, BlockSystem, CVec16, CorrelatorSpectrum, Sampling};
use crate::error::{MixError, Result};
use crate::kernels::{bose_occupation, boundary_kernels};
use crate::onepoint_qnm::{onepoint_spectrum, OnePointSpectrum};
use crate::spectral::{ModeParams, SpectralModel};
use crate::{c, CMat4};

type CVec4 = Vector4<Complex64>;

const HERMITIAN_TOL: f64 = 1e-10;

/// A_k = A_{−k} = 𝟙, B = 0.
pub fn vacuum_state() -> CVec16 {
    let mut d = CVec16::zeros();
    for blk in [Block::Ak, Block::Amk] {
        d[idx(blk, 0, 0)] = c(1.0, 0.0);
        d[idx(blk, 1, 1)] = c(1.0, 0.0);
    }
    d
}

/// Hermiticity of the A blocks, B* = conj B, and populations at least the vacuum value.
pub fn validate_initial(d: &CVec16) -> Result<()> {
    if d.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(MixError::Precondition("initial correlators must be finite".into()));
    }
    for blk in [Block::Ak, Block::Amk] {
        let (a11, a12, a21, a22) = (d[idx(blk, 0, 0)], d[idx(blk, 0, 1)], d[idx(blk, 1, 0)], d[idx(blk, 1, 1)]);
        if (a12 - a21.conj()).norm() > HERMITIAN_TOL {
            return Err(MixError::Precondition(format!("{}: A₁₂(0) must equal conj A₂₁(0)", blk.name())));
        }
        if a11.im.abs() > HERMITIAN_TOL || a22.im.abs() > HERMITIAN_TOL {
            return Err(MixError::Precondition(format!("{}: diagonal entries must be real", blk.name())));
        }
        if a11.re < 1.0 - HERMITIAN_TOL || a22.re < 1.0 - HERMITIAN_TOL {
            return Err(MixError::Precondition(format!("{}: populations below the vacuum value 1", blk.name())));
        }
    }
    for k in 0..4 {
        if (d[12 + k] - d[8 + k].conj()).norm() > HERMITIAN_TOL {
            return Err(MixError::Precondition("B*(0) must be the conjugate of B(0)".into()));
        }
    }
    Ok(())
}

/// Which O(g²) content the closed forms carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeepOrder {
    /// Leading order: the A part from its own modes and noise, the B part as a
    /// residue-weighted decay of B(0).
    #[default]
    Leading,
    /// Adds the A↔B cross terms and the B noise. Incomplete at O(g²).
    G2Partial,
}

impl KeepOrder {
    pub fn label(self) -> &'static str {
        match self {
            KeepOrder::Leading => "leading",
            KeepOrder::G2Partial => "incomplete O(g^2)",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    /// A_k as (A₁₁, A₁₂, A₂₁, A₂₂).
    pub a: Vec<[Complex64; 4]>,
    pub amk: Vec<[Complex64; 4]>,
    pub b: Vec<[Complex64; 4]>,
    pub a_vac: Vec<[Complex64; 4]>,
    pub a_exc: Vec<[Complex64; 4]>,
    pub phi: Vec<[f64; 2]>,
    pub pi: Vec<[f64; 2]>,
    pub regime: Regime,
    pub keep: KeepOrder,
    pub provenance: String,
    pub warnings: Vec<String>,
}

/// Time dependence of one term of a closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Const,
    Exp(Complex64),
    /// (e^{zt} − 1)/z, finite as z → 0.
    Ramp(Complex64),
}

impl Kind {
    fn at(self, t: f64) -> Complex64 {
        match self {
            Kind::Const => c(1.0, 0.0),
            Kind::Exp(z) => (z * t).exp(),
            Kind::Ramp(z) => {
                let x = z * t;
                if x.norm() < 1e-4 {
                    t * (1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0)
                } else {
                    x.exp_m1_approx() / z
                }
            }
        }
    }
}

trait ExpM1 {
    fn exp_m1_approx(self) -> Self;
}

impl ExpM1 for Complex64 {
    /// eᶻ − 1 without cancellation in the real part for small |z|.
    fn exp_m1_approx(self) -> Self {
        let er = self.re.exp_m1();
        let (s, cs) = self.im.sin_cos();
        // eᶻ − 1 = (e^{re} − 1)·e^{i·im} + (e^{i·im} − 1)
        c(er * cs - 2.0 * (self.im / 2.0).sin().powi(2), er * s + s)
    }
}

#[derive(Debug, Clone, Default)]
struct Series {
    terms: Vec<(CVec4, Kind)>,
}

impl Series {
    fn push(&mut self, coef: CVec4, kind: Kind) {
        if coef.iter().any(|z| *z != c(0.0, 0.0)) {
            self.terms.push((coef, kind));
        }
    }

    fn at(&self, t: f64) -> [Complex64; 4] {
        let mut v = CVec4::zeros();
        for (coef, kind) in &self.terms {
            v += coef * kind.at(t);
        }
        [v[0], v[1], v[2], v[3]]
    }
}

fn unit_residue(slot: usize) -> CMat4 {
    let mut m = CMat4::zeros();
    m[(slot, slot)] = c(1.0, 0.0);
    m
}

/// (residue, dressed pole, bare pole) for one block in the form the closed
/// forms use: diagonal residues in the non-degenerate branch, and for the slow
/// blocks of the hierarchy branch the collapsed-generator covariants, whose
/// off-diagonal parts carry the noise that feeds the long-lived population.
fn block_modes(sys: &BlockSystem, spec: &CorrelatorSpectrum, blk: Block) -> Result<Vec<(CMat4, Complex64, Complex64)>> {
    let slow = matches!(blk, Block::Ak | Block::Amk);
    if slow && spec.regime.is_hierarchy() {
        let targets = spec.block(blk).each_ref().map(|m| m.pole);
        let (modes, _) = collapsed_block(sys, blk, targets)?;
        return Ok(modes.iter().map(|m| (m.residue, m.pole, c(0.0, 0.0))).collect());
    }
    Ok(spec
        .block(blk)
        .iter()
        .map(|m| {
            let g = if spec.regime == Regime::NonDegenerate { unit_residue(m.slot) } else { m.residue };
            let bare = if spec.regime == Regime::NearlyDegenerate && slow { c(0.0, 0.0) } else { m.bare };
            (g, m.pole, bare)
        })
        .collect())
}

fn sub4(d: &CVec16, blk: Block) -> CVec4 {
    let b = 4 * blk.index();
    CVec4::new(d[b], d[b + 1], d[b + 2], d[b + 3])
}

fn n_block(sys: &BlockSystem, blk: Block, s: Complex64) -> Result<CVec4> {
    let b = 4 * blk.index();
    let mut v = CVec4::zeros();
    for k in 0..4 {
        v[k] = sys.n_component(b + k, s, Sampling::Exact)?;
    }
    Ok(v)
}

/// Σ⃗ = (2Σ_I,11, Σ_I,12+Σ_I,21, Σ_I,12+Σ_I,21, 2Σ_I,22) at iω̄.
pub fn sigma_vector(sys: &BlockSystem) -> Result<CVec4> {
    let km = boundary_kernels(&sys.kernels.model, &sys.params, sys.params.omega_bar(), false)?;
    let si = km.sigma_i;
    let off = si[(0, 1)] + si[(1, 0)];
    Ok(CVec4::new(c(2.0 * si[(0, 0)], 0.0), c(off, 0.0), c(off, 0.0), c(2.0 * si[(1, 1)], 0.0)))
}

/// Own-block series of an A block: homogeneous decay plus the noise ramp.
fn a_series(modes: &[(CMat4, Complex64, Complex64)], a0: &CVec4, n0: &CVec4) -> Series {
    let mut s = Series::default();
    for (g, p, _) in modes {
        s.push(g * a0, Kind::Exp(*p));
        s.push(g * n0, Kind::Ramp(*p));
    }
    s
}

/// Cross terms −G_T K_TS G_S (S(0) + N_S/s) with the fast-pole part of the
/// noise product dropped. `t_slow` says whether the target block holds the
/// slow (A) poles.
fn cross_series(sys: &BlockSystem, spec: &CorrelatorSpectrum, target: Block, source: Block, s0: &CVec4, out: &mut Series) -> Result<()> {
    let tm = block_modes(sys, spec, target)?;
    let sm = block_modes(sys, spec, source)?;
    let t_slow = matches!(target, Block::Ak | Block::Amk);
    let k_at = |s: Complex64| sys.k_cross(target, source, s);
    let k0 = k_at(c(0.0, 0.0))?;
    let n0 = n_block(sys, source, c(0.0, 0.0))?;
    for (gt, xt, xt0) in &tm {
        let kx = k_at(*xt0)?;
        for (gs, ys, ys0) in &sm {
            let ky = k_at(*ys0)?;
            let den = *xt0 - *ys0;
            // Initial-value part: both poles kept, bare differences in the denominators.
            out.push(-(gt * kx * gs * s0) / den, Kind::Exp(*xt));
            out.push((gt * ky * gs * s0) / den, Kind::Exp(*ys));
            // Noise part: the 1/s pole and the slow pole only.
            let (p, p0, q0) = if t_slow { (*xt, *xt0, *ys0) } else { (*ys, *ys0, *xt0) };
            let base = gt * k0 * gs * n0;
            if p0 == c(0.0, 0.0) {
                out.push(base / q0, Kind::Ramp(p));
            } else {
                let kp = k_at(p0)?;
                let np = n_block(sys, source, p0)?;
                out.push(-base / (p * q0), Kind::Const);
                out.push(-(gt * kp * gs * np) / (p * (p0 - q0)), Kind::Exp(p));
            }
        }
    }
    Ok(())
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Stable hash of the model and mode parameters.
pub fn parameter_hash(model: &SpectralModel, params: &ModeParams) -> String {
    let mut bytes = Vec::new();
    for ch in &model.channels {
        for x in [ch.g[0], ch.g[1], ch.lambda, ch.weight] {
            bytes.extend_from_slice(&x.to_bits().to_le_bytes());
        }
        bytes.push(ch.shape as u8);
    }
    for x in [params.m[0], params.m[1], params.kmag, params.beta] {
        bytes.extend_from_slice(&x.to_bits().to_le_bytes());
    }
    format!("{:016x}", fnv1a(&bytes))
}

/// Closed-form correlators on `tgrid`. The amplitude columns are left at zero;
/// [`Solver::evolve`] fills them from the amplitude spectrum.
pub fn evolve_correlators(spec: &CorrelatorSpectrum, sys: &BlockSystem, initial: &CVec16, tgrid: &[f64], regime: Regime, keep: KeepOrder) -> Result<Trajectory> {
    if spec.regime != regime {
        return Err(MixError::RegimeMismatch(format!("spectrum is {}, requested {}", spec.regime.name(), regime.name())));
    }
    validate_initial(initial)?;
    check_grid(tgrid)?;
    let params = sys.params;
    let mut warnings = Vec::new();
    let max_gamma = spec.modes().map(|m| -m.pole.re).fold(0.0, f64::max);
    if params.beta.is_finite() && params.beta * max_gamma > 0.1 {
        warnings.push(format!("beta*Gamma = {:.3} > 0.1: the bare-frequency noise truncation needs higher temperature", params.beta * max_gamma));
    }

    let nearly = regime == Regime::NearlyDegenerate;
    let (noise0, vac_noise) = if nearly {
        let wb = params.omega_bar();
        let coth = 2.0 * bose_occupation(params.beta, wb)? + 1.0;
        let sv = sigma_vector(sys)?;
        (Some(sv * c(coth / (2.0 * wb), 0.0)), sv * c(1.0 / (2.0 * wb), 0.0))
    } else {
        (None, CVec4::zeros())
    };

    let mut series = [Series::default(), Series::default(), Series::default()];
    for (k, blk) in [Block::Ak, Block::Amk].into_iter().enumerate() {
        let n0 = match noise0 {
            Some(v) => v,
            None => n_block(sys, blk, c(0.0, 0.0))?,
        };
        series[k] = a_series(&block_modes(sys, spec, blk)?, &sub4(initial, blk), &n0);
    }
    let bmodes = block_modes(sys, spec, Block::Bk)?;
    for (g, q, _) in &bmodes {
        series[2].push(g * sub4(initial, Block::Bk), Kind::Exp(*q));
    }
    if keep == KeepOrder::G2Partial {
        for (k, blk) in [Block::Ak, Block::Amk].into_iter().enumerate() {
            for src in [Block::Bk, Block::Bstar] {
                cross_series(sys, spec, blk, src, &sub4(initial, src), &mut series[k])?;
            }
        }
        let nb0 = n_block(sys, Block::Bk, c(0.0, 0.0))?;
        for (g, q, q0) in &bmodes {
            let nq = n_block(sys, Block::Bk, *q0)?;
            series[2].push(g * nb0 / (-*q0), Kind::Const);
            series[2].push(-(g * nq) / (-*q0), Kind::Exp(*q));
        }
        for src in [Block::Ak, Block::Amk] {
            cross_series(sys, spec, Block::Bk, src, &sub4(initial, src), &mut series[2])?;
        }
        warnings.push("g2-partial: O(g^2) content is incomplete".into());
    }

    let one = CVec4::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
    let vac = if nearly {
        Some(a_series(&block_modes(sys, spec, Block::Ak)?, &one, &vac_noise))
    } else {
        None
    };

    let rows: Vec<[[Complex64; 4]; 4]> = tgrid
        .par_iter()
        .map(|&t| {
            let a = series[0].at(t);
            let v = match &vac {
                Some(s) => s.at(t),
                None => [one[0], one[1], one[2], one[3]],
            };
            [a, series[1].at(t), series[2].at(t), v]
        })
        .collect();
    let mut tr = Trajectory {
        t: tgrid.to_vec(),
        a: Vec::with_capacity(rows.len()),
        amk: Vec::with_capacity(rows.len()),
        b: Vec::with_capacity(rows.len()),
        a_vac: Vec::with_capacity(rows.len()),
        a_exc: Vec::with_capacity(rows.len()),
        phi: vec![[0.0; 2]; rows.len()],
        pi: vec![[0.0; 2]; rows.len()],
        regime,
        keep,
        provenance: format!("regime={} params={}", regime.name(), parameter_hash(&sys.kernels.model, &params)),
        warnings,
    };
    for [a, amk, b, v] in rows {
        tr.a.push(a);
        tr.amk.push(amk);
        tr.b.push(b);
        tr.a_vac.push(v);
        tr.a_exc.push([a[0] - v[0], a[1] - v[1], a[2] - v[2], a[3] - v[3]]);
    }
    Ok(tr)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    pub t: Vec<f64>,
    /// Stokes parameters S₀..S₃.
    pub s: Vec<[f64; 4]>,
    pub ntilde: Vec<[f64; 2]>,
    /// ⟨N̂_c⟩ = (A_cc − 1)/2 on the unperturbed vacuum.
    pub n_raw: Vec<[f64; 2]>,
}

/// Stokes parameters and normalized populations. The nearly-degenerate branch
/// works on the excitation part over the evolving vacuum.
pub fn observables(traj: &Trajectory) -> Result<Observables> {
    let n = traj.t.len();
    let mut out = Observables { t: traj.t.clone(), s: Vec::with_capacity(n), ntilde: Vec::with_capacity(n), n_raw: Vec::with_capacity(n) };
    for i in 0..n {
        let (a, v, e) = (traj.a[i], traj.a_vac[i], traj.a_exc[i]);
        for cc in [0, 3] {
            if v[cc].re < 0.5 {
                return Err(MixError::Numeric(format!("vacuum part A_vac[{cc}] = {:.4} < 0.5 at t = {}: parameters outside validity", v[cc].re, traj.t[i])));
            }
        }
        let src = if traj.regime == Regime::NearlyDegenerate { e } else { [a[0] - 1.0, a[1], a[2], a[3] - 1.0] };
        out.s.push([
            0.5 * (src[0].re + src[3].re),
            0.5 * (src[0].re - src[3].re),
            0.5 * (src[1] + src[2]).re,
            ((src[1] - src[2]) / c(0.0, 2.0)).re,
        ]);
        out.ntilde.push([e[0].re / (2.0 * v[0].re), e[3].re / (2.0 * v[3].re)]);
        out.n_raw.push([(a[0].re - 1.0) / 2.0, (a[3].re - 1.0) / 2.0]);
    }
    Ok(out)
}

/// Asymptotic state from the s → 0 limit of the Laplace-space system.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalValue {
    pub phi_inf: [f64; 2],
    pub d_inf: CVec16,
    pub condition: f64,
}

/// Solves (−iΩ + K(0))·D(∞) = N⃗(0). Singular systems are reported before the
/// pole check; any correlator pole with Re ≥ 0 means the limit does not exist.
pub fn final_value(sys: &BlockSystem, spec: &CorrelatorSpectrum) -> Result<FinalValue> {
    let g = sys.g_inv(c(0.0, 0.0))?;
    let sv = g.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= 1e12) {
        return Err(MixError::Singular { cond });
    }
    if let Some(m) = spec.modes().find(|m| m.pole.re >= 0.0) {
        return Err(MixError::LimitDoesNotExist { re: m.pole.re, im: m.pole.im });
    }
    let n = sys.n_vector(c(0.0, 0.0))?;
    let d: SVector<Complex64, 16> = g.lu().solve(&n).ok_or(MixError::Singular { cond })?;
    Ok(FinalValue { phi_inf: [0.0, 0.0], d_inf: d, condition: cond })
}

/// Every spectrum one parameter set needs, built once.
#[derive(Debug, Clone)]
pub struct Solver {
    pub model: SpectralModel,
    pub params: ModeParams,
    pub regime: Regime,
    pub amp: AmplitudeSpectrum,
    pub onept: OnePointSpectrum,
    pub sys: BlockSystem,
    pub corr: CorrelatorSpectrum,
}

impl Solver {
    /// `regime = None` classifies with the default rule.
    pub fn new(model: &SpectralModel, params: &ModeParams, regime: Option<Regime>) -> Result<Self> {
        model.validate()?;
        params.validate()?;
        let regime = match regime {
            Some(r) => r,
            None => classify(model, params, RegimeRule::default())?,
        };
        let amp = amplitude_spectrum(model, params, regime)?;
        let onept = onepoint_spectrum(&amp, params);
        let sys = correlator_blocks(model, params)?;
        let corr = correlator_spectrum(&sys, &onept, regime)?;
        Ok(Solver { model: model.clone(), params: *params, regime, amp, onept, sys, corr })
    }

    /// 6/min Γ, clamped to 1e6.
    pub fn t_max_auto(&self) -> f64 {
        let g = self.amp.gamma[0].min(self.amp.gamma[1]);
        if g > 0.0 {
            (6.0 / g).min(1e6)
        } else {
            1e6
        }
    }

    pub fn evolve(&self, phi0: [f64; 2], pi0: [f64; 2], initial: &CVec16, tgrid: &[f64], keep: KeepOrder) -> Result<Trajectory> {
        let mut tr = evolve_correlators(&self.corr, &self.sys, initial, tgrid, self.regime, keep)?;
        let amp = evolve_amplitudes(&self.amp, phi0, pi0, tgrid)?;
        tr.phi = amp.phi;
        tr.pi = amp.pi;
        Ok(tr)
    }

    pub fn final_value(&self) -> Result<FinalValue> {
        final_value(&self.sys, &self.corr)
    }
}

/// Equally spaced grid on [0, t_max].
pub fn uniform_grid(t_max: f64, n_points: usize) -> Vec<f64> {
    let n = n_points.max(2);
    (0..n).map(|j| t_max * j as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{fixtures, Shape};

    #[test]
    fn ramp_is_finite_at_zero_rate() {
        assert_eq!(Kind::Ramp(c(0.0, 0.0)).at(3.0), c(3.0, 0.0));
        let z = c(-0.01, 0.3);
        let exact = ((z * 7.0).exp() - 1.0) / z;
        assert!((Kind::Ramp(z).at(7.0) - exact).norm() < 1e-13);
        let z = c(-1e-7, 2e-6);
        assert!((Kind::Ramp(z).at(10.0) - ((z * 10.0).exp() - 1.0) / z).norm() < 1e-9);
    }

    #[test]
    fn initial_data_checks() {
        let mut d = vacuum_state();
        assert!(validate_initial(&d).is_ok());
        d[idx(Block::Ak, 0, 1)] = c(0.1, 0.2);
        assert!(validate_initial(&d).is_err());
        d[idx(Block::Ak, 1, 0)] = c(0.1, -0.2);
        assert!(validate_initial(&d).is_ok());
        d[idx(Block::Ak, 0, 0)] = c(0.9, 0.0);
        assert!(validate_initial(&d).is_err());
        let mut d = vacuum_state();
        d[idx(Block::Bk, 0, 0)] = c(0.1, 0.1);
        assert!(validate_initial(&d).is_err());
    }

    #[test]
    fn p0_thermal_population() {
        let (m, p) = fixtures::p0();
        let s = Solver::new(&m, &p, None).unwrap();
        assert_eq!(s.regime, Regime::NonDegenerate);
        let t_end = 1e5;
        let tr = s.evolve([0.0; 2], [0.0; 2], &vacuum_state(), &[0.0, t_end], KeepOrder::Leading).unwrap();
        let obs = observables(&tr).unwrap();
        let n1 = 1.0 / (1f64.exp() - 1.0);
        assert!((n1 - 0.58197671).abs() < 1e-8);
        assert!((obs.n_raw[1][0] - n1).abs() < 1e-6, "{}", obs.n_raw[1][0]);
        let n2 = 1.0 / (1.1f64.exp() - 1.0);
        assert!((obs.s[1][0] - (n1 + n2)).abs() < 1e-6);
        assert!((n2 - 0.49896).abs() < 1e-5);
        assert_eq!(obs.s[0], [0.0; 4]);
        assert_eq!(obs.ntilde[0], [0.0; 2]);
    }

    #[test]
    fn closure_at_zero() {
        for (m, p) in [fixtures::p0(), fixtures::p1(), fixtures::p2()] {
            let s = Solver::new(&m, &p, None).unwrap();
            let mut d0 = vacuum_state();
            d0[idx(Block::Ak, 0, 0)] = c(2.0, 0.0);
            d0[idx(Block::Ak, 0, 1)] = c(0.3, 0.2);
            d0[idx(Block::Ak, 1, 0)] = c(0.3, -0.2);
            d0[idx(Block::Bk, 0, 1)] = c(0.1, 0.05);
            d0[idx(Block::Bstar, 0, 1)] = c(0.1, -0.05);
            let tr = s.evolve([0.0; 2], [0.0; 2], &d0, &[0.0], KeepOrder::Leading).unwrap();
            for k in 0..4 {
                assert!((tr.a[0][k] - d0[k]).norm() < 1e-10);
                assert!((tr.amk[0][k] - d0[4 + k]).norm() < 1e-10);
                assert!((tr.b[0][k] - d0[8 + k]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn final_value_matches_fixed_point() {
        let (m, p) = fixtures::p0();
        let s = Solver::new(&m, &p, None).unwrap();
        let fv = s.final_value().unwrap();
        let n1 = bose_occupation(1.0, p.omega(0)).unwrap();
        // The A↔B coupling shifts the full solve off the thermal value at O(g²).
        assert!((fv.d_inf[0] - c(2.0 * n1 + 1.0, 0.0)).norm() < 20.0 * 0.01, "{}", fv.d_inf[0]);
        assert!(fv.d_inf[1].norm() < 20.0 * 0.01);
    }

    #[test]
    fn final_value_without_relaxation_is_singular() {
        let m = SpectralModel::single([0.0, 0.0], Shape::OhmicGaussian, 10.0).unwrap();
        let s = Solver::new(&m, &fixtures::p0().1, Some(Regime::NonDegenerate)).unwrap();
        assert!(matches!(s.final_value(), Err(MixError::Singular { .. })));
    }

    #[test]
    fn regime_mismatch() {
        let (m, p) = fixtures::p0();
        let s = Solver::new(&m, &p, None).unwrap();
        let e = evolve_correlators(&s.corr, &s.sys, &vacuum_state(), &[0.0], Regime::NearlyDegenerate, KeepOrder::Leading);
        assert!(matches!(e, Err(MixError::RegimeMismatch(_))));
    }
}
