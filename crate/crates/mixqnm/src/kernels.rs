//! Self-energy and noise kernels: boundary values at s = iω + 0⁺ and time-domain forms.
//!
//! Conventions: Σ(iω) = Σ_R(ω) + iΣ_I(ω) with
//!   Σ_I(ω) = −½ρ(−ω),            Σ_R(ω) = −(1/2π) PV∫ ρ(k)/(ω+k) dk,
//! and the noise kernel 𝒩(k) = ½coth(βk/2)ρ(k) gives
//!   𝒩_R(ω) = ½𝒩(−ω),             𝒩_I(ω) = −(1/2π) PV∫ 𝒩(k)/(ω+k) dk.
//! Every channel is rank-1, so each entry is a coupling product times a scalar transform.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::error::{MixError, Result};
use crate::quad::{self, QuadResult, Tol, Trig};
use crate::spectral::{Channel, ModeParams, Shape, SpectralModel};
use crate::{c, CMat2};

/// n(ω) = 1/(e^{βω}−1); at β = ∞ returns 0 for ω > 0 and −1 for ω < 0.
pub fn bose_occupation(beta: f64, omega: f64) -> Result<f64> {
    if omega == 0.0 {
        return Err(MixError::BosePole);
    }
    if beta.is_nan() || beta <= 0.0 {
        return Err(MixError::Params("beta must be positive".into()));
    }
    if beta.is_infinite() {
        return Ok(if omega > 0.0 { 0.0 } else { -1.0 });
    }
    Ok(1.0 / (beta * omega).exp_m1())
}

/// coth(βω/2) = 2n(ω)+1, with coth → sign ω at β = ∞.
pub fn coth_half(beta: f64, omega: f64) -> f64 {
    if beta.is_infinite() {
        return omega.signum();
    }
    1.0 / (0.5 * beta * omega).tanh()
}

/// k·coth(βk/2), continuous through k = 0 (value 2/β) and even in k.
pub fn k_coth(beta: f64, k: f64) -> f64 {
    if beta.is_infinite() {
        return k.abs();
    }
    let x = 0.5 * beta * k;
    if x == 0.0 {
        return 2.0 / beta;
    }
    k / x.tanh()
}

/// Boundary values of Σ and 𝒩 at a real frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMatrix {
    pub omega: f64,
    pub sigma_r: Matrix2<f64>,
    pub sigma_i: Matrix2<f64>,
    pub noise_r: Matrix2<f64>,
    pub noise_i: Matrix2<f64>,
    pub tilde: bool,
    /// Largest quadrature error estimate among the entries.
    pub quad_error: f64,
}

impl KernelMatrix {
    /// Σ(iω)
    pub fn sigma(&self) -> CMat2 {
        combine(&self.sigma_r, &self.sigma_i)
    }

    /// 𝒩(iω)
    pub fn noise(&self) -> CMat2 {
        combine(&self.noise_r, &self.noise_i)
    }

    fn scale_tilde(mut self, w: [f64; 2]) -> Self {
        let f = tilde_factors(w);
        for m in [&mut self.sigma_r, &mut self.sigma_i, &mut self.noise_r, &mut self.noise_i] {
            m.component_mul_assign(&f);
        }
        self.tilde = true;
        self
    }
}

fn combine(re: &Matrix2<f64>, im: &Matrix2<f64>) -> CMat2 {
    CMat2::from_fn(|i, j| c(re[(i, j)], im[(i, j)]))
}

/// Entrywise 1/√(2ω_a·2ω_b).
pub fn tilde_factors(w: [f64; 2]) -> Matrix2<f64> {
    Matrix2::from_fn(|a, b| 1.0 / (2.0 * w[a] * 2.0 * w[b]).sqrt())
}

fn chan_tol() -> Tol {
    Tol::default()
}

/// PV∫₀^∞ h(k)/(k−w) dk for smooth h, w > 0: pole subtracted on [0, 2w].
fn pv_half_line<H: Fn(f64) -> f64>(h: H, w: f64, scale: f64) -> Result<QuadResult> {
    let hw = h(w);
    let sub = |k: f64| (h(k) - hw) / (k - w);
    let left = quad::integrate(sub, 0.0, w, chan_tol())?;
    let right = quad::integrate(sub, w, 2.0 * w, chan_tol())?;
    let tail = quad::integrate_to_inf_scaled(|k| h(k) / (k - w), 2.0 * w, scale.max(w), chan_tol())?;
    Ok(quad::combine(&[left, right, tail]))
}

/// Scalar Σ_R transform of one channel shape: −(1/π) PV∫₀^∞ kJ(k)/(k²−ω²) dk (even in ω).
pub fn sigma_r_shape(shape: Shape, lambda: f64, omega: f64) -> Result<QuadResult> {
    let w = omega.abs();
    let r = if w == 0.0 {
        quad::integrate_to_inf_scaled(|k| shape.j_over_k(k, lambda), 0.0, lambda, chan_tol())?
    } else {
        pv_half_line(|k| k * shape.j(k, lambda) / (k + w), w, lambda)?
    };
    Ok(QuadResult { value: -r.value / PI, error: r.error / PI, evals: r.evals })
}

/// Scalar 𝒩_I transform: (ω/π) PV∫₀^∞ 𝒩(k)/(k²−ω²) dk with 𝒩(k) = ½k·coth(βk/2)·J(k)/k (odd in ω).
pub fn noise_i_shape(shape: Shape, lambda: f64, beta: f64, omega: f64) -> Result<QuadResult> {
    let w = omega.abs();
    if w == 0.0 {
        return Ok(QuadResult { value: 0.0, error: 0.0, evals: 0 });
    }
    let n = |k: f64| 0.5 * k_coth(beta, k) * shape.j_over_k(k, lambda);
    let r = pv_half_line(|k| n(k) / (k + w), w, lambda)?;
    let f = omega / PI;
    Ok(QuadResult { value: f * r.value, error: f.abs() * r.error, evals: r.evals })
}

fn channel_sum<F>(model: &SpectralModel, mut f: F) -> Result<(Matrix2<f64>, f64)>
where
    F: FnMut(&Channel) -> Result<QuadResult>,
{
    let mut m = Matrix2::zeros();
    let mut err: f64 = 0.0;
    for ch in &model.channels {
        let cm = ch.coupling_matrix();
        if cm.iter().all(|x| *x == 0.0) {
            continue;
        }
        let r = f(ch)?;
        m += cm * r.value;
        err = err.max(r.error * cm.abs().max());
    }
    Ok((m, err))
}

/// Σ and 𝒩 boundary values at real frequency `omega`.
pub fn boundary_kernels(model: &SpectralModel, params: &ModeParams, omega: f64, tilde: bool) -> Result<KernelMatrix> {
    let beta = params.beta;
    // Σ_I(ω) = −½ρ(−ω)
    let sigma_i = model.rho_matrix(-omega) * -0.5;
    // 𝒩_R(ω) = ¼coth(βω/2)ρ(ω), written through k·coth so that ω = 0 is finite.
    let (noise_r, _) = channel_sum(model, |ch| {
        let v = 0.25 * k_coth(beta, omega) * ch.shape.j_over_k(omega, ch.lambda);
        Ok(QuadResult { value: v, error: 0.0, evals: 0 })
    })?;
    let (sigma_r, e1) = channel_sum(model, |ch| sigma_r_shape(ch.shape, ch.lambda, omega))?;
    let (noise_i, e2) = channel_sum(model, |ch| noise_i_shape(ch.shape, ch.lambda, beta, omega))?;
    let km = KernelMatrix { omega, sigma_r, sigma_i, noise_r, noise_i, tilde: false, quad_error: e1.max(e2) };
    Ok(if tilde { km.scale_tilde(params.omegas()) } else { km })
}

/// Scalar time transforms of one channel: (Σ(t), 𝒩(t)) per unit coupling.
pub fn time_shape(shape: Shape, lambda: f64, beta: f64, t: f64) -> Result<(f64, f64)> {
    let tol = chan_tol();
    let s = quad::fourier_half_line(|k| shape.j(k, lambda), t, Trig::Sin, lambda, tol)?;
    let n = quad::fourier_half_line(|k| 0.5 * k_coth(beta, k) * shape.j_over_k(k, lambda), t, Trig::Cos, lambda, tol)?;
    Ok((-s.value / PI, n.value / PI))
}

/// 𝒩(t) scalar of one channel per unit coupling.
pub fn noise_time_shape(shape: Shape, lambda: f64, beta: f64, t: f64) -> Result<f64> {
    let n = quad::fourier_half_line(|k| 0.5 * k_coth(beta, k) * shape.j_over_k(k, lambda), t, Trig::Cos, lambda, chan_tol())?;
    Ok(n.value / PI)
}

/// Closed form of the Σ(t) scalar for the built-in shapes (used as an oracle).
pub fn sigma_time_exact(shape: Shape, lambda: f64, t: f64) -> f64 {
    match shape {
        Shape::OhmicGaussian => -lambda.powi(3) * t * (-(lambda * t).powi(2) / 4.0).exp() / (4.0 * PI.sqrt()),
        Shape::OhmicLorentzian => -lambda.powi(3) * t * (-lambda * t).exp() / 4.0,
    }
}

/// Σ(t) = −(1/π)∫₀^∞ρ sin(kt) dk and 𝒩(t) = (1/π)∫₀^∞ ½coth(βk/2)ρ cos(kt) dk.
pub fn time_kernels(model: &SpectralModel, params: &ModeParams, t: f64, tilde: bool) -> Result<(Matrix2<f64>, Matrix2<f64>)> {
    if t < 0.0 {
        return Err(MixError::Precondition("time kernels need t ≥ 0".into()));
    }
    let mut sig = Matrix2::zeros();
    let mut noi = Matrix2::zeros();
    for ch in &model.channels {
        let cm = ch.coupling_matrix();
        if cm.iter().all(|x| *x == 0.0) {
            continue;
        }
        let (s, n) = time_shape(ch.shape, ch.lambda, params.beta, t)?;
        sig += cm * s;
        noi += cm * n;
    }
    if tilde {
        let f = tilde_factors(params.omegas());
        sig.component_mul_assign(&f);
        noi.component_mul_assign(&f);
    }
    Ok((sig, noi))
}

/// max-norm of Σ_I(ω)·coth(βω/2) − 2𝒩_R(ω), where 𝒩_R = ½𝒩(−ω) is evaluated
/// literally from the spectral density rather than through the FDR shortcut.
pub fn fdr_residual(model: &SpectralModel, params: &ModeParams, omega: f64) -> Result<f64> {
    if omega == 0.0 {
        return Err(MixError::BosePole);
    }
    let beta = params.beta;
    let sigma_i = model.rho_matrix(-omega) * -0.5;
    let noise_minus = model.rho_matrix(-omega) * (0.5 * coth_half(beta, -omega));
    let noise_r = noise_minus * 0.5;
    let lhs = sigma_i * coth_half(beta, omega);
    Ok((lhs - noise_r * 2.0).abs().max())
}

/// Convenience evaluator bound to one model and parameter set.
#[derive(Debug, Clone)]
pub struct Kernels {
    pub model: SpectralModel,
    pub params: ModeParams,
}

impl Kernels {
    pub fn new(model: &SpectralModel, params: &ModeParams) -> Self {
        Kernels { model: model.clone(), params: *params }
    }

    /// Σ(iν)
    pub fn sigma(&self, nu: f64) -> Result<CMat2> {
        Ok(boundary_kernels(&self.model, &self.params, nu, false)?.sigma())
    }

    /// Σ̃(iν)
    pub fn sigma_t(&self, nu: f64) -> Result<CMat2> {
        Ok(boundary_kernels(&self.model, &self.params, nu, true)?.sigma())
    }

    /// 𝒩(iν)
    pub fn noise(&self, nu: f64) -> Result<CMat2> {
        Ok(boundary_kernels(&self.model, &self.params, nu, false)?.noise())
    }

    /// 𝒩̃(iν)
    pub fn noise_t(&self, nu: f64) -> Result<CMat2> {
        Ok(boundary_kernels(&self.model, &self.params, nu, true)?.noise())
    }

    pub fn at(&self, nu: f64, tilde: bool) -> Result<KernelMatrix> {
        boundary_kernels(&self.model, &self.params, nu, tilde)
    }
}

/// Σ(s) for s on the imaginary axis: s = iν.
pub fn nu_of(s: Complex64) -> f64 {
    debug_assert!(s.re.abs() <= 1e-12 * (1.0 + s.im.abs()), "kernel argument off the imaginary axis: {s}");
    s.im
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::fixtures;

    #[test]
    fn bose_values() {
        assert!((bose_occupation(1.0, 1.0).unwrap() - 0.58197671).abs() < 1e-8);
        assert_eq!(bose_occupation(f64::INFINITY, 1.0).unwrap(), 0.0);
        assert_eq!(bose_occupation(f64::INFINITY, -1.0).unwrap(), -1.0);
        assert!((bose_occupation(0.1, 1.0).unwrap() - 9.50833194).abs() < 1e-7);
        assert_eq!(bose_occupation(1.0, 0.0), Err(MixError::BosePole));
    }

    #[test]
    fn k_coth_is_continuous_at_zero() {
        let b = 0.7;
        assert!((k_coth(b, 1e-9) - 2.0 / b).abs() < 1e-12);
        assert_eq!(k_coth(b, 0.0), 2.0 / b);
        assert_eq!(k_coth(b, -0.3), k_coth(b, 0.3));
    }

    #[test]
    fn sigma_i_golden() {
        let (m, p) = fixtures::p0();
        let k = boundary_kernels(&m, &p, 1.0, false).unwrap();
        assert!((k.sigma_i[(0, 0)] - 0.00495025).abs() < 1e-8);
        assert!((k.sigma_i[(0, 0)] - 0.5 * 0.01 * (-0.01f64).exp()).abs() < 1e-17);
    }

    #[test]
    fn sigma_r_at_zero_golden() {
        let (m, p) = fixtures::p0();
        let k = boundary_kernels(&m, &p, 0.0, false).unwrap();
        let exact = -0.01 * 10.0 / (2.0 * PI.sqrt());
        assert!((k.sigma_r[(0, 0)] - exact).abs() < 1e-13);
        assert!((k.sigma_r[(0, 0)] + 0.02820948).abs() < 1e-8);
    }

    #[test]
    fn zero_coupling_gives_zero_kernels() {
        let m = SpectralModel::single([0.0, 0.0], Shape::OhmicGaussian, 10.0).unwrap();
        let p = ModeParams::new([1.0, 1.2], 0.0, 1.0).unwrap();
        let k = boundary_kernels(&m, &p, 0.8, true).unwrap();
        for x in [k.sigma_r, k.sigma_i, k.noise_r, k.noise_i] {
            assert_eq!(x, Matrix2::zeros());
        }
        let (s, n) = time_kernels(&m, &p, 0.3, false).unwrap();
        assert_eq!((s, n), (Matrix2::zeros(), Matrix2::zeros()));
        assert_eq!(fdr_residual(&m, &p, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn time_kernel_golden_and_origin() {
        let (m, p) = fixtures::p0();
        let (s, _) = time_kernels(&m, &p, 0.1, false).unwrap();
        assert!((s[(0, 0)] + 0.1098478).abs() < 1e-7);
        let (s0, _) = time_kernels(&m, &p, 0.0, false).unwrap();
        assert_eq!(s0, Matrix2::zeros());
    }

    #[test]
    fn parity_of_boundary_values() {
        let (m, p) = fixtures::p0();
        let a = boundary_kernels(&m, &p, 1.3, false).unwrap();
        let b = boundary_kernels(&m, &p, -1.3, false).unwrap();
        assert!((a.sigma_r - b.sigma_r).abs().max() < 1e-15);
        assert!((a.sigma_i + b.sigma_i).abs().max() < 1e-18);
        assert!((a.noise_r - b.noise_r).abs().max() < 1e-15);
        assert!((a.noise_i + b.noise_i).abs().max() < 1e-15);
    }

    #[test]
    fn tilde_scaling() {
        let (m, p) = fixtures::p0();
        let a = boundary_kernels(&m, &p, 0.9, false).unwrap();
        let b = boundary_kernels(&m, &p, 0.9, true).unwrap();
        let w = p.omegas();
        let f = 1.0 / (4.0 * w[0] * w[1]).sqrt();
        assert!((b.sigma_r[(0, 1)] - a.sigma_r[(0, 1)] * f).abs() < 1e-17);
        assert!(b.tilde && !a.tilde);
    }
}
