//! Direct time-domain integration of the memory equations, used as a referee
//! for the pole expansions, plus the closed forms of a single field.
//!
//! Each first-order component obeys y′ = λy + F(t), where F collects the memory
//! convolutions ∫Σ(τ)y(t−τ)dτ and the accumulated noise. The free rotation is
//! integrated exactly (exponential integrator) and F is interpolated linearly
//! across the step; the convolutions use the trapezoid rule on the dt lattice.
//! Because Σ(0) = 0, F at the new time only needs history, so the corrector pass
//! of a predictor–corrector trapezoid coincides with the predictor.

use nalgebra::Matrix2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlator_qnm::{correlator_blocks, CVec16};
use crate::error::{MixError, Result};
use crate::evolution::validate_initial;
use crate::kernels::{bose_occupation, boundary_kernels, noise_time_shape, sigma_time_exact};
use crate::spectral::{ModeParams, SpectralModel};
use crate::{c, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    TrapezoidPc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Step size; `None` picks 0.005/max(ω, Λ).
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_cut")]
    pub memory_cut: f64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Run again at dt/2 and extrapolate.
    #[serde(default = "yes")]
    pub richardson: bool,
}

fn default_cut() -> f64 {
    1e-10
}

fn yes() -> bool {
    true
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { dt: None, memory_cut: default_cut(), scheme: Scheme::TrapezoidPc, richardson: true }
    }
}

impl OracleConfig {
    pub fn with_dt(dt: f64) -> Self {
        OracleConfig { dt: Some(dt), ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(MixError::Params(format!("oracle dt must be positive, got {dt}")));
            }
        }
        if !(self.memory_cut > 0.0 && self.memory_cut <= 1e-4) {
            return Err(MixError::Params(format!("memory_cut must lie in (0, 1e-4], got {}", self.memory_cut)));
        }
        Ok(())
    }

    pub fn step(&self, model: &SpectralModel, params: &ModeParams) -> f64 {
        self.dt.unwrap_or_else(|| default_dt(model, params))
    }
}

pub fn default_dt(model: &SpectralModel, params: &ModeParams) -> f64 {
    let w = params.omegas();
    0.005 / w[0].max(w[1]).max(model.max_cutoff())
}

/// Options of the correlator run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CorrelatorOptions {
    /// Drop the B/B* sources from the A-block equations.
    pub rwa: bool,
    /// Force the noise kernel to zero.
    pub zero_noise: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleTrajectory {
    pub t: Vec<f64>,
    /// Amplitude runs only.
    pub phi: Vec<[f64; 2]>,
    pub pi: Vec<[f64; 2]>,
    /// Correlator runs only; layout of the 16-component system.
    pub d: Vec<CVec16>,
    /// |fine − coarse|/3 per output time (NaN without Richardson).
    pub rich_err: Vec<f64>,
    /// Bound on the dropped memory tail per output time.
    pub trunc_err: Vec<f64>,
    /// Step actually used by the (coarse) run.
    pub dt: f64,
    pub memory_steps: usize,
}

impl OracleTrajectory {
    pub fn a(&self, i: usize) -> [Complex64; 4] {
        let d = &self.d[i];
        [d[0], d[1], d[2], d[3]]
    }

    pub fn b(&self, i: usize) -> [Complex64; 4] {
        let d = &self.d[i];
        [d[8], d[9], d[10], d[11]]
    }
}

/// Output times j·Δ and the number of steps per output interval.
fn output_grid(t_max: f64, n_points: usize, dt: f64) -> Result<(Vec<f64>, usize)> {
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(MixError::Precondition(format!("t_max must be positive, got {t_max}")));
    }
    if n_points < 2 {
        return Err(MixError::Precondition("need at least two output points".into()));
    }
    let delta = t_max / (n_points - 1) as f64;
    let stride = ((delta / dt) - 1e-9).ceil().max(1.0) as usize;
    Ok(((0..n_points).map(|j| j as f64 * delta).collect(), stride))
}

/// φ₁(z) = (eᶻ−1)/z, φ₂(z) = (eᶻ−1−z)/z².
fn phi_functions(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() < 1e-3 {
        let z2 = z * z;
        let z3 = z2 * z;
        let p1 = 1.0 + z / 2.0 + z2 / 6.0 + z3 / 24.0 + z2 * z2 / 120.0;
        let p2 = 0.5 + z / 6.0 + z2 / 24.0 + z3 / 120.0 + z2 * z2 / 720.0;
        (p1, p2)
    } else {
        let e = z.exp();
        ((e - 1.0) / z, (e - 1.0 - z) / (z * z))
    }
}

/// Σ(t) per channel on the lattice m·h, m = 0..=W, cut where the envelope has
/// fallen below `cut` of its maximum.
struct MemoryLattice {
    values: Vec<Vec<f64>>,
    coupling: Vec<Matrix2<f64>>,
    /// ∫ beyond the window of Σ_ch ‖c_ch‖·|s_ch|.
    tail: f64,
}

impl MemoryLattice {
    fn new(model: &SpectralModel, h: f64, cut: f64) -> Self {
        let mut lat = MemoryLattice { values: Vec::new(), coupling: Vec::new(), tail: 0.0 };
        let chans: Vec<_> = model.channels.iter().filter(|ch| ch.coupling_matrix().iter().any(|x| *x != 0.0)).collect();
        let mut len = 1;
        for ch in &chans {
            let f = |m: usize| sigma_time_exact(ch.shape, ch.lambda, m as f64 * h).abs();
            // Both shapes rise to one maximum and then decay monotonically.
            let (mut runmax, mut prev, mut m) = (0.0f64, 0.0, 1);
            loop {
                let v = f(m);
                runmax = runmax.max(v);
                if v < cut * runmax && v < prev {
                    break;
                }
                prev = v;
                m += 1;
            }
            len = len.max(m + 1);
            let mut tail = 0.0;
            let mut k = m;
            while f(k) >= 1e-6 * cut * runmax {
                tail += f(k) * h;
                k += 1;
            }
            lat.tail += ch.coupling_matrix().abs().max() * tail;
        }
        for ch in chans {
            lat.values.push((0..len).map(|m| sigma_time_exact(ch.shape, ch.lambda, m as f64 * h)).collect());
            lat.coupling.push(ch.coupling_matrix());
        }
        lat
    }

    /// Window length W (lattice points m = 1..=W).
    fn window(&self) -> usize {
        self.values.first().map_or(0, |v| v.len() - 1)
    }
}

/// History of the last W values in chronological order, contiguous in memory.
struct Ring<T: Copy + Default> {
    buf: Vec<T>,
    head: usize,
    w: usize,
}

impl<T: Copy + Default> Ring<T> {
    fn new(w: usize) -> Self {
        Ring { buf: vec![T::default(); 2 * w.max(1)], head: 0, w: w.max(1) }
    }

    fn push(&mut self, v: T) {
        self.buf[self.head] = v;
        self.buf[self.head + self.w] = v;
        self.head = (self.head + 1) % self.w;
    }

    fn slice(&self) -> &[T] {
        &self.buf[self.head..self.head + self.w]
    }
}

fn dot_real(k: &[f64], y: &[f64]) -> f64 {
    k.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn dot_complex(k: &[Complex64], y: &[Complex64]) -> Complex64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (a, b) in k.iter().zip(y) {
        re += a.re * b.re - a.im * b.im;
        im += a.re * b.im + a.im * b.re;
    }
    c(re, im)
}

struct AmpRun {
    phi: Vec<[f64; 2]>,
    pi: Vec<[f64; 2]>,
    trunc: Vec<f64>,
}

fn run_amplitudes(model: &SpectralModel, params: &ModeParams, phi0: [f64; 2], pi0: [f64; 2], h: f64, stride: usize, n_out: usize, cut: f64) -> Result<(AmpRun, usize)> {
    let w = params.omegas();
    let lat = MemoryLattice::new(model, h, cut);
    let wlen = lat.window();
    // Σ(m h) summed over channels, entry (a,b), stored reversed for the dot products.
    let mut rev = [[vec![0.0; wlen.max(1)], vec![0.0; wlen.max(1)]], [vec![0.0; wlen.max(1)], vec![0.0; wlen.max(1)]]];
    let mut fwd = vec![Matrix2::<f64>::zeros(); wlen + 1];
    for (vals, cm) in lat.values.iter().zip(&lat.coupling) {
        for m in 1..=wlen {
            fwd[m] += cm * (vals[m] * h);
        }
    }
    for m in 1..=wlen {
        for a in 0..2 {
            for b in 0..2 {
                rev[a][b][wlen - m] = fwd[m][(a, b)];
            }
        }
    }
    let mut hist = [Ring::<f64>::new(wlen), Ring::<f64>::new(wlen)];
    let mut u = [c(phi0[0], pi0[0] / w[0]), c(phi0[1], pi0[1] / w[1])];
    let z = [c(0.0, -w[0] * h), c(0.0, -w[1] * h)];
    let ez = [z[0].exp(), z[1].exp()];
    let pf = [phi_functions(z[0]), phi_functions(z[1])];
    let scale = u.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let limit = 10f64.exp() * scale;

    let mut out = AmpRun { phi: Vec::with_capacity(n_out), pi: Vec::with_capacity(n_out), trunc: Vec::with_capacity(n_out) };
    let mut max_state: f64 = scale;
    let record = |out: &mut AmpRun, u: &[Complex64; 2], max_state: f64| {
        out.phi.push([u[0].re, u[1].re]);
        out.pi.push([u[0].im * w[0], u[1].im * w[1]]);
        out.trunc.push(lat.tail * max_state);
    };
    record(&mut out, &u, max_state);
    for c_ in 0..2 {
        hist[c_].push(u[c_].re);
    }
    let mut f_prev = [c(0.0, 0.0); 2];
    let total = stride * (n_out - 1);
    for n in 0..total {
        let np1 = n + 1;
        let mut conv = [0.0; 2];
        if wlen > 0 {
            for a in 0..2 {
                conv[a] = dot_real(&rev[a][0], hist[0].slice()) + dot_real(&rev[a][1], hist[1].slice());
                if np1 <= wlen {
                    // Trapezoid weight ½ at the t = 0 end.
                    conv[a] -= 0.5 * (fwd[np1][(a, 0)] * phi0[0] + fwd[np1][(a, 1)] * phi0[1]);
                }
            }
        }
        let mut f_new = [c(0.0, 0.0); 2];
        for a in 0..2 {
            f_new[a] = -I * conv[a] / w[a];
            let (p1, p2) = pf[a];
            u[a] = ez[a] * u[a] + (p1 * f_prev[a] + p2 * (f_new[a] - f_prev[a])) * h;
        }
        f_prev = f_new;
        for a in 0..2 {
            hist[a].push(u[a].re);
        }
        let nrm = u[0].norm().max(u[1].norm());
        if !(nrm <= limit) {
            return Err(MixError::Unstable { t: np1 as f64 * h, norm: nrm });
        }
        max_state = max_state.max(nrm);
        if np1 % stride == 0 {
            record(&mut out, &u, max_state);
        }
    }
    Ok((out, wlen))
}

/// d²⟨φ⟩/dt² + ω²⟨φ⟩ + ∫₀ᵗΣ(t−t′)⟨φ⟩(t′)dt′ = 0 on `n_points` equally spaced times.
pub fn integrate_amplitudes(model: &SpectralModel, params: &ModeParams, phi0: [f64; 2], pi0: [f64; 2], cfg: &OracleConfig, t_max: f64, n_points: usize) -> Result<OracleTrajectory> {
    model.validate()?;
    params.validate()?;
    cfg.validate()?;
    let (t, stride) = output_grid(t_max, n_points, cfg.step(model, params))?;
    let h = t[1] / stride as f64;
    let cut = cfg.memory_cut;
    let (coarse, fine) = if cfg.richardson {
        let (a, b) = rayon::join(
            || run_amplitudes(model, params, phi0, pi0, h, stride, n_points, cut),
            || run_amplitudes(model, params, phi0, pi0, h / 2.0, 2 * stride, n_points, cut),
        );
        (a?, Some(b?))
    } else {
        (run_amplitudes(model, params, phi0, pi0, h, stride, n_points, cut)?, None)
    };
    let (coarse, wlen) = coarse;
    let (phi, pi, rich_err) = match fine {
        Some((f, _)) => {
            let ex = |a: f64, b: f64| (4.0 * b - a) / 3.0;
            let mut phi = Vec::with_capacity(n_points);
            let mut pi = Vec::with_capacity(n_points);
            let mut err = Vec::with_capacity(n_points);
            for j in 0..n_points {
                let (pc, pf) = (coarse.phi[j], f.phi[j]);
                let (qc, qf) = (coarse.pi[j], f.pi[j]);
                phi.push([ex(pc[0], pf[0]), ex(pc[1], pf[1])]);
                pi.push([ex(qc[0], qf[0]), ex(qc[1], qf[1])]);
                let e = (0..2).map(|k| (pf[k] - pc[k]).abs().max((qf[k] - qc[k]).abs())).fold(0.0, f64::max) / 3.0;
                err.push(e);
            }
            (phi, pi, err)
        }
        None => (coarse.phi.clone(), coarse.pi.clone(), vec![f64::NAN; n_points]),
    };
    Ok(OracleTrajectory { t, phi, pi, d: Vec::new(), rich_err, trunc_err: coarse.trunc, dt: h, memory_steps: wlen })
}

/// 𝒩(t) per channel on the lattice j·h, stopping once a whole chunk has fallen
/// below `cut` of the maximum (or at `t_end`).
fn noise_lattice(model: &SpectralModel, beta: f64, h: f64, cut: f64, t_end: f64) -> Result<Vec<Vec<f64>>> {
    let chans: Vec<_> = model.channels.iter().filter(|ch| ch.coupling_matrix().iter().any(|x| *x != 0.0)).collect();
    let mut out: Vec<Vec<f64>> = vec![Vec::new(); chans.len()];
    if chans.is_empty() {
        return Ok(out);
    }
    let last = (t_end / h).ceil() as usize + 1;
    let chunk = 1024;
    let mut start = 0;
    let mut peak: f64 = 0.0;
    let min_len = (2.0 / (model.max_cutoff() * h)).ceil() as usize;
    while start <= last {
        let end = (start + chunk).min(last + 1);
        let block: Vec<Result<Vec<f64>>> = (start..end)
            .into_par_iter()
            .map(|j| chans.iter().map(|ch| noise_time_shape(ch.shape, ch.lambda, beta, j as f64 * h)).collect())
            .collect();
        let mut chunk_max: f64 = 0.0;
        for row in block {
            let row = row?;
            for (k, v) in row.into_iter().enumerate() {
                chunk_max = chunk_max.max(v.abs());
                out[k].push(v);
            }
        }
        peak = peak.max(chunk_max);
        start = end;
        if start > min_len && chunk_max < cut * peak {
            break;
        }
    }
    Ok(out)
}

/// Coupling-resolved Σ̃/Ñ weights: Σ̃_ab = Σ_ch c_ch,ab·s_ch/√(4ω_aω_b).
fn tilde_weight(cm: &Matrix2<f64>, a: usize, b: usize, w: [f64; 2]) -> f64 {
    cm[(a, b)] / (4.0 * w[a] * w[b]).sqrt()
}

struct ConvKey {
    src: usize,
    /// h·s_ch(mh)·e^{−i·shift·mh}, reversed.
    rev: Vec<Complex64>,
    fwd: Vec<Complex64>,
}

struct ConvTerm {
    row: usize,
    key: usize,
    weight: Complex64,
    conj: bool,
}

struct CorrRun {
    d: Vec<CVec16>,
    trunc: Vec<f64>,
}

fn shift_key(x: f64) -> i64 {
    (x * 1e12).round() as i64
}

#[allow(clippy::too_many_arguments)]
fn run_correlators(
    model: &SpectralModel,
    params: &ModeParams,
    d0: &CVec16,
    noise: &[Vec<f64>],
    noise_stride: usize,
    h: f64,
    stride: usize,
    n_out: usize,
    cut: f64,
    opts: CorrelatorOptions,
) -> Result<(CorrRun, usize)> {
    let sys = correlator_blocks(model, params)?;
    let w = params.omegas();
    let lat = MemoryLattice::new(model, h, cut);
    let wlen = lat.window();
    let chans: Vec<_> = model.channels.iter().filter(|ch| ch.coupling_matrix().iter().any(|x| *x != 0.0)).collect();

    let mut keys: Vec<ConvKey> = Vec::new();
    let mut key_index = std::collections::HashMap::new();
    let mut terms: Vec<ConvTerm> = Vec::new();
    for e in &sys.entries {
        if e.row >= 12 {
            continue;
        }
        if opts.rwa && e.row < 8 && e.col >= 8 {
            continue;
        }
        // B*(x,y) = conj B(x,y): its convolution is conj of B's at the opposite shift.
        let (src, shift, conj) = if e.col >= 12 { (e.col - 4, -e.shift, true) } else { (e.col, e.shift, false) };
        for (k, cm) in lat.coupling.iter().enumerate() {
            let wt = tilde_weight(cm, e.a, e.b, w);
            if wt == 0.0 {
                continue;
            }
            let id = *key_index.entry((src, shift_key(shift), k)).or_insert_with(|| {
                let vals = &lat.values[k];
                let fwd: Vec<Complex64> = (0..=wlen).map(|m| (c(0.0, -shift * m as f64 * h)).exp() * (vals[m] * h)).collect();
                let mut rev = vec![c(0.0, 0.0); wlen.max(1)];
                for m in 1..=wlen {
                    rev[wlen - m] = fwd[m];
                }
                keys.push(ConvKey { src, rev, fwd });
                keys.len() - 1
            });
            terms.push(ConvTerm { row: e.row, key: id, weight: e.coef * wt, conj });
        }
    }

    // Accumulated noise I(t) on the lattice; constant past the noise window.
    let total = stride * (n_out - 1);
    let mut acc = vec![vec![c(0.0, 0.0); 1]; 12];
    if !opts.zero_noise && !noise.is_empty() {
        let len = ((noise[0].len() - 1) / noise_stride + 1).min(total + 1);
        let n_at = |row: usize, j: usize| -> Complex64 {
            let t = j as f64 * h;
            let mut v = c(0.0, 0.0);
            for nt in sys.noise.iter().filter(|nt| nt.row == row) {
                let mut s = 0.0;
                for (k, ch) in chans.iter().enumerate() {
                    s += tilde_weight(&ch.coupling_matrix(), nt.a, nt.b, w) * noise[k][j * noise_stride];
                }
                v += (c(0.0, -nt.shift * t)).exp() * (nt.coef * s);
            }
            v
        };
        for (row, a) in acc.iter_mut().enumerate() {
            let mut prev = n_at(row, 0);
            let mut sum = c(0.0, 0.0);
            a.reserve(len);
            for j in 1..len {
                let cur = n_at(row, j);
                sum += (prev + cur) * (0.5 * h);
                a.push(sum);
                prev = cur;
            }
        }
    }
    let inhom = |row: usize, n: usize| -> Complex64 {
        let a = &acc[row];
        a[n.min(a.len() - 1)]
    };

    let lam: Vec<Complex64> = (0..12).map(|r| c(0.0, sys.omega[r])).collect();
    let ez: Vec<Complex64> = lam.iter().map(|l| (l * h).exp()).collect();
    let pf: Vec<(Complex64, Complex64)> = lam.iter().map(|l| phi_functions(l * h)).collect();
    let mut y: Vec<Complex64> = (0..12).map(|r| d0[r]).collect();
    let y0 = y.clone();
    let mut hist: Vec<Ring<Complex64>> = (0..12).map(|_| Ring::new(wlen)).collect();
    for (r, hr) in hist.iter_mut().enumerate() {
        hr.push(y[r]);
    }
    let scale = y.iter().map(|v| v.norm()).fold(1.0, f64::max).max(acc.iter().flat_map(|a| a.iter()).map(|v| v.norm()).fold(0.0, f64::max));
    let limit = 10f64.exp() * scale;
    let mut max_state = scale;

    let full = |y: &[Complex64]| -> CVec16 {
        let mut v = CVec16::zeros();
        for r in 0..12 {
            v[r] = y[r];
        }
        for k in 0..4 {
            v[12 + k] = y[8 + k].conj();
        }
        v
    };
    let mut out = CorrRun { d: Vec::with_capacity(n_out), trunc: Vec::with_capacity(n_out) };
    out.d.push(full(&y));
    out.trunc.push(lat.tail * max_state);
    let mut f_prev: Vec<Complex64> = (0..12).map(|r| inhom(r, 0)).collect();
    let mut conv = vec![c(0.0, 0.0); keys.len()];
    let mut f_new = vec![c(0.0, 0.0); 12];
    for n in 0..total {
        let np1 = n + 1;
        if wlen > 0 {
            for (kv, key) in conv.iter_mut().zip(&keys) {
                let mut v = dot_complex(&key.rev, hist[key.src].slice());
                if np1 <= wlen {
                    v -= key.fwd[np1] * y0[key.src] * 0.5;
                }
                *kv = v;
            }
        }
        for (r, f) in f_new.iter_mut().enumerate() {
            *f = inhom(r, np1);
        }
        for t in &terms {
            let v = if t.conj { conv[t.key].conj() } else { conv[t.key] };
            f_new[t.row] -= t.weight * v;
        }
        let mut nrm: f64 = 0.0;
        for r in 0..12 {
            let (p1, p2) = pf[r];
            y[r] = ez[r] * y[r] + (p1 * f_prev[r] + p2 * (f_new[r] - f_prev[r])) * h;
            nrm = nrm.max(y[r].norm());
            hist[r].push(y[r]);
        }
        std::mem::swap(&mut f_prev, &mut f_new);
        if !(nrm <= limit) {
            return Err(MixError::Unstable { t: np1 as f64 * h, norm: nrm });
        }
        max_state = max_state.max(nrm);
        if np1 % stride == 0 {
            out.d.push(full(&y));
            out.trunc.push(lat.tail * max_state);
        }
    }
    Ok((out, wlen))
}

/// The 16-component correlator equations integrated directly, including every
/// A↔B coupling.
pub fn integrate_correlators(model: &SpectralModel, params: &ModeParams, initial: &CVec16, cfg: &OracleConfig, t_max: f64, n_points: usize, opts: CorrelatorOptions) -> Result<OracleTrajectory> {
    model.validate()?;
    params.validate()?;
    cfg.validate()?;
    validate_initial(initial)?;
    let (t, stride) = output_grid(t_max, n_points, cfg.step(model, params))?;
    let h = t[1] / stride as f64;
    let cut = cfg.memory_cut;
    // The noise kernel is tabulated once on the finest lattice.
    let h_noise = if cfg.richardson { h / 2.0 } else { h };
    let noise = if opts.zero_noise { Vec::new() } else { noise_lattice(model, params.beta, h_noise, cut, t_max)? };
    let ns = if cfg.richardson { 2 } else { 1 };
    let run = |hh: f64, st: usize, nstr: usize| run_correlators(model, params, initial, &noise, nstr, hh, st, n_points, cut, opts);
    let (coarse, fine) = if cfg.richardson {
        let (a, b) = rayon::join(|| run(h, stride, ns), || run(h / 2.0, 2 * stride, 1));
        (a?, Some(b?))
    } else {
        (run(h, stride, 1)?, None)
    };
    let (coarse, wlen) = coarse;
    let (d, rich_err) = match fine {
        Some((f, _)) => {
            let mut d = Vec::with_capacity(n_points);
            let mut err = Vec::with_capacity(n_points);
            for j in 0..n_points {
                let diff = f.d[j] - coarse.d[j];
                d.push(f.d[j] + diff / c(3.0, 0.0));
                err.push(diff.iter().map(|z| z.norm()).fold(0.0, f64::max) / 3.0);
            }
            (d, err)
        }
        None => (coarse.d.clone(), vec![f64::NAN; n_points]),
    };
    Ok(OracleTrajectory { t, phi: Vec::new(), pi: Vec::new(), d, rich_err, trunc_err: coarse.trunc, dt: h, memory_steps: wlen })
}

/// Initial data of one field at ±k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleSpeciesInitial {
    pub a_k: f64,
    pub a_mk: f64,
    pub b: Complex64,
}

impl SingleSpeciesInitial {
    pub fn vacuum() -> Self {
        SingleSpeciesInitial { a_k: 1.0, a_mk: 1.0, b: c(0.0, 0.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleSpeciesTrajectory {
    pub t: Vec<f64>,
    pub a_k: Vec<f64>,
    pub a_mk: Vec<f64>,
    pub b: Vec<Complex64>,
    pub a_vac: Vec<f64>,
    pub ntilde: Vec<f64>,
    /// Ω = ω + Σ̃_R(iω)
    pub omega: f64,
    /// Γ = 2Σ̃_I(iω)
    pub gamma: f64,
    /// Σ̃(iω) = Σ(iω)/2ω
    pub sigma_t: Complex64,
    /// Ñ(iω) = 𝒩(iω)/2ω
    pub noise_t: Complex64,
    pub n: f64,
}

/// Closed-form populations and pair correlator of a field coupled alone to the
/// bath; `model` must leave field 2 uncoupled.
pub fn single_species_reference(model: &SpectralModel, params: &ModeParams, initial: SingleSpeciesInitial, tgrid: &[f64]) -> Result<SingleSpeciesTrajectory> {
    model.validate()?;
    params.validate()?;
    crate::amplitude_qnm::check_grid(tgrid)?;
    if model.channels.iter().any(|ch| ch.g[1] != 0.0) {
        return Err(MixError::Precondition("single-species reference needs g₂ = 0 in every channel".into()));
    }
    let w = params.omega(0);
    let plus = boundary_kernels(model, params, w, true)?;
    let minus = boundary_kernels(model, params, -w, true)?;
    let sp = plus.sigma()[(0, 0)];
    let sm = minus.sigma()[(0, 0)];
    let np = plus.noise()[(0, 0)];
    let n = bose_occupation(params.beta, w)?;
    let coth = 2.0 * n + 1.0;
    let omega = w + sp.re;
    let gamma = 2.0 * sp.im;

    let population = |a0: f64, t: f64| -> (f64, f64) {
        let eg = (-gamma * t).exp();
        let rot = c(0.0, -2.0 * omega * t).exp();
        let a = (a0 + ((sp - sm * rot) * initial.b).re / w) * eg + ((1.0 - sp.re / w) * coth + 2.0 * np.im / w) * (1.0 - eg);
        let vac = 1.0 + (-sp.re + 2.0 * np.im) / w * (1.0 - eg);
        (a, vac)
    };
    let mut out = SingleSpeciesTrajectory {
        t: tgrid.to_vec(),
        a_k: Vec::with_capacity(tgrid.len()),
        a_mk: Vec::with_capacity(tgrid.len()),
        b: Vec::with_capacity(tgrid.len()),
        a_vac: Vec::with_capacity(tgrid.len()),
        ntilde: Vec::with_capacity(tgrid.len()),
        omega,
        gamma,
        sigma_t: sp,
        noise_t: np,
        n,
    };
    for &t in tgrid {
        let (a, vac) = population(initial.a_k, t);
        let (amk, _) = population(initial.a_mk, t);
        let eg = (-gamma * t).exp();
        let rot = c(0.0, -2.0 * omega * t).exp();
        let b = (initial.b * rot + (rot * sm - sp) * ((initial.a_k + initial.a_mk) / (2.0 * w))) * eg - (1.0 + rot * eg) * (2.0 * np.im / w)
            + (I * (1.0 - rot) * (eg * sp.im) - (1.0 - eg) * sp.re) * (coth / w);
        out.a_k.push(a);
        out.a_mk.push(amk);
        out.b.push(b);
        out.a_vac.push(vac);
        out.ntilde.push((a - vac) / (2.0 * vac));
    }
    Ok(out)
}
