//! The 16-component equal-time two-point system and its QNMs.
//!
//! D⃗ = (A_k, A_{−k}, B_k, B_k*), each block a 2×2 matrix flattened as 2c+d, so
//! component 4·block + 2c + d. In Laplace space
//!
//!   (s − iΩ + K(s))·D⃗(s) = D⃗(0) + N⃗(s)/s,
//!
//! where every nonzero entry of K is ±iΣ̃_ab(s + i·shift) and every noise term
//! is ±2Ñ_ab(s + i·shift).

use std::collections::HashMap;

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::amplitude_qnm::{ModeLabel, Regime};
use crate::error::{MixError, Result};
use crate::kernels::Kernels;
use crate::onepoint_qnm::OnePointSpectrum;
use crate::spectral::{ModeParams, SpectralModel};
use crate::{c, CMat2, CMat4, I};

pub type CMat16 = SMatrix<Complex64, 16, 16>;
pub type CVec16 = SVector<Complex64, 16>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    /// ⟨{a_c†, a_d}⟩ at +k
    Ak,
    /// same at −k
    Amk,
    /// ⟨{a_{c,k}, a_{d,−k}}⟩
    Bk,
    /// conjugate of B_k
    Bstar,
}

impl Block {
    pub const ALL: [Block; 4] = [Block::Ak, Block::Amk, Block::Bk, Block::Bstar];

    pub fn index(self) -> usize {
        match self {
            Block::Ak => 0,
            Block::Amk => 1,
            Block::Bk => 2,
            Block::Bstar => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Block::Ak => "A_k",
            Block::Amk => "A_-k",
            Block::Bk => "B_k",
            Block::Bstar => "B_k*",
        }
    }

    /// One-point labels (first, second) whose product this block is.
    pub fn labels(self, cf: usize, d: usize) -> (ModeLabel, ModeLabel) {
        let a = [ModeLabel::A1, ModeLabel::A2];
        let ad = [ModeLabel::A1Dag, ModeLabel::A2Dag];
        match self {
            Block::Ak | Block::Amk => (ad[cf], a[d]),
            Block::Bk => (a[cf], a[d]),
            Block::Bstar => (ad[cf], ad[d]),
        }
    }

    /// Bare frequency Ω of component (c,d): dD/dt = iΩD + …
    pub fn bare_frequency(self, w: [f64; 2], cf: usize, d: usize) -> f64 {
        match self {
            Block::Ak | Block::Amk => w[cf] - w[d],
            Block::Bk => -(w[cf] + w[d]),
            Block::Bstar => w[cf] + w[d],
        }
    }
}

#[inline]
pub fn idx(block: Block, cf: usize, d: usize) -> usize {
    4 * block.index() + 2 * cf + d
}

/// K[row][col] += coef·Σ̃_ab(s + i·shift)
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KEntry {
    pub row: usize,
    pub col: usize,
    pub coef: Complex64,
    pub a: usize,
    pub b: usize,
    pub shift: f64,
}

/// N[row] += coef·Ñ_ab(s + i·shift)
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NTerm {
    pub row: usize,
    pub coef: f64,
    pub a: usize,
    pub b: usize,
    pub shift: f64,
}

fn k_entries(w: [f64; 2]) -> Vec<KEntry> {
    let mi = -I;
    let mut v = Vec::with_capacity(128);
    let mut push = |row, col, coef, a, b, shift| v.push(KEntry { row, col, coef, a, b, shift });
    for cf in 0..2 {
        for d in 0..2 {
            for b in 0..2 {
                // A_k
                let r = idx(Block::Ak, cf, d);
                push(r, idx(Block::Ak, b, d), mi, cf, b, w[d]);
                push(r, idx(Block::Bk, d, b), mi, cf, b, w[d]);
                push(r, idx(Block::Ak, cf, b), I, d, b, -w[cf]);
                push(r, idx(Block::Bstar, cf, b), I, d, b, -w[cf]);
                // A_{−k}
                let r = idx(Block::Amk, cf, d);
                push(r, idx(Block::Amk, b, d), mi, cf, b, w[d]);
                push(r, idx(Block::Bk, b, d), mi, cf, b, w[d]);
                push(r, idx(Block::Amk, cf, b), I, d, b, -w[cf]);
                push(r, idx(Block::Bstar, b, cf), I, d, b, -w[cf]);
                // B_k
                let r = idx(Block::Bk, cf, d);
                push(r, idx(Block::Bk, b, d), I, cf, b, w[d]);
                push(r, idx(Block::Amk, b, d), I, cf, b, w[d]);
                push(r, idx(Block::Bk, cf, b), I, d, b, w[cf]);
                push(r, idx(Block::Ak, b, cf), I, d, b, w[cf]);
                // B_k*
                let r = idx(Block::Bstar, cf, d);
                push(r, idx(Block::Bstar, b, d), mi, cf, b, -w[d]);
                push(r, idx(Block::Amk, d, b), mi, cf, b, -w[d]);
                push(r, idx(Block::Bstar, cf, b), mi, d, b, -w[cf]);
                push(r, idx(Block::Ak, cf, b), mi, d, b, -w[cf]);
            }
        }
    }
    v
}

fn n_terms(w: [f64; 2]) -> Vec<NTerm> {
    let mut v = Vec::with_capacity(32);
    for cf in 0..2 {
        for d in 0..2 {
            for (blk, sg, s1, s2) in [
                (Block::Ak, 2.0, w[d], -w[cf]),
                (Block::Amk, 2.0, w[d], -w[cf]),
                (Block::Bk, -2.0, w[d], w[cf]),
                (Block::Bstar, -2.0, -w[d], -w[cf]),
            ] {
                let row = idx(blk, cf, d);
                v.push(NTerm { row, coef: sg, a: cf, b: d, shift: s1 });
                v.push(NTerm { row, coef: sg, a: d, b: cf, shift: s2 });
            }
        }
    }
    v
}

/// Which Σ̃/Ñ values an evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    /// Boundary value at s + i·shift with the exact 1/√(2ω_a 2ω_b) scaling.
    Exact,
    /// Frequencies collapsed to ω̄: argument ±iω̄ and scaling 1/(2ω̄).
    MeanFrequency,
}

#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub kernels: Kernels,
    pub params: ModeParams,
    /// Bare Ω per component.
    pub omega: [f64; 16],
    pub entries: Vec<KEntry>,
    pub noise: Vec<NTerm>,
}

/// Kernel values keyed by ν, computed once per distinct argument.
struct KernelCache<'a> {
    k: &'a Kernels,
    map: HashMap<u64, (CMat2, CMat2)>,
}

impl<'a> KernelCache<'a> {
    fn new(k: &'a Kernels) -> Self {
        KernelCache { k, map: HashMap::new() }
    }

    /// (Σ(iν), 𝒩(iν)), not ω-scaled.
    fn get(&mut self, nu: f64) -> Result<(CMat2, CMat2)> {
        let key = (nu + 0.0).to_bits();
        if let Some(v) = self.map.get(&key) {
            return Ok(*v);
        }
        let km = self.k.at(nu, false)?;
        let v = (km.sigma(), km.noise());
        self.map.insert(key, v);
        Ok(v)
    }
}

impl BlockSystem {
    pub fn blocks_of(block: Block) -> std::ops::Range<usize> {
        4 * block.index()..4 * block.index() + 4
    }

    /// Argument ν and ω-scaling of one term at s = iν₀.
    fn sample(&self, nu0: f64, a: usize, b: usize, shift: f64, mode: Sampling) -> (f64, f64) {
        let w = self.params.omegas();
        match mode {
            Sampling::Exact => (nu0 + shift, 1.0 / (4.0 * w[a] * w[b]).sqrt()),
            Sampling::MeanFrequency => {
                let wb = self.params.omega_bar();
                (nu0 + shift.signum() * wb, 1.0 / (2.0 * wb))
            }
        }
    }

    fn check_axis(s: Complex64) -> Result<f64> {
        if s.re.abs() > 1e-12 * (1.0 + s.im.abs()) {
            return Err(MixError::Precondition(format!("kernel boundary values need Re s = 0, got {s}")));
        }
        Ok(s.im)
    }

    /// K(s) with every entry sampled at s + i·shift.
    pub fn k_matrix(&self, s: Complex64) -> Result<CMat16> {
        let nu0 = Self::check_axis(s)?;
        let mut cache = KernelCache::new(&self.kernels);
        let mut k = CMat16::zeros();
        for e in &self.entries {
            let (nu, f) = self.sample(nu0, e.a, e.b, e.shift, Sampling::Exact);
            let (sig, _) = cache.get(nu)?;
            k[(e.row, e.col)] += e.coef * sig[(e.a, e.b)] * f;
        }
        Ok(k)
    }

    /// One diagonal 4×4 block of K, each row evaluated at its own s.
    pub fn k_block(&self, block: Block, nu_of_row: impl Fn(usize) -> f64, mode: Sampling) -> Result<CMat4> {
        let base = 4 * block.index();
        let mut cache = KernelCache::new(&self.kernels);
        let mut k = CMat4::zeros();
        for e in self.entries.iter().filter(|e| e.row / 4 == block.index() && e.col / 4 == block.index()) {
            let (nu, f) = self.sample(nu_of_row(e.row - base), e.a, e.b, e.shift, mode);
            let (sig, _) = cache.get(nu)?;
            k[(e.row - base, e.col - base)] += e.coef * sig[(e.a, e.b)] * f;
        }
        Ok(k)
    }

    /// Off-diagonal block K[from rows of `rb`, columns of `cb`] at s.
    pub fn k_cross(&self, rb: Block, cb: Block, s: Complex64) -> Result<CMat4> {
        let nu0 = Self::check_axis(s)?;
        let mut cache = KernelCache::new(&self.kernels);
        let mut k = CMat4::zeros();
        for e in self.entries.iter().filter(|e| e.row / 4 == rb.index() && e.col / 4 == cb.index()) {
            let (nu, f) = self.sample(nu0, e.a, e.b, e.shift, Sampling::Exact);
            let (sig, _) = cache.get(nu)?;
            k[(e.row % 4, e.col % 4)] += e.coef * sig[(e.a, e.b)] * f;
        }
        Ok(k)
    }

    /// N⃗(s), sampled exactly at s + i·shift.
    pub fn n_vector(&self, s: Complex64) -> Result<CVec16> {
        self.n_vector_with(s, Sampling::Exact)
    }

    pub fn n_vector_with(&self, s: Complex64, mode: Sampling) -> Result<CVec16> {
        let nu0 = Self::check_axis(s)?;
        let mut cache = KernelCache::new(&self.kernels);
        let mut n = CVec16::zeros();
        for t in &self.noise {
            let (nu, f) = self.sample(nu0, t.a, t.b, t.shift, mode);
            let (_, noi) = cache.get(nu)?;
            n[t.row] += noi[(t.a, t.b)] * (t.coef * f);
        }
        Ok(n)
    }

    /// Entries of N for one component, at a row-specific s.
    pub fn n_component(&self, row: usize, s: Complex64, mode: Sampling) -> Result<Complex64> {
        let nu0 = Self::check_axis(s)?;
        let mut cache = KernelCache::new(&self.kernels);
        let mut acc = c(0.0, 0.0);
        for t in self.noise.iter().filter(|t| t.row == row) {
            let (nu, f) = self.sample(nu0, t.a, t.b, t.shift, mode);
            let (_, noi) = cache.get(nu)?;
            acc += noi[(t.a, t.b)] * (t.coef * f);
        }
        Ok(acc)
    }

    /// s − iΩ + K(s)
    pub fn g_inv(&self, s: Complex64) -> Result<CMat16> {
        let mut m = self.k_matrix(s)?;
        for i in 0..16 {
            m[(i, i)] += s - I * self.omega[i];
        }
        Ok(m)
    }

    pub fn bare_pole(&self, row: usize) -> Complex64 {
        c(0.0, self.omega[row])
    }
}

pub fn correlator_blocks(model: &SpectralModel, params: &ModeParams) -> Result<BlockSystem> {
    params.validate()?;
    let w = params.omegas();
    let mut omega = [0.0; 16];
    for blk in Block::ALL {
        for cf in 0..2 {
            for d in 0..2 {
                omega[idx(blk, cf, d)] = blk.bare_frequency(w, cf, d);
            }
        }
    }
    Ok(BlockSystem { kernels: Kernels::new(model, params), params: *params, omega, entries: k_entries(w), noise: n_terms(w) })
}

/// One of the 16 correlator QNMs.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrMode {
    pub block: Block,
    /// Position 2c+d of the component this mode reduces to at zero coupling.
    pub slot: usize,
    pub labels: (ModeLabel, ModeLabel),
    pub pole: Complex64,
    pub bare: Complex64,
    pub residue: CMat4,
}

#[derive(Debug, Clone)]
pub struct CorrelatorSpectrum {
    pub regime: Regime,
    /// Indexed [block][slot].
    pub blocks: [[CorrMode; 4]; 4],
    /// Largest |residue| of the dropped cross-block terms at the fast poles.
    pub cross_block: f64,
    pub diagnostics: Vec<String>,
}

impl CorrelatorSpectrum {
    pub fn block(&self, b: Block) -> &[CorrMode; 4] {
        &self.blocks[b.index()]
    }

    pub fn modes(&self) -> impl Iterator<Item = &CorrMode> {
        self.blocks.iter().flat_map(|b| b.iter())
    }

    /// Σ 𝔾 e^{st} for one block.
    pub fn greens(&self, b: Block, t: f64) -> CMat4 {
        self.blocks[b.index()].iter().map(|m| m.residue * (m.pole * t).exp()).sum()
    }
}

fn unit(i: usize, j: usize) -> CMat4 {
    let mut m = CMat4::zeros();
    m[(i, j)] = c(1.0, 0.0);
    m
}

fn kron2(a: &CMat2, b: &CMat2) -> CMat4 {
    a.kronecker(b)
}

/// Correlator QNMs of every block; `onept` supplies the labels and the
/// pole-sum targets used to order eigenvalues.
pub fn correlator_spectrum(sys: &BlockSystem, onept: &OnePointSpectrum, regime: Regime) -> Result<CorrelatorSpectrum> {
    if onept.regime != regime {
        return Err(MixError::RegimeMismatch(format!("one-point spectrum is {}, requested {}", onept.regime.name(), regime.name())));
    }
    let results: Vec<Result<([CorrMode; 4], Vec<String>)>> = Block::ALL
        .par_iter()
        .map(|&blk| match regime {
            Regime::NonDegenerate => non_degenerate_block(sys, blk).map(|m| (m, Vec::new())),
            Regime::NearlyDegenerate => nearly_degenerate_block(sys, onept, blk),
            Regime::HierarchyG1sq | Regime::HierarchyG1g2 => Ok((hierarchy_block(sys, onept, blk), Vec::new())),
        })
        .collect();
    let mut blocks = Vec::with_capacity(4);
    let mut diagnostics = Vec::new();
    for r in results {
        let (m, d) = r?;
        blocks.push(m);
        diagnostics.extend(d);
    }
    let blocks: [[CorrMode; 4]; 4] = blocks.try_into().expect("four blocks");
    let cross_block = cross_block_residue(sys)?;
    Ok(CorrelatorSpectrum { regime, blocks, cross_block, diagnostics })
}

fn mode_meta(sys: &BlockSystem, blk: Block, slot: usize) -> (Complex64, (ModeLabel, ModeLabel)) {
    let row = 4 * blk.index() + slot;
    (sys.bare_pole(row), blk.labels(slot / 2, slot % 2))
}

/// First-order residues e_j e_jᵀ − Σ_k K_kj/(s_j−s_k) e_k e_jᵀ − Σ_k K_jk/(s_j−s_k) e_j e_kᵀ.
fn non_degenerate_block(sys: &BlockSystem, blk: Block) -> Result<[CorrMode; 4]> {
    let base = 4 * blk.index();
    let s0: Vec<Complex64> = (0..4).map(|j| sys.bare_pole(base + j)).collect();
    let mut out = Vec::with_capacity(4);
    for j in 0..4 {
        let k = sys.k_block(blk, |_| s0[j].im, Sampling::Exact)?;
        let mut r = unit(j, j);
        for m in 0..4 {
            if m == j || (s0[j] - s0[m]).norm() == 0.0 {
                continue;
            }
            let den = s0[j] - s0[m];
            r -= unit(m, j) * (k[(m, j)] / den);
            r -= unit(j, m) * (k[(j, m)] / den);
        }
        let (bare, labels) = mode_meta(sys, blk, j);
        out.push(CorrMode { block: blk, slot: j, labels, pole: s0[j] - k[(j, j)], bare, residue: r });
    }
    Ok(out.try_into().expect("four modes"))
}

/// Centre of a block in the frequency-collapsed picture.
fn block_centre(blk: Block, wb: f64) -> f64 {
    match blk {
        Block::Ak | Block::Amk => 0.0,
        Block::Bk => -2.0 * wb,
        Block::Bstar => 2.0 * wb,
    }
}

/// The frequency-collapsed block generator M = iΩ − K.
pub fn collapsed_generator(sys: &BlockSystem, blk: Block) -> Result<CMat4> {
    let wb = sys.params.omega_bar();
    let centre = block_centre(blk, wb);
    let k = sys.k_block(blk, |_| centre, Sampling::MeanFrequency)?;
    let mut m = -k;
    for j in 0..4 {
        m[(j, j)] += I * sys.omega[4 * blk.index() + j];
    }
    Ok(m)
}

fn pole_targets(onept: &OnePointSpectrum, blk: Block) -> [Complex64; 4] {
    let mut t = [c(0.0, 0.0); 4];
    for (slot, v) in t.iter_mut().enumerate() {
        let (p, q) = blk.labels(slot / 2, slot % 2);
        *v = onept.mode(p).pole + onept.mode(q).pole;
    }
    t
}

/// Permutation of `vals` minimising the summed distance to `targets`.
fn best_assignment(vals: &[Complex64; 4], targets: &[Complex64; 4]) -> [usize; 4] {
    let mut best = ([0, 1, 2, 3], f64::INFINITY);
    let mut perm = [0usize, 1, 2, 3];
    permute(&mut perm, 0, &mut |p| {
        let cost: f64 = (0..4).map(|i| (vals[p[i]] - targets[i]).norm()).sum();
        if cost < best.1 {
            best = (*p, cost);
        }
    });
    best.0
}

fn permute(p: &mut [usize; 4], k: usize, f: &mut impl FnMut(&[usize; 4])) {
    if k == 4 {
        f(p);
        return;
    }
    for i in k..4 {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

/// Partial trace over the second factor of a 2⊗2 operator.
pub fn partial_trace_second(m: &CMat4) -> CMat2 {
    CMat2::from_fn(|i, j| m[(2 * i, 2 * j)] + m[(2 * i + 1, 2 * j + 1)])
}

fn nearly_degenerate_block(sys: &BlockSystem, onept: &OnePointSpectrum, blk: Block) -> Result<([CorrMode; 4], Vec<String>)> {
    collapsed_block(sys, blk, pole_targets(onept, blk))
}

/// Eigenvalues and Frobenius covariants of the collapsed generator, slots
/// ordered by closeness to `targets`.
pub fn collapsed_block(sys: &BlockSystem, blk: Block, targets: [Complex64; 4]) -> Result<([CorrMode; 4], Vec<String>)> {
    let m = collapsed_generator(sys, blk)?;
    let ev = m
        .schur()
        .eigenvalues()
        .ok_or_else(|| MixError::Numeric(format!("Schur decomposition of {} did not triangularise", blk.name())))?;
    let vals = [ev[0], ev[1], ev[2], ev[3]];
    let perm = best_assignment(&vals, &targets);
    let lam: [Complex64; 4] = [vals[perm[0]], vals[perm[1]], vals[perm[2]], vals[perm[3]]];
    let scale = lam.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut diag = Vec::new();

    // Groups of coincident eigenvalues share one Frobenius covariant.
    let tol = 1e-9 * scale;
    let covariant = |group: &[usize]| -> CMat4 {
        let lc = group.iter().map(|&i| lam[i]).sum::<Complex64>() / group.len() as f64;
        let mut p = CMat4::identity();
        for j in 0..4 {
            if group.contains(&j) {
                continue;
            }
            let mut f = m;
            for d in 0..4 {
                f[(d, d)] -= lam[j];
            }
            p = p * f / (lc - lam[j]);
        }
        p
    };
    let mut res = [CMat4::zeros(); 4];
    let paired = matches!(blk, Block::Bk | Block::Bstar) && (lam[1] - lam[2]).norm() <= tol;
    if paired {
        let r0 = covariant(&[0]);
        let r3 = covariant(&[3]);
        let pair = covariant(&[1, 2]);
        // P_{cc} = p_c ⊗ p_c, so each single-field projector is a partial trace.
        let p1 = partial_trace_second(&r0);
        let p2 = partial_trace_second(&r3);
        let r1 = kron2(&p1, &p2);
        let r2 = kron2(&p2, &p1);
        let split = (pair - r1 - r2).norm();
        if split > 1e-8 * pair.norm().max(1.0) {
            diag.push(format!("{}: coincident-pole projector differs from its split by {split:.3e}", blk.name()));
        }
        res = [r0, r1, r2, r3];
    } else {
        for (i, r) in res.iter_mut().enumerate() {
            *r = covariant(&[i]);
        }
    }
    let mut out = Vec::with_capacity(4);
    for slot in 0..4 {
        let (bare, labels) = mode_meta(sys, blk, slot);
        out.push(CorrMode { block: blk, slot, labels, pole: lam[slot], bare, residue: res[slot] });
    }
    Ok((out.try_into().expect("four modes"), diag))
}

/// Hierarchy branch: poles are one-point sums and residues stay diagonal.
fn hierarchy_block(sys: &BlockSystem, onept: &OnePointSpectrum, blk: Block) -> [CorrMode; 4] {
    let targets = pole_targets(onept, blk);
    let v: Vec<CorrMode> = (0..4)
        .map(|slot| {
            let (bare, labels) = mode_meta(sys, blk, slot);
            CorrMode { block: blk, slot, labels, pole: targets[slot], bare, residue: unit(slot, slot) }
        })
        .collect();
    v.try_into().expect("four modes")
}

/// max |Res_{s=q} G_A K_AB G_B K_BA G_A| over fast B/B* poles, with bare G's.
pub fn cross_block_residue(sys: &BlockSystem) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for fast in [Block::Bk, Block::Bstar] {
        for q in 0..4 {
            let sq = sys.bare_pole(4 * fast.index() + q);
            let kab = sys.k_cross(Block::Ak, fast, sq)?;
            let kba = sys.k_cross(fast, Block::Ak, sq)?;
            for i in 0..4 {
                for m in 0..4 {
                    let pi = sys.bare_pole(i);
                    let pm = sys.bare_pole(m);
                    let v = kab[(i, q)] * kba[(q, m)] / ((sq - pi) * (sq - pm));
                    worst = worst.max(v.norm());
                }
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KroneckerReport {
    /// max_i |s_i − (s_𝒜 + s_ℬ)|
    pub pole_deviation: f64,
    /// max entrywise residue deviation relative to the residue norm
    pub residue_deviation: f64,
    pub passed: bool,
    /// Set when the regime only supports a report, not a pass criterion.
    pub informational: bool,
}

/// Compares each block residue with the product of one-point residues. In the
/// non-degenerate branch the residues are first-order in Σ, so the product is
/// truncated the same way: (e₁+δ₁)⊗(e₂+δ₂) → e₁⊗e₂ + δ₁⊗e₂ + e₁⊗δ₂.
pub fn kronecker_check(spec: &CorrelatorSpectrum, onept: &OnePointSpectrum) -> KroneckerReport {
    let mut pole_dev: f64 = 0.0;
    let mut res_dev: f64 = 0.0;
    for m in spec.modes() {
        let (p, q) = m.labels;
        let (gp, gq) = (onept.mode(p), onept.mode(q));
        pole_dev = pole_dev.max((m.pole - (gp.pole + gq.pole)).norm());
        let expect = match spec.regime {
            Regime::NonDegenerate => {
                let ep = lead(p);
                let eq = lead(q);
                kron2(&ep, &eq) + kron2(&(gp.residue - ep), &eq) + kron2(&ep, &(gq.residue - eq))
            }
            _ => kron2(&gp.residue, &gq.residue),
        };
        let nrm = m.residue.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let dev = (m.residue - expect).iter().map(|z| z.norm()).fold(0.0, f64::max) / nrm;
        res_dev = res_dev.max(dev);
    }
    let informational = spec.regime.is_hierarchy();
    let passed = informational || (pole_dev <= 1e-10 && res_dev <= 1e-10);
    KroneckerReport { pole_deviation: pole_dev, residue_deviation: res_dev, passed, informational }
}

fn lead(l: ModeLabel) -> CMat2 {
    let mut m = CMat2::zeros();
    m[(l.field(), l.field())] = c(1.0, 0.0);
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude_qnm::amplitude_spectrum;
    use crate::onepoint_qnm::onepoint_spectrum;
    use crate::spectral::{fixtures, Shape};

    fn spectra(model: &SpectralModel, p: &ModeParams, r: Regime) -> (BlockSystem, OnePointSpectrum, CorrelatorSpectrum) {
        let amp = amplitude_spectrum(model, p, r).unwrap();
        let one = onepoint_spectrum(&amp, p);
        let sys = correlator_blocks(model, p).unwrap();
        let spec = correlator_spectrum(&sys, &one, r).unwrap();
        (sys, one, spec)
    }

    #[test]
    fn each_row_has_sixteen_terms_and_b_rows_four_columns() {
        let sys = correlator_blocks(&fixtures::bath(), &fixtures::p0().1).unwrap();
        assert_eq!(sys.entries.len(), 16 * 8);
        let k = sys.k_matrix(c(0.0, 0.0)).unwrap();
        // B_k row (1,2): B_12, B_22?, … exactly the listed pattern of columns.
        let r = idx(Block::Bk, 0, 1);
        let cols: Vec<usize> = (0..16).filter(|&j| k[(r, j)].norm() > 0.0).collect();
        let mut expect = vec![
            idx(Block::Bk, 0, 1),
            idx(Block::Bk, 1, 1),
            idx(Block::Amk, 0, 1),
            idx(Block::Amk, 1, 1),
            idx(Block::Bk, 0, 0),
            idx(Block::Ak, 0, 0),
            idx(Block::Ak, 1, 0),
        ];
        expect.sort();
        expect.dedup();
        assert_eq!(cols, expect);
    }

    #[test]
    fn hand_evaluated_entry() {
        let (m, p) = fixtures::p0();
        let sys = correlator_blocks(&m, &p).unwrap();
        let k = sys.k_matrix(c(0.0, 0.0)).unwrap();
        let w = p.omegas();
        let s12 = Kernels::new(&m, &p).sigma(-w[0]).unwrap()[(0, 1)] / (4.0 * w[0] * w[1]).sqrt();
        assert!((k[(idx(Block::Ak, 0, 0), idx(Block::Ak, 0, 1))] - I * s12).norm() < 1e-12);
    }

    #[test]
    fn zero_coupling_is_bare() {
        let m = SpectralModel::single([0.0, 0.0], Shape::OhmicGaussian, 10.0).unwrap();
        let p = fixtures::p0().1;
        let (sys, one, spec) = spectra(&m, &p, Regime::NonDegenerate);
        assert_eq!(sys.k_matrix(c(0.0, 0.3)).unwrap(), CMat16::zeros());
        for md in spec.modes() {
            assert_eq!(md.pole, md.bare);
            assert_eq!(md.residue, unit(md.slot, md.slot));
        }
        let rep = kronecker_check(&spec, &one);
        // The 𝔽 map of a free residue rounds at the last bit.
        assert!(rep.pole_deviation == 0.0 && rep.residue_deviation <= 4.0 * f64::EPSILON, "{rep:?}");
    }

    #[test]
    fn p0_population_pole() {
        let (m, p) = fixtures::p0();
        let (_, _, spec) = spectra(&m, &p, Regime::NonDegenerate);
        let s = spec.block(Block::Ak)[0].pole;
        assert!((s.re + 0.00495025).abs() < 5e-9 && s.im.abs() < 1e-15, "{s}");
    }

    #[test]
    fn kronecker_and_pole_sums() {
        for (m, p, r) in [(fixtures::p0().0, fixtures::p0().1, Regime::NonDegenerate), (fixtures::p1().0, fixtures::p1().1, Regime::NearlyDegenerate)] {
            let (_, one, spec) = spectra(&m, &p, r);
            let rep = kronecker_check(&spec, &one);
            assert!(rep.passed, "{r:?}: {rep:?}");
            assert!(rep.pole_deviation < 1e-12);
            assert!(spec.diagnostics.is_empty(), "{:?}", spec.diagnostics);
        }
    }

    #[test]
    fn block_symmetries_and_closure() {
        for (m, p, r) in [(fixtures::p0().0, fixtures::p0().1, Regime::NonDegenerate), (fixtures::p1().0, fixtures::p1().1, Regime::NearlyDegenerate)] {
            let (_, _, spec) = spectra(&m, &p, r);
            for (a, b) in spec.block(Block::Ak).iter().zip(spec.block(Block::Amk)) {
                assert_eq!(a.pole, b.pole);
                assert_eq!(a.residue, b.residue);
            }
            for (a, b) in spec.block(Block::Bk).iter().zip(spec.block(Block::Bstar)) {
                assert!((a.pole.conj() - b.pole).norm() < 1e-12);
                assert!((a.residue.conjugate() - b.residue).norm() < 1e-12);
            }
            for blk in Block::ALL {
                let sum: CMat4 = spec.block(blk).iter().map(|md| md.residue).sum();
                let diag = (0..4).map(|i| (sum[(i, i)] - c(1.0, 0.0)).norm()).fold(0.0, f64::max);
                let off = (sum - CMat4::from_diagonal(&sum.diagonal())).norm();
                assert!(diag < 1e-8, "{r:?} {blk:?}");
                // First-order residues sample K at different bare poles, so
                // the off-diagonal remainder is O(g²); projectors close exactly.
                let bound = if r == Regime::NonDegenerate { 0.1 * 0.1 } else { 1e-12 };
                assert!(off < bound, "{r:?} {blk:?} {off}");
            }
        }
    }

    #[test]
    fn regime_mismatch_is_an_error() {
        let (m, p) = fixtures::p0();
        let amp = amplitude_spectrum(&m, &p, Regime::NonDegenerate).unwrap();
        let one = onepoint_spectrum(&amp, &p);
        let sys = correlator_blocks(&m, &p).unwrap();
        assert!(matches!(correlator_spectrum(&sys, &one, Regime::NearlyDegenerate), Err(MixError::RegimeMismatch(_))));
    }
}
