//! Invariant suite behind `validate`: fast structural checks on one or more
//! parameter sets.

use mixqnm::amplitude_qnm::{amplitude_spectrum, bare_poles, Regime};
use mixqnm::correlator_qnm::{correlator_blocks, correlator_spectrum, idx, kronecker_check, Block};
use mixqnm::evolution::{observables, vacuum_state, KeepOrder, Solver};
use mixqnm::kernels::fdr_residual;
use mixqnm::onepoint_qnm::onepoint_spectrum;
use mixqnm::reductions::ww_reduce;
use mixqnm::spectral::{fixtures, validate_symmetries, ModeParams, SpectralModel};
use mixqnm::{c, Result};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub fixture: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl SuiteReport {
    fn push(&mut self, fixture: &str, name: &str, value: f64, tolerance: f64) {
        let passed = value.is_finite() && value <= tolerance;
        self.checks.push(Check { name: name.into(), fixture: fixture.into(), value, tolerance, passed });
    }

    fn finish(mut self) -> Self {
        self.passed = self.checks.iter().all(|c| c.passed);
        self
    }
}

/// Checks that apply to any parameter set.
pub fn run_on(report: &mut SuiteReport, label: &str, model: &SpectralModel, params: &ModeParams, regime: Regime) -> Result<()> {
    let g2 = model.max_coupling().powi(2);
    let grid: Vec<f64> = (1..=40).map(|i| 0.25 * i as f64).collect();
    let sym = validate_symmetries(model, &grid);
    report.push(label, "rho-symmetries", sym.oddness.max(sym.symmetry).max(sym.psd), 1e-14);

    let mut fdr: f64 = 0.0;
    for w in [0.3, params.omega(0), params.omega(1), 2.5, 7.0] {
        fdr = fdr.max(fdr_residual(model, params, w)?);
    }
    let scale = model.rho_matrix(params.omega(0)).abs().max().max(f64::MIN_POSITIVE);
    report.push(label, "fdr-residual", fdr / scale, 1e-12);

    let free = model.scaled(0.0);
    let amp0 = amplitude_spectrum(&free, params, Regime::NonDegenerate)?;
    let bare = bare_poles(params);
    let dev = amp0.poles().iter().zip(&bare).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    report.push(label, "bare-limit-poles", dev, 1e-14);

    let solver = Solver::new(model, params, Some(regime))?;
    if !regime.is_hierarchy() {
        let k = kronecker_check(&solver.corr, &solver.onept);
        report.push(label, "pole-sum-identity", k.pole_deviation, 1e-10);
    }

    let mut d0 = vacuum_state();
    d0[idx(Block::Ak, 0, 0)] = c(1.6, 0.0);
    d0[idx(Block::Ak, 0, 1)] = c(0.2, 0.1);
    d0[idx(Block::Ak, 1, 0)] = c(0.2, -0.1);
    d0[idx(Block::Bk, 0, 0)] = c(0.05, 0.02);
    d0[idx(Block::Bstar, 0, 0)] = c(0.05, -0.02);
    let tr = solver.evolve([0.0; 2], [0.0; 2], &d0, &[0.0], KeepOrder::Leading)?;
    let mut closure: f64 = 0.0;
    for k in 0..4 {
        closure = closure.max((tr.a[0][k] - d0[k]).norm()).max((tr.amk[0][k] - d0[4 + k]).norm()).max((tr.b[0][k] - d0[8 + k]).norm());
    }
    report.push(label, "closure-at-t0", closure, 1e-10);

    let t_end = solver.t_max_auto();
    let tgrid: Vec<f64> = (0..=400).map(|j| t_end * j as f64 / 400.0).collect();
    let tr = solver.evolve([0.0; 2], [0.0; 2], &vacuum_state(), &tgrid, KeepOrder::Leading)?;
    let herm = tr
        .a
        .iter()
        .map(|a| (a[1] - a[2].conj()).norm().max(a[0].im.abs()).max(a[3].im.abs()))
        .fold(0.0, f64::max);
    report.push(label, "hermiticity", herm, 1e-10);
    let obs = observables(&tr)?;
    let min_n = obs.ntilde.iter().flat_map(|n| n.iter()).cloned().fold(f64::INFINITY, f64::min);
    report.push(label, "ntilde-non-negative", (-min_n).max(0.0), 1e-8);

    if regime == Regime::NonDegenerate && params.beta.is_finite() {
        let fv = solver.final_value()?;
        let t_late = 10.0 / solver.amp.gamma[0].min(solver.amp.gamma[1]);
        let late = solver.evolve([0.0; 2], [0.0; 2], &vacuum_state(), &[0.0, t_late], KeepOrder::Leading)?;
        let dev = (0..4).map(|k| (fv.d_inf[k] - late.a[1][k]).norm()).fold(0.0, f64::max);
        report.push(label, "final-value-vs-evolution", dev, 20.0 * g2);
    }
    Ok(())
}

/// The shipped-fixture suite.
pub fn builtin() -> Result<SuiteReport> {
    let mut report = SuiteReport::default();
    let (m0, p0) = fixtures::p0();
    run_on(&mut report, "P0", &m0, &p0, Regime::NonDegenerate)?;
    let (m1, p1) = fixtures::p1();
    run_on(&mut report, "P1", &m1, &p1, Regime::NearlyDegenerate)?;
    let (m2, p2) = fixtures::p2();
    let solver = Solver::new(&m2, &p2, None)?;
    run_on(&mut report, "P2", &m2, &p2, solver.regime)?;

    // Effective Hamiltonian against the degenerate one-point poles.
    let pw = p1.with_masses([1.0, 1.0]).with_beta(f64::INFINITY);
    let ww = ww_reduce(&m1, &pw)?;
    let amp = amplitude_spectrum(&m1, &pw, Regime::NearlyDegenerate)?;
    let one = onepoint_spectrum(&amp, &pw);
    let dev = one
        .modes_a
        .iter()
        .map(|m| ww.eigvals.iter().map(|e| (e - m.pole).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    report.push("P1-degenerate", "ww-eigenvalues", dev, 1e-10);

    // Γ₁/Γ₂ against (g₁/g₂)² within a factor of 3.
    let g = m2.effective_couplings();
    let expect = (g[0] / g[1]).powi(2);
    let ratio = solver.amp.gamma[0] / solver.amp.gamma[1];
    report.push("P2", "hierarchy-rate-ratio", (ratio / expect).ln().abs(), 3f64.ln());

    // Zero-temperature vacuum stays put.
    let blocks = correlator_blocks(&m0.scaled(0.0), &p0)?;
    let amp0 = amplitude_spectrum(&m0.scaled(0.0), &p0, Regime::NonDegenerate)?;
    let corr = correlator_spectrum(&blocks, &onepoint_spectrum(&amp0, &p0), Regime::NonDegenerate)?;
    let dev = corr.modes().map(|m| (m.pole - m.bare).norm()).fold(0.0, f64::max);
    report.push("P0", "bare-limit-correlator-poles", dev, 1e-14);
    Ok(report.finish())
}

/// Suite restricted to one user parameter set.
pub fn for_config(model: &SpectralModel, params: &ModeParams, regime: Regime) -> Result<SuiteReport> {
    let mut report = SuiteReport::default();
    run_on(&mut report, "config", model, params, regime)?;
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_suite_passes() {
        let r = builtin().unwrap();
        for c in &r.checks {
            assert!(c.passed, "{} on {}: {:e} > {:e}", c.name, c.fixture, c.value, c.tolerance);
        }
        assert!(r.passed);
    }
}
