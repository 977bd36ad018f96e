//! Adaptive Gauss–Kronrod (7/15) quadrature on finite and semi-infinite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::MixError;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd Kronrod nodes 1, 3, 5 and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Absolute / relative tolerance pair; an interval is accepted once its error
/// estimate is below `max(abs, rel·|I|)`.
#[derive(Debug, Clone, Copy)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tol {
    fn default() -> Self {
        Tol { abs: 1e-12, rel: 1e-10, max_intervals: 4000 }
    }
}

impl Tol {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tol { abs, rel, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    let value = rk * h;
    let err = ((rk - rg) * h).abs();
    (value, err)
}

/// Adaptive G7K15 on a finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tol) -> Result<QuadResult, MixError> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evals: 0 });
    }
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, error: e });
    let mut total = v;
    let mut total_err = e;
    let mut evals = 15;
    loop {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(MixError::Quadrature { estimate: total_err, value: total });
        }
        if total_err <= tol.abs.max(tol.rel * total.abs()) {
            break;
        }
        if heap.len() >= tol.max_intervals {
            return Err(MixError::Quadrature { estimate: total_err, value: total });
        }
        let seg = heap.pop().expect("non-empty heap");
        let m = 0.5 * (seg.a + seg.b);
        if m <= seg.a || m >= seg.b {
            // Interval can no longer be split in floating point.
            return Err(MixError::Quadrature { estimate: total_err, value: total });
        }
        let (v1, e1) = gk15(&f, seg.a, m);
        let (v2, e2) = gk15(&f, m, seg.b);
        evals += 30;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment { a: seg.a, b: m, value: v1, error: e1 });
        heap.push(Segment { a: m, b: seg.b, value: v2, error: e2 });
    }
    // Re-sum to shed accumulated rounding from the running updates.
    let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Ok(QuadResult { value, error, evals })
}

/// Adaptive integral over `[a, ∞)` via the map `x = a + t/(1−t)`.
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: F, a: f64, tol: Tol) -> Result<QuadResult, MixError> {
    integrate_to_inf_scaled(f, a, 1.0, tol)
}

/// As [`integrate_to_inf`] with the map `x = a + L·t/(1−t)`; `L` should be the
/// decay length of the integrand.
pub fn integrate_to_inf_scaled<F: Fn(f64) -> f64>(f: F, a: f64, scale: f64, tol: Tol) -> Result<QuadResult, MixError> {
    let g = |t: f64| {
        let u = 1.0 - t;
        let x = a + scale * t / u;
        let v = scale * f(x) / (u * u);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, tol)
}

/// Oscillating factor for [`fourier_half_line`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Sin,
    Cos,
}

/// ∫₀^∞ f(k)·sin(kt) or cos(kt) dk for a slowly varying, decaying `f`.
///
/// The half line is cut into half-periods π/t; the alternating partial sums are
/// accelerated with Wynn's ε-algorithm once the panels stop shrinking quickly.
pub fn fourier_half_line<F: Fn(f64) -> f64>(f: F, t: f64, trig: Trig, scale: f64, tol: Tol) -> Result<QuadResult, MixError> {
    if t == 0.0 {
        return match trig {
            Trig::Sin => Ok(QuadResult { value: 0.0, error: 0.0, evals: 0 }),
            Trig::Cos => integrate_to_inf_scaled(f, 0.0, scale, tol),
        };
    }
    let osc = |k: f64| match trig {
        Trig::Sin => f(k) * (k * t).sin(),
        Trig::Cos => f(k) * (k * t).cos(),
    };
    let period = std::f64::consts::PI / t.abs();
    let panel_tol = Tol { abs: tol.abs * 0.1, rel: tol.rel * 0.1, max_intervals: tol.max_intervals };
    let mut partial = Vec::with_capacity(64);
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut evals = 0;
    let mut small_run = 0;
    let max_panels = 20_000;
    for j in 0..max_panels {
        let a = j as f64 * period;
        let r = integrate(osc, a, a + period, panel_tol)?;
        sum += r.value;
        err += r.error;
        evals += r.evals;
        partial.push(sum);
        let thresh = tol.abs.max(tol.rel * sum.abs());
        if r.value.abs() < 0.01 * thresh {
            small_run += 1;
            if small_run >= 3 {
                return Ok(QuadResult { value: sum, error: err + r.value.abs(), evals });
            }
        } else {
            small_run = 0;
        }
        if j >= 12 && j % 4 == 0 {
            let n = partial.len();
            let tail = &partial[n.saturating_sub(24)..];
            if let Some((v, e)) = wynn_epsilon(tail) {
                if e <= thresh {
                    return Ok(QuadResult { value: v, error: err + e, evals });
                }
            }
        }
    }
    let n = partial.len();
    let estimate = wynn_epsilon(&partial[n.saturating_sub(24)..]).map_or(f64::INFINITY, |(_, e)| e);
    Err(MixError::Quadrature { value: sum, estimate })
}

/// Wynn ε-extrapolation of a sequence of partial sums. Each even column of the
/// table yields a sequence of estimates; the column whose last two entries agree
/// best supplies the value, and their spread is the error estimate.
fn wynn_epsilon(s: &[f64]) -> Option<(f64, f64)> {
    let n = s.len();
    if n < 5 {
        return None;
    }
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = s.to_vec();
    let mut best: Option<(f64, f64)> = None;
    let mut col = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let d = cur[i + 1] - cur[i];
            if d == 0.0 {
                return Some((cur[i + 1], 0.0));
            }
            next.push(prev[i + 1] + 1.0 / d);
        }
        prev = cur;
        cur = next;
        col += 1;
        if col % 2 == 0 && cur.len() >= 2 {
            let m = cur.len();
            let (v, w) = (cur[m - 1], cur[m - 2]);
            if v.is_finite() && w.is_finite() {
                let e = (v - w).abs();
                if best.map_or(true, |(_, be)| e < be) {
                    best = Some((v, e));
                }
            }
        }
    }
    best
}

/// Sum of independent pieces, propagating error estimates.
pub fn combine(parts: &[QuadResult]) -> QuadResult {
    parts.iter().fold(QuadResult { value: 0.0, error: 0.0, evals: 0 }, |acc, p| QuadResult {
        value: acc.value + p.value,
        error: acc.error + p.error,
        evals: acc.evals + p.evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, Tol::default()).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn gaussian_half_line() {
        let r = integrate_to_inf(|x| (-x * x).exp(), 0.0, Tol::default()).unwrap();
        assert!((r.value - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn algebraic_tail() {
        // ∫_1^∞ x^-3 dx = 1/2
        let r = integrate_to_inf(|x| x.powi(-3), 1.0, Tol::default()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-11);
    }

    #[test]
    fn endpoint_singularity_converges() {
        // ∫_0^1 x^-1/2 dx = 2
        let r = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, Tol::new(1e-10, 1e-10)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn fourier_transforms_of_lorentzians() {
        let half_pi = 0.5 * std::f64::consts::PI;
        for t in [0.05, 0.5, 2.0, 7.0] {
            let c = fourier_half_line(|k| 1.0 / (1.0 + k * k), t, Trig::Cos, 1.0, Tol::default()).unwrap();
            assert!((c.value - half_pi * (-t).exp()).abs() < 1e-9, "cos t={t}: {}", c.value);
            let s = fourier_half_line(|k| k / (1.0 + k * k), t, Trig::Sin, 1.0, Tol::default()).unwrap();
            assert!((s.value - half_pi * (-t).exp()).abs() < 1e-8, "sin t={t}: {}", s.value);
        }
    }

    #[test]
    fn nonconvergence_reports_estimate() {
        let tol = Tol { abs: 1e-15, rel: 1e-15, max_intervals: 8 };
        match integrate(|x| (50.0 * x).sin() / x.sqrt(), 1e-9, 10.0, tol) {
            Err(MixError::Quadrature { estimate, .. }) => assert!(estimate > 0.0),
            other => panic!("expected quadrature error, got {other:?}"),
        }
    }
}
