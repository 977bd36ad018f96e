use mixqnm::amplitude_qnm::{amplitude_spectrum, bare_poles, Regime};
use mixqnm::correlator_qnm::{kronecker_check, CVec16};
use mixqnm::evolution::{vacuum_state, KeepOrder, Solver};
use mixqnm::kernels::fdr_residual;
use mixqnm::onepoint_qnm::onepoint_spectrum;
use mixqnm::spectral::{fixtures, validate_symmetries, Channel, ModeParams, Shape, SpectralModel};
use mixqnm::c;
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = Shape> {
    prop_oneof![Just(Shape::OhmicGaussian), Just(Shape::OhmicLorentzian)]
}

fn channel() -> impl Strategy<Value = Channel> {
    (-0.1f64..0.1, -0.1f64..0.1, shape(), 1.0f64..20.0).prop_map(|(g1, g2, s, l)| Channel::new([g1, g2], s, l))
}

fn model() -> impl Strategy<Value = SpectralModel> {
    prop::collection::vec(channel(), 1..3).prop_map(|chs| SpectralModel::new(chs).unwrap())
}

fn weak_model() -> impl Strategy<Value = SpectralModel> {
    (0.01f64..0.1, 0.01f64..0.1, shape(), 3.0f64..15.0).prop_map(|(g1, g2, s, l)| SpectralModel::single([g1, g2], s, l).unwrap())
}

/// Hermitian A blocks at or above the vacuum, with a small pair correlator.
fn initial() -> impl Strategy<Value = CVec16> {
    (1.0f64..3.0, 1.0f64..3.0, 0.0f64..0.4, -0.4f64..0.4, -0.2f64..0.2, -0.2f64..0.2).prop_map(|(a11, a22, re, im, bre, bim)| {
        let mut d = vacuum_state();
        let z = c(re, im) * ((a11 - 1.0) * (a22 - 1.0)).sqrt().min(1.0);
        for b in [0, 4] {
            d[b] = c(a11, 0.0);
            d[b + 1] = z;
            d[b + 2] = z.conj();
            d[b + 3] = c(a22, 0.0);
        }
        d[8] = c(bre, bim);
        d[12] = c(bre, -bim);
        d
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn densities_are_odd_symmetric_and_psd(m in model()) {
        let grid: Vec<f64> = (1..=60).map(|i| 0.2 * i as f64).collect();
        let r = validate_symmetries(&m, &grid);
        prop_assert!(r.passed, "{:?}", r);
    }

    #[test]
    fn fdr_holds_everywhere(m in model(), w in 0.01f64..25.0, beta in 0.05f64..10.0) {
        let p = ModeParams::new([1.0, 1.2], 0.0, beta).unwrap();
        let scale = (m.rho_matrix(w) * 0.5).abs().max().max(f64::MIN_POSITIVE);
        prop_assert!(fdr_residual(&m, &p, w).unwrap() <= 1e-12 * scale);
    }

    #[test]
    fn free_poles_are_bare(m1 in 0.2f64..2.0, m2 in 0.2f64..2.0, k in 0.0f64..1.5) {
        let p = ModeParams::new([m1, m2], k, 1.0).unwrap();
        let amp = amplitude_spectrum(&fixtures::bath().scaled(0.0), &p, Regime::NonDegenerate).unwrap();
        for (s, b) in amp.poles().iter().zip(bare_poles(&p)) {
            prop_assert!((s - b).norm() <= 1e-14);
        }
    }

    #[test]
    fn pole_sums_hold(m in weak_model(), m2 in 1.1f64..1.8, beta in 0.2f64..5.0) {
        let p = ModeParams::new([1.0, m2], 0.0, beta).unwrap();
        let s = Solver::new(&m, &p, Some(Regime::NonDegenerate)).unwrap();
        let k = kronecker_check(&s.corr, &s.onept);
        prop_assert!(k.pole_deviation <= 1e-10 && k.residue_deviation <= 1e-10, "{:?}", k);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn trajectories_stay_hermitian_and_split(m in weak_model(), m2 in prop_oneof![1.0f64..1.0008, 1.1f64..1.6], beta in 0.2f64..5.0, d0 in initial()) {
        let p = ModeParams::new([1.0, m2], 0.0, beta).unwrap();
        let s = Solver::new(&m, &p, None).unwrap();
        let t_end = s.t_max_auto();
        let grid: Vec<f64> = (0..=60).map(|j| t_end * j as f64 / 60.0).collect();
        for keep in [KeepOrder::Leading, KeepOrder::G2Partial] {
            let tr = s.evolve([0.0; 2], [0.0; 2], &d0, &grid, keep).unwrap();
            for i in 0..grid.len() {
                let (a, v, e) = (tr.a[i], tr.a_vac[i], tr.a_exc[i]);
                let scale = a.iter().map(|z| z.norm()).fold(1.0, f64::max);
                prop_assert!((a[1] - a[2].conj()).norm() <= 1e-10 * scale);
                prop_assert!(a[0].im.abs() <= 1e-10 * scale && a[3].im.abs() <= 1e-10 * scale);
                for k in 0..4 {
                    prop_assert!((v[k] + e[k] - a[k]).norm() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn closure_at_zero(m in weak_model(), m2 in prop_oneof![1.0f64..1.0008, 1.1f64..1.6], d0 in initial()) {
        let p = ModeParams::new([1.0, m2], 0.0, 1.0).unwrap();
        let s = Solver::new(&m, &p, None).unwrap();
        let tr = s.evolve([0.0; 2], [0.0; 2], &d0, &[0.0], KeepOrder::Leading).unwrap();
        for k in 0..4 {
            prop_assert!((tr.a[0][k] - d0[k]).norm() <= 1e-10);
            prop_assert!((tr.amk[0][k] - d0[4 + k]).norm() <= 1e-10);
            prop_assert!((tr.b[0][k] - d0[8 + k]).norm() <= 1e-10);
        }
    }

    #[test]
    fn non_degenerate_populations_thermalize(m in weak_model(), m2 in 1.15f64..1.6, beta in 0.3f64..4.0) {
        let p = ModeParams::new([1.0, m2], 0.0, beta).unwrap();
        let s = Solver::new(&m, &p, Some(Regime::NonDegenerate)).unwrap();
        let t = 60.0 / s.amp.gamma[0].min(s.amp.gamma[1]);
        let tr = s.evolve([0.0; 2], [0.0; 2], &vacuum_state(), &[0.0, t], KeepOrder::Leading).unwrap();
        for (cc, comp) in [(0, 0), (1, 3)] {
            let n = 1.0 / ((beta * p.omega(cc)).exp() - 1.0);
            prop_assert!(((tr.a[1][comp].re - 1.0) / 2.0 - n).abs() <= 1e-6);
        }
    }
}

#[test]
fn discarded_orders_scale_as_g_squared() {
    let (m, p) = fixtures::p0();
    let rel = |g: f64| {
        let amp = amplitude_spectrum(&m.scaled(g / 0.1), &p, Regime::NonDegenerate).unwrap();
        onepoint_spectrum(&amp, &p).max_discarded(None)
    };
    let (a, b) = (rel(0.1), rel(0.05));
    assert!(a > 0.0 && a < 0.1, "{a}");
    let ratio = a / b;
    assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
}
