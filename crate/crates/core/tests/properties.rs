use nalgebra::{DVector, SMatrix};
use num_complex::Complex64;
use proptest::prelude::*;
use vscpt::analysis::{
    convolve_detector, dark_population, fit_exponential_decay, fit_gaussian_peaks, momentum_distribution,
    GaussianPeak, MomentumDistribution,
};
use vscpt::basis::{family_members, FamilyKind, MomentumGrid};
use vscpt::dynamics::{coupling_norm, dark_state, family_hamiltonian, SimParams};
use vscpt::liouvillian::{apply_rhs, emission_kernel, FamilyBlockState, PolarizationClass};
use vscpt::scenario::{parse_config, preset, simulate, GridSpec, PresetName, Stage};

fn rabi() -> impl Strategy<Value = f64> {
    1e-3..=1.0f64
}

fn params() -> impl Strategy<Value = SimParams> {
    (rabi(), rabi(), -1.0..1.0f64, 1e-3..2e-2f64)
        .prop_map(|(p, m, delta, wr)| SimParams::new(p, m, delta, wr).unwrap())
}

fn small_grid() -> MomentumGrid {
    MomentumGrid::from_counts(6, 2).unwrap()
}

/// Random positive semidefinite family-diagonal state of unit trace.
fn state() -> impl Strategy<Value = FamilyBlockState> {
    let n = small_grid().len();
    proptest::collection::vec(-1.0..1.0f64, n * (2 * 9 + 2 * 25)).prop_map(move |xs| {
        let mut st = FamilyBlockState::zeros(small_grid());
        let mut it = xs.chunks_exact(2).map(|c| Complex64::new(c[0], c[1]));
        for b in &mut st.lambda {
            let a = SMatrix::<Complex64, 3, 3>::from_fn(|_, _| it.next().unwrap());
            *b = a * a.adjoint();
        }
        for b in &mut st.iw {
            let a = SMatrix::<Complex64, 5, 5>::from_fn(|_, _| it.next().unwrap());
            *b = a * a.adjoint();
        }
        let tr = st.trace();
        for b in &mut st.lambda {
            *b /= Complex64::new(tr, 0.0);
        }
        for b in &mut st.iw {
            *b /= Complex64::new(tr, 0.0);
        }
        st
    })
}

fn combine(a: f64, x: &FamilyBlockState, b: f64, y: &FamilyBlockState) -> FamilyBlockState {
    let mut out = FamilyBlockState::zeros(x.grid);
    out.add_scaled(a, x);
    out.add_scaled(b, y);
    out
}

fn complex(v: DVector<f64>) -> DVector<Complex64> {
    v.map(|x| Complex64::new(x, 0.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonian_is_hermitian(p in params(), q in -8.0..8.0f64) {
        for kind in FamilyKind::ALL {
            let h = family_hamiltonian(&family_members(kind, q), &p).matrix;
            let scale = h.norm().max(1e-300);
            prop_assert!((&h - h.adjoint()).camax() <= 1e-14 * scale);
        }
    }

    #[test]
    fn dark_states_decouple(p in params()) {
        for kind in FamilyKind::ALL {
            let psi = complex(dark_state(kind, &p).unwrap());
            prop_assert!((psi.norm() - 1.0).abs() < 1e-14);
            prop_assert!(coupling_norm(&psi, &family_members(kind, 0.0), &p) < 1e-14);
        }
    }

    #[test]
    fn lambda_dark_state_is_stationary_eigenvector(p in params()) {
        let h = family_hamiltonian(&family_members(FamilyKind::Lambda, 0.0), &p).matrix;
        let psi = complex(dark_state(FamilyKind::Lambda, &p).unwrap());
        let residual = (&h * &psi - &psi * Complex64::new(p.omega_r, 0.0)).norm();
        prop_assert!(residual < 1e-15);
    }

    #[test]
    fn iw_dark_state_is_not_kinetic_eigenvector(om in rabi(), wr in 1e-3..2e-2f64) {
        let p = SimParams::new(om, om, 0.0, wr).unwrap();
        let h = family_hamiltonian(&family_members(FamilyKind::InvertedW, 0.0), &p).matrix;
        let psi = complex(dark_state(FamilyKind::InvertedW, &p).unwrap());
        let hpsi = &h * &psi;
        let e = psi.dotc(&hpsi);
        let residual = (hpsi - &psi * e).norm();
        prop_assert!((residual / (3f64.sqrt() * wr) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn swapping_beams_mirrors_dark_states(p in params()) {
        let swapped = SimParams { omega_plus: p.omega_minus, omega_minus: p.omega_plus, ..p };
        for kind in FamilyKind::ALL {
            let a = dark_state(kind, &p).unwrap();
            let b = dark_state(kind, &swapped).unwrap();
            let mirrored: DVector<f64> = match kind {
                FamilyKind::Lambda => DVector::from_vec(vec![b[0], b[2], b[1]]),
                FamilyKind::InvertedW => DVector::from_iterator(5, b.iter().rev().copied()),
            };
            let phase = a.dot(&mirrored).signum();
            prop_assert!((a - mirrored * phase).amax() < 1e-14);
        }
    }

    #[test]
    fn rhs_preserves_hermiticity(st in state(), p in params()) {
        let d = apply_rhs(&st, &p);
        prop_assert!(d.hermiticity_error() < 1e-15);
    }

    #[test]
    fn rhs_is_trace_neutral(st in state(), p in params()) {
        let d = apply_rhs(&st, &p);
        prop_assert!(d.total().abs() < 1e-14, "{}", d.total());
    }

    #[test]
    fn rhs_is_linear(x in state(), y in state(), a in -2.0..2.0f64, b in -2.0..2.0f64, p in params()) {
        let lhs = apply_rhs(&combine(a, &x, b, &y), &p);
        let rhs = combine(a, &apply_rhs(&x, &p), b, &apply_rhs(&y, &p));
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-13);
    }

    #[test]
    fn rhs_commutes_with_mirror_for_equal_beams(st in state(), om in rabi(), wr in 1e-3..2e-2f64) {
        let p = SimParams::new(om, om, 0.0, wr).unwrap();
        let a = apply_rhs(&st.mirrored(), &p);
        let b = apply_rhs(&st, &p).mirrored();
        prop_assert!(a.max_abs_diff(&b) < 1e-14);
    }

    #[test]
    fn distribution_is_trace_preserving_and_linear(x in state(), y in state(), a in 0.0..1.0f64) {
        let dx = momentum_distribution(&x);
        prop_assert!((dx.total() - x.trace()).abs() < 1e-13);
        let mix = momentum_distribution(&combine(a, &x, 1.0 - a, &y));
        let dy = momentum_distribution(&y);
        for ((m, u), v) in mix.density.iter().zip(&dx.density).zip(&dy.density) {
            prop_assert!((m - (a * u + (1.0 - a) * v)).abs() < 1e-13);
        }
    }

    #[test]
    fn dark_population_is_a_probability(st in state(), p in params()) {
        for kind in FamilyKind::ALL {
            let d = dark_population(&st, kind, &p).unwrap();
            prop_assert!((-1e-15..=1.0 + 1e-12).contains(&d), "{d}");
        }
    }

    #[test]
    fn kernels_are_normalized_and_even(n in 1usize..64) {
        for class in [PolarizationClass::Pi, PolarizationClass::Sigma] {
            let k = emission_kernel(class, n).unwrap();
            prop_assert!((k.weights.iter().sum::<f64>() - 1.0).abs() <= f64::EPSILON);
            for j in 0..=n as isize {
                prop_assert!(k.weight(j) >= 0.0);
                prop_assert_eq!(k.weight(j), k.weight(-j));
            }
        }
    }

    #[test]
    fn detector_convolution_preserves_integral(
        values in proptest::collection::vec(0.0..1.0f64, 41),
        sigma in 0.0..0.8f64,
    ) {
        let dist = MomentumDistribution { grid: MomentumGrid::from_counts(20, 10).unwrap(), density: values };
        let out = convolve_detector(&dist, sigma).unwrap();
        prop_assert!((out.total() - dist.total()).abs() < 1e-12);
        prop_assert!(out.density.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn single_gaussian_fit_recovers_parameters(
        amplitude in 0.05..2.0f64,
        center in -0.25..0.25f64,
        sigma in 0.08..0.4f64,
    ) {
        let truth = GaussianPeak { amplitude, center, sigma };
        let grid = MomentumGrid::from_counts(60, 20).unwrap();
        let density = grid.values().iter().map(|&p| truth.eval(p)).collect();
        let fit = fit_gaussian_peaks(&MomentumDistribution { grid, density }, &[0.0]).unwrap();
        let g = fit.peaks[0];
        prop_assert!((g.amplitude / amplitude - 1.0).abs() < 1e-6);
        prop_assert!((g.center - center).abs() < 1e-6);
        prop_assert!((g.sigma / sigma - 1.0).abs() < 1e-6);
    }

    #[test]
    fn lifetime_is_exact_for_pure_exponentials(tau in 5.0..500.0f64, a in 0.01..1.0f64) {
        let times: Vec<f64> = (0..=200).map(|i| i as f64 * tau / 10.0).collect();
        let values: Vec<f64> = times.iter().map(|t| a * (-t / tau).exp()).collect();
        let est = fit_exponential_decay(&times, &values, (0.0, 3.0 * tau)).unwrap();
        prop_assert!((est.tau / tau - 1.0).abs() < 1e-6);
        prop_assert!(est.fit_quality > 0.999_999);
    }

    #[test]
    fn config_round_trips(
        durations in proptest::collection::vec((0.0..300.0f64, 0.0..1.0f64, 0.0..1.0f64), 1..4),
        dt in 1e-3..0.1f64,
        stride in 1usize..1000,
        ppr in 1usize..40,
        sigma in proptest::option::of(0.0..0.5f64),
    ) {
        let mut cfg = preset(PresetName::Short);
        cfg.stages = durations.iter().map(|&(d, p, m)| Stage::new(d, p, m)).collect();
        cfg.dt = dt;
        cfg.observation_stride = stride;
        cfg.grid = GridSpec { p_max: 8.0, points_per_recoil: ppr };
        cfg.detector_sigma = sigma;
        let text = serde_json::to_string(&cfg).unwrap();
        prop_assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}

fn tiny_config(stages: Vec<Stage>) -> vscpt::ScenarioConfig {
    let mut cfg = preset(PresetName::Short);
    cfg.grid = GridSpec { p_max: 3.0, points_per_recoil: 4 };
    cfg.stages = stages;
    cfg.observation_stride = 50;
    cfg
}

#[test]
fn stage_concatenation() {
    let whole = simulate(&tiny_config(vec![Stage::new(8.0, 0.3, 0.3)])).unwrap();
    let halves = simulate(&tiny_config(vec![Stage::new(4.0, 0.3, 0.3), Stage::new(4.0, 0.3, 0.3)])).unwrap();
    assert!(whole.final_state.max_abs_diff(&halves.final_state) < 1e-12);
    assert_eq!(whole.trajectory.times(), halves.trajectory.times());
}

#[test]
fn symmetric_evolution_gives_even_distributions() {
    let report = simulate(&tiny_config(vec![Stage::new(10.0, 0.3, 0.3)])).unwrap();
    for s in &report.trajectory.snapshots {
        let d = MomentumDistribution { grid: report.trajectory.grid, density: s.distribution.clone() };
        assert!(d.asymmetry() < 1e-8);
    }
}

#[test]
fn runs_are_deterministic() {
    let cfg = tiny_config(vec![Stage::new(3.0, 0.3, 0.2), Stage::new(2.0, 0.3, 0.0)]);
    assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
}

#[test]
fn family_diagonal_evolution_conserves_trace() {
    let report = simulate(&tiny_config(vec![Stage::new(50.0, 0.3, 0.3)])).unwrap();
    for s in &report.trajectory.snapshots {
        assert!((s.trace + s.lost_trace - 1.0).abs() < 1e-12);
        assert!(s.min_diagonal >= -1e-9);
    }
}
