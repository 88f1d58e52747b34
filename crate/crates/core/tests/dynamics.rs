use proptest::prelude::*;
use tcm_core::diagnostics::record;
use tcm_core::harness::{generate, mms_verify, InitSpec, MmsFamily, MmsSpec, Regime, RunConfig};
use tcm_core::{
    Grid, Model, NoForcing, PhysConsts, RealField, Scheme, State, StepPolicy, Stepper,
    SystemVariant,
};

const VARIANTS: [SystemVariant; 3] = [
    SystemVariant::PEps { eps: 0.05 },
    SystemVariant::PEpsEta { eps: 0.05, eta: 0.01 },
    SystemVariant::Limit { alpha: 0.5 },
];

fn config(n: usize, variant: SystemVariant, t_end: f64) -> RunConfig {
    RunConfig {
        grid: Grid::periodic(n).unwrap(),
        consts: PhysConsts::unit(),
        variant,
        policy: StepPolicy {
            dt: 5e-3,
            ..StepPolicy::default()
        },
        t_end,
        cadence: 0.0,
    }
}

fn initial(n: usize, seed: u64, regime: Regime) -> State {
    generate(
        Grid::periodic(n).unwrap(),
        &PhysConsts::unit(),
        &InitSpec {
            seed,
            regime,
            ..InitSpec::default()
        },
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sources_cancel_in_total_water(seed in any::<u64>(), which in 0usize..3, amp_q in 0.05f64..0.8) {
        let g = Grid::periodic(16).unwrap();
        let c = PhysConsts::unit();
        let s = generate(g, &c, &InitSpec { seed, regime: Regime::Mixed, amp_q, ..InitSpec::default() }).unwrap();
        let m = Model::new(g, c, VARIANTS[which]).unwrap();
        prop_assert!(m.source_cancellation_check(&s).unwrap() <= 1e-12 * (1.0 + s.max_abs()));
    }

    #[test]
    fn precipitation_is_non_negative(seed in any::<u64>(), which in 0usize..3) {
        let s = initial(16, seed, Regime::Mixed);
        let m = Model::new(*s.grid(), PhysConsts::unit(), VARIANTS[which]).unwrap();
        prop_assert!(m.precipitation(&s).unwrap().min() >= 0.0);
    }

    #[test]
    fn initial_data_respects_regime(seed in any::<u64>(), which in 0usize..2) {
        let regime = [Regime::Subsaturated, Regime::Supersaturated][which];
        let s = initial(16, seed, regime);
        prop_assert!(regime.holds(&s.q, PhysConsts::unit().q_s));
    }
}

#[test]
fn zero_state_is_fixed_point() {
    for v in VARIANTS {
        let cfg = config(16, v, 0.05);
        let z = State::zeros(cfg.grid);
        let d = cfg.model().unwrap().tendencies(&z, 0.0, &NoForcing).unwrap();
        assert_eq!(d.max_abs(), 0.0);
        let stepper = cfg.stepper().unwrap();
        assert_eq!(stepper.cfl_dt(&z).unwrap(), cfg.policy.dt);
        let next = stepper.step(&z, 0.0, cfg.policy.dt, &NoForcing).unwrap();
        assert_eq!(next.max_abs(), 0.0);
    }
}

#[test]
fn zero_duration_run_keeps_only_initial_state() {
    let cfg = config(16, VARIANTS[0], 0.0);
    let s = initial(16, 1, Regime::Mixed);
    let traj = cfg.run(&s, &NoForcing).unwrap();
    assert_eq!(traj.snapshots.len(), 1);
    assert_eq!(traj.snapshots[0].1, cfg.model().unwrap().prepare(&s).unwrap());
}

#[test]
fn barotropic_velocity_stays_divergence_free() {
    for v in VARIANTS {
        let cfg = config(32, v, 0.1);
        let stepper = cfg.stepper().unwrap();
        let sp = stepper.model().spectral();
        let mut s = initial(32, 4, Regime::Mixed);
        let mut t = 0.0;
        for _ in 0..10 {
            let dt = stepper.cfl_dt(&s).unwrap();
            s = stepper.step(&s, t, dt, &NoForcing).unwrap();
            t += dt;
            assert!(sp.divergence(&s.u[0], &s.u[1]).unwrap().max_abs() <= 1e-10);
        }
    }
}

#[test]
fn runs_are_bitwise_deterministic() {
    let cfg = config(32, VARIANTS[1], 0.1);
    let s = initial(32, 8, Regime::Mixed);
    let a = cfg.run(&s, &NoForcing).unwrap();
    let b = cfg.run(&s, &NoForcing).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.snapshots, b.snapshots);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = config(64, VARIANTS[0], 0.05);
    let s = initial(64, 2, Regime::Mixed);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| cfg.run(&s, &NoForcing).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a.records, b.records);
    assert_eq!(a.snapshots, b.snapshots);
}

#[test]
fn step_above_bound_is_rejected() {
    let cfg = config(32, VARIANTS[0], 0.1);
    let s = initial(32, 3, Regime::Mixed);
    let stepper: Stepper = cfg.stepper().unwrap();
    let bound = stepper.cfl_dt(&s).unwrap();
    assert!(stepper.step(&s, 0.0, bound * 1.5, &NoForcing).is_err());
    assert!(stepper.step(&s, 0.0, bound, &NoForcing).is_ok());
}

#[test]
fn diagnostics_match_analytic_quadrature() {
    let g = Grid::periodic(32).unwrap();
    let c = PhysConsts::unit();
    let f = |h: fn(f64, f64) -> f64| RealField::from_fn(g, h).unwrap();
    let s = State::from_components([
        f(|_, y| y.sin()),
        f(|x, _| x.sin()),
        f(|x, y| (x + y).cos()),
        f(|x, _| (2.0 * x).sin()),
        f(|x, y| x.cos() * y.cos()),
        f(|x, _| 0.1 + 0.2 * x.sin()),
    ])
    .unwrap();
    let m = Model::new(g, c, VARIANTS[0]).unwrap();
    let r = record(&m, 0.0, &s).unwrap();
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    // integrals over the 2 pi torus: sin^2 -> 2 pi^2, cos^2 cos^2 -> pi^2, const^2 -> 4 pi^2 c^2
    let l2 = [2.0 * pi2, 2.0 * pi2, 2.0 * pi2, 2.0 * pi2, pi2, 4.0 * pi2 * 0.01 + 0.04 * 2.0 * pi2];
    let energy = 0.5 * l2.iter().sum::<f64>();
    assert!((r.energy - energy).abs() < 1e-12 * energy);
    let grad_u_sq = 2.0 * pi2 + 2.0 * pi2;
    let grad_v_sq = 2.0 * 2.0 * pi2 + 4.0 * 2.0 * pi2;
    let grad_t_sq = 2.0 * pi2;
    let grad_q_sq = 0.04 * 2.0 * pi2;
    assert!((r.grad_u - grad_u_sq.sqrt()).abs() < 1e-12);
    assert!((r.grad_v - grad_v_sq.sqrt()).abs() < 1e-12);
    assert!((r.grad_t - grad_t_sq.sqrt()).abs() < 1e-12);
    assert!((r.grad_q - grad_q_sq.sqrt()).abs() < 1e-12);
    assert!((r.sup_t - 1.0).abs() < 1e-12);
    assert!(r.precip_total == 0.0);
    assert!((r.saturation.below - 1.0).abs() < 1e-15);
}

#[test]
fn third_order_scheme_converges_at_third_order() {
    let report = mms_verify(&MmsSpec {
        family: MmsFamily::Rational,
        consts: PhysConsts::unit(),
        variant: VARIANTS[0],
        scheme: Scheme::IfRk3,
        resolutions: vec![16],
        dts: vec![2e-2, 1e-2, 5e-3],
        t_end: 1.0,
    })
    .unwrap();
    assert!(report.fitted_order > 2.8, "{report:?}");
}

#[test]
fn saturated_family_self_converges() {
    let report = mms_verify(&MmsSpec {
        family: MmsFamily::Saturated,
        consts: PhysConsts::unit(),
        variant: VARIANTS[0],
        scheme: Scheme::IfRk2,
        resolutions: vec![16],
        dts: vec![1e-2, 5e-3, 2.5e-3],
        t_end: 0.5,
    })
    .unwrap();
    assert!(report.self_convergence, "{report:?}");
    assert!(report.fitted_order > 1.8, "{report:?}");
}
