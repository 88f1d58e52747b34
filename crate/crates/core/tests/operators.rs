use proptest::prelude::*;
use tcm_core::harness::random_field;
use tcm_core::{Grid, RealField, Spectral};

fn field(n: usize, length: f64, vals: &[f64]) -> RealField {
    RealField::new(Grid::new(n, length).unwrap(), vals.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn round_trip(
        exp in 3u32..8,
        length in 0.5f64..20.0,
        seed in any::<u64>(),
    ) {
        let n = 1usize << exp;
        let g = Grid::new(n, length).unwrap();
        let sp = Spectral::new(g);
        let f = random_field(&sp, n / 2 - 1, seed, 0, 1.0);
        let back = sp.inverse(&sp.forward(&f).unwrap());
        prop_assert!(back.sub(&f).unwrap().max_abs() <= 1e-12 * f.max_abs().max(1e-300));
    }

    #[test]
    fn parseval(vals in prop::collection::vec(-5.0f64..5.0, 256), length in 0.5f64..10.0) {
        let f = field(16, length, &vals);
        let sp = Spectral::new(*f.grid());
        let phys = f.l2_norm_sq();
        let spec = sp.forward(&f).unwrap().l2_norm_sq();
        prop_assert!((phys - spec).abs() <= 1e-12 * phys.max(1.0));
    }

    #[test]
    fn leray_idempotent_and_divergence_free(seed in any::<u64>(), kmax in 1usize..12) {
        let sp = Spectral::new(Grid::periodic(32).unwrap());
        let a = random_field(&sp, kmax, seed, 0, 1.0);
        let b = random_field(&sp, kmax, seed, 1, 1.0);
        let (p1, p2) = sp.leray_project(&a, &b).unwrap();
        let (q1, q2) = sp.leray_project(&p1, &p2).unwrap();
        prop_assert!(q1.sub(&p1).unwrap().max_abs() <= 1e-12);
        prop_assert!(q2.sub(&p2).unwrap().max_abs() <= 1e-12);
        prop_assert!(sp.divergence(&p1, &p2).unwrap().max_abs() <= 1e-10);
    }

    #[test]
    fn derivatives_are_linear(
        seed in any::<u64>(),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
    ) {
        let sp = Spectral::new(Grid::new(32, 3.0).unwrap());
        let f = random_field(&sp, 8, seed, 2, 1.0);
        let g = random_field(&sp, 8, seed, 3, 1.0);
        let combo = f.scale(alpha).add(&g.scale(beta)).unwrap();
        let (cx, cy) = sp.gradient(&combo).unwrap();
        let (fx, fy) = sp.gradient(&f).unwrap();
        let (gx, gy) = sp.gradient(&g).unwrap();
        let ex = fx.scale(alpha).add(&gx.scale(beta)).unwrap();
        let ey = fy.scale(alpha).add(&gy.scale(beta)).unwrap();
        let scale = 1.0 + ex.max_abs().max(ey.max_abs());
        prop_assert!(cx.sub(&ex).unwrap().max_abs() <= 1e-12 * scale);
        prop_assert!(cy.sub(&ey).unwrap().max_abs() <= 1e-12 * scale);
    }

    #[test]
    fn laplacian_is_divergence_of_gradient(seed in any::<u64>()) {
        let sp = Spectral::new(Grid::new(32, 5.0).unwrap());
        let f = random_field(&sp, 8, seed, 4, 1.0);
        let (fx, fy) = sp.gradient(&f).unwrap();
        let lap = sp.laplacian(&f).unwrap();
        let div = sp.divergence(&fx, &fy).unwrap();
        prop_assert!(lap.sub(&div).unwrap().max_abs() <= 1e-11 * (1.0 + lap.max_abs()));
    }
}

#[test]
fn gradient_matches_fourth_order_differences() {
    let mut errors = Vec::new();
    for n in [64, 128, 256] {
        let g = Grid::new(n, 4.0).unwrap();
        let sp = Spectral::new(g);
        let f = random_field(&sp, 5, 9, 0, 1.0);
        let (_, fy_spec) = sp.gradient(&f).unwrap();
        let h = g.dx();
        let ni = n as isize;
        let at = |i: usize, j: isize| f.get(i, j.rem_euclid(ni) as usize);
        let mut err = 0.0_f64;
        for j in 0..n {
            for i in 0..n {
                let j = j as isize;
                let d = (-at(i, j + 2) + 8.0 * at(i, j + 1) - 8.0 * at(i, j - 1) + at(i, j - 2)) / (12.0 * h);
                err = err.max((d - fy_spec.get(i, j as usize)).abs());
            }
        }
        errors.push(err);
    }
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 3.8, "order {order} from {errors:?}");
    }
}

#[test]
fn dealias_removes_high_modes_only() {
    let g = Grid::periodic(24).unwrap();
    let sp = Spectral::new(g);
    let low = RealField::from_fn(g, |x, y| (4.0 * x).sin() * (2.0 * y).cos()).unwrap();
    let high = RealField::from_fn(g, |x, y| (9.0 * x).cos() + (5.0 * x + 10.0 * y).sin()).unwrap();
    let kept = sp.dealias_field(&low.add(&high).unwrap()).unwrap();
    assert!(kept.sub(&low).unwrap().max_abs() < 1e-13);
}

#[test]
fn mismatched_grids_are_rejected() {
    let a = RealField::zeros(Grid::periodic(8).unwrap());
    let b = RealField::zeros(Grid::periodic(16).unwrap());
    assert!(a.add(&b).is_err());
    let sp = Spectral::new(Grid::periodic(16).unwrap());
    assert!(sp.forward(&a).is_err());
}

#[test]
fn non_finite_input_is_rejected() {
    let g = Grid::periodic(8).unwrap();
    let mut v = vec![0.0; 64];
    v[5] = f64::NAN;
    assert!(RealField::new(g, v).is_err());
    assert!(RealField::from_fn(g, |x, _| 1.0 / (x - x)).is_err());
}
