use num_complex::Complex64;
use proptest::prelude::*;
use skle::abm_mc::{im_g0, HullShape, McParams, ObstacleSet, RngStream};
use skle::annulus::{psi_transform, villat_kernel, villat_partial, villat_terms, PsiDirection, VILLAT_TOL};
use skle::bmd_kernel::drift_component;
use skle::chordal::{loewner_forward, swallow_time, DrivingFunction, ForwardOutcome};
use skle::geometry::{CoefficientFunction, Homogeneity, SwallowTime};
use skle::harness::{ks_two_sample, weighted_ks};
use skle::skle::{run_skle, SkleOptions, StopReason};
use skle::SlitVector;

fn driver(incs: &[f64], dt: f64) -> DrivingFunction {
    let mut v = vec![0.0];
    for d in incs {
        v.push(v.last().unwrap() + d * dt.sqrt());
    }
    let t = (0..v.len()).map(|k| k as f64 * dt).collect();
    DrivingFunction::new(t, v).unwrap()
}

fn slits() -> impl Strategy<Value = SlitVector> {
    prop::collection::vec((0.2f64..2.0, -3.0f64..3.0, 0.1f64..1.0), 1..3).prop_filter_map("overlap", |v| {
        let y = v.iter().map(|t| t.0).collect();
        let x = v.iter().map(|t| t.1).collect();
        let xr = v.iter().map(|t| t.1 + t.2).collect();
        SlitVector::new(y, x, xr).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn overlapping_equal_heights_are_rejected(y in 0.1f64..3.0, x in -2.0f64..2.0, l in 0.1f64..2.0, f in 0.0f64..0.99) {
        let x2 = x + f * l;
        prop_assert!(SlitVector::new(vec![y, y], vec![x, x2], vec![x + l, x2 + l]).is_err());
    }

    #[test]
    fn scale_commutes_with_shift(s in slits(), xi in -2.0f64..2.0, c in 0.2f64..5.0) {
        let a = s.shift(xi).scale(c).unwrap();
        let b = s.scale(c).unwrap().shift(c * xi);
        prop_assert!(a.l1_distance(&b) < 1e-12);
    }

    #[test]
    fn imaginary_part_decreases(incs in prop::collection::vec(-2.0f64..2.0, 50), x in -1.0f64..1.0, y in 0.05f64..2.0) {
        let d = driver(&incs, 1e-3);
        let z = Complex64::new(x, y);
        if let ForwardOutcome::Mapped(g) = loewner_forward(&d, z, d.horizon()).unwrap() {
            prop_assert!(g.im <= z.im + 1e-15);
        }
    }

    #[test]
    fn semigroup_on_the_solver_clock(incs in prop::collection::vec(-2.0f64..2.0, 40), x in -1.0f64..1.0, y in 0.5f64..2.0) {
        let dt = 1e-3;
        let d = driver(&incs, dt);
        let z = Complex64::new(x, y);
        let one = loewner_forward(&d, z, d.horizon()).unwrap();
        let mut g = z;
        for (t0, t1, u) in d.steps_until(20.0 * dt) {
            g = skle::chordal::forward_step(g, u, t1 - t0);
        }
        let mut h = g;
        for (t0, t1, u) in d.steps_until(d.horizon()).into_iter().skip(20) {
            h = skle::chordal::forward_step(h, u, t1 - t0);
        }
        if let ForwardOutcome::Mapped(w) = one {
            prop_assert!((w - h).norm() < 1e-12);
        }
    }

    #[test]
    fn brownian_scaling_of_swallow_times(incs in prop::collection::vec(-2.0f64..2.0, 100), x in -0.3f64..0.3, y in 0.05f64..0.3, c in 0.5f64..2.0) {
        let dt = 1e-3;
        let d = driver(&incs, dt);
        let t: Vec<f64> = d.times().iter().map(|t| c * c * t).collect();
        let v: Vec<f64> = d.values().iter().map(|v| c * v).collect();
        let ds = DrivingFunction::new(t, v).unwrap();
        let z = Complex64::new(x, y);
        match (swallow_time(&d, z).unwrap(), swallow_time(&ds, c * z).unwrap()) {
            (SwallowTime::At(a), SwallowTime::At(b)) => prop_assert!((c * c * a - b).abs() <= 1e-9 + c * c * 1e-12),
            (SwallowTime::Never, SwallowTime::Never) => {}
            other => prop_assert!(false, "{other:?}"),
        }
    }

    #[test]
    fn villat_inner_circle(q in 0.05f64..0.8, th in 0.01f64..6.27) {
        let v = villat_kernel(q, Complex64::from_polar(q, th)).unwrap();
        prop_assert!((v.re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn villat_asymmetric_truncation(q in 0.1f64..0.7, r in 0.3f64..0.95, th in 0.1f64..6.0) {
        let z = Complex64::from_polar(r.max(q + 0.05), th);
        let n = villat_terms(q, VILLAT_TOL);
        let sym = villat_partial(q, z, n, n).unwrap();
        let asym = villat_partial(q, z, n, n + 1).unwrap();
        let next = villat_partial(q, z, n + 1, n + 1).unwrap();
        let a = q.powi(2 * (n as i32 + 1));
        let omitted = (1.0 + a * z) / (1.0 - a * z);
        prop_assert!((asym - sym - omitted).norm() <= 1e-12);
        prop_assert!((next - sym).norm() <= 1e-11);
    }

    #[test]
    fn cayley_round_trip(x in -5.0f64..5.0, y in 0.01f64..5.0) {
        let w = Complex64::new(x, y);
        let d = psi_transform(w, PsiDirection::HalfPlaneToDisk).unwrap();
        prop_assert!(d.norm() < 1.0);
        let back = psi_transform(d, PsiDirection::DiskToHalfPlane).unwrap();
        prop_assert!((back - w).norm() < 1e-9 * (1.0 + w.norm_sqr()));
    }

    #[test]
    fn ks_report_is_in_range(xs in prop::collection::vec(-5.0f64..5.0, 1..60), ys in prop::collection::vec(-5.0f64..5.0, 1..60)) {
        let r = ks_two_sample(&xs, &ys).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.statistic));
        prop_assert!((0.0..=1.0).contains(&r.p_value));
        let w = vec![1.0; xs.len()];
        let r2 = weighted_ks(&xs, &w, &ys).unwrap();
        prop_assert!((r2.statistic - r.statistic).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn drift_components_are_homogeneous(s in slits(), c in 0.5f64..3.0) {
        for j in 0..3 * s.len() {
            let f = drift_component(j);
            prop_assert_eq!(f.degree(), Homogeneity::MinusOne);
            let chk = f.homogeneity_check(&s, c).unwrap();
            prop_assert!(chk.relative_error < 1e-8, "{chk:?}");
        }
        let a = CoefficientFunction::constant(2.0).homogeneity_check(&s, c).unwrap();
        prop_assert!(a.relative_error < 1e-15);
    }

    #[test]
    fn im_g0_respects_the_supermartingale_bound(x in -2.0f64..2.0, y in 0.05f64..3.0, h in 0.2f64..1.5, seed in 0u64..1000) {
        let hull = ObstacleSet::hull_only(vec![HullShape::Segment { a: Complex64::new(0.0, 0.0), b: Complex64::new(0.0, h) }]);
        let z = Complex64::new(if x.abs() < 1e-3 { 0.5 } else { x }, y);
        let e = im_g0(z, &hull, 500, &McParams::default(), RngStream::new(seed, 0)).unwrap();
        prop_assert!(e.value >= 0.0 && e.value <= z.im);
        let again = im_g0(z, &hull, 500, &McParams::default(), RngStream::new(seed, 0)).unwrap();
        prop_assert_eq!(e, again);
    }

    #[test]
    fn stopped_runs_keep_valid_slits(s in slits(), xi in -1.0f64..1.0, seed in 0u64..1000) {
        let alpha = CoefficientFunction::constant(6f64.sqrt());
        let b = skle::bmd_kernel::neg_b_bmd();
        let run = run_skle(&s, xi, &alpha, &b, SkleOptions::new(2e-3, 0.1), RngStream::new(seed, 0)).unwrap();
        let t_end = *run.record.times.last().unwrap();
        if t_end < 0.1 - 1e-3 {
            prop_assert_ne!(run.record.stopped, StopReason::Horizon);
        } else {
            prop_assert_eq!(run.record.stopped, StopReason::Horizon);
        }
        for sv in &run.record.slits {
            prop_assert!(SlitVector::new(sv.y().to_vec(), sv.x().to_vec(), sv.xr().to_vec()).is_ok());
        }
    }
}
