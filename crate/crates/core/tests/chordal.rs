use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skle::abm_mc::{McParams, RngStream};
use skle::chordal::*;
use skle::geometry::{radius, SwallowTime};
use skle::SlitVector;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn shift_and_scale_examples() {
    let s = SlitVector::new(vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.0, 1.5]).unwrap();
    let t = s.shift(0.5);
    assert_eq!(t.x(), &[-1.5, 0.0]);
    assert_eq!(t.xr(), &[-0.5, 1.0]);
    assert_eq!(t.y(), s.y());
    let u = s.scale(2.0).unwrap();
    assert_eq!(u.y(), &[2.0, 4.0]);
    assert!(s.scale(0.0).is_err());
    assert_eq!(radius(&[c(3.0, 4.0), c(0.0, 1.0)]).unwrap(), 5.0);
}

#[test]
fn poisson_kernel_values() {
    let v = complex_poisson_h(c(0.0, 1.0), 0.0).unwrap();
    assert!((v.im - 0.31831).abs() < 1e-5 && v.re.abs() < 1e-15);
    let v = complex_poisson_h(c(2.0, 1.0), 0.0).unwrap();
    assert!((v.im - 0.063662).abs() < 1e-6);
    assert!(complex_poisson_h(c(1.0, 0.0), 0.0).is_err());
}

#[test]
fn forward_closed_forms() {
    let d = DrivingFunction::constant(0.0, 1.0, 1e-3).unwrap();
    match loewner_forward(&d, c(0.0, 3.0), 1.0).unwrap() {
        ForwardOutcome::Mapped(g) => assert!((g - c(0.0, 5f64.sqrt())).norm() < 1e-12),
        o => panic!("{o:?}"),
    }
    let cst = 0.7;
    let d = DrivingFunction::constant(cst, 1.0, 1e-3).unwrap();
    let z = c(1.5, 0.4);
    let want = cst + ((z - cst) * (z - cst) + 4.0).sqrt();
    match loewner_forward(&d, z, 1.0).unwrap() {
        ForwardOutcome::Mapped(g) => assert!((g - want).norm() < 1e-10 * want.norm()),
        o => panic!("{o:?}"),
    }
}

#[test]
fn swallow_times_of_imaginary_points() {
    let d = DrivingFunction::constant(0.0, 1.5, 1e-4).unwrap();
    let t1 = swallow_time(&d, c(0.0, 1.0)).unwrap().finite().unwrap();
    let t2 = swallow_time(&d, c(0.0, 2.0)).unwrap().finite().unwrap();
    assert!((t1 - 0.25).abs() < 1e-3, "{t1}");
    assert!((t2 - 1.0).abs() < 1e-3, "{t2}");
    assert_eq!(swallow_time(&d, c(5.0, 0.1)).unwrap(), SwallowTime::Never);
}

#[test]
fn vertical_trace_tip() {
    let d = DrivingFunction::constant(0.0, 1.0, 1e-3).unwrap();
    let tr = trace(&d);
    let tip = tr.last().unwrap().tip;
    assert!((tip - c(0.0, 2.0)).norm() < 1e-9, "{tip}");
    assert_eq!(tr[0].tip, c(0.0, 0.0));
}

#[test]
fn reversal_mirrors_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = DrivingFunction::brownian(0.0, 3.0, 0.2, 1e-3, &mut rng).unwrap();
    let a = trace(&d);
    let b = trace(&d.negated());
    for (p, q) in a.iter().zip(&b) {
        assert!((p.tip - c(-q.tip.re, q.tip.im)).norm() < 1e-12);
    }
}

#[test]
fn translation_check_on_closed_forms() {
    let p = McParams::default();
    let seg = AnalyticShape::VerticalSegment { x: 0.0, height: 1.0 };
    let r = hcap_translation_check(&seg, 5.0, 40_000, &p, RngStream::new(1, 0)).unwrap();
    assert!(r.passed, "{r:?}");
    assert!((r.original.value - 0.5).abs() < 0.03);
    let disk = AnalyticShape::HalfDisk { center: 0.0, radius: 1.0 };
    let r = hcap_translation_check(&disk, -3.0, 40_000, &p, RngStream::new(2, 0)).unwrap();
    assert!(r.passed, "{r:?}");
    assert!((r.shifted.value - 1.0).abs() < 0.05);
}

#[test]
fn expansion_tail_examples() {
    let seg = AnalyticShape::VerticalSegment { x: 0.0, height: 1.0 };
    let r10 = expansion_tail_check(&seg, c(0.0, 10.0)).unwrap();
    let r100 = expansion_tail_check(&seg, c(0.0, 100.0)).unwrap();
    // sqrt(z^2 + 1) = z + 1/(2z) - 1/(8 z^3) + ..., so the normalized tail is 1/(4|z|)
    assert!((r10 / 0.025 - 1.0).abs() < 0.01, "{r10}");
    assert!((r100 / 0.0025 - 1.0).abs() < 1e-3, "{r100}");
    let disk = AnalyticShape::HalfDisk { center: 0.0, radius: 1.0 };
    assert!(expansion_tail_check(&disk, c(5.0, 5.0)).unwrap() < 1e-10);
}

#[test]
fn trace_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let d = DrivingFunction::constant(0.0, 0.01, 1e-3).unwrap();
    let path = dir.path().join("t.csv");
    write_trace_csv(&path, &trace(&d)).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,driver,tip_re,tip_im");
    assert_eq!(text.lines().count(), d.len() + 1);
}
