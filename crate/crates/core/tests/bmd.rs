use num_complex::Complex64;
use skle::abm_mc::{ExcursionLaw, HullShape, McParams, RngStream};
use skle::bmd_grid::*;
use skle::bmd_kernel::*;
use skle::chordal::complex_poisson_h;
use skle::SlitVector;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn unit() -> SlitVector {
    SlitVector::single(1.0, -0.5, 0.5).unwrap()
}

fn stub() -> Vec<HullShape> {
    vec![HullShape::Segment { a: c(0.0, 0.0), b: c(0.0, 0.5) }]
}

fn coarse() -> GridConfig {
    GridConfig { h: 0.05, box_scale: 40.0, ..GridConfig::default() }
}

#[test]
fn darned_value_is_positive_under_a_stub_hull() {
    let f = v_star_grid(&unit(), &stub(), &coarse()).unwrap();
    assert!(f.slit_values[0] > 0.0 && f.slit_values[0] < 1.0, "{:?}", f.slit_values);
    assert!(f.max_flux() <= 1e-6, "{}", f.max_flux());
}

#[test]
fn grid_refinement_converges_at_first_order_or_better() {
    let s = unit();
    for field in [0, 1] {
        let v: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h| {
                let cfg = GridConfig { h, box_scale: 40.0, ..GridConfig::default() };
                if field == 0 {
                    v_star_grid(&s, &stub(), &cfg).unwrap().slit_values[0]
                } else {
                    kernel_grid(&s, 0.0, &cfg).unwrap().slit_values[0]
                }
            })
            .collect();
        let ratio = (v[0] - v[1]) / (v[1] - v[2]);
        assert!(ratio > 1.75, "successive differences ratio {ratio} ({v:?})");
    }
}

#[test]
fn symmetric_pair_has_symmetric_transition_matrix() {
    let s = SlitVector::new(vec![1.0, 1.0], vec![-2.0, 1.0], vec![-1.0, 2.0]).unwrap();
    let sys = v_star_mc(&s, &stub(), 20_000, ExcursionLaw::ConditionedEscape, &McParams::default(), RngStream::new(3, 0)).unwrap();
    let (a, b) = (sys.q_star[0][1], sys.q_star[1][0]);
    let n = 20_000.0;
    let se = (a * (1.0 - a) / n + b * (1.0 - b) / n).sqrt();
    assert!((a - b).abs() <= 3.0 * se, "{a} {b}");
    assert!(sys.bound_holds());
    for v in &sys.v_star {
        assert!(v.value > 0.0);
    }
}

#[test]
fn far_slit_limit_of_the_kernel() {
    let z = c(0.2, 0.7);
    let mut last = f64::INFINITY;
    let mut last_b = f64::INFINITY;
    for r in [10.0, 20.0, 40.0] {
        let s = SlitVector::single(1.0, r - 0.5, r + 0.5).unwrap();
        let d = (bmd_complex_poisson(&s, z, 0.0).unwrap() - complex_poisson_h(z, 0.0).unwrap()).norm();
        assert!(d < last, "R={r}: {d} not below {last}");
        last = d;
        let b = b_bmd(&s).unwrap().value.abs();
        assert!(b < last_b);
        last_b = b;
    }
}

#[test]
fn drift_signs_and_symmetry() {
    for s in [unit(), SlitVector::new(vec![0.5, 1.5], vec![-1.0, 0.2], vec![-0.2, 1.4]).unwrap()] {
        let b = drift_b_j(&s).unwrap();
        for v in &b[..s.len()] {
            assert!(*v < 0.0, "{b:?}");
        }
    }
    let b = drift_b_j(&unit()).unwrap();
    assert!((b[1] + b[2]).abs() < 1e-10, "{b:?}");
}

#[test]
fn degree_minus_one_homogeneity() {
    for s in [unit(), SlitVector::new(vec![0.5, 1.5], vec![-1.0, 0.2], vec![-0.2, 1.4]).unwrap().shift(0.3)] {
        let a = drift(&s).unwrap();
        let b = drift(&s.scale(2.0).unwrap()).unwrap();
        let tol = 3.0 * (a.error + b.error) + 1e-12;
        for (x, y) in a.b.iter().zip(&b.b) {
            assert!((x / 2.0 - y).abs() <= tol, "{x} {y}");
        }
        assert!((a.b_bmd / 2.0 - b.b_bmd).abs() <= tol);
    }
    assert_eq!(b_bmd(&SlitVector::empty()).unwrap().value, 0.0);
}

#[test]
fn spectral_and_grid_agree() {
    let s = SlitVector::single(1.0, -0.3, 0.7).unwrap();
    let k = SlitKernel::solve(&s, 0.0).unwrap();
    let g = kernel_grid(&s, 0.0, &GridConfig { h: 0.025, box_scale: 100.0, ..GridConfig::default() }).unwrap();
    assert!((k.slit_value(0) - g.slit_values[0]).abs() < 5e-3, "{} {}", k.slit_value(0), g.slit_values[0]);
    assert!((k.regular_part_at_pole() - g.regular_part).abs() < 2e-2, "{} {}", k.regular_part_at_pole(), g.regular_part);
    assert!(g.max_flux <= 1e-6);
}

#[test]
fn kernel_satisfies_cauchy_riemann() {
    let s = unit();
    let k = SlitKernel::solve(&s, 0.0).unwrap();
    for z in [c(0.3, 0.4), c(-1.2, 1.6), c(2.0, 0.8)] {
        let mut prev = f64::INFINITY;
        for h in [1e-2, 5e-3, 2.5e-3] {
            let f = |w: Complex64| k.psi(w).unwrap();
            let dx = (f(z + h) - f(z - h)) / (2.0 * h);
            let dy = (f(z + c(0.0, h)) - f(z - c(0.0, h))) / (2.0 * h);
            let res = (dx.re - dy.im).abs().max((dy.re + dx.im).abs());
            assert!(res < prev / 3.0, "{res} after {prev}");
            prev = res;
        }
    }
}
