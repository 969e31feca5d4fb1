use std::f64::consts::PI;

use chiral_core::planar::traveling_constants;
use chiral_core::soliton::{
    exact_profile_with, f0, f1, f2, phi_perturbative, psi_strain, slope_root, Branch, PerturbativeSolution, SlopeRoot,
};
use chiral_core::verify::dynamics_params;
use chiral_core::Error;

fn kink(s: f64, m: f64) -> f64 {
    4.0 * (m * s).exp().atan()
}

fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

/// The unexpanded second-order solution, valid where F₀'' ≠ 0.
fn f2_direct(s: f64, m: f64) -> f64 {
    let a = kink(s, m);
    let d1 = 2.0 * m * sech(m * s);
    let d2 = -2.0 * m * m * sech(m * s) * (m * s).tanh();
    let q = d1 * d1 / d2;
    0.125 * d2 * ((a + q - PI).powi(2) - 12.0 - q * q)
}

fn d1(f: impl Fn(f64) -> f64, s: f64) -> f64 {
    let h = 1e-3;
    (-f(s + 2.0 * h) + 8.0 * f(s + h) - 8.0 * f(s - h) + f(s - 2.0 * h)) / (12.0 * h)
}

#[test]
fn zeroth_order_closed_forms() {
    for m in [0.5, 1.0, 2.0] {
        for b in [Branch::Kink, Branch::Antikink, Branch::Piecewise] {
            assert!((f0(0.0, m, b) - PI).abs() < 1e-15);
        }
        for k in -40..=40 {
            let s = 0.1 * k as f64;
            assert!((f0(s, m, Branch::Kink) + f0(-s, m, Branch::Kink) - 2.0 * PI).abs() < 1e-13);
            assert!((d1(|x| f0(x, m, Branch::Kink), s) - 2.0 * m * sech(m * s)).abs() < 1e-9);
            let piece = if s <= 0.0 { kink(s, m) } else { kink(-s, m) };
            assert!((f0(s, m, Branch::Piecewise) - piece).abs() < 1e-14);
        }
    }
}

#[test]
fn first_order_closed_form_and_m_symmetry() {
    let oracle = |s: f64, m: f64| m * sech(m * s) * (4.0 * (m * s).exp().atan() - PI);
    for m in [0.5, 1.0, 2.0] {
        assert_eq!(f1(0.0, m), 0.0);
        for k in -50..=50 {
            let s = 0.1 * k as f64;
            assert!((f1(s, m) - oracle(s, m)).abs() < 1e-13);
            assert!((oracle(s, m) - oracle(s, -m)).abs() < 1e-13);
        }
    }
}

#[test]
fn second_order_matches_direct_form_and_ode() {
    for m in [1.0, 2.0] {
        for k in -60..=60 {
            let s = 0.05 * k as f64 + 0.013;
            if (m * s).abs() < 1e-2 {
                continue;
            }
            assert!((f2(s, m, Branch::Kink) - f2_direct(s, m)).abs() < 1e-10, "s = {s}");
            // ODE with finite-difference derivatives
            let a = kink(s, m);
            let a1 = d1(|x| kink(x, m), s);
            let g1 = f1(s, m);
            let g1p = d1(|x| f1(x, m), s);
            let g2 = f2(s, m, Branch::Kink);
            let g2p = d1(|x| f2(x, m, Branch::Kink), s);
            let r = -m * m * a.cos() * g1 * g1 - 2.0 * m * m * a.sin() * g2 - 3.0 * a1 * a1 * g1p + g1p * g1p
                + 2.0 * a1 * g2p;
            assert!(r.abs() < 1e-7, "residual {r} at s = {s}");
        }
        for s in [0.0, 1e-12, -1e-12, 1e-6] {
            let v = f2(s, m, Branch::Kink);
            assert!(v.is_finite() && v.abs() < 1e-4, "{v}");
        }
    }
}

#[test]
fn perturbative_phi_and_strain() {
    let p = dynamics_params(0.0).unwrap();
    let v = 2.8f64.sqrt();
    let setup = traveling_constants(&p, v, None).unwrap();
    let phi = phi_perturbative(1.3 * v, 1.3, &setup, 2, Branch::Piecewise).unwrap();
    assert!((phi - PI / 2.0).abs() < 1e-15);
    let far = phi_perturbative(40.0, 0.0, &setup, 1, Branch::Piecewise).unwrap();
    assert!(far.abs() < 1e-12);

    let flat = psi_strain(0.0, 0.0, &setup, |_, _| 0.0).unwrap();
    let expected = 2.0 * p.lambda / (p.rho * v * v - p.lambda - 2.0 * p.mu) + setup.c1;
    assert!((flat - expected).abs() < 1e-14);

    // at χ̃ = 0 the piecewise profile is even
    let sol = PerturbativeSolution::new(1.0, 0.0, 2, Branch::Piecewise).unwrap();
    for k in 1..50 {
        let s = 0.1 * k as f64;
        assert!((sol.eval(s) - sol.eval(-s)).abs() < 1e-14);
    }
}

#[test]
fn slope_root_solves_the_cubic() {
    for (chi, sigma) in [(0.1, 1.0), (0.1, -1.0), (-0.2, 1.0), (0.0, 1.0)] {
        for f in [0.3, 1.0, 2.5, PI] {
            let r = 2.0 * (1.0 - f64::cos(f));
            match slope_root(f, 1.0, chi, sigma) {
                SlopeRoot::Found(x) => {
                    assert!((x * x - chi * x.powi(3) - r).abs() < 1e-12);
                    assert!(x * sigma > 0.0);
                }
                other => panic!("{other:?}"),
            }
        }
    }
}

#[test]
fn exact_profile_reduces_to_kink_and_reports_collision() {
    let p = exact_profile_with(1.5, 0.0, Branch::Kink, (-8.0, 8.0), 161, 1e-12, 1e-14).unwrap();
    assert!(p.max_abs_error(|s| kink(s, 1.5)) < 1e-8);

    // first-order truncation error quarters when χ̃ halves
    let err = |c: f64| {
        let p = exact_profile_with(1.0, c, Branch::Piecewise, (-10.0, 10.0), 401, 1e-13, 1e-15).unwrap();
        let sol = PerturbativeSolution::new(1.0, c, 1, Branch::Piecewise).unwrap();
        p.max_abs_error(|s| sol.eval(s))
    };
    let ratio = err(0.02) / err(0.01);
    assert!((ratio - 4.0).abs() < 0.3, "{ratio}");

    // large χ̃ makes the selected root collide near the core
    let e = exact_profile_with(1.0, 0.5, Branch::Piecewise, (-5.0, 5.0), 101, 1e-10, 1e-12).unwrap_err();
    assert!(matches!(e, Error::Branch { .. }), "{e:?}");
}
