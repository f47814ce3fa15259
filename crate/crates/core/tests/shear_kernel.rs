use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shearlab::intervals::IntervalFamily;
use shearlab::shear::{
    closeness_intervals_full, closeness_intervals_sl2, closeness_intervals_sl2_default,
    closeness_intervals_vperp, commutation_uubar, delta_r, poly_coeff_bounds, relative_motion,
    renormalize_report, shear_compare, CentralizerTrack, VperpPart,
};
use shearlab::weight::adjoint_u;
use shearlab::{LabError, Sl2Matrix};

fn near_identity(rng: &mut ChaCha8Rng, size: f64) -> Sl2Matrix {
    let a = 1.0 + rng.gen_range(-size..size);
    let b = rng.gen_range(-size..size);
    let c = rng.gen_range(-size..size);
    // Solve for d so that det = 1.
    Sl2Matrix::raw(a, b, c, (1.0 + b * c) / a)
}

/// Dense scan plus bisection for `{s : f(s) <= 0}` endpoints.
fn scan_endpoints(f: &dyn Fn(f64) -> f64, s_max: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let pts: Vec<f64> = (0..=n).map(|k| s_max * (k as f64 / n as f64).powi(3)).collect();
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (f(a) <= 0.0) != (f(b) <= 0.0) {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..200 {
                let m = 0.5 * (lo + hi);
                if (f(m) <= 0.0) == (f(lo) <= 0.0) {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            out.push(0.5 * (lo + hi));
        }
    }
    out
}

#[test]
fn relative_motion_examples() {
    let id = Sl2Matrix::identity();
    let m = relative_motion(&id, 3.0, 1.25);
    assert!(m.max_diff(&Sl2Matrix::u(1.75)) < 1e-15);
    let h = Sl2Matrix::raw(1.2, 0.3, -0.4, (1.0 + 0.3 * -0.4) / 1.2);
    let direct = Sl2Matrix::u(3.0).mul(&h).mul(&Sl2Matrix::u(-5.0));
    assert!(relative_motion(&h, 3.0, 5.0).max_diff(&direct) < 1e-12);
}

#[test]
fn delta_r_examples() {
    assert_eq!(delta_r(0.0, 7.0).unwrap(), 0.0);
    assert!((delta_r(0.01, 10.0).unwrap() - 1.0 / 1.1).abs() < 1e-14);
    assert!(matches!(delta_r(-1.0, 1.0), Err(LabError::Singularity { .. })));
    for t in [1e-3, 1e-4, 1e-5] {
        let r = 0.37;
        assert!((delta_r(r, t).unwrap() / (t * t) - r).abs() < 2.0 * r * r * t);
    }
}

#[test]
fn commutation_examples() {
    let c = commutation_uubar(5.0, 0.0).unwrap();
    assert_eq!((c.r_prime, c.omega, c.t_prime), (0.0, 0.0, 5.0));
    let c = commutation_uubar(0.0, 0.3).unwrap();
    assert_eq!((c.r_prime, c.omega, c.t_prime), (0.3, 0.0, 0.0));
    let c = commutation_uubar(2.0, 0.1).unwrap();
    let lhs = Sl2Matrix::u(2.0).mul(&Sl2Matrix::ubar(0.1));
    assert!(c.product().max_diff(&lhs) < 1e-12);
    assert!(matches!(commutation_uubar(2.0, -0.5), Err(LabError::Singularity { .. })));
}

#[test]
fn sl2_closeness_trivial_and_oracle() {
    let fam = closeness_intervals_sl2_default(&Sl2Matrix::identity(), 0.1, 0.5, 1.0, 1.0).unwrap();
    assert_eq!(fam.family.len(), 1);
    assert_eq!(fam.family.intervals()[0].lo, 0.0);
    assert_eq!(fam.family.intervals()[0].hi, 1e6);

    let h = Sl2Matrix::ubar(1e-6);
    let out = closeness_intervals_sl2_default(&h, 0.1, 0.5, 1.0, 1.0).unwrap();
    let f = |s: f64| (1e-6 * s * s).abs() - 1.0f64.max(s.sqrt());
    let oracle = scan_endpoints(&f, 1e6, 200_000);
    let ends: Vec<f64> = out.family.intervals().iter().flat_map(|i| [i.lo, i.hi]).filter(|x| *x > 0.0 && *x < 1e6).collect();
    assert_eq!(ends.len(), oracle.len());
    for (a, b) in ends.iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-6 * b);
    }

    assert!(matches!(
        closeness_intervals_sl2_default(&Sl2Matrix::ubar(0.5), 0.1, 0.5, 1.0, 1.0),
        Err(LabError::Precondition(_))
    ));
}

#[test]
fn sl2_closeness_feedback() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let h = near_identity(&mut rng, 1e-3);
        let (kappa, r0, c) = (0.5, 1.0, 1.0);
        let out = closeness_intervals_sl2(&h, 0.01, kappa, r0, c, 1e6, 4096).unwrap();
        assert!(out.family.len() <= 2);
        let f = |s: f64| (-(h.b) * s * s + (h.a - h.d) * s).abs() - c * r0.max(s.powf(1.0 - kappa));
        for iv in out.family.intervals() {
            for k in 1..50 {
                let s = iv.lo + iv.len() * k as f64 / 50.0;
                assert!(f(s) <= 1e-9 * (1.0 + s));
            }
        }
        for g in out.family.gaps() {
            assert!(f(0.5 * (g.lo + g.hi)) > 0.0);
        }
    }
}

#[test]
fn vperp_examples() {
    let full = closeness_intervals_vperp(&[0.0, 0.0, 0.0], 0.1, 1.0, 1e6).unwrap();
    assert_eq!(full.len(), 1);
    let top = closeness_intervals_vperp(&[0.0, 0.0, 0.05], 0.1, 1.0, 1e6).unwrap();
    assert_eq!((top.len(), top.intervals()[0].hi), (1, 1e6));
    let eps = 0.1;
    let fam = closeness_intervals_vperp(&[eps / 2.0, 0.0, 0.0], eps, 1.0, 1e6).unwrap();
    let f = |s: f64| {
        adjoint_u(s, &[eps / 2.0, 0.0, 0.0]).iter().fold(0.0f64, |m, x| m.max(x.abs())) - eps
    };
    let oracle = scan_endpoints(&f, 1e6, 100_000);
    assert_eq!(fam.len(), 1);
    assert!((fam.intervals()[0].hi - oracle[0]).abs() < 1e-9);
    assert!((oracle[0] - 2.0f64.sqrt()).abs() < 1e-9);
}

#[test]
fn full_profile_cases() {
    let id = |s: f64| s;
    let p = closeness_intervals_full(&Sl2Matrix::identity(), &[], 0.1, 0.5, 1.0, 1.0, 0.3, &id, 1e6).unwrap();
    assert_eq!(p.intervals.len(), 1);
    let h = Sl2Matrix::raw(1.0 + 1e-4, 1e-7, 0.0, 1.0 / (1.0 + 1e-4));
    let p = closeness_intervals_full(&h, &[], 0.1, 0.5, 1.0, 1.0, 0.3, &id, 1e6).unwrap();
    let q = closeness_intervals_sl2(&h, 0.1, 0.5, 1.0, 1.0, 1e6, 4096).unwrap();
    assert_eq!(p.intervals, q.family);

    // Two parts against a pointwise AND on a 10⁵ grid.
    let parts = [VperpPart { highest_weight: 2, coeffs: vec![1e-4, -2e-3, 0.01] }];
    let s_max = 2000.0;
    let p = closeness_intervals_full(&h, &parts, 0.1, 0.5, 1.0, 1.0, 0.3, &id, s_max).unwrap();
    let sl2_ok = |s: f64| (-(h.b) * s * s + (h.a - h.d) * s).abs() <= 1.0f64.max(s.sqrt());
    let vp_ok = |s: f64| adjoint_u(s, &parts[0].coeffs).iter().all(|x| x.abs() <= 0.1);
    let n = 100_000;
    let cell = s_max / n as f64;
    let mut mismatched = 0.0;
    for k in 0..n {
        let s = (k as f64 + 0.5) * cell;
        if (sl2_ok(s) && vp_ok(s)) != p.intervals.contains(s) {
            mismatched += cell;
        }
    }
    assert!(mismatched <= 4.0 * cell);
    assert!(p.bounds.iter().all(|(_, v)| v.is_finite()));
    let drift = |s: f64| s + 3.0 * s.max(1.0);
    assert!(closeness_intervals_full(&h, &[], 0.1, 0.5, 1.0, 1.0, 0.3, &drift, 1e6).is_err());
}

#[test]
fn poly_bounds_examples() {
    let zero = poly_coeff_bounds(&[0.0, 0.0, 0.0], 1.0, 0.5, 100.0, 1.0).unwrap();
    assert!(zero.recovered.iter().all(|v| *v == 0.0));
    let l = 50.0;
    let lin = poly_coeff_bounds(&[0.0, 1.0 / l], 1.0, 1.0, l, 1.0).unwrap();
    assert!((lin.recovered[1] - 1.0 / l).abs() < 1e-12);
    assert!(lin.constants[1] <= 10.0 && lin.constants[1] >= 0.1);
    // Extremal degree-2 instance touching the hypothesis.
    let (r0, kappa, c) = (1.0, 0.5, 1.0);
    let l: f64 = 400.0;
    let p = [0.0, 0.9 * 1.5 / l.sqrt(), -0.9 * 0.5 / l.powf(1.5)];
    let b = poly_coeff_bounds(&p, r0, kappa, l, c).unwrap();
    assert!(b.constants.iter().all(|x| x.is_finite() && *x < 1e3));
    assert!(matches!(poly_coeff_bounds(&[5.0], 1.0, 0.5, 10.0, 1.0), Err(LabError::Precondition(_))));
}

#[test]
fn renormalization_examples() {
    let h = Sl2Matrix::raw(1.01, 0.02, -0.03, (1.0 + 0.02 * -0.03) / 1.01);
    let parts = [VperpPart { highest_weight: 2, coeffs: vec![0.1, 0.2, 0.3] }];
    for e in renormalize_report(&h, &parts, 0.0, 3.0, 4.0).unwrap() {
        assert!((e.factor() - 1.0).abs() < 1e-15, "{}", e.name);
    }
    let s: f64 = 37.0;
    let rep = renormalize_report(&h, &parts, s.ln(), s, s).unwrap();
    let get = |n: &str| rep.iter().find(|e| e.name == n).unwrap().clone();
    assert!((get("shear_s").after + 1.0).abs() < 1e-12);
    assert!((get("b").factor() - s).abs() < 1e-12 * s);
    assert!((get("c").factor() - 1.0 / s).abs() < 1e-12);
    assert!((get("vperp0.0").factor() - s).abs() < 1e-12 * s);
    assert!(matches!(renormalize_report(&h, &parts, 800.0, 1.0, 1.0), Err(LabError::Range(_))));
}

#[test]
fn shear_compare_examples() {
    let eps = 0.01;
    let zero = CentralizerTrack { at0: 0.0, at_s1: 0.0, at_s2: 0.0 };
    let out = shear_compare(&[zero], eps, 50.0, 100.0).unwrap();
    assert_eq!(out.coeff_constants[0], [0.0, 0.0, 0.0]);
    assert_eq!(out.sup_measured[0], 0.0);

    // p(t) = ε'(1 − 3t/s2 + 2t²/s2²) vanishes at s2/2 and equals ε' at s2.
    let s2 = 100.0;
    let e = 0.9 * eps;
    let p = |t: f64| e * (1.0 - 3.0 * t / s2 + 2.0 * t * t / (s2 * s2));
    let tr = CentralizerTrack { at0: p(0.0), at_s1: p(s2 / 2.0), at_s2: p(s2) };
    let out = shear_compare(&[tr], eps, s2 / 2.0, s2).unwrap();
    let scan = (0..=100_000).map(|k| p(s2 * k as f64 / 1e5).abs()).fold(0.0, f64::max) / eps;
    assert!((out.sup_measured[0] - scan).abs() < 1e-6);
    assert!(out.sup_bound[0] >= scan && out.sup_bound[0] <= 5.0 * scan);
    assert!(matches!(shear_compare(&[tr], eps, 10.0, s2), Err(LabError::Precondition(_))));
}

proptest! {
    #[test]
    fn relative_motion_keeps_b(a in 0.5f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, t in -50.0f64..50.0, s in -50.0f64..50.0) {
        let h = Sl2Matrix::raw(a, b, c, (1.0 + b * c) / a);
        let m = relative_motion(&h, t, s);
        prop_assert_eq!(m.b, b);
        let direct = Sl2Matrix::u(t).mul(&h).mul(&Sl2Matrix::u(-s));
        prop_assert!(m.max_diff(&direct) < 1e-12 * direct.max_abs().max(1.0));
    }

    #[test]
    fn delta_r_matches_commutation(r in -0.9f64..0.9, t in 0.0f64..1.0) {
        let c = commutation_uubar(t, r).unwrap();
        prop_assert!((delta_r(r, t).unwrap() - (t - c.t_prime)).abs() < 1e-14);
    }

    #[test]
    fn poly_bounds_scale_covariant(v1 in -0.01f64..0.01, v2 in -1e-5f64..1e-5, lam in 0.5f64..2.0) {
        let l = 100.0;
        let c = 1e3;
        let a = poly_coeff_bounds(&[0.0, v1, v2], 1.0, 0.5, l, c).unwrap();
        let b = poly_coeff_bounds(&[0.0, v1 * lam, v2 * lam * lam], 1.0, 0.5, l / lam, c).unwrap();
        for i in 1..3 {
            prop_assert!((b.recovered[i] - a.recovered[i] * lam.powi(i as i32)).abs() < 1e-8 * a.recovered[i].abs().max(1e-12));
        }
    }

    #[test]
    fn intersection_never_exceeds_parts(b0 in -0.05f64..0.05, b1 in -0.01f64..0.01, b2 in -0.05f64..0.05) {
        let h = Sl2Matrix::raw(1.0, 1e-8, 0.0, 1.0);
        let parts = [VperpPart { highest_weight: 2, coeffs: vec![b0, b1, b2] }];
        let id = |s: f64| s;
        let p = closeness_intervals_full(&h, &parts, 0.1, 0.5, 1.0, 1.0, 0.3, &id, 1e5).unwrap();
        let v = closeness_intervals_vperp(&parts[0].coeffs, 0.1, 1.0, 1e5).unwrap();
        prop_assert!(p.intervals.measure() <= v.measure() + 1e-9);
        prop_assert!(p.intervals.len() <= p.count_bound);
        let _: &IntervalFamily = &p.intervals;
    }
}
