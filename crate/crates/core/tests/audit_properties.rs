use approx::assert_relative_eq;
use homoglab_core::audit::*;
use homoglab_core::cell::HomogenizedTensor;
use homoglab_core::coeff::CoefficientField;
use homoglab_core::kernel::WeightMethod;
use homoglab_core::linalg::Matrix;
use homoglab_core::pde::{solve_dirichlet, Domain};
use proptest::prelude::*;

fn re_zn(n: i32) -> impl Fn(&[f64]) -> f64 + Sync {
    move |x: &[f64]| {
        let r = x[0].hypot(x[1]);
        r.powi(n) * (n as f64 * x[1].atan2(x[0])).cos()
    }
}

fn identity_tensor() -> HomogenizedTensor<f64> {
    HomogenizedTensor::new(Matrix::identity(2), 1.0).unwrap()
}

#[test]
fn harmonic_baseline_constant_is_small() {
    let f = CoefficientField::identity(2).unwrap();
    let triple = BallTriple::ellipsoid(0.1, 0.2, 0.8, 1.0).unwrap();
    for n in 1..=8 {
        let g = re_zn(n);
        let u = solve_dirichlet(&f, 1.0, Domain::Disk { radius: 1.0 }, &g, 1.0 / 128.0).unwrap();
        let r = three_ball_audit(&u, &triple, &identity_tensor(), 0.1).unwrap();
        assert_eq!(r.eps_term, 0.0);
        assert_eq!(r.term2, 0.0);
        let c = r.c_hat.unwrap();
        assert!(c > 0.0 && c <= 4.0, "n={n}: Ĉ = {c}");
        assert!(r.case_consistent);
    }
}

#[test]
fn exponent_closed_forms() {
    // α = ln(R/2r₂)/ln(R/r₁), β = ln(λR₃/2R₂)/ln(R₃/R₁), evaluated directly.
    let (r1, r2, outer) = (0.05f64, 0.15, 0.9);
    assert_relative_eq!(exponent_alpha(r1, r2, outer).unwrap(), (outer / (2.0 * r2)).ln() / (outer / r1).ln(), max_relative = 1e-14);
    let (a, b, c, l) = (0.01f64, 0.02, 0.1, 0.8);
    assert_relative_eq!(exponent_beta(a, b, c, l).unwrap(), (l * c / (2.0 * b)).ln() / (c / a).ln(), max_relative = 1e-14);
    // A ball triple selects m through radii whose α equals its β.
    let t = BallTriple::ball(a, b, c, l).unwrap();
    let s = l.sqrt();
    assert_relative_eq!(exponent_alpha(s * a, b / s, s * c).unwrap(), t.exponent().unwrap(), max_relative = 1e-12);
}

#[test]
fn case_selection_is_consistent() {
    for &eps in &[0.5, 0.1, 1e-3, 1e-8] {
        for &delta in &[1e-1, 1e-4, 1e-9] {
            let (r1, r2, outer) = (0.1f64, 0.2, 0.8);
            let s = select_m(delta, 1.0, r1, r2, outer, eps).unwrap();
            let m0 = s.m0.unwrap();
            let k = m0 as i32;
            // m₀ is the least m with (r₁/R)^m < δ/M.
            assert!((r1 / outer).powi(k) <= delta * (1.0 + 1e-12));
            assert!(k == 1 || (r1 / outer).powi(k - 1) > delta);
            let eln = eps * (1.0 / eps + 2.0).ln();
            let case1 = eln * (2.0 * r2 / r1).powi(k) <= (2.0 * r2 / outer).powi(k);
            assert_eq!(s.case == 1, case1, "ε={eps} δ={delta}");
            // m₁ is the least m with (r₁/R)^m < εln.
            let m1 = s.m1.unwrap() as i32;
            assert!((r1 / outer).powi(m1) < eln * (1.0 + 1e-12));
            assert!(m1 == 1 || (r1 / outer).powi(m1 - 1) >= eln * (1.0 - 1e-12));
        }
    }
}

#[test]
fn zero_solution_chain() {
    let f = CoefficientField::identity(2).unwrap();
    let u = solve_dirichlet(&f, 1.0, Domain::Disk { radius: 1.0 }, &|_: &[f64]| 0.0, 1.0 / 32.0).unwrap();
    let c = propagate_smallness(&u, 0.1, 0.05, 1.0, 2.0, &[0.3, 0.0]).unwrap();
    assert_eq!(c.m, 6);
    assert!(c.holds);
    assert!(c.iterated.iter().all(|&b| b == 0.0) && c.closed_form == 0.0);
    assert!(c.audits.iter().all(|a| a.c_hat_undefined));
}

#[test]
fn chain_geometry() {
    let f = CoefficientField::identity(2).unwrap();
    let g = re_zn(3);
    let u = solve_dirichlet(&f, 1.0, Domain::Disk { radius: 1.0 }, &g, 1.0 / 64.0).unwrap();
    let c = propagate_smallness(&u, 0.1, 0.05, 1.0, 4.0, &[0.0, 0.2]).unwrap();
    assert_eq!(c.m, 4);
    for (i, x) in c.centers.iter().enumerate() {
        assert_relative_eq!(x[1], 0.05 * i as f64, epsilon = 1e-15);
        assert_eq!(x[0], 0.0);
    }
    assert_eq!(c.iterated.len(), c.m);
    assert!(matches!(
        propagate_smallness(&u, 0.1, 0.05, 1.0, 4.0, &[0.0, 0.7]),
        Err(homoglab_core::Error::ChainExitsDomain { .. })
    ));
}

#[test]
fn propagation_bound_grows_with_chain_length() {
    for &(beta, c, delta, et) in &[(0.3, 2.0, 1e-6, 1e-4), (0.5, 1.5, 1e-3, 0.0), (0.7, 4.0, 1e-9, 1e-2)] {
        let b: Vec<f64> = (1..=10).map(|m| propagation_bound(beta, c, delta, et, m)).collect();
        assert!(b.windows(2).all(|w| w[1] >= w[0]), "{b:?}");
    }
}

#[test]
fn doubling_radius_monotone() {
    let c_fn = |n: f64| 1.0 + n;
    let mut last_k = 0;
    let mut last_d = f64::INFINITY;
    for r0 in [0.4, 0.2, 0.1, 0.05, 0.01] {
        let d = doubling_propagation(&c_fn, 1.0, r0, 0.1).unwrap();
        assert!(d.k0 >= last_k && d.delta0 <= last_d);
        (last_k, last_d) = (d.k0, d.delta0);
    }
}

#[test]
fn reports_are_deterministic() {
    let f = CoefficientField::trigonometric(2, 0.5).unwrap();
    let g = re_zn(2);
    let t = homoglab_core::cell::homogenized_tensor(&f, 32).unwrap();
    let triple = BallTriple::ellipsoid(0.1, 0.2, 0.8, 0.5).unwrap();
    let run = || {
        let e = homoglab_core::ellipsoid::Ellipsoid::new(t.clone(), 0.8).unwrap();
        let u = solve_dirichlet(&f, 0.25, Domain::Ellipse(e), &g, 1.0 / 32.0).unwrap();
        three_ball_audit(&u, &triple, &t, 0.25).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn constant_field_sweep_is_floor_limited() {
    let f = CoefficientField::identity(2).unwrap();
    let g = re_zn(3);
    let tensor = identity_tensor();
    let config = SweepConfig {
        field: f,
        tensor: tensor.clone(),
        eps: vec![0.25, 0.125],
        triple: BallTriple::ellipsoid(0.1, 0.2, 0.8, 1.0).unwrap(),
        points_per_period: 8,
        h_cap: 1.0 / 32.0,
        boundary: &g,
        probes: probe_points(&tensor, 0.8, 2, 8),
        weights: WeightMethod::ReactionFlux,
    };
    let report = epsilon_sweep(&config).unwrap();
    assert!(report.floor_limited);
    assert!(report.rows.iter().all(|r| r.failed.is_none() && r.h == 1.0 / 32.0));
    assert_eq!(report.rows[0].defect, report.rows[1].defect);
}

proptest! {
    #[test]
    fn exponents_lie_in_unit_interval(r1 in 0.001f64..0.08, k in 1.05f64..2.4, t in 0.0f64..0.99) {
        let r2 = r1 * k;
        let outer = 4.0 * r2 + t * (1.0 - 4.0 * r2);
        let a = exponent_alpha(r1, r2, outer).unwrap();
        prop_assert!(a > 0.0 && a < 1.0);
    }

    #[test]
    fn beta_lies_in_unit_interval(r1 in 0.001f64..0.01, k in 1.05f64..3.0, lambda in 0.2f64..1.0, s in 2.5f64..20.0) {
        let r2 = r1 * k;
        let r3 = 2.0 * r2 / lambda * s / 2.0 + r2;
        if let Ok(b) = exponent_beta(r1, r2, r3, lambda) {
            prop_assert!(b > 0.0 && b < 1.0);
        }
    }
}
