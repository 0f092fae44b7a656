use homoglab_core::cell::HomogenizedTensor;
use homoglab_core::coeff::CoefficientField;
use homoglab_core::ellipsoid::Ellipsoid;
use homoglab_core::kernel::{boundary_weights, WeightMethod};
use homoglab_core::linalg::Matrix;
use homoglab_core::pde::*;

fn re_z3(x: &[f64]) -> f64 {
    x[0].powi(3) - 3.0 * x[0] * x[1] * x[1]
}

fn identity() -> CoefficientField<f64> {
    CoefficientField::identity(2).unwrap()
}

#[test]
fn manufactured_solution_is_second_order() {
    let errors: Vec<f64> = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]
        .iter()
        .map(|&h| {
            let u = solve_dirichlet(&identity(), 1.0, Domain::Disk { radius: 1.0 }, &re_z3, h).unwrap();
            u.mesh.nodes.iter().zip(&u.values).map(|(p, v)| (v - re_z3(p)).abs()).fold(0.0, f64::max)
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((1.7..=2.3).contains(&order), "{errors:?}");
    }
}

#[test]
fn maximum_principle_band() {
    let fields = [identity(), CoefficientField::laminate(2, 2.0, 1.0).unwrap(), CoefficientField::trigonometric(2, 0.5).unwrap()];
    for f in fields {
        let h = 1.0 / 128.0;
        let g = |x: &[f64]| x[0] * x[1] + 0.5 * x[0].powi(3);
        let u = solve_dirichlet(&f, 1.0 / 16.0, Domain::Disk { radius: 1.0 }, &g, h).unwrap();
        let bmax = u.mesh.outer.iter().map(|&i| g(&u.mesh.nodes[i]).abs()).fold(0.0, f64::max);
        let umax = u.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(umax <= bmax + 10.0 * h * h, "{umax} vs {bmax}");
        assert!(u.residual() <= 1e-9);
    }
}

#[test]
fn linear_data_is_reproduced_for_constant_fields() {
    let f = CoefficientField::constant(Matrix::diag(&[2.0, 1.0])).unwrap();
    let u = solve_dirichlet(&f, 1.0, Domain::Disk { radius: 1.0 }, &|x: &[f64]| x[0], 1.0 / 32.0).unwrap();
    assert!(u.mesh.nodes.iter().zip(&u.values).all(|(p, v)| (v - p[0]).abs() < 1e-9));
}

#[test]
fn half_disk_symmetry() {
    let f = identity();
    let h = 1.0 / 32.0;
    let odd = |x: &[f64]| x[1] * (1.0 + x[0]);
    let u = solve_half(&f, 1.0, 1.0, FlatCondition::Dirichlet, &odd, h).unwrap();
    let full = solve_dirichlet(&f, 1.0, Domain::Disk { radius: 1.0 }, &odd, h).unwrap();
    let d = max_difference_on_half(&full, &u).unwrap();
    let scale = u.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(d <= 1e-9 * scale, "{d}");
    // Full-disk solution with odd data is odd: mirrored node pairs cancel.
    for (i, &j) in full.mesh.mirror.iter().enumerate() {
        assert!((full.values[i] + full.values[j]).abs() <= 1e-9 * scale);
    }
    let even = |x: &[f64]| x[1] * x[1] + x[0];
    let v = solve_half(&f, 1.0, 1.0, FlatCondition::Neumann, &even, h).unwrap();
    let full = solve_dirichlet(&f, 1.0, Domain::Disk { radius: 1.0 }, &even, h).unwrap();
    for (i, &j) in full.mesh.mirror.iter().enumerate() {
        assert!((full.values[i] - full.values[j]).abs() <= 1e-9);
    }
    assert!(max_difference_on_half(&full, &v).unwrap() <= 1e-8);
}

#[test]
fn eigen_type_limits() {
    let f = identity();
    let h = 1.0 / 32.0;
    let base = solve_dirichlet(&f, 1.0, Domain::Disk { radius: 1.0 }, &re_z3, h).unwrap();
    let tiny = solve_eigen_type(&f, 1.0, 1e-10, &re_z3, Domain::Disk { radius: 1.0 }, h).unwrap();
    let diff = base.values.iter().zip(&tiny.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-9, "{diff}");
    let zero = solve_eigen_type(&f, 1.0, 4.0, &|_: &[f64]| 0.0, Domain::Disk { radius: 1.0 }, h).unwrap();
    assert!(zero.values.iter().all(|&v| v == 0.0));
    // The first Dirichlet eigenvalue of the unit disk is j₀,₁² ≈ 5.783.
    let near = solve_eigen_type(&f, 1.0, 5.7832, &|_: &[f64]| 0.0, Domain::Disk { radius: 1.0 }, h);
    assert!(near.is_err());
}

#[test]
fn corrector_fields() {
    let t = HomogenizedTensor::new(Matrix::diag(&[2.0, 1.0]), 0.5).unwrap();
    let e = Ellipsoid::new(t.clone(), 0.5).unwrap();
    let c = CoefficientField::constant(Matrix::diag(&[2.0, 1.0])).unwrap();
    let psi = dirichlet_corrector(&c, 1.0, &e, 1.0 / 32.0).unwrap();
    for (k, p) in psi.iter().enumerate() {
        assert!(p.mesh.nodes.iter().zip(&p.values).all(|(x, v): (&[f64; 2], &f64)| (v - x[k]).abs() < 1e-9));
    }
    for method in [WeightMethod::OneSided, WeightMethod::ReactionFlux] {
        let w = boundary_weights(&c, 1.0, &e, &psi, method).unwrap();
        let dev = w.iter().map(|v: &f64| (v - 1.0).abs()).fold(0.0, f64::max);
        assert!(dev < 0.1, "{method:?}: {dev}");
    }
}

#[test]
fn corrector_rescaling_identity() {
    let f = CoefficientField::laminate(2, 2.0, 1.0).unwrap();
    let t = homoglab_core::cell::homogenized_tensor(&f, 64).unwrap();
    let (r, eps, h) = (0.4, 1.0 / 8.0, 1.0 / 64.0);
    let small = dirichlet_corrector(&f, eps / 2.0, &Ellipsoid::new(t.clone(), r / 2.0).unwrap(), h / 2.0).unwrap();
    let big = dirichlet_corrector(&f, eps, &Ellipsoid::new(t.clone(), r).unwrap(), h).unwrap();
    assert_eq!(small[0].mesh.node_count(), big[0].mesh.node_count());
    for k in 0..2 {
        let scale = big[k].values.iter().map(|v: &f64| v.abs()).fold(0.0, f64::max);
        for (a, b) in big[k].values.iter().zip(&small[k].values) {
            assert!((a - 2.0 * b).abs() <= 1e-9f64 * scale);
        }
    }
    let wb = boundary_weights(&f, eps, &Ellipsoid::new(t.clone(), r).unwrap(), &big, WeightMethod::ReactionFlux).unwrap();
    let ws = boundary_weights(&f, eps / 2.0, &Ellipsoid::new(t, r / 2.0).unwrap(), &small, WeightMethod::ReactionFlux).unwrap();
    assert!(wb.iter().zip(&ws).all(|(a, b): (&f64, &f64)| (a - b).abs() < 1e-6));
}

#[test]
fn laminate_weights_and_gradients_stay_bounded() {
    let f = CoefficientField::laminate(2, 2.0, 1.0).unwrap();
    let t = homoglab_core::cell::homogenized_tensor(&f, 64).unwrap();
    let e = Ellipsoid::new(t, 0.5).unwrap();
    let stats: Vec<(f64, f64)> = [1.0 / 16.0, 1.0 / 32.0]
        .iter()
        .map(|&eps| {
            let psi = dirichlet_corrector(&f, eps, &e, eps / 8.0).unwrap();
            let w = boundary_weights(&f, eps, &e, &psi, WeightMethod::ReactionFlux).unwrap();
            let wmax = w.iter().map(|v: &f64| v.abs()).fold(0.0, f64::max);
            (wmax, f64::max(psi[0].max_gradient(), psi[1].max_gradient()))
        })
        .collect();
    let ratio_w = stats[1].0 / stats[0].0;
    let ratio_g = stats[1].1 / stats[0].1;
    assert!((0.5..=2.0).contains(&ratio_w), "{stats:?}");
    assert!((0.5..=2.0).contains(&ratio_g), "{stats:?}");
}

#[test]
fn homogenization_trend_for_laminate() {
    let f = CoefficientField::laminate(2, 2.0, 1.0).unwrap();
    let t = homoglab_core::cell::homogenized_tensor(&f, 128).unwrap();
    let c = CoefficientField::constant(t.a_hat.clone()).unwrap();
    let g = |x: &[f64]| x[0] + 0.5 * x[1];
    let diffs: Vec<f64> = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0]
        .iter()
        .map(|&eps| {
            let h = eps / 8.0;
            let u = solve_dirichlet(&f, eps, Domain::Disk { radius: 0.5 }, &g, h).unwrap();
            let u0 = solve_dirichlet(&c, eps, Domain::Disk { radius: 0.5 }, &g, h).unwrap();
            u.values.iter().zip(&u0.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .collect();
    assert!(diffs.windows(2).all(|w| w[1] < w[0]), "{diffs:?}");
}

#[test]
fn sup_norm_properties() {
    let u = solve_dirichlet(&identity(), 1.0, Domain::Disk { radius: 1.0 }, &|_: &[f64]| -2.5, 1.0 / 16.0).unwrap();
    for r in [0.2, 0.5, 0.9] {
        let s = u.sup_norm(&Region::Ball { center: vec![0.1, 0.0], radius: r }).unwrap();
        assert!((s.value - 2.5).abs() < 1e-9);
    }
    let v = solve_dirichlet(&identity(), 1.0, Domain::Disk { radius: 1.0 }, &re_z3, 1.0 / 32.0).unwrap();
    let mut last = 0.0;
    for r in [0.1, 0.2, 0.4, 0.8] {
        let s = v.sup_norm(&Region::Ball { center: vec![0.0, 0.0], radius: r }).unwrap().value;
        assert!(s >= last);
        last = s;
    }
}

#[test]
fn lifted_residual_and_ufield_round_trip() {
    let f = CoefficientField::trigonometric(2, 0.5).unwrap();
    let eps = 1.0 / 4.0;
    let h = eps / 8.0;
    let u = solve_eigen_type(&f, eps, 1.0, &re_z3, Domain::Disk { radius: 0.5 }, h).unwrap();
    let v = u.lift_eigen(1.0, 0.25, h).unwrap();
    assert!(v.residual() <= 10.0 * (h * h + h * h));
    let mut buf = Vec::new();
    u.write_ufield(&mut buf).unwrap();
    let back = DiscreteField::<f64>::read_ufield(&buf[..]).unwrap();
    assert_eq!(back.values, u.values);
    assert!(back.residual() <= 1e-9);
}
