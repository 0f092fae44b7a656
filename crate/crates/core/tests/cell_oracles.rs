use homoglab_core::cell::{homogenize, homogenized_tensor, solve_corrector};
use homoglab_core::coeff::CoefficientField;
use homoglab_core::linalg::Matrix;

/// `∫₀¹ (2 + sin 2πy)⁻¹ dy` by a fine midpoint rule (the exact value is 1/√3).
fn harmonic_mean_oracle() -> f64 {
    let n = 200_000;
    let inv: f64 = (0..n)
        .map(|i| {
            let y = (i as f64 + 0.5) / n as f64;
            1.0 / (2.0 + (std::f64::consts::TAU * y).sin())
        })
        .sum::<f64>()
        / n as f64;
    1.0 / inv
}

#[test]
fn laminate_oracle_at_256() {
    let f = CoefficientField::laminate(2, 2.0, 1.0).unwrap();
    let t = homogenized_tensor(&f, 256).unwrap();
    let a11 = harmonic_mean_oracle();
    assert!((a11 - 3f64.sqrt()).abs() < 1e-9);
    assert!((t.a_hat[(0, 0)] / a11 - 1.0).abs() < 1e-3);
    assert!((t.a_hat[(1, 1)] / 2.0 - 1.0).abs() < 1e-10);
    assert!(t.a_hat[(0, 1)].abs() < 1e-12);
    assert!(t.factor_defect() < 1e-10);
}

#[test]
fn laminate_corrector_profile() {
    // χ₁' = â/a − 1 with â the discrete harmonic mean; integrate and centre.
    let n = 128;
    let f = CoefficientField::laminate(2, 2.0, 1.0).unwrap();
    let c = solve_corrector(&f, n).unwrap();
    let a = |y: f64| 2.0 + (std::f64::consts::TAU * y).sin();
    let a_hat = harmonic_mean_oracle();
    let fine = 64;
    let mut chi = vec![0.0; n];
    for i in 1..n {
        let mut acc = 0.0;
        for k in 0..fine {
            let y = (i - 1) as f64 / n as f64 + (k as f64 + 0.5) / (fine * n) as f64;
            acc += (a_hat / a(y) - 1.0) / (fine * n) as f64;
        }
        chi[i] = chi[i - 1] + acc;
    }
    let mean = chi.iter().sum::<f64>() / n as f64;
    let scale = chi.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    for j in 0..n {
        for i in 0..n {
            let v = c.values[0][j * n + i];
            assert!((v - (chi[i] - mean)).abs() < 2e-3 * scale, "node ({i},{j})");
        }
    }
    assert!(c.values[1].iter().all(|v| v.abs() < 1e-14));
}

#[test]
fn constant_fields_are_exact() {
    for a in [Matrix::diag(&[2.0f64, 0.5]), Matrix::from_row_major(2, vec![1.5, 0.4, 0.4, 1.0])] {
        let f = CoefficientField::constant(a.clone()).unwrap();
        let c = solve_corrector(&f, 32).unwrap();
        let t = homogenize(&f, &c).unwrap();
        assert!(t.a_hat.sub(&a).frobenius() <= 1e-10 * a.frobenius());
        // Off-diagonal entries leave a round-off load; the corrector stays at that level.
        assert!(c.values.iter().flatten().all(|v| v.abs() < 1e-12));
        assert!(c.residuals.iter().all(|&r| r <= homoglab_core::cell::CELL_TOLERANCE));
    }
}

#[test]
fn trigonometric_refinement() {
    let f = CoefficientField::trigonometric(2, 0.5).unwrap();
    let a: Vec<f64> = [32, 64, 128, 256].iter().map(|&n| homogenized_tensor(&f, n).unwrap().a_hat[(0, 0)]).collect();
    let diffs: Vec<f64> = a.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    // Successive differences shrink (second-order: by about 4 per doubling).
    for w in diffs.windows(2) {
        assert!(w[1] < w[0], "{diffs:?}");
        assert!(w[0] / w[1] > 3.0 && w[0] / w[1] < 5.0, "{diffs:?}");
    }
    let a512 = homogenized_tensor(&f, 512).unwrap().a_hat[(0, 0)];
    assert!((a[3] / a512 - 1.0).abs() < 1e-3);
}

#[test]
fn homogenized_tensor_is_symmetric_and_in_band() {
    let fields = [
        CoefficientField::laminate(2, 2.0, 1.0).unwrap(),
        CoefficientField::trigonometric(2, 0.5).unwrap(),
        CoefficientField::half_ball(2, 0.5).unwrap(),
        CoefficientField::from_expressions(2, &["2 + sin(2*pi*y1)", "0.3*cos(2*pi*y2)", "2"], 0.3).unwrap(),
    ];
    for f in fields {
        let t = homogenized_tensor(&f, 64).unwrap();
        assert_eq!(t.a_hat.max_asymmetry(), 0.0);
        assert!(t.eig_min >= f.lambda() && t.eig_max <= 1.0 / f.lambda());
    }
}

#[test]
fn energy_identity_for_oblique_field() {
    let f = CoefficientField::from_expressions(2, &["2 + sin(2*pi*y1)", "0.3*cos(2*pi*y2)", "2"], 0.3).unwrap();
    let c = solve_corrector(&f, 48).unwrap();
    let t = homogenize(&f, &c).unwrap();
    for xi in [[1.0f64, 0.0], [0.0, 1.0], [0.6, 0.8]] {
        let e = c.energy(&f, &xi);
        let q = t.a_hat.bilinear(&xi, &xi);
        assert!(q <= e * (1.0 + 1e-8));
        assert!((e - q).abs() <= 1e-6 * e);
    }
}
