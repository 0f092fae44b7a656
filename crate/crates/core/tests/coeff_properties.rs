use homoglab_core::coeff::{fold, halton_points, holder_pairs, CoefficientField};
use homoglab_core::linalg::Matrix;
use proptest::prelude::*;

fn builtins() -> Vec<CoefficientField<f64>> {
    vec![
        CoefficientField::constant(Matrix::diag(&[2.0, 0.5])).unwrap(),
        CoefficientField::laminate(2, 2.0, 1.0).unwrap(),
        CoefficientField::trigonometric(2, 0.5).unwrap(),
        CoefficientField::half_ball(2, 0.5).unwrap(),
        CoefficientField::from_expressions(2, &["2 + sin(2*pi*y1)", "0.3*cos(2*pi*y2)", "2"], 0.3).unwrap(),
        CoefficientField::laminate(3, 2.0, 1.0).unwrap(),
    ]
}

#[test]
fn symmetry_and_band_on_quasi_random_samples() {
    for f in builtins() {
        let report = f.verify_ellipticity(10_000, 7).unwrap();
        assert!(report.pass, "{}", f.family_name());
        for y in halton_points::<f64>(f.dim(), 10_000) {
            assert_eq!(f.evaluate(&y).max_asymmetry(), 0.0);
        }
    }
}

#[test]
fn periodicity_is_bit_exact_on_dyadic_points() {
    // Dyadic coordinates make y + z exactly representable, so y − ⌊y⌋ is too.
    for f in builtins() {
        let d = f.dim();
        for k in 0..64u32 {
            let y: Vec<f64> = (0..d).map(|i| ((k * 37 + i as u32 * 101) % 1024) as f64 / 1024.0 + 0.5f64.powi(40)).collect();
            let base = f.evaluate(&y);
            for z in -2i32..=2 {
                let shifted: Vec<f64> = y.iter().enumerate().map(|(i, &v)| v + (z + i as i32 % 2) as f64).collect();
                assert_eq!(f.evaluate(&shifted), base, "{} at {y:?}", f.family_name());
            }
        }
    }
}

#[test]
fn reflection_is_idempotent_and_even() {
    for f in builtins().into_iter().filter(|f| f.is_block()) {
        let r = f.reflect_even().unwrap();
        let rr = r.reflect_even().unwrap();
        for y in halton_points::<f64>(f.dim(), 500) {
            let mut m = y.clone();
            let last = m.len() - 1;
            m[last] = -m[last];
            assert_eq!(r.evaluate(&y), rr.evaluate(&y));
            assert_eq!(r.evaluate(&y), r.evaluate(&m));
            assert_eq!(r.evaluate(&m), f.evaluate(&fold(&m)));
        }
    }
    let general = CoefficientField::from_expressions(2, &["2", "0.3*sin(2*pi*y2)", "2"], 0.3).unwrap();
    assert!(general.reflect_even().is_err());
}

#[test]
fn reflected_holder_quotient_at_most_doubles() {
    for f in builtins().into_iter().filter(|f| f.is_block() && f.dim() == 2) {
        let r = f.reflect_even().unwrap();
        let pairs = holder_pairs::<f64>(2, 10_000, 11, true);
        let folded: Vec<_> = pairs.iter().map(|(x, y)| (fold(x), fold(y))).collect();
        let base = f.holder_quotient_max(1.0, &folded).max(f.estimate_holder(1.0, 10_000, 11));
        let reflected = r.holder_quotient_max(1.0, &pairs);
        assert!(reflected <= 2.0 * base + 1e-12, "{}: {reflected} vs {base}", f.family_name());
    }
}

#[test]
fn laminate_holder_estimate() {
    // Frobenius norm of diag(s, s) carries a factor √2 over the scalar Lipschitz constant 2π.
    let f = CoefficientField::laminate(2, 2.0, 1.0).unwrap();
    let tau = f.estimate_holder(1.0, 10_000, 3);
    assert!(tau <= std::f64::consts::TAU * 2f64.sqrt() + 1e-9);
    assert!(tau > 0.9 * std::f64::consts::TAU * 2f64.sqrt());
    let c = CoefficientField::identity(2).unwrap();
    assert_eq!(c.estimate_holder(0.5, 1000, 3), 0.0);
}

#[test]
fn laminate_violation_location() {
    let f = CoefficientField::laminate(2, 2.0, 1.0).unwrap().with_lambda(0.9).unwrap();
    match f.verify_ellipticity(2000, 1) {
        Err(homoglab_core::Error::Ellipticity { point, .. }) => {
            assert!((point[0] - 0.25).abs() < 0.05, "{point:?}");
        }
        other => panic!("expected a violation, got {other:?}"),
    }
}

#[test]
fn descriptor_round_trip() {
    for f in builtins() {
        let back = CoefficientField::<f64>::from_descriptor(&f.descriptor()).unwrap();
        for y in halton_points::<f64>(f.dim(), 50) {
            assert_eq!(back.evaluate(&y), f.evaluate(&y));
        }
        if f.is_block() {
            let r = f.reflect_even().unwrap();
            let rb = CoefficientField::<f64>::from_descriptor(&r.descriptor()).unwrap();
            assert!(rb.is_reflected());
        }
    }
}

#[test]
fn single_precision_evaluation() {
    let f = CoefficientField::<f32>::trigonometric(2, 0.5).unwrap();
    let a = f.evaluate(&[0.25, 0.25]);
    assert!((a[(0, 0)] - 1.5).abs() < 1e-6);
}

proptest! {
    #[test]
    fn integer_shifts_leave_values_unchanged(y1 in 0u32..4096, y2 in 0u32..4096, z1 in -2i32..=2, z2 in -2i32..=2) {
        let y = [y1 as f64 / 4096.0, y2 as f64 / 4096.0];
        let s = [y[0] + z1 as f64, y[1] + z2 as f64];
        for f in builtins().into_iter().filter(|f| f.dim() == 2) {
            prop_assert_eq!(f.evaluate(&y), f.evaluate(&s));
        }
    }
}
