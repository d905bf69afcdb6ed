//! Structural collar-scaling identities and the fold-point degeneracy of the
//! vertical symplectic form.

use foldform_core::chart::Chart;
use foldform_core::error::Error;
use foldform_core::expr::ScalarExpr;
use foldform_core::fibration::horizontal_from_matrix;
use foldform_core::folding::{make_gluing_profile, ProfileShape};
use foldform_core::form::DifferentialForm;
use foldform_core::map::SmoothMap;

/// Pulling the rotational Liouville form back through the radial collar
/// parametrization of the disk gives exactly `e^{t+1}` times the boundary
/// form: the angular version for the parametrized circle.
#[test]
fn disk_collar_scaling_is_structural_n1() {
    let middle = Chart::new(
        "mid",
        vec![
            Chart::line("t", -1.3, 1.3),
            Chart::angle("phi"),
            Chart::angle("theta"),
        ],
        None,
    )
    .unwrap();
    let fiber = Chart::new(
        "d2",
        vec![Chart::line("x", -1.0, 1.0), Chart::line("y", -1.0, 1.0)],
        None,
    )
    .unwrap();
    let scale = ((ScalarExpr::var("t") + ScalarExpr::one()) * ScalarExpr::rational(1, 2)).exp();
    let embed = SmoothMap::closed(
        &middle,
        &fiber,
        vec![
            &scale * &ScalarExpr::var("phi").cos(),
            &scale * &ScalarExpr::var("phi").sin(),
        ],
    )
    .unwrap();
    let lambda = DifferentialForm::from_terms(
        &fiber,
        1,
        vec![
            (ScalarExpr::var("x"), vec![1]),
            (-ScalarExpr::var("y"), vec![0]),
        ],
    )
    .unwrap();
    let pulled = embed.pullback(&lambda).unwrap();
    // expected: e^{t+1} dphi, with no dt component
    let expect = DifferentialForm::from_terms(
        &middle,
        1,
        vec![(
            (ScalarExpr::var("t") + ScalarExpr::one()).exp(),
            vec![1],
        )],
    )
    .unwrap();
    assert!(pulled.structurally_equal(&expect), "{pulled:?}");
}

/// The ambient version for higher dimension: radial scaling by
/// `e^{(t+1)/2}` multiplies the rotational form by exactly `e^{t+1}` and the
/// dt-contributions cancel structurally.
#[test]
fn disk_collar_scaling_is_structural_n2() {
    let middle = Chart::new(
        "mid4",
        vec![
            Chart::line("t", -1.3, 1.3),
            Chart::line("x1", -1.0, 1.0),
            Chart::line("y1", -1.0, 1.0),
            Chart::line("x2", -1.0, 1.0),
            Chart::line("y2", -1.0, 1.0),
            Chart::angle("theta"),
        ],
        None,
    )
    .unwrap();
    let fiber = Chart::new(
        "d4",
        vec![
            Chart::line("x1", -1.0, 1.0),
            Chart::line("y1", -1.0, 1.0),
            Chart::line("x2", -1.0, 1.0),
            Chart::line("y2", -1.0, 1.0),
        ],
        None,
    )
    .unwrap();
    let scale = ((ScalarExpr::var("t") + ScalarExpr::one()) * ScalarExpr::rational(1, 2)).exp();
    let embed = SmoothMap::closed(
        &middle,
        &fiber,
        ["x1", "y1", "x2", "y2"]
            .iter()
            .map(|n| &scale * &ScalarExpr::var(n))
            .collect(),
    )
    .unwrap();
    let lambda = DifferentialForm::from_terms(
        &fiber,
        1,
        vec![
            (ScalarExpr::var("x1"), vec![1]),
            (-ScalarExpr::var("y1"), vec![0]),
            (ScalarExpr::var("x2"), vec![3]),
            (-ScalarExpr::var("y2"), vec![2]),
        ],
    )
    .unwrap();
    let pulled = embed.pullback(&lambda).unwrap();
    let grow = (ScalarExpr::var("t") + ScalarExpr::one()).exp();
    let expect = DifferentialForm::from_terms(
        &middle,
        1,
        vec![
            (&grow * &ScalarExpr::var("x1"), vec![2]),
            (-(&grow * &ScalarExpr::var("y1")), vec![1]),
            (&grow * &ScalarExpr::var("x2"), vec![4]),
            (-(&grow * &ScalarExpr::var("y2")), vec![3]),
        ],
    )
    .unwrap();
    assert!(pulled.structurally_equal(&expect), "{pulled:?}");
}

/// At the fold the fiberwise 2-form degenerates and the horizontal-complement
/// solve must report it; off the fold it succeeds.
#[test]
fn horizontal_solve_degenerates_exactly_at_fold() {
    let profile = make_gluing_profile(1.0, 0.2, &ProfileShape::default()).unwrap();
    let middle = Chart::new(
        "mid",
        vec![
            Chart::line("t", -1.2, 1.2),
            Chart::angle("phi"),
            Chart::angle("theta"),
        ],
        None,
    )
    .unwrap();
    let alpha = DifferentialForm::d_coord(&middle, "phi").unwrap();
    let dth = DifferentialForm::d_coord(&middle, "theta").unwrap();
    let sigma = alpha
        .scale(&profile.f)
        .add(&dth.scale(&profile.g))
        .unwrap();
    let dsigma = sigma.d();
    // fiber directions (t, phi), base direction theta last: matches the
    // coordinate order already
    let at = |t: f64| dsigma.matrix_at(&[t, 0.7, 1.1]).unwrap();
    match horizontal_from_matrix(&at(0.0), 2, &[0.0, 0.7, 1.1]) {
        Err(Error::DegenerateVertical { .. }) => {}
        other => panic!("expected degenerate vertical form at the fold, got {other:?}"),
    }
    let u = horizontal_from_matrix(&at(0.4), 2, &[0.4, 0.7, 1.1]).unwrap();
    let m = at(0.4);
    for j in 0..2 {
        let mut v = 0.0;
        for (i, ui) in u.iter().enumerate() {
            v += ui * m[(i, j)];
        }
        assert!(v.abs() < 1e-12);
    }
}

/// The coefficient of the middle volume identity at the fold itself:
/// `n f(0)^{n-1} (f'(0) g(0) - f(0) g'(0)) = -n f(0)^n g'(0) > 0`.
#[test]
fn middle_identity_coefficient_at_fold() {
    let profile = make_gluing_profile(1.0, 0.2, &ProfileShape::default()).unwrap();
    let ev = |e: &ScalarExpr| e.eval(&|n| (n == "t").then_some(0.0)).unwrap();
    for n in [1i32, 2, 3] {
        let d = profile.positivity_expr();
        let coeff = ScalarExpr::constant(n as f64) * profile.f.powi(n - 1) * d;
        let f0 = ev(&profile.f);
        let gp0 = ev(&profile.g_prime());
        let expect = -(n as f64) * f0.powi(n) * gp0;
        let got = ev(&coeff);
        assert!(got > 0.0);
        assert!((got - expect).abs() < 1e-12 * expect.abs());
    }
}

/// The displayed interleaved frame pairs the cubed symplectic form to the
/// constant 6.
#[test]
fn dbeta_cubed_on_interleaved_frame() {
    let c = Chart::new(
        "t3d3",
        vec![
            Chart::angle("th1"),
            Chart::angle("th2"),
            Chart::angle("th3"),
            Chart::line("x1", -1.0, 1.0),
            Chart::line("x2", -1.0, 1.0),
            Chart::line("x3", -1.0, 1.0),
        ],
        None,
    )
    .unwrap();
    let beta = DifferentialForm::from_terms(
        &c,
        1,
        vec![
            (ScalarExpr::var("x1"), vec![0]),
            (-ScalarExpr::var("x2"), vec![1]),
            (ScalarExpr::var("x3"), vec![2]),
        ],
    )
    .unwrap();
    let top = beta.d().wedge_power(3).unwrap();
    // frame (d/dth1, d/dx1, d/dth2, d/dx2, d/dth3, d/dx3)
    let e = |i: usize| {
        let mut v = [0.0; 6];
        v[i] = 1.0;
        v
    };
    let frame = [e(0), e(3), e(1), e(4), e(2), e(5)];
    let refs: Vec<&[f64]> = frame.iter().map(|v| v.as_slice()).collect();
    let v = top
        .eval_frame(&[0.3, 0.7, 1.1, 0.2, 0.1, 0.4], &refs)
        .unwrap();
    assert_eq!(v, 6.0);
}
