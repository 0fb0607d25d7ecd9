use super::*;
use proptest::prelude::*;

/// Composite Simpson rule with `n` (even) panels; the independent oracle for
/// the adaptive Gauss–Kronrod paths.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

fn transform_oracle(f: impl Fn(f64) -> f64, k: f64, a: f64, b: f64, n: usize) -> Complex64 {
    let re = simpson(|x| f(x) * (k * x).cos(), a, b, n);
    let im = simpson(|x| f(x) * (k * x).sin(), a, b, n);
    Complex64::new(re, im) / (2.0 * PI)
}

/// `(P_η ∗ g)(x)` by the substitution λ = x + η tan θ and Simpson in θ.
fn poisson_oracle(g: impl Fn(f64) -> f64, eta: f64, x: f64) -> f64 {
    let h = 0.5 * PI;
    let edge = 1e-9;
    simpson(|t| g(x + eta * t.tan()), -h + edge, h - edge, 20_000) / PI
}

#[test]
fn chebyshev_recurrence_matches_trig_form() {
    for k in 0..12u32 {
        for i in 0..=400 {
            let mu = -2.0 + 4.0 * i as f64 / 400.0;
            let x = (mu / 2.0).clamp(-1.0, 1.0);
            let direct = (k as f64 * x.acos()).cos();
            let v = TestFunction::chebyshev(k).evaluate(mu).unwrap();
            assert!((v - direct).abs() < 1e-12, "k={k} mu={mu}");
        }
    }
}

#[test]
fn evaluation_examples() {
    assert_eq!(TestFunction::chebyshev(2).evaluate(2.0).unwrap(), 1.0);
    assert_eq!(TestFunction::monomial(2).evaluate(1.5).unwrap(), 2.25);
    let smooth_one = poisson_smooth(TestFunction::monomial(0), 0.3).unwrap();
    for x in [-5.0, 0.0, 0.7, 100.0] {
        assert_eq!(smooth_one.evaluate(x).unwrap(), 1.0);
    }
    assert_eq!(TestFunction::zero().evaluate(0.3).unwrap(), 0.0);
}

#[test]
fn derivatives_match_finite_differences() {
    let z = ComplexPoint::new(0.3, 0.7).unwrap();
    let fns = vec![
        TestFunction::chebyshev(5),
        TestFunction::monomial(3),
        TestFunction::gaussian(0.4, 0.8).unwrap(),
        TestFunction::cosh_weighted(1.0, TestFunction::gaussian(0.0, 1.0).unwrap()).unwrap(),
        TestFunction::resolvent_re(z),
        TestFunction::resolvent_im(z),
        poisson_smooth(TestFunction::gaussian(0.0, 1.0).unwrap(), 0.5).unwrap(),
        poisson_smooth(TestFunction::monomial(2), 0.25).unwrap(),
        TestFunction::combination([(2.0, TestFunction::monomial(2)), (-1.0, TestFunction::chebyshev(3))]),
    ];
    let h = 1e-5;
    for f in &fns {
        for x in [-1.7, -0.2, 0.0, 0.9, 1.6] {
            let fd = (f.evaluate(x + h).unwrap() - f.evaluate(x - h).unwrap()) / (2.0 * h);
            let d = f.derivative(x).unwrap();
            assert!((fd - d).abs() < 1e-6 * (1.0 + d.abs()), "{f} at {x}: {fd} vs {d}");
        }
    }
}

#[test]
fn cosh_overflow_is_a_range_error() {
    let f = TestFunction::cosh_weighted(2.0, TestFunction::gaussian(0.0, 1.0).unwrap()).unwrap();
    assert!(matches!(f.evaluate(400.0), Err(Error::Range(_))));
    assert!(f.evaluate(3.0).unwrap().is_finite());
    assert!(TestFunction::cosh_weighted(0.0, TestFunction::gaussian(0.0, 1.0).unwrap()).is_err());
    assert!(TestFunction::cosh_weighted(1.0, TestFunction::monomial(2)).is_err());
}

#[test]
fn gaussian_transform_matches_quadrature() {
    let g = TestFunction::gaussian(0.0, 1.0).unwrap();
    let at0 = g.fourier_transform(0.0).unwrap();
    assert!((at0.re - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
    assert_eq!(at0.im, 0.0);
    let shifted = TestFunction::gaussian(0.7, 0.6).unwrap();
    for k in [-2.0, -0.5, 0.0, 1.0, 3.3] {
        for f in [&g, &shifted] {
            let oracle = transform_oracle(|x| f.evaluate(x).unwrap(), k, -30.0, 30.0, 20_000);
            assert!((f.fourier_transform(k).unwrap() - oracle).norm() < 1e-12, "{f} {k}");
        }
    }
    assert_eq!(TestFunction::zero().fourier_transform(1.3).unwrap(), Complex64::new(0.0, 0.0));
}

#[test]
fn cosh_weighted_transform_matches_quadrature() {
    let f = TestFunction::cosh_weighted(1.0, TestFunction::gaussian(0.2, 1.0).unwrap()).unwrap();
    for k in [0.0, 0.5, 2.0] {
        let oracle = transform_oracle(|x| f.evaluate(x).unwrap(), k, -40.0, 40.0, 40_000);
        assert!((f.fourier_transform(k).unwrap() - oracle).norm() < 1e-11);
    }
}

#[test]
fn resolvent_transforms_via_poisson_form() {
    // Im 1/(λ − z) = π P_y(λ − x): transform is ½e^{ikx − |k|y}.
    let z = ComplexPoint::new(0.4, 1.5).unwrap();
    let im = TestFunction::resolvent_im(z).fourier_transform(1.0).unwrap();
    let expected = 0.5 * Complex64::new(-1.5, 0.4).exp();
    assert!((im - expected).norm() < 1e-15);
    let re0 = TestFunction::resolvent_re(z).fourier_transform(0.0).unwrap();
    assert_eq!(re0, Complex64::new(0.0, 0.0));
    // Real part plus i times imaginary part of 1/(λ − z) vanishes for k < 0
    // (analytic in the lower half-plane).
    for k in [-0.5, -2.0] {
        let re = TestFunction::resolvent_re(z).fourier_transform(k).unwrap();
        let im = TestFunction::resolvent_im(z).fourier_transform(k).unwrap();
        assert!((re + Complex64::i() * im).norm() < 1e-15);
    }
}

#[test]
fn windowed_monomials_have_parity_transforms() {
    for degree in 0..5u32 {
        let f = TestFunction::monomial(degree);
        for k in [0.3, 1.0, 2.5] {
            let t = f.fourier_transform(k).unwrap();
            if degree % 2 == 0 {
                assert!(t.im.abs() < 1e-12 * (1.0 + t.re.abs()), "deg {degree}: {t}");
            } else {
                assert!(t.re.abs() < 1e-12 * (1.0 + t.im.abs()), "deg {degree}: {t}");
            }
        }
    }
}

#[test]
fn windowed_transform_matches_quadrature() {
    let f = TestFunction::chebyshev(2);
    for k in [0.0, 1.0, 4.0] {
        let oracle = transform_oracle(
            |x| f.evaluate(x).unwrap() * window(x),
            k,
            -WINDOW_SUPPORT,
            WINDOW_SUPPORT,
            40_000,
        );
        assert!((f.fourier_transform(k).unwrap() - oracle).norm() < 1e-10);
    }
}

#[test]
fn window_shape() {
    assert_eq!(window(0.0), 1.0);
    assert_eq!(window(3.0), 1.0);
    assert_eq!(window(-4.0), 0.0);
    assert_eq!(window(7.0), 0.0);
    assert!((window(3.5) - 0.5).abs() < 1e-15);
    for x in [-3.9, -3.2, 3.3, 3.8] {
        let h = 1e-6;
        let fd = (window(x + h) - window(x - h)) / (2.0 * h);
        assert!((fd - window_derivative(x)).abs() < 1e-6);
    }
}

#[test]
fn poisson_transform_obeys_convolution_theorem() {
    let base = TestFunction::gaussian(0.3, 0.8).unwrap();
    let eta = 0.5;
    let smoothed = poisson_smooth(base.clone(), eta).unwrap();
    // Sample the smoothed function once; its tail ~ η M₀/(πλ²) is
    // negligible in the transform beyond |λ| = 400 at |k| = 1.
    let step = 0.01;
    let n = 80_000;
    let xs: Vec<f64> = (0..=n).map(|i| -400.0 + i as f64 * step).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| smoothed.evaluate(x).unwrap()).collect();
    for k in [-1.0, 1.0] {
        let mut re = 0.0;
        let mut im = 0.0;
        for (i, (&x, &v)) in xs.iter().zip(&vals).enumerate() {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            re += w * v * (k * x).cos();
            im += w * v * (k * x).sin();
        }
        let direct = Complex64::new(re, im) * step / 3.0 / (2.0 * PI);
        let analytic = base.fourier_transform(k).unwrap() * (-eta * f64::abs(k)).exp();
        assert!((smoothed.fourier_transform(k).unwrap() - analytic).norm() < 1e-15);
        assert!((direct - analytic).norm() < 1e-5, "{direct} vs {analytic}");
    }
}

#[test]
fn poisson_semigroup_against_nested_quadrature() {
    let base = TestFunction::gaussian(0.0, 1.0).unwrap();
    let (eta, sigma) = (0.3, 0.45);
    let inner = poisson_smooth(base.clone(), sigma).unwrap();
    let combined = poisson_smooth(base.clone(), eta + sigma).unwrap();
    let twice = poisson_smooth(inner.clone(), eta).unwrap();
    for x in [-2.0, -0.5, 0.0, 0.8, 3.0] {
        let nested = poisson_oracle(|l| inner.evaluate(l).unwrap(), eta, x);
        let c = combined.evaluate(x).unwrap();
        assert!((nested - c).abs() < 1e-8, "{x}: {nested} vs {c}");
        assert!((twice.evaluate(x).unwrap() - c).abs() < 1e-14);
    }
}

#[test]
fn poisson_matches_direct_oracle() {
    let cases = vec![
        TestFunction::gaussian(0.5, 0.3).unwrap(),
        TestFunction::monomial(2),
        TestFunction::cosh_weighted(1.0, TestFunction::gaussian(0.0, 1.0).unwrap()).unwrap(),
        TestFunction::resolvent_im(ComplexPoint::new(0.2, 0.4).unwrap()),
    ];
    for base in cases {
        let s = poisson_smooth(base.clone(), 0.2).unwrap();
        for x in [-1.0, 0.1, 0.5, 2.0] {
            let oracle = poisson_oracle(
                |l| if l.abs() > 600.0 { 0.0 } else { base.integrable_value(l, false).unwrap() },
                0.2,
                x,
            );
            let v = s.evaluate(x).unwrap();
            assert!((v - oracle).abs() < 1e-8, "{base} at {x}: {v} vs {oracle}");
        }
    }
}

#[test]
fn smoothing_lowers_a_strict_maximum() {
    let g = TestFunction::gaussian(0.0, 1.0).unwrap();
    let s = poisson_smooth(g.clone(), 0.5).unwrap();
    assert!(s.evaluate(0.0).unwrap() < g.evaluate(0.0).unwrap());
    assert!(poisson_smooth(g.clone(), 0.0).is_err());
    assert!(poisson_smooth(g, -1.0).is_err());
}

#[test]
fn smoothing_error_shrinks_with_width() {
    let g = TestFunction::gaussian(0.2, 0.7).unwrap();
    let l1 = |eta: f64| {
        let s = poisson_smooth(g.clone(), eta).unwrap();
        simpson(
            |x| (g.evaluate(x).unwrap() - s.evaluate(x).unwrap()).abs(),
            -3.0,
            3.0,
            600,
        )
    };
    let errs: Vec<f64> = [0.5, 0.25, 0.125].iter().map(|&e| l1(e)).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn sobolev_norm_examples() {
    assert_eq!(TestFunction::zero().sobolev_norm(2.0).unwrap().value, 0.0);

    let g = TestFunction::gaussian(0.0, 1.0).unwrap();
    let norm = g.sobolev_norm(2.0).unwrap().value;
    // Second rule: Simpson over k ∈ [-40, 40].
    let oracle = simpson(
        |k| (1.0 + 2.0 * f64::abs(k)).powi(4) * g.fourier_transform(k).unwrap().norm_sqr(),
        -40.0,
        40.0,
        80_000,
    )
    .sqrt();
    assert!((norm - oracle).abs() < 1e-6 * oracle, "{norm} vs {oracle}");

    let tripled = g.clone().scaled(3.0).sobolev_norm(2.0).unwrap().value;
    assert!((tripled - 3.0 * norm).abs() < 1e-9 * norm);

    let mut last = 0.0;
    for s in [0.5, 1.0, 1.75, 2.0, 3.0] {
        let v = g.sobolev_norm(s).unwrap().value;
        assert!(v >= last);
        last = v;
    }
    assert!(g.sobolev_norm(0.0).is_err());
}

#[test]
fn sobolev_norm_of_smoothed_and_windowed_functions() {
    let z = ComplexPoint::new(0.0, 1.0).unwrap();
    // |φ̂|² = ¼ e^{−2|k|}; at s = 1: 2∫(1+2k)²¼e^{−2k}dk = ½(½ + 1 + 1) = 5/4.
    let v = TestFunction::resolvent_im(z).sobolev_norm(1.0).unwrap().value;
    assert!((v - 1.25f64.sqrt()).abs() < 1e-9);

    let cheb = TestFunction::chebyshev(2);
    let lo = cheb.sobolev_norm(0.75).unwrap().value;
    let hi = cheb.sobolev_norm(1.75).unwrap().value;
    assert!(lo > 0.0 && hi > lo);
}

#[test]
fn parses_specs() {
    assert_eq!(parse_spec("monomial:2").unwrap(), TestFunction::monomial(2));
    assert_eq!(parse_spec(" chebyshev:3 ").unwrap(), TestFunction::chebyshev(3));
    let f = parse_spec("0.5*chebyshev:2+1.0*monomial:4").unwrap();
    assert_eq!(
        f,
        TestFunction::Combination(vec![
            (0.5, TestFunction::chebyshev(2)),
            (1.0, TestFunction::monomial(4))
        ])
    );
    assert!((f.evaluate(1.0).unwrap() - (0.5 * -0.5 + 1.0)).abs() < 1e-15);
    let c = parse_spec("cosh:1(gaussian:0,1)").unwrap();
    assert!((c.evaluate(0.5).unwrap() - 0.5f64.cosh() * (-0.125f64).exp()).abs() < 1e-15);
    assert!(parse_spec("poisson:0.5(gaussian:0,1e+0)").is_ok());
    assert!(parse_spec("resolvent-im:0,2").is_ok());

    for bad in ["", "monomial", "monomial:-1", "monomial:1.5", "foo:1", "gaussian:0,-1",
        "monomial:2+", "cosh:1(monomial:2)", "poisson:0(gaussian:0,1)", "resolvent-re:0,0",
        "2*monomial:2)"] {
        assert!(parse_spec(bad).is_err(), "{bad}");
    }
}

fn arb_atom() -> impl Strategy<Value = TestFunction> {
    let finite = -10.0f64..10.0;
    prop_oneof![
        (0u32..8).prop_map(TestFunction::chebyshev),
        (0u32..8).prop_map(TestFunction::monomial),
        (finite.clone(), 0.01f64..5.0).prop_map(|(c, w)| TestFunction::gaussian(c, w).unwrap()),
        (finite.clone(), 0.01f64..5.0).prop_map(|(x, y)| {
            TestFunction::resolvent_im(ComplexPoint::new(x, y).unwrap())
        }),
        (0.01f64..3.0, finite.clone(), 0.1f64..2.0).prop_map(|(a, c, w)| {
            TestFunction::cosh_weighted(a, TestFunction::gaussian(c, w).unwrap()).unwrap()
        }),
        (0.01f64..3.0, 0u32..4).prop_map(|(eta, k)| {
            poisson_smooth(TestFunction::chebyshev(k), eta).unwrap()
        }),
    ]
}

proptest! {
    #[test]
    fn display_parse_round_trip(
        terms in proptest::collection::vec((-5.0f64..5.0, arb_atom()), 1..4),
        single in arb_atom(),
    ) {
        let combo = TestFunction::combination(terms);
        prop_assert_eq!(parse_spec(&combo.to_string()).unwrap(), combo);
        prop_assert_eq!(parse_spec(&single.to_string()).unwrap(), single);
    }
}
