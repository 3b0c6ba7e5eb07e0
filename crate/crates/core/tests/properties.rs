mod common;

use std::sync::Arc;

use monotone_ratio::construct::{
    construct_f, make_staircase_rho, random_pair, GeneratorConfig, StaircaseSpec, DEFAULT_QUAD_TOL,
};
use monotone_ratio::expr::{eval_dual, parse};
use monotone_ratio::patterns::{detect_mics, detect_pattern, Direction, PatternKind, SignSource, DEFAULT_TOL_CONST};
use monotone_ratio::quad::adaptive_simpson;
use monotone_ratio::ratio::{uniform_grid, SampleSet};
use monotone_ratio::rules::{
    check_pair, family_from_rho_tilde, predict_r_family, predict_rho_tilde_dir, reflect, AnalysisConfig, Axis,
};
use monotone_ratio::{make_pair, DiffFn, DifferentiableFn, Interval, Sign};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{check_derivative, random_expr, AdCheck};

fn samples(window: Interval, n: usize, f: impl Fn(f64) -> f64) -> SampleSet {
    let points = uniform_grid(&window, n).into_iter().map(|x| (x, f(x))).collect();
    SampleSet { window, points }
}

/// Reflects samples of `h` into samples of `x ↦ sign·h(−x)`.
fn reflect_samples(s: &SampleSet, sign: f64) -> SampleSet {
    SampleSet {
        window: s.window.reflected(),
        points: s.points.iter().rev().map(|&(x, v)| (-x, sign * v)).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dual_derivative_matches_finite_differences(seed in any::<u64>(), x in -3.0..3.0f64) {
        let e = random_expr(&mut ChaCha8Rng::seed_from_u64(seed), 4);
        if let AdCheck::Disagree { ad, fd } = check_derivative(&e, x, 1e-5) {
            prop_assert!(false, "{e} at {x}: dual {ad}, fd {fd}");
        }
    }

    #[test]
    fn printing_then_parsing_is_stable(seed in any::<u64>(), x in -3.0..3.0f64) {
        let e = random_expr(&mut ChaCha8Rng::seed_from_u64(seed), 5);
        let text = e.to_string();
        let back = parse(&text).unwrap();
        prop_assert_eq!(back.to_string(), text.clone());
        match (eval_dual(&e, x), eval_dual(&back, x)) {
            (Ok(a), Ok(b)) => {
                prop_assert!(a.value == b.value || (a.value.is_nan() && b.value.is_nan()), "{}", text);
                prop_assert!(a.derivative == b.derivative || (a.derivative.is_nan() && b.derivative.is_nan()), "{}", text);
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{text}: {a:?} vs {b:?}"),
        }
    }

    #[test]
    fn proxy_patterns_mirror(c in -0.8..0.3f64, len in prop_oneof![Just(0.0), 0.02..0.5f64], a in 0.1..3.0f64, b in 0.1..3.0f64) {
        let d = c + len;
        let v = move |x: f64| if x < c { a * (x - c) } else if x > d { b * (x - d) } else { 0.0 };
        let s = samples(Interval::open(-1.0, 1.0), 400, v);
        let tol = 1e-7;
        let base = detect_pattern(&s, tol, SignSource::DerivativeProxy, Some(&v)).unwrap();
        prop_assert_eq!(base.kind, PatternKind::DownUp);
        // flats are absent or wider than a few grid steps; endpoints sit where |v| leaves the zero band
        let band = 2.0 * tol * (1.0 + 3.0) / a.min(b);
        prop_assert!((base.switch.lo - c).abs() < band && (base.switch.hi - d).abs() < band, "{}", base.switch);

        let neg = move |x: f64| -v(x);
        let vertical = detect_pattern(&s.negated(), tol, SignSource::DerivativeProxy, Some(&neg)).unwrap();
        prop_assert_eq!(vertical, base.mirrored_vertical(&s.window));

        let refl = move |x: f64| -v(-x);
        let horizontal = detect_pattern(&reflect_samples(&s, -1.0), tol, SignSource::DerivativeProxy, Some(&refl)).unwrap();
        let want = base.mirrored_horizontal();
        prop_assert_eq!(horizontal.kind, want.kind);
        prop_assert!(horizontal.switch.endpoint_distance(&want.switch) < 1e-9);
    }

    #[test]
    fn raw_patterns_mirror(c in -0.8..0.3f64, len in prop_oneof![Just(0.0), 0.02..0.5f64], a in 0.1..3.0f64, b in 0.1..3.0f64) {
        let d = c + len;
        let h = move |x: f64| if x < c { a * (c - x) * (c - x) } else if x > d { b * (x - d) } else { 0.0 };
        let s = samples(Interval::open(-1.0, 1.0), 400, h);
        let base = detect_pattern(&s, 1e-7, SignSource::RawValues, None).unwrap();
        prop_assert_eq!(base.kind, PatternKind::DownUp);
        let vertical = detect_pattern(&s.negated(), 1e-7, SignSource::RawValues, None).unwrap();
        prop_assert_eq!(vertical.kind, PatternKind::UpDown);
        prop_assert_eq!(vertical.switch, base.switch);
        let horizontal = detect_pattern(&reflect_samples(&s, 1.0), 1e-7, SignSource::RawValues, None).unwrap();
        prop_assert_eq!(horizontal.kind, PatternKind::DownUp);
        prop_assert!(horizontal.switch.endpoint_distance(&base.switch.reflected()) < 1e-12);
    }

    #[test]
    fn staircase_is_continuous_monotone_and_flat(
        starts in prop::collection::vec(0.0..1.0f64, 0..4),
        slopes in prop::collection::vec(0.2..3.0f64, 4),
        up in any::<bool>(),
    ) {
        // disjoint flats of length 0.3 separated by at least 0.2
        let flats: Vec<[f64; 2]> = starts
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let lo = -2.0 + i as f64 * 1.0 + 0.4 * s;
                [lo, lo + 0.3]
            })
            .collect();
        let direction = if up { Direction::Up } else { Direction::Down };
        let spec = StaircaseSpec {
            flats: flats.clone(),
            slopes: slopes[..flats.len() + 1].to_vec(),
            direction,
            anchor: [0.0, 0.5],
        };
        let rho = make_staircase_rho(&spec).unwrap();
        prop_assert!((rho.value(0.0).unwrap() - 0.5).abs() < 1e-12);
        for k in rho.kinks() {
            let left = rho.value(k - 1e-9).unwrap();
            let right = rho.value(k).unwrap();
            prop_assert!((left - right).abs() < 1e-8, "jump at {k}");
        }
        let s = samples(Interval::open(-3.0, 3.0), 1200, |x| rho.value(x).unwrap());
        for w in s.points.windows(2) {
            let step = direction.sign() * (w[1].1 - w[0].1);
            prop_assert!(step >= 0.0);
        }
        for (i, f) in flats.iter().enumerate() {
            let level = rho.flat_level(i).unwrap();
            for t in [0.0, 0.3, 0.7, 1.0] {
                prop_assert_eq!(rho.value(f[0] + t * (f[1] - f[0])).unwrap(), level);
            }
        }
        let probe = |x: f64| rho.value(x).unwrap();
        let mics = detect_mics(&s, DEFAULT_TOL_CONST, 3.0 * 6.0 / 1200.0, Some(&probe)).unwrap();
        prop_assert_eq!(mics.len(), flats.len());
        for (m, f) in mics.iter().zip(&flats) {
            prop_assert!((m.lo - f[0]).abs() < 1e-9 && (m.hi - f[1]).abs() < 1e-9, "{m}");
        }
    }

    #[test]
    fn polynomial_quadrature(c0 in -3.0..3.0f64, c1 in -3.0..3.0f64, c2 in -3.0..3.0f64, c3 in -3.0..3.0f64, a in -2.0..0.0f64, b in 0.0..2.0f64) {
        let p = |x: f64| Ok(c0 + x * (c1 + x * (c2 + x * c3)));
        let anti = |x: f64| x * (c0 + x * (c1 / 2.0 + x * (c2 / 3.0 + x * c3 / 4.0)));
        let v = adaptive_simpson(p, a, b, 1e-12).unwrap();
        prop_assert!((v - (anti(b) - anti(a))).abs() < 1e-11);
    }

    #[test]
    fn constructor_matches_antiderivative(z in -1.9..1.9f64, k in -2.0..2.0f64) {
        // ρ = x, g = eˣ: f = K e^z + (x − 1)eˣ − (z − 1)e^z
        let g: DifferentiableFn = Arc::new(parse("exp(x)").unwrap());
        let rho: DifferentiableFn = Arc::new(parse("x").unwrap());
        let f = construct_f(g, rho, z, k, Interval::open(-2.0, 2.0), DEFAULT_QUAD_TOL).unwrap();
        prop_assert_eq!(f.value(z).unwrap(), k * z.exp());
        for i in 0..=20 {
            let x = -2.0 + 0.2 * i as f64;
            let closed = k * z.exp() + (x - 1.0) * x.exp() - (z - 1.0) * z.exp();
            prop_assert!((f.value(x).unwrap() - closed).abs() <= 10.0 * DEFAULT_QUAD_TOL, "x = {x}");
        }
    }

    #[test]
    fn pair_validation_is_reflection_invariant(a in -3.0..3.0f64, b in -3.0..3.0f64, lo in -3.0..2.0f64, len in 0.5..3.0f64) {
        let g: DifferentiableFn = Arc::new(parse(&format!("{a:?}*x + {b:?}")).unwrap());
        let f: DifferentiableFn = Arc::new(parse("exp(x)").unwrap());
        let window = Interval::open(lo, lo + len);
        let direct = make_pair(f.clone(), g.clone(), window, 128);
        let mirrored = make_pair(
            Arc::new(monotone_ratio::func::Reflected(f)),
            Arc::new(monotone_ratio::func::Reflected(g)),
            window.reflected(),
            128,
        );
        prop_assert_eq!(direct.is_ok(), mirrored.is_ok());
        if let (Ok(p), Ok(q)) = (direct, mirrored) {
            prop_assert_eq!(q.sign_gg(), p.sign_gg().flipped());
            prop_assert_eq!(q.sign_g(), p.sign_g());
        }
    }
}

#[test]
fn table_rows_agree_with_sign_rule() {
    for dir in [Direction::Up, Direction::Down] {
        for sign in [Sign::Positive, Sign::Negative] {
            assert_eq!(predict_r_family(dir, sign), family_from_rho_tilde(predict_rho_tilde_dir(dir, sign)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reflecting_twice_is_identity(seed in 0u64..10_000) {
        let gen = GeneratorConfig { grid_n: 512, ..GeneratorConfig::default() };
        let pair = random_pair(seed, &gen).unwrap().pair;
        let cfg = AnalysisConfig::default();
        let base = check_pair(&pair, &cfg).unwrap();
        for axis in [Axis::Vertical, Axis::Horizontal] {
            let twice = reflect(&reflect(&pair, axis).unwrap(), axis).unwrap();
            let again = check_pair(&twice, &cfg).unwrap();
            prop_assert_eq!(again.checks, base.checks);
            prop_assert_eq!(again.rho_direction, base.rho_direction);
            prop_assert_eq!(again.mics.r.len(), base.mics.r.len());
            let (a, b) = (again.switch.unwrap(), base.switch.unwrap());
            prop_assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn generated_pairs_satisfy_every_check(seed in any::<u64>()) {
        let gen = GeneratorConfig { grid_n: 1024, ..GeneratorConfig::default() };
        let generated = random_pair(seed, &gen).unwrap();
        let report = check_pair(&generated.pair, &AnalysisConfig::default()).unwrap();
        prop_assert!(report.passed(), "seed {seed}: {:?}", report.diagnostics);
        prop_assert!(report.mics.r.len() <= 1);
        if generated.chosen.is_nondegenerate() {
            let m = report.mics.r.intervals[0];
            prop_assert!(m.endpoint_distance(&generated.chosen) < 1e-3);
        } else {
            prop_assert!(report.mics.r.is_empty());
        }
    }
}
