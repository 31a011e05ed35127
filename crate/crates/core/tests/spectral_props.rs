use bistab_core::spectral::{power_iteration_norm, HKind};
use bistab_core::{HFunction, SpectralSystem, State, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn system_and_state() -> impl Strategy<Value = (SpectralSystem, State)> {
    (1usize..7)
        .prop_flat_map(|n| {
            (
                prop::collection::vec((-1.0f64..0.0, -30.0f64..30.0), n),
                prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n),
                prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n),
                0.05f64..0.95,
            )
        })
        .prop_map(|(eig, m, y, theta)| {
            let n = eig.len();
            let m = DMatrix::from_fn(n, n, |i, j| C64::new(m[i * n + j].0, m[i * n + j].1));
            let b = m.adjoint() * &m;
            let b = (&b + b.adjoint()) * C64::new(0.5, 0.0);
            let eig = eig.into_iter().map(|(re, im)| C64::new(re, im)).collect();
            let sys = SpectralSystem::new(eig, b, None, theta, "random").unwrap();
            let y = State::new(y.into_iter().map(|(a, b)| C64::new(a, b)).collect()).unwrap();
            (sys, y)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn interpolation_holds((sys, y) in system_and_state()) {
        prop_assume!(!y.is_zero());
        prop_assert!(sys.check_interpolation(&y).unwrap().holds);
    }

    #[test]
    fn norms_are_ordered((sys, y) in system_and_state()) {
        let (l, h, k) = (sys.norm_l(&y).unwrap(), sys.norm_h(&y).unwrap(), sys.norm_k(&y).unwrap());
        prop_assert!(l <= h * (1.0 + 1e-14));
        prop_assert!(h <= k * (1.0 + 1e-14));
    }

    #[test]
    fn damping_form_is_real_and_nonnegative((sys, y) in system_and_state()) {
        let dense = sys.quad_form_b(&y).unwrap();
        let factored = sys.damping_form(&y).unwrap();
        prop_assert!(dense >= 0.0);
        prop_assert!((dense - factored).abs() <= 1e-12 * sys.op_norm_b().max(1.0) * y.norm_sqr().max(1e-300));
        prop_assert!(dense <= sys.op_norm_b() * y.norm_sqr() * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn operator_norm_agrees_with_power_iteration((sys, _y) in system_and_state()) {
        let power = power_iteration_norm(sys.b_matrix(), 10_000, 1e-14);
        prop_assert!((power - sys.op_norm_b()).abs() <= 1e-6 * sys.op_norm_b().max(1e-12));
    }

    #[test]
    fn h_and_k_increase(s in 0.1f64..4.0, c in 1.0f64..5.0, x in 1e-6f64..0.99, f in 1.001f64..2.0) {
        for h in [HFunction::power(s).unwrap(), HFunction::log_exponential(c).unwrap()] {
            let y = (x * f).min(1.0);
            prop_assert!(h.value(y).unwrap() >= h.value(x).unwrap());
            prop_assert!(h.k_value(y).unwrap() > h.k_value(x).unwrap());
        }
    }
}

#[test]
fn cauchy_schwarz_at_half_interpolation() {
    // At theta = 1/2 with l_j k_j = 1 the inequality is Cauchy-Schwarz:
    // sum |y_j|^2 <= (sum |y_j|^2 / k_j)^{1/2} (sum k_j |y_j|^2)^{1/2}.
    let eig: Vec<C64> = (1..=5).map(|j| C64::new(0.0, j as f64)).collect();
    let sys = SpectralSystem::new(eig, DMatrix::identity(5, 5), None, 0.5, "cs").unwrap();
    let y = State::new((0..5).map(|j| C64::new(1.0 / (j + 1) as f64, 0.3)).collect()).unwrap();
    let w: Vec<f64> = (1..=5).map(|j| 1.0 + (j * j) as f64).collect();
    let a: f64 = y.coeffs().iter().zip(&w).map(|(c, w)| c.norm_sqr() / w).sum();
    let b: f64 = y.coeffs().iter().zip(&w).map(|(c, w)| c.norm_sqr() * w).sum();
    let check = sys.check_interpolation(&y).unwrap();
    assert!((check.rhs - (a * b).sqrt().sqrt()).abs() < 1e-13);
    assert!(check.holds);
}

#[test]
fn single_mode_states_are_equality_cases() {
    let eig: Vec<C64> = (1..=8).map(|j| C64::new(-0.1, 3.0 * j as f64)).collect();
    for theta in [0.2, 0.5, 0.8] {
        let sys = SpectralSystem::new(eig.clone(), DMatrix::identity(8, 8), None, theta, "eq").unwrap();
        for j in 0..8 {
            let c = sys.check_interpolation(&State::basis(8, j).scaled(2.5)).unwrap();
            assert!((c.lhs - c.rhs).abs() <= 1e-12 * c.lhs);
        }
    }
}

#[test]
fn k_inverse_round_trips() {
    // K underflows below x ~ 1e-5 for the log-exponential modulus.
    for (h, lo) in [(HFunction::power(1.5).unwrap(), -8.0), (HFunction::log_exponential(2.0).unwrap(), -4.0)] {
        for i in 0..=80 {
            let x = 10f64.powf(lo - lo * i as f64 / 80.0);
            let back = h.k_inverse(h.k_value(x).unwrap()).unwrap();
            assert!((back / x - 1.0).abs() < 1e-10, "{h} at {x}");
        }
    }
}

#[test]
fn h_descriptors_round_trip() {
    for text in ["constant", "power:0.5", "logexp:3"] {
        let h: HFunction = text.parse().unwrap();
        assert_eq!(h.to_string(), text);
    }
    assert!(matches!("logexp:1".parse::<HFunction>().unwrap().kind(), HKind::LogExponential(_)));
    assert!("logexp:0.5".parse::<HFunction>().is_err());
    assert!("power:-1".parse::<HFunction>().is_err());
}

#[test]
fn invalid_systems_are_rejected() {
    let eig = vec![C64::new(0.0, 1.0), C64::new(0.5, -1.0)];
    assert!(SpectralSystem::new(eig, DMatrix::identity(2, 2), None, 0.5, "bad").is_err());
    let eig = vec![C64::new(0.0, 1.0), C64::new(0.0, -1.0)];
    let mut b = DMatrix::identity(2, 2);
    b[(0, 1)] = C64::new(0.0, 1.0);
    assert!(SpectralSystem::new(eig.clone(), b, None, 0.5, "bad").is_err());
    let neg = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]));
    assert!(SpectralSystem::new(eig.clone(), neg, None, 0.5, "bad").is_err());
    assert!(SpectralSystem::new(eig, DMatrix::identity(2, 2), None, 1.0, "bad").is_err());
}

#[test]
fn json_round_trip() {
    let eig = vec![C64::new(-0.2, 1.0), C64::new(0.0, -4.0)];
    let sys = SpectralSystem::new(eig, DMatrix::identity(2, 2), None, 0.3, "rt").unwrap();
    let back = SpectralSystem::from_json(&sys.to_json().unwrap()).unwrap();
    assert_eq!(back.eigenvalues(), sys.eigenvalues());
    assert_eq!(back.k_weights(), sys.k_weights());
    assert_eq!(back.label(), "rt");
    assert_eq!(back.theta(), 0.3);
}
