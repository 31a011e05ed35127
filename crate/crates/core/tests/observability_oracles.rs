use std::f64::consts::PI;

use bistab_core::models::{self, DampingProfile, ModelFamily, ModelSpec};
use bistab_core::observability::{
    estimate_delta, lemma2_check, obs_integral, sample_states, Flavor, ObservabilityProblem, ObservationGramian,
};
use bistab_core::propagator::{simulate, FeedbackLaw, SimOptions};
use bistab_core::{HFunction, SpectralSystem, State, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn diag_b(b: &[f64]) -> SpectralSystem {
    let n = b.len();
    let eig = (0..n).map(|j| C64::new(0.0, if j % 2 == 0 { 1.0 } else { -1.0 } * (j / 2 + 1) as f64)).collect();
    let bm = DMatrix::from_fn(n, n, |i, j| C64::new(if i == j { b[i] } else { 0.0 }, 0.0));
    SpectralSystem::new(eig, bm, None, 0.5, "diag").unwrap()
}

#[test]
fn identity_damping_observes_everything() {
    let (sys, _) = models::oracle_2d();
    for t in [0.5, 2.0, 7.0] {
        let rep = estimate_delta(&sys, t, Flavor::Exact, None, 200, 1, 1e-3).unwrap();
        assert!((rep.delta_estimate - t).abs() < 1e-9, "T = {t}: {}", rep.delta_estimate);
        assert!(rep.corroborated);
    }
}

#[test]
fn mode_deaf_damping_is_not_corroborated() {
    let sys = diag_b(&[1.0, 0.0]);
    let rep = estimate_delta(&sys, 2.0, Flavor::Exact, None, 200, 1, 1e-3).unwrap();
    assert!(rep.delta_estimate < 1e-3);
    assert!(!rep.corroborated);
    assert_eq!(rep.verdict, "exact observability not corroborated");
}

#[test]
fn diagonal_damping_sees_only_its_mode() {
    let sys = diag_b(&[1.0, 0.0]);
    let z = State::new(vec![C64::new(0.6, 0.3), C64::new(-0.2, 0.7)]).unwrap();
    let exact = 3.0 * z.coeffs()[0].norm_sqr();
    assert!((obs_integral(&sys, &z, 3.0, 1e-3).unwrap() - exact).abs() < 1e-12);
    assert!((ObservationGramian::new(&sys, 3.0, 1e-3).unwrap().integral(&z).unwrap() - exact).abs() < 1e-12);
}

#[test]
fn first_wave_mode_closed_form() {
    // u_t,1 = i (a e^{it} - b e^{-it}) / sqrt 2 integrates in closed form.
    let spec = ModelSpec::new(ModelFamily::Wave1d, 4, DampingProfile::interval(0.0, PI / 2.0, 1.0).unwrap());
    let sys = models::build(&spec).unwrap();
    let (a, b) = (C64::new(0.8, -0.3), C64::new(0.1, 0.5));
    let mut coeffs = vec![C64::new(0.0, 0.0); sys.n()];
    coeffs[0] = a;
    coeffs[1] = b;
    let z = State::new(coeffs).unwrap();
    let phi = (a * b.conj()).arg();
    let t = 2.0;
    let g11 = 0.5;
    let exact =
        g11 / 2.0 * ((a.norm_sqr() + b.norm_sqr()) * t - a.norm() * b.norm() * ((2.0 * t + phi).sin() - phi.sin()));
    let trapezoid = obs_integral(&sys, &z, t, 1e-4).unwrap();
    let gram = ObservationGramian::new(&sys, t, 1e-4).unwrap().integral(&z).unwrap();
    assert!((trapezoid - exact).abs() < 1e-8, "{trapezoid} vs {exact}");
    // Both routes are the node trapezoid; the integrand is nonnegative.
    assert!((gram - trapezoid).abs() < 1e-12, "{gram} vs {trapezoid}");
}

#[test]
fn sample_minimum_is_the_brute_force_minimum() {
    let spec = ModelSpec::new(ModelFamily::Wave1d, 5, DampingProfile::interval(0.2, 1.2, 1.0).unwrap());
    let sys = models::build(&spec).unwrap();
    for flavor in [Flavor::Exact, Flavor::WeakL, Flavor::NullCtrl] {
        let rep = estimate_delta(&sys, 3.0, flavor, None, 300, 42, 1e-3).unwrap();
        let problem = ObservabilityProblem::new(&sys, 3.0, 1e-3, flavor, None).unwrap();
        let brute =
            sample_states(sys.n(), 300, 42).iter().map(|z| problem.ratio(z).unwrap()).fold(f64::INFINITY, f64::min);
        assert_eq!(rep.sample_minimum.to_bits(), brute.to_bits(), "{flavor}");
        assert!(rep.delta_estimate <= rep.sample_minimum);
        let at_worst = problem.ratio(&rep.worst_sample).unwrap();
        assert!((at_worst - rep.delta_estimate).abs() <= 1e-9 * rep.delta_estimate);
    }
}

#[test]
fn sample_minimum_grows_with_horizon() {
    let spec = ModelSpec::new(ModelFamily::Wave1d, 4, DampingProfile::interval(0.5, 1.5, 1.0).unwrap());
    let sys = models::build(&spec).unwrap();
    let mins: Vec<f64> = [1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|t| estimate_delta(&sys, *t, Flavor::Exact, None, 100, 3, 1e-3).unwrap().sample_minimum)
        .collect();
    assert!(mins.windows(2).all(|w| w[1] >= w[0]), "{mins:?}");
}

#[test]
fn reports_are_deterministic() {
    let spec = ModelSpec::new(ModelFamily::Schrodinger1d, 6, DampingProfile::interval(0.5, 1.5, 1.0).unwrap());
    let sys = models::build(&spec).unwrap();
    let h = HFunction::log_exponential(2.0).unwrap();
    let a = estimate_delta(&sys, 2.0, Flavor::WeakH, Some(h), 50, 9, 1e-3).unwrap();
    let b = estimate_delta(&sys, 2.0, Flavor::WeakH, Some(h), 50, 9, 1e-3).unwrap();
    assert_eq!(a, b);
    assert!(a.delta_estimate > 0.0);
}

#[test]
fn weak_h_needs_an_h_function() {
    let (sys, _) = models::oracle_2d();
    assert!(estimate_delta(&sys, 1.0, Flavor::WeakH, None, 10, 0, 1e-3).is_err());
    assert!(estimate_delta(&sys, 1.0, Flavor::Exact, None, 0, 0, 1e-3).is_err());
}

#[test]
fn trajectory_bound_on_the_oracle() {
    // With B = I and a conservative A, int_0^T <B S(s) y, S(s) y> ds = T ||y||^2.
    let (sys, y0) = models::oracle_2d();
    let law = FeedbackLaw::for_initial_state(2.0, &y0).unwrap();
    let traj = simulate(&sys, &law, &y0, &SimOptions::new(1e-3, 3.0).record_states(true)).unwrap();
    let rep = lemma2_check(&sys, &law, &traj, 1.0, 1e-3).unwrap();
    assert!(rep.satisfied);
    for (t, lhs) in rep.times.iter().zip(&rep.lhs) {
        let exact = (-2.0 * t).exp();
        assert!((lhs / exact - 1.0).abs() < 1e-6);
    }
}

#[test]
fn trajectory_bound_degenerate_cases() {
    let (sys, y0) = models::oracle_2d();
    let law = FeedbackLaw::for_initial_state(0.0, &y0).unwrap();
    let zero = State::zeros(2);
    let traj = simulate(&sys, &law, &zero, &SimOptions::new(1e-2, 2.0).record_states(true)).unwrap();
    let rep = lemma2_check(&sys, &law, &traj, 1.0, 1e-2).unwrap();
    assert!(rep.satisfied && rep.lhs.iter().all(|v| *v == 0.0));

    let free = SpectralSystem::new(sys.eigenvalues().to_vec(), DMatrix::zeros(2, 2), None, 0.5, "free").unwrap();
    let traj = simulate(&free, &law, &y0, &SimOptions::new(1e-2, 2.0).record_states(true)).unwrap();
    let rep = lemma2_check(&free, &law, &traj, 1.0, 1e-2).unwrap();
    assert!(rep.satisfied && rep.lhs.iter().all(|v| *v == 0.0));

    let short = simulate(&sys, &law, &y0, &SimOptions::new(1e-2, 0.5).record_states(true)).unwrap();
    assert!(lemma2_check(&sys, &law, &short, 1.0, 1e-2).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ratio_is_scale_invariant(re in prop::collection::vec(-1.0f64..1.0, 6), s in 0.01f64..100.0) {
        let spec = ModelSpec::new(ModelFamily::Wave1d, 3, DampingProfile::interval(0.1, 0.9, 1.0).unwrap());
        let sys = models::build(&spec).unwrap();
        let z = State::new(re.iter().enumerate().map(|(i, x)| C64::new(*x, 0.1 * i as f64)).collect()).unwrap();
        let h = HFunction::power(1.0).unwrap();
        for (flavor, hfun) in [(Flavor::Exact, None), (Flavor::WeakL, None), (Flavor::WeakH, Some(h))] {
            let p = ObservabilityProblem::new(&sys, 2.0, 1e-3, flavor, hfun).unwrap();
            let (a, b) = (p.ratio(&z).unwrap(), p.ratio(&z.scaled(s)).unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
    }
}
