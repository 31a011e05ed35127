//! Model assembly checked against physical-space quadrature written here
//! from the field formulas, independently of the crate's Gram closed form.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use bistab_core::models::{self, DampingProfile, ModelFamily, ModelSpec};
use bistab_core::{State, C64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Five-point Gauss-Legendre nodes and weights on `[-1, 1]`.
const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

fn gauss(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in GL5 {
            acc += w * f(mid + 0.5 * h * x);
        }
    }
    0.5 * h * acc
}

/// Sine coefficients of the damped field: `u_t` for the wave families,
/// `u` for Schrödinger.
fn damped_coefficients(spec: &ModelSpec, y: &[C64]) -> Vec<C64> {
    let i = C64::new(0.0, 1.0);
    (0..spec.n_modes)
        .map(|m| match spec.family {
            ModelFamily::Wave1d => i * (y[2 * m] - y[2 * m + 1]) * FRAC_1_SQRT_2,
            ModelFamily::CoupledWave1d => {
                let p = 4 * m;
                i * (y[p] - y[p + 1] + y[p + 2] - y[p + 3]) * 0.5
            }
            ModelFamily::Schrodinger1d => y[m],
        })
        .collect()
}

fn damping_by_quadrature(spec: &ModelSpec, y: &State) -> f64 {
    let c = damped_coefficients(spec, y.coeffs());
    let (x0, x1) = spec.damping.support();
    let field = |x: f64| -> f64 {
        let v: C64 = c.iter().enumerate().map(|(m, cm)| cm * ((2.0 / PI).sqrt() * ((m + 1) as f64 * x).sin())).sum();
        v.norm_sqr()
    };
    spec.damping.amplitude() * gauss(field, x0, x1, 400)
}

fn random_state(n: usize, rng: &mut ChaCha8Rng) -> State {
    State::new((0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()).unwrap()
}

fn specs() -> Vec<ModelSpec> {
    let interval = DampingProfile::interval(0.3, 1.9, 1.5).unwrap();
    vec![
        ModelSpec::new(ModelFamily::Wave1d, 12, interval),
        ModelSpec::new(ModelFamily::Wave1d, 6, DampingProfile::global(0.7).unwrap()),
        ModelSpec::new(ModelFamily::CoupledWave1d, 8, interval).with_beta(0.1),
        ModelSpec::new(ModelFamily::CoupledWave1d, 8, interval),
        ModelSpec::new(ModelFamily::Schrodinger1d, 16, interval),
    ]
}

#[test]
fn damping_form_matches_physical_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for spec in specs() {
        let sys = models::build(&spec).unwrap();
        for _ in 0..100 {
            let y = random_state(sys.n(), &mut rng);
            let modal = sys.quad_form_b(&y).unwrap();
            let factored = sys.damping_form(&y).unwrap();
            let quad = damping_by_quadrature(&spec, &y);
            assert!((modal - quad).abs() <= 1e-10 * quad.max(1.0), "{}: {modal} vs {quad}", sys.label());
            assert!((factored - quad).abs() <= 1e-10 * quad.max(1.0));
        }
    }
}

#[test]
fn first_gram_entry_on_half_domain() {
    let by_quad = gauss(|x| 2.0 / PI * x.sin().powi(2), 0.0, PI / 2.0, 50);
    assert!((models::gram_entry(1, 1, 0.0, PI / 2.0) - 0.5).abs() < 1e-15);
    assert!((by_quad - 0.5).abs() < 1e-14);
}

#[test]
fn gram_entries_match_quadrature() {
    for (j, k) in [(1, 2), (3, 3), (2, 7), (10, 4)] {
        let phi = |m: usize, x: f64| (2.0 / PI).sqrt() * (m as f64 * x).sin();
        let quad = gauss(|x| phi(j, x) * phi(k, x), 0.4, 2.2, 100);
        assert!((models::gram_entry(j, k, 0.4, 2.2) - quad).abs() < 1e-13);
    }
}

#[test]
fn generators_are_skew() {
    for spec in specs() {
        let a = models::energy_generator(&spec).unwrap();
        assert!((&a + a.transpose()).norm() <= 1e-12 * a.norm());
    }
}

#[test]
fn coupled_eigenvalues_match_energy_generator() {
    // The realified energy generator has spectrum +/- i sqrt(j^2 +/- beta).
    let spec = ModelSpec::new(ModelFamily::CoupledWave1d, 3, DampingProfile::global(1.0).unwrap()).with_beta(0.4);
    let a = models::energy_generator(&spec).unwrap();
    let sys = models::build(&spec).unwrap();
    let mut expected: Vec<f64> = sys.eigenvalues().iter().map(|l| l.im.abs()).collect();
    expected.sort_by(f64::total_cmp);
    let mut got: Vec<f64> = a.complex_eigenvalues().iter().map(|l| l.im.abs()).collect();
    got.sort_by(f64::total_cmp);
    for (e, g) in expected.iter().zip(&got) {
        assert!((e - g).abs() < 1e-10);
    }
}

#[test]
fn zero_coupling_decouples_and_keeps_damping() {
    let damping = DampingProfile::interval(0.0, PI / 2.0, 1.0).unwrap();
    let zero = models::build(&ModelSpec::new(ModelFamily::CoupledWave1d, 5, damping)).unwrap();
    let small = models::build(&ModelSpec::new(ModelFamily::CoupledWave1d, 5, damping).with_beta(1e-9)).unwrap();
    assert!(zero.label().contains("standard-energy"));
    assert!(small.label().contains("modified-energy"));
    let diff: DMatrix<C64> = zero.b_matrix() - small.b_matrix();
    assert_eq!(diff.norm(), 0.0);
    for (a, b) in zero.eigenvalues().iter().zip(small.eigenvalues()) {
        assert!((a - b).norm() < 1e-8);
    }
}

#[test]
fn truncations_nest_when_modes_double() {
    let damping = DampingProfile::interval(0.2, 1.0, 2.0).unwrap();
    for family in [ModelFamily::Wave1d, ModelFamily::CoupledWave1d, ModelFamily::Schrodinger1d] {
        let coarse = models::build(&ModelSpec::new(family, 6, damping).with_beta(0.05)).unwrap();
        let fine = models::build(&ModelSpec::new(family, 12, damping).with_beta(0.05)).unwrap();
        let n = coarse.n();
        assert_eq!(&fine.eigenvalues()[..n], coarse.eigenvalues());
        let block = fine.b_matrix().view((0, 0), (n, n)).into_owned();
        assert!((block - coarse.b_matrix()).norm() < 1e-14);
    }
}

#[test]
fn schrodinger_grid_norm_obeys_parseval() {
    let spec = ModelSpec::new(ModelFamily::Schrodinger1d, 20, DampingProfile::global(1.0).unwrap());
    let sys = models::build(&spec).unwrap();
    let y = models::initial_state(&sys, 1.0, 3).unwrap();
    let grid = models::grid_energy(&spec, &y, 2048).unwrap();
    assert!((grid - 0.5 * y.norm_sqr()).abs() < 1e-12);
}

#[test]
fn physical_energy_matches_modal_energy() {
    for spec in specs() {
        let sys = models::build(&spec).unwrap();
        let y = models::initial_state(&sys, 2.0, 5).unwrap();
        let e = models::physical_energy(&spec, &sys, &y).unwrap();
        assert!((e - 0.5 * y.norm_sqr()).abs() < 1e-15);
    }
}

#[test]
fn invalid_specs_are_rejected() {
    let d = DampingProfile::global(1.0).unwrap();
    assert!(DampingProfile::interval(1.0, 0.5, 1.0).is_err());
    assert!(DampingProfile::global(0.0).is_err());
    assert!(models::build(&ModelSpec::new(ModelFamily::Wave1d, 0, d)).is_err());
    assert!(models::build(&ModelSpec::new(ModelFamily::CoupledWave1d, 4, d).with_beta(1.5)).is_err());
}
