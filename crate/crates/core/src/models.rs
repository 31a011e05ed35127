//! Sine-basis truncations of damped wave, coupled wave and Schrödinger
//! equations on `(0, pi)` with Dirichlet conditions.
//!
//! Every family is written in energy coordinates in which the generator is
//! diagonal with purely imaginary eigenvalues, so the state norm is the
//! physical energy norm. With the basis `phi_j = sqrt(2/pi) sin(j x)`:
//!
//! * `wave1d`: per mode `(z+, z-) = (j u_j -/+ i u_t,j) / sqrt 2`, eigenvalues
//!   `+/- i j`, damping form `int a |u_t|^2`.
//! * `coupled_wave1d`: per mode the symmetric and antisymmetric combinations
//!   `s = (u + v) / sqrt 2`, `d = (u - v) / sqrt 2` oscillate with
//!   `sqrt(j^2 +/- beta)`; state `(z_s+, z_s-, z_d+, z_d-)`, damping form
//!   `int a |u_t|^2`.
//! * `schrodinger1d`: `y_j = u_j`, eigenvalues `-i j^2`, damping form
//!   `int a |u|^2`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{DampingFactor, SpectralSystem, State, C64};

/// Points of the midpoint grid used to reconstruct physical fields.
pub const GRID_POINTS: usize = 512;
/// Relative tolerance of the grid-energy consistency check.
pub const GRID_ENERGY_TOL: f64 = 1e-6;
/// Skewness tolerance of the assembled generator, relative to its norm.
pub const SKEW_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Wave1d,
    CoupledWave1d,
    Schrodinger1d,
}

impl ModelFamily {
    /// State components per sine mode.
    pub fn block(&self) -> usize {
        match self {
            ModelFamily::Wave1d => 2,
            ModelFamily::CoupledWave1d => 4,
            ModelFamily::Schrodinger1d => 1,
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelFamily::Wave1d => "wave1d",
            ModelFamily::CoupledWave1d => "coupled_wave1d",
            ModelFamily::Schrodinger1d => "schrodinger1d",
        })
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "wave1d" => Ok(ModelFamily::Wave1d),
            "coupled_wave1d" => Ok(ModelFamily::CoupledWave1d),
            "schrodinger1d" => Ok(ModelFamily::Schrodinger1d),
            other => Err(Error::InvalidArgument(format!("unknown model family '{other}'"))),
        }
    }
}

/// Damping coefficient `a(x)`: a constant `a0` on the whole domain or the
/// indicator of `(x0, x1)` scaled by `a0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DampingProfile {
    Global { amplitude: f64 },
    Interval { x0: f64, x1: f64, amplitude: f64 },
}

impl DampingProfile {
    pub fn global(amplitude: f64) -> Result<Self> {
        let p = DampingProfile::Global { amplitude };
        p.validate()?;
        Ok(p)
    }

    pub fn interval(x0: f64, x1: f64, amplitude: f64) -> Result<Self> {
        let p = DampingProfile::Interval { x0, x1, amplitude };
        p.validate()?;
        Ok(p)
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            DampingProfile::Global { amplitude } | DampingProfile::Interval { amplitude, .. } => amplitude,
        }
    }

    /// Support of `a` as an interval of `[0, pi]`.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            DampingProfile::Global { .. } => (0.0, PI),
            DampingProfile::Interval { x0, x1, .. } => (x0, x1),
        }
    }

    pub fn value_at(&self, x: f64) -> f64 {
        let (x0, x1) = self.support();
        if x >= x0 && x <= x1 {
            self.amplitude()
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.amplitude();
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidArgument(format!("damping amplitude {a} must be positive")));
        }
        if let DampingProfile::Interval { x0, x1, .. } = *self {
            if !(x0 >= 0.0 && x0 < x1 && x1 <= PI) {
                return Err(Error::InvalidArgument(format!(
                    "damping interval ({x0}, {x1}) must satisfy 0 <= x0 < x1 <= pi"
                )));
            }
        }
        Ok(())
    }

    /// True when the profile is constant on the whole domain.
    pub fn is_full(&self) -> bool {
        self.support() == (0.0, PI)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub n_modes: usize,
    pub damping: DampingProfile,
    /// Coupling strength, used by the coupled family only.
    pub beta: f64,
    pub theta: f64,
}

impl ModelSpec {
    pub fn new(family: ModelFamily, n_modes: usize, damping: DampingProfile) -> Self {
        ModelSpec { family, n_modes, damping, beta: 0.0, theta: 0.5 }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn dim(&self) -> usize {
        self.n_modes * self.family.block()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(Error::InvalidArgument("n_modes must be positive".into()));
        }
        self.damping.validate()?;
        if self.family == ModelFamily::CoupledWave1d && !(self.beta.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "coupling |beta| = {} must stay below the first Dirichlet eigenvalue 1",
                self.beta.abs()
            )));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidArgument(format!("theta = {} outside (0, 1)", self.theta)));
        }
        Ok(())
    }

    /// Oscillation frequencies of the symmetric and antisymmetric
    /// combinations of mode `j` (coupled family).
    fn coupled_frequencies(&self, j: usize) -> (f64, f64) {
        let jj = (j * j) as f64;
        ((jj + self.beta).sqrt(), (jj - self.beta).sqrt())
    }
}

/// `int_{x0}^{x1} phi_j phi_k dx` for one-based mode indices.
pub fn gram_entry(j: usize, k: usize, x0: f64, x1: f64) -> f64 {
    let sum = (j + k) as f64;
    let high = ((sum * x1).sin() - (sum * x0).sin()) / sum;
    let low = if j == k {
        x1 - x0
    } else {
        let diff = j as f64 - k as f64;
        ((diff * x1).sin() - (diff * x0).sin()) / diff
    };
    (low - high) / PI
}

/// Gram matrix of the first `n` sine modes on `(x0, x1)`; the identity on
/// the full interval.
pub fn gram_matrix(n: usize, x0: f64, x1: f64) -> DMatrix<f64> {
    if x0 == 0.0 && x1 == PI {
        return DMatrix::identity(n, n);
    }
    DMatrix::from_fn(n, n, |j, k| gram_entry(j + 1, k + 1, x0, x1))
}

/// Matrix of the damping form on the coefficients of the damped field.
pub fn damping_core(spec: &ModelSpec) -> DMatrix<f64> {
    let (x0, x1) = spec.damping.support();
    gram_matrix(spec.n_modes, x0, x1) * spec.damping.amplitude()
}

pub fn build(spec: &ModelSpec) -> Result<SpectralSystem> {
    spec.validate()?;
    let n = spec.n_modes;
    let core = damping_core(spec);
    let i_half = C64::new(0.0, FRAC_1_SQRT_2);
    let (eigenvalues, rows, label) = match spec.family {
        ModelFamily::Wave1d => {
            let mut eig = Vec::with_capacity(2 * n);
            let mut rows = Vec::with_capacity(n);
            for j in 1..=n {
                let w = j as f64;
                eig.push(C64::new(0.0, w));
                eig.push(C64::new(0.0, -w));
                let p = 2 * (j - 1);
                rows.push(vec![(p, i_half), (p + 1, -i_half)]);
            }
            (eig, rows, "wave1d".to_string())
        }
        ModelFamily::CoupledWave1d => {
            let inner = coupled_inner_product(spec)?;
            let mut eig = Vec::with_capacity(4 * n);
            let mut rows = Vec::with_capacity(n);
            let half_i = C64::new(0.0, 0.5);
            for j in 1..=n {
                let (ws, wd) = spec.coupled_frequencies(j);
                eig.extend([C64::new(0.0, ws), C64::new(0.0, -ws), C64::new(0.0, wd), C64::new(0.0, -wd)]);
                let p = 4 * (j - 1);
                rows.push(vec![(p, half_i), (p + 1, -half_i), (p + 2, half_i), (p + 3, -half_i)]);
            }
            let label = format!("coupled_wave1d[beta={},inner={}]", spec.beta, inner.name());
            (eig, rows, label)
        }
        ModelFamily::Schrodinger1d => {
            let eig = (1..=n).map(|j| C64::new(0.0, -((j * j) as f64))).collect();
            let rows = (0..n).map(|j| vec![(j, C64::new(1.0, 0.0))]).collect();
            (eig, rows, "schrodinger1d".to_string())
        }
    };
    SpectralSystem::from_factor(eigenvalues, DampingFactor { rows, core }, None, spec.theta, label)
}

/// Inner product in which the coupled generator is skew.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoupledInner {
    /// `|u_x|^2 + |u_t|^2 + |v_x|^2 + |v_t|^2`
    Standard,
    /// Standard plus `2 beta Re(u conj v)`.
    Modified,
}

impl CoupledInner {
    pub fn name(&self) -> &'static str {
        match self {
            CoupledInner::Standard => "standard-energy",
            CoupledInner::Modified => "modified-energy",
        }
    }
}

/// Generator of mode `j` acting on `(u, u_t, v, v_t)`.
pub fn physical_block(j: usize, beta: f64) -> [[f64; 4]; 4] {
    let jj = (j * j) as f64;
    [[0.0, 1.0, 0.0, 0.0], [-jj, 0.0, -beta, 0.0], [0.0, 0.0, 0.0, 1.0], [-beta, 0.0, -jj, 0.0]]
}

/// Gram matrix of mode `j` on `(u, u_t, v, v_t)`.
pub fn inner_block(j: usize, beta: f64, inner: CoupledInner) -> [[f64; 4]; 4] {
    let jj = (j * j) as f64;
    let c = if inner == CoupledInner::Modified { beta } else { 0.0 };
    [[jj, 0.0, c, 0.0], [0.0, 1.0, 0.0, 0.0], [c, 0.0, jj, 0.0], [0.0, 0.0, 0.0, 1.0]]
}

/// `R M R^{-1}` for the Cholesky factor `P = R^T R` of the inner product:
/// the generator of mode `j` in coordinates where the inner product is
/// Euclidean.
pub fn energy_block(j: usize, beta: f64, inner: CoupledInner) -> Result<DMatrix<f64>> {
    let m = DMatrix::from_fn(4, 4, |a, b| physical_block(j, beta)[a][b]);
    let p = DMatrix::from_fn(4, 4, |a, b| inner_block(j, beta, inner)[a][b]);
    let chol = p
        .cholesky()
        .ok_or_else(|| Error::InvalidSystem(format!("inner product of mode {j} is not positive definite")))?;
    let r = chol.l().transpose();
    let r_inv = r.clone().try_inverse().ok_or_else(|| Error::InvalidSystem("singular Cholesky factor".into()))?;
    Ok(&r * m * r_inv)
}

fn skew_defect(a: &DMatrix<f64>) -> f64 {
    let norm = a.norm().max(f64::MIN_POSITIVE);
    (a + a.transpose()).norm() / norm
}

/// Picks the standard energy inner product when the coupled generator is
/// already skew in it, the modified one otherwise; fails if neither works.
pub fn coupled_inner_product(spec: &ModelSpec) -> Result<CoupledInner> {
    let skew_in = |inner| -> Result<bool> {
        for j in 1..=spec.n_modes {
            if skew_defect(&energy_block(j, spec.beta, inner)?) > SKEW_TOL {
                return Ok(false);
            }
        }
        Ok(true)
    };
    if skew_in(CoupledInner::Standard)? {
        return Ok(CoupledInner::Standard);
    }
    if skew_in(CoupledInner::Modified)? {
        return Ok(CoupledInner::Modified);
    }
    Err(Error::InvalidSystem(format!("coupled generator is not skew for beta = {}", spec.beta)))
}

/// Generator in real energy coordinates, block diagonal over modes: per mode
/// `(j u_j, u_t,j)` for waves, `R M R^{-1}` for coupled waves and the
/// realification of `-i j^2` for Schrödinger.
pub fn energy_generator(spec: &ModelSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let n = spec.n_modes;
    match spec.family {
        ModelFamily::Wave1d | ModelFamily::Schrodinger1d => {
            let mut a = DMatrix::zeros(2 * n, 2 * n);
            for j in 1..=n {
                let w = if spec.family == ModelFamily::Wave1d { j as f64 } else { (j * j) as f64 };
                let p = 2 * (j - 1);
                a[(p, p + 1)] = w;
                a[(p + 1, p)] = -w;
            }
            Ok(a)
        }
        ModelFamily::CoupledWave1d => {
            let inner = coupled_inner_product(spec)?;
            let mut a = DMatrix::zeros(4 * n, 4 * n);
            for j in 1..=n {
                let blk = energy_block(j, spec.beta, inner)?;
                a.view_mut((4 * (j - 1), 4 * (j - 1)), (4, 4)).copy_from(&blk);
            }
            Ok(a)
        }
    }
}

/// Physical fields of a state on a grid, one vector per field.
#[derive(Clone, Debug, PartialEq)]
pub struct Fields {
    pub x: Vec<f64>,
    /// `u` (wave families) or the Schrödinger wave function.
    pub u: Vec<C64>,
    pub u_x: Vec<C64>,
    pub u_t: Vec<C64>,
    pub v: Vec<C64>,
    pub v_x: Vec<C64>,
    pub v_t: Vec<C64>,
}

/// Sine coefficients `(u, u_t, v, v_t)` of mode `j` (one-based).
pub fn modal_fields(spec: &ModelSpec, y: &[C64], j: usize) -> [C64; 4] {
    let zero = C64::new(0.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let split = |zp: C64, zm: C64, w: f64| -> (C64, C64) {
        // z+/- = (w q -/+ i q_t) / sqrt 2
        let q = (zp + zm) * FRAC_1_SQRT_2 / w;
        let qt = i * (zp - zm) * FRAC_1_SQRT_2;
        (q, qt)
    };
    match spec.family {
        ModelFamily::Wave1d => {
            let p = 2 * (j - 1);
            let (u, ut) = split(y[p], y[p + 1], j as f64);
            [u, ut, zero, zero]
        }
        ModelFamily::CoupledWave1d => {
            let p = 4 * (j - 1);
            let (ws, wd) = spec.coupled_frequencies(j);
            let (s, st) = split(y[p], y[p + 1], ws);
            let (d, dt) = split(y[p + 2], y[p + 3], wd);
            [(s + d) * FRAC_1_SQRT_2, (st + dt) * FRAC_1_SQRT_2, (s - d) * FRAC_1_SQRT_2, (st - dt) * FRAC_1_SQRT_2]
        }
        ModelFamily::Schrodinger1d => [y[j - 1], zero, zero, zero],
    }
}

/// Reconstructs the fields on the midpoint grid of `(0, pi)`.
pub fn reconstruct(spec: &ModelSpec, y: &State, points: usize) -> Result<Fields> {
    if y.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: y.dim() });
    }
    let h = PI / points as f64;
    let x: Vec<f64> = (0..points).map(|i| (i as f64 + 0.5) * h).collect();
    let zero = vec![C64::new(0.0, 0.0); points];
    let mut f = Fields {
        x,
        u: zero.clone(),
        u_x: zero.clone(),
        u_t: zero.clone(),
        v: zero.clone(),
        v_x: zero.clone(),
        v_t: zero,
    };
    let norm = (2.0 / PI).sqrt();
    for j in 1..=spec.n_modes {
        let [u, ut, v, vt] = modal_fields(spec, y.coeffs(), j);
        let w = j as f64;
        for (i, &xi) in f.x.iter().enumerate() {
            let (sn, cs) = (w * xi).sin_cos();
            let (sn, cs) = (norm * sn, norm * w * cs);
            f.u[i] += u * sn;
            f.u_x[i] += u * cs;
            f.u_t[i] += ut * sn;
            f.v[i] += v * sn;
            f.v_x[i] += v * cs;
            f.v_t[i] += vt * sn;
        }
    }
    Ok(f)
}

/// Energy of the reconstructed fields by the midpoint rule.
pub fn grid_energy(spec: &ModelSpec, y: &State, points: usize) -> Result<f64> {
    let f = reconstruct(spec, y, points)?;
    let h = PI / points as f64;
    let coupling = match spec.family {
        ModelFamily::CoupledWave1d if coupled_inner_product(spec)? == CoupledInner::Modified => spec.beta,
        _ => 0.0,
    };
    let mut acc = 0.0;
    for i in 0..points {
        acc += match spec.family {
            ModelFamily::Schrodinger1d => f.u[i].norm_sqr(),
            ModelFamily::Wave1d => f.u_x[i].norm_sqr() + f.u_t[i].norm_sqr(),
            ModelFamily::CoupledWave1d => {
                f.u_x[i].norm_sqr()
                    + f.u_t[i].norm_sqr()
                    + f.v_x[i].norm_sqr()
                    + f.v_t[i].norm_sqr()
                    + 2.0 * coupling * (f.u[i] * f.v[i].conj()).re
            }
        };
    }
    Ok(0.5 * h * acc)
}

/// `E = ||y||^2 / 2`, cross-checked against the energy of the fields
/// reconstructed on a grid of [`GRID_POINTS`] points.
pub fn physical_energy(spec: &ModelSpec, sys: &SpectralSystem, y: &State) -> Result<f64> {
    if y.dim() != sys.n() {
        return Err(Error::DimensionMismatch { expected: sys.n(), got: y.dim() });
    }
    let modal = 0.5 * y.norm_sqr();
    let grid = grid_energy(spec, y, GRID_POINTS)?;
    if (grid - modal).abs() > GRID_ENERGY_TOL * modal.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidSystem(format!("grid energy {grid:e} disagrees with modal energy {modal:e}")));
    }
    Ok(modal)
}

/// Conservative two-mode system `lambda = (i, -i)`, `B = I`, with the unit
/// initial state `(1, 1) / sqrt 2`.
pub fn oracle_2d() -> (SpectralSystem, State) {
    let eig = vec![C64::new(0.0, 1.0), C64::new(0.0, -1.0)];
    let sys = SpectralSystem::new(eig, DMatrix::identity(2, 2), None, 0.5, "oracle2d").expect("oracle system is valid");
    let y0 = State::new(vec![C64::new(FRAC_1_SQRT_2, 0.0); 2]).expect("finite");
    (sys, y0)
}

/// Smooth random initial state: modal amplitudes `(1 + |lambda_j|^2)^{-exponent/2}`
/// with seeded uniform phases, scaled to unit norm.
pub fn initial_state(sys: &SpectralSystem, exponent: f64, seed: u64) -> Result<State> {
    if !exponent.is_finite() {
        return Err(Error::InvalidArgument(format!("exponent {exponent} must be finite")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs: Vec<C64> = sys
        .eigenvalues()
        .iter()
        .map(|l| {
            let amp = (1.0 + l.norm_sqr()).powf(-0.5 * exponent);
            let phase: f64 = rng.random_range(0.0..2.0 * PI);
            C64::from_polar(amp, phase)
        })
        .collect();
    let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidArgument("initial amplitudes vanish".into()));
    }
    coeffs.iter_mut().for_each(|c| *c /= norm);
    State::new(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_first_mode_on_half_interval() {
        assert!((gram_entry(1, 1, 0.0, PI / 2.0) - 0.5).abs() < 1e-15);
        // int_0^{pi/2} (2/pi) sin x sin 2x dx = (2/pi)(2/3)
        assert!((gram_entry(1, 2, 0.0, PI / 2.0) - 4.0 / (3.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn full_interval_equals_global() {
        let a = build(&ModelSpec::new(ModelFamily::Wave1d, 6, DampingProfile::global(1.0).unwrap())).unwrap();
        let b =
            build(&ModelSpec::new(ModelFamily::Wave1d, 6, DampingProfile::interval(0.0, PI, 1.0).unwrap())).unwrap();
        assert_eq!(a.snapshot(), b.snapshot());
    }

    #[test]
    fn global_damping_sees_velocity() {
        let spec = ModelSpec::new(ModelFamily::Wave1d, 4, DampingProfile::global(1.0).unwrap());
        let sys = build(&spec).unwrap();
        // Pure velocity in mode 2: u_t = phi_2, u = 0  =>  z+ = -i/sqrt2, z- = i/sqrt2.
        let mut y = State::zeros(8);
        y.coeffs_mut()[2] = C64::new(0.0, -FRAC_1_SQRT_2);
        y.coeffs_mut()[3] = C64::new(0.0, FRAC_1_SQRT_2);
        assert!((sys.quad_form_b(&y).unwrap() - 1.0).abs() < 1e-14);
        let [u, ut, _, _] = modal_fields(&spec, y.coeffs(), 2);
        assert!(u.norm() < 1e-15 && (ut - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn coupled_inner_product_choice() {
        let damping = DampingProfile::interval(0.0, PI / 2.0, 1.0).unwrap();
        let zero = ModelSpec::new(ModelFamily::CoupledWave1d, 5, damping);
        assert_eq!(coupled_inner_product(&zero).unwrap(), CoupledInner::Standard);
        let coupled = zero.with_beta(0.1);
        assert_eq!(coupled_inner_product(&coupled).unwrap(), CoupledInner::Modified);
        assert!(build(&coupled.with_beta(1.0)).is_err());
        assert!(build(&coupled).unwrap().label().contains("modified-energy"));
    }

    #[test]
    fn single_mode_energy_is_half() {
        let spec = ModelSpec::new(ModelFamily::Wave1d, 3, DampingProfile::global(1.0).unwrap());
        let sys = build(&spec).unwrap();
        let y = State::basis(6, 2);
        assert!((physical_energy(&spec, &sys, &y).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(physical_energy(&spec, &sys, &State::zeros(6)).unwrap(), 0.0);
    }

    #[test]
    fn initial_state_is_unit_and_seeded() {
        let (sys, _) = oracle_2d();
        let a = initial_state(&sys, 2.0, 7).unwrap();
        assert!((a.norm_sqr() - 1.0).abs() < 1e-15);
        assert_eq!(a, initial_state(&sys, 2.0, 7).unwrap());
        assert_ne!(a, initial_state(&sys, 2.0, 8).unwrap());
    }
}
