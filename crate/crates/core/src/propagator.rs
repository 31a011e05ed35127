//! Time integration of the free semigroup and of the closed loop
//! `y' = A y + p_r(y) B y`.
//!
//! A step is the Strang composition `S(h/2) N(h) S(h/2)`: the linear flow
//! `S` is the exact modal exponential, and `N` is the flow of
//! `y' = p_r(y) B y`. Writing `B = U diag(mu) U^H`, the component of `y`
//! outside the range of `U` is frozen by `N` and the range coordinates
//! evolve as `c(t) = exp(mu P(t)) c(0)` with the scalar `P' = p_r(c(P))`.
//! That scalar equation is integrated with the two-stage Gauss-Legendre
//! collocation method, so the only error of `N` is the `O(h^5)` error in `P`,
//! and the energy changes sign-correctly by construction.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{weighted_norm_sqr, SpectralSystem, State, C64};

/// Largest energy increase tolerated in one step.
pub const ENERGY_INCREASE_TOL: f64 = 1e-12;
/// Iteration cap of the collocation solve.
pub const MAX_FIXED_POINT_ITERS: usize = 50;
/// Relative stopping threshold of the collocation solve.
pub const FIXED_POINT_TOL: f64 = 1e-13;
/// Retries with a halved step before a step failure is reported.
pub const MAX_HALVINGS: u32 = 10;

/// Gauss-Legendre order-4 coefficients.
const GL_A11: f64 = 0.25;
const GL_A12: f64 = 0.25 - 0.288_675_134_594_812_9;
const GL_A21: f64 = 0.25 + 0.288_675_134_594_812_9;
const GL_A22: f64 = 0.25;

/// Moments `sum mu^k |c|^2` up to this order feed the Taylor evaluation of
/// the scalar vector field.
const TAYLOR_ORDER: usize = 8;
/// Taylor evaluation is used while `2 mu_max |P|` stays below this bound;
/// the truncation error is then below `0.02^9 / 9! ~ 1e-21`.
const TAYLOR_RADIUS: f64 = 0.02;

/// The feedback `p_r(y) = -<y, By> / ||y||^r` for `||y|| > state_epsilon`,
/// zero otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FeedbackLaw {
    r: f64,
    state_epsilon: f64,
    active: bool,
}

impl FeedbackLaw {
    pub fn new(r: f64, state_epsilon: f64) -> Result<Self> {
        if !(r.is_finite() && r <= 2.0) {
            return Err(Error::InvalidArgument(format!("feedback exponent r = {r} must be <= 2")));
        }
        if !(state_epsilon.is_finite() && state_epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("state_epsilon = {state_epsilon} must be positive")));
        }
        Ok(FeedbackLaw { r, state_epsilon, active: true })
    }

    /// Threshold `1e-14 ||y0||`, floored at the smallest positive normal.
    pub fn for_initial_state(r: f64, y0: &State) -> Result<Self> {
        Self::new(r, default_epsilon(y0))
    }

    /// Same law with the control forced to zero.
    pub fn disabled(self) -> Self {
        FeedbackLaw { active: false, ..self }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn state_epsilon(&self) -> f64 {
        self.state_epsilon
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    fn value_from(&self, norm_sqr: f64, damping: f64) -> f64 {
        if !self.active || norm_sqr.sqrt() <= self.state_epsilon {
            return 0.0;
        }
        -damping / norm_pow(norm_sqr, self.r)
    }
}

pub fn default_epsilon(y0: &State) -> f64 {
    (1e-14 * y0.norm_sqr().sqrt()).max(f64::MIN_POSITIVE)
}

/// `||y||^r` from `||y||^2`, exact for the common exponents.
fn norm_pow(norm_sqr: f64, r: f64) -> f64 {
    if r == 0.0 {
        1.0
    } else if r == 2.0 {
        norm_sqr
    } else {
        norm_sqr.powf(0.5 * r)
    }
}

/// `(S(t) y)_j = exp(lambda_j t) y_j`.
pub fn linear_flow(sys: &SpectralSystem, y: &State, t: f64) -> Result<State> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("flow time {t} must be nonnegative")));
    }
    if y.dim() != sys.n() {
        return Err(Error::DimensionMismatch { expected: sys.n(), got: y.dim() });
    }
    let coeffs = y.coeffs().iter().zip(sys.eigenvalues()).map(|(z, l)| (l * t).exp() * z).collect();
    Ok(State::new_unchecked(coeffs))
}

/// `p_r(y)`.
pub fn control_value(sys: &SpectralSystem, law: &FeedbackLaw, y: &State) -> Result<f64> {
    let q = sys.damping_form(y)?;
    Ok(law.value_from(y.norm_sqr(), q))
}

/// One closed-loop step of size `dt`, halving and retrying if the
/// collocation solve fails to converge.
pub fn closed_loop_step(sys: &SpectralSystem, law: &FeedbackLaw, y: &State, dt: f64) -> Result<State> {
    if y.dim() != sys.n() {
        return Err(Error::DimensionMismatch { expected: sys.n(), got: y.dim() });
    }
    let mut stepper = Stepper::new(sys, *law, dt)?;
    let mut out = y.clone();
    stepper.step(out.coeffs_mut(), 0.0)?;
    Ok(out)
}

/// Reusable step machinery: half-step phases and scratch space.
struct Stepper<'a> {
    sys: &'a SpectralSystem,
    law: FeedbackLaw,
    dt: f64,
    half_phase: Vec<C64>,
    scratch: crate::factor::Scratch,
    moments: [f64; TAYLOR_ORDER + 2],
    saved: Vec<C64>,
    halvings: u32,
}

impl<'a> Stepper<'a> {
    fn new(sys: &'a SpectralSystem, law: FeedbackLaw, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step {dt} must be positive")));
        }
        Ok(Stepper {
            sys,
            law,
            dt,
            half_phase: phases(sys, 0.5 * dt),
            scratch: sys.scratch(),
            moments: [0.0; TAYLOR_ORDER + 2],
            saved: Vec::with_capacity(sys.n()),
            halvings: 0,
        })
    }

    /// Advances `y` by `dt`; `t` only labels failures.
    fn step(&mut self, y: &mut [C64], t: f64) -> Result<()> {
        let phase = std::mem::take(&mut self.half_phase);
        let out = self.strang(y, self.dt, &phase, t, 0);
        self.half_phase = phase;
        out
    }

    fn strang(&mut self, y: &mut [C64], h: f64, half: &[C64], t: f64, depth: u32) -> Result<()> {
        // Only the outermost attempt reuses the buffer; retries are rare.
        let mut saved = if depth == 0 { std::mem::take(&mut self.saved) } else { Vec::new() };
        saved.clear();
        saved.extend_from_slice(y);
        apply_phases(y, half);
        let outcome = self.nonlinear(y, h);
        if depth == 0 {
            self.saved = std::mem::take(&mut saved);
        }
        match outcome {
            Ok(()) => {
                apply_phases(y, half);
                Ok(())
            }
            Err(Error::NonConvergence { iterations, residual }) => {
                if depth >= MAX_HALVINGS {
                    return Err(Error::StepFailure {
                        t,
                        halvings: depth as usize,
                        reason: format!(
                            "collocation did not converge ({iterations} iterations, residual {residual:e})"
                        ),
                    });
                }
                if depth == 0 {
                    y.copy_from_slice(&self.saved);
                } else {
                    y.copy_from_slice(&saved);
                }
                self.halvings += 1;
                let quarter = phases(self.sys, 0.25 * h);
                self.strang(y, 0.5 * h, &quarter, t, depth + 1)?;
                self.strang(y, 0.5 * h, &quarter, t + 0.5 * h, depth + 1)
            }
            Err(e) => Err(e),
        }
    }

    /// Exact flow of `y' = p_r(y) B y` over time `h`, up to the error of the
    /// scalar collocation solve.
    fn nonlinear(&mut self, y: &mut [C64], h: f64) -> Result<()> {
        if !self.law.active {
            return Ok(());
        }
        let norm_sqr: f64 = y.iter().map(|c| c.norm_sqr()).sum();
        if norm_sqr.sqrt() <= self.law.state_epsilon {
            return Ok(());
        }
        let range = self.sys.range();
        range.project(y, &mut self.scratch);
        let mu = range.mu();
        let mut mu_max = 0.0f64;
        self.moments = [0.0; TAYLOR_ORDER + 2];
        for (c, &m) in self.scratch.c.iter().zip(mu) {
            let mut w = c.norm_sqr();
            mu_max = mu_max.max(m);
            for s in self.moments.iter_mut() {
                *s += w;
                w *= m;
            }
        }
        if self.moments[1] == 0.0 {
            return Ok(());
        }
        let perp = (norm_sqr - self.moments[0]).max(0.0);
        let r = self.law.r;
        let field = |p: f64, s: &Self| -> f64 {
            let (e0, e1) = s.range_moments(p, mu_max);
            -e1 / norm_pow(perp + e0, r)
        };

        let k0 = field(0.0, self);
        let (mut k1, mut k2) = (k0, k0);
        let mut converged = false;
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        for it in 1..=MAX_FIXED_POINT_ITERS {
            iterations = it;
            let n1 = field(h * (GL_A11 * k1 + GL_A12 * k2), self);
            let n2 = field(h * (GL_A21 * k1 + GL_A22 * k2), self);
            if !(n1.is_finite() && n2.is_finite()) {
                break;
            }
            let change = (n1 - k1).abs().max((n2 - k2).abs());
            let scale = n1.abs().max(n2.abs());
            k1 = n1;
            k2 = n2;
            residual = if scale > 0.0 { change / scale } else { 0.0 };
            if change <= FIXED_POINT_TOL * scale {
                converged = true;
                break;
            }
        }
        let p_total = 0.5 * h * (k1 + k2);
        if !converged || !p_total.is_finite() || p_total > 0.0 {
            return Err(Error::NonConvergence { iterations, residual });
        }
        for ((d, c), &m) in self.scratch.dc.iter_mut().zip(&self.scratch.c).zip(mu) {
            *d = c * (m * p_total).exp_m1();
        }
        range.lift_add(y, &mut self.scratch);
        Ok(())
    }

    /// `(sum |c|^2 e^{2 mu P}, sum mu |c|^2 e^{2 mu P})`.
    fn range_moments(&self, p: f64, mu_max: f64) -> (f64, f64) {
        let x = 2.0 * p;
        if (x * mu_max).abs() <= TAYLOR_RADIUS {
            let s = &self.moments;
            let (mut e0, mut e1) = (0.0, 0.0);
            let mut coef = 1.0;
            for m in 0..=TAYLOR_ORDER {
                e0 += coef * s[m];
                e1 += coef * s[m + 1];
                coef *= x / (m + 1) as f64;
            }
            (e0, e1)
        } else {
            let mu = self.sys.range().mu();
            self.scratch.c.iter().zip(mu).fold((0.0, 0.0), |(e0, e1), (c, &m)| {
                let w = c.norm_sqr() * (x * m).exp();
                (e0 + w, e1 + m * w)
            })
        }
    }
}

/// `exp(lambda_j t) - 1`, applied as `z + z w` so that a unit-modulus factor
/// stays unit to the accuracy of `w` rather than of `1 + w`; the rounded
/// factor itself would add a one-ulp energy drift per step.
fn phases(sys: &SpectralSystem, t: f64) -> Vec<C64> {
    sys.eigenvalues().iter().map(|l| exp_m1(l * t)).collect()
}

fn exp_m1(z: C64) -> C64 {
    let (s, c) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    C64::new(z.re.exp_m1() * c - 2.0 * half * half, z.re.exp() * s)
}

fn apply_phases(y: &mut [C64], phase: &[C64]) {
    for (z, w) in y.iter_mut().zip(phase) {
        *z += *z * w;
    }
}

/// Parameters of [`simulate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimOptions {
    pub dt: f64,
    pub t_final: f64,
    /// Record every `stride`-th step (the first and last are always kept).
    pub stride: usize,
    pub record_states: bool,
    /// Stop once `E(t) < ratio * E(0)`.
    pub stop_energy_ratio: Option<f64>,
}

impl SimOptions {
    pub fn new(dt: f64, t_final: f64) -> Self {
        SimOptions { dt, t_final, stride: 1, record_states: false, stop_energy_ratio: None }
    }

    pub fn stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn record_states(mut self, yes: bool) -> Self {
        self.record_states = yes;
        self
    }

    pub fn stop_energy_ratio(mut self, ratio: Option<f64>) -> Self {
        self.stop_energy_ratio = ratio;
        self
    }
}

/// Step-resolution checks gathered during [`simulate`].
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SimDiagnostics {
    pub steps: usize,
    pub halvings: u32,
    /// Largest per-step increase of `E`, zero when monotone.
    pub max_energy_increase: f64,
    /// Largest `||y(t)|| - ||y0||`, zero when contractive.
    pub max_norm_excess: f64,
    /// `max_t ||y(t)||_K / ||y0||_K`.
    pub c_star: f64,
    pub stopped_early: bool,
    pub y0_norm: f64,
    pub y0_norm_k: f64,
}

/// Recorded closed-loop solution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub controls: Vec<f64>,
    pub norms_h: Vec<f64>,
    pub norms_k: Vec<f64>,
    /// `<B y, y>` at the recorded times.
    pub damping: Vec<f64>,
    /// `Re <A y, y>` at the recorded times.
    pub linear_rates: Vec<f64>,
    /// Empty unless states were requested.
    pub states: Vec<State>,
    pub stride: usize,
    pub dt: f64,
    pub law: FeedbackLaw,
    pub diagnostics: SimDiagnostics,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// `dE/dt = Re <A y, y> + p <B y, y>` at the recorded times.
    pub fn energy_rates(&self) -> Vec<f64> {
        self.linear_rates.iter().zip(&self.controls).zip(&self.damping).map(|((l, p), q)| l + p * q).collect()
    }

    /// CSV with header `t,energy,control,norm_h,norm_k`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.len() + 1));
        out.push_str("t,energy,control,norm_h,norm_k\n");
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e}",
                self.times[i], self.energies[i], self.controls[i], self.norms_h[i], self.norms_k[i]
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.to_csv().as_bytes())?;
        f.flush()?;
        Ok(())
    }
}

struct Recorder {
    traj: Trajectory,
    record_states: bool,
}

impl Recorder {
    fn push(&mut self, sys: &SpectralSystem, t: f64, y: &[C64]) {
        let tr = &mut self.traj;
        let norm_sqr: f64 = y.iter().map(|c| c.norm_sqr()).sum();
        let mut s = sys.scratch();
        let q = sys.range().quad_form(y, &mut s).max(0.0);
        let lin: f64 = y.iter().zip(sys.eigenvalues()).map(|(c, l)| l.re * c.norm_sqr()).sum();
        tr.times.push(t);
        tr.energies.push(0.5 * norm_sqr);
        tr.controls.push(tr.law.value_from(norm_sqr, q));
        tr.norms_h.push(norm_sqr.sqrt());
        tr.norms_k.push(weighted_norm_sqr(y, sys.k_weights()).sqrt());
        tr.damping.push(q);
        tr.linear_rates.push(lin);
        if self.record_states {
            tr.states.push(State::new_unchecked(y.to_vec()));
        }
    }
}

/// Integrates the closed loop from `y0` over `[0, t_final]`.
pub fn simulate(sys: &SpectralSystem, law: &FeedbackLaw, y0: &State, opts: &SimOptions) -> Result<Trajectory> {
    if y0.dim() != sys.n() {
        return Err(Error::DimensionMismatch { expected: sys.n(), got: y0.dim() });
    }
    if !(opts.t_final > 0.0 && opts.t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_final = {} must be positive", opts.t_final)));
    }
    if opts.stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    if let Some(r) = opts.stop_energy_ratio {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidArgument(format!("stop_energy_ratio = {r} outside (0, 1)")));
        }
    }
    let dt = opts.dt;
    let full_steps = (opts.t_final / dt * (1.0 + 1e-12)).floor() as usize;
    let remainder = opts.t_final - full_steps as f64 * dt;
    let tail = if remainder > 1e-9 * dt { Some(remainder) } else { None };
    let total_steps = full_steps + tail.is_some() as usize;

    let y0_norm = y0.norm_sqr().sqrt();
    let y0_norm_k = sys.norm_k(y0)?;
    let mut rec = Recorder {
        traj: Trajectory {
            times: Vec::new(),
            energies: Vec::new(),
            controls: Vec::new(),
            norms_h: Vec::new(),
            norms_k: Vec::new(),
            damping: Vec::new(),
            linear_rates: Vec::new(),
            states: Vec::new(),
            stride: opts.stride,
            dt,
            law: *law,
            diagnostics: SimDiagnostics {
                c_star: if y0_norm_k > 0.0 { 1.0 } else { 0.0 },
                y0_norm,
                y0_norm_k,
                ..Default::default()
            },
        },
        record_states: opts.record_states,
    };

    let mut y = y0.coeffs().to_vec();
    rec.push(sys, 0.0, &y);
    let e0 = 0.5 * y0_norm * y0_norm;
    let stop_below = opts.stop_energy_ratio.map(|r| r * e0);
    let mut stepper = Stepper::new(sys, *law, dt)?;
    let mut tail_stepper = match tail {
        Some(h) => Some(Stepper::new(sys, *law, h)?),
        None => None,
    };
    let mut energy = e0;
    let mut diag = SimDiagnostics { c_star: rec.traj.diagnostics.c_star, ..Default::default() };

    for n in 1..=total_steps {
        let is_tail = n > full_steps;
        let t_prev = (n - 1) as f64 * dt;
        if is_tail {
            tail_stepper.as_mut().expect("tail step prepared").step(&mut y, t_prev)?;
        } else {
            stepper.step(&mut y, t_prev)?;
        }
        let t = if is_tail { opts.t_final } else { n as f64 * dt };
        let norm_sqr: f64 = y.iter().map(|c| c.norm_sqr()).sum();
        if !norm_sqr.is_finite() {
            return Err(Error::StepFailure { t, halvings: 0, reason: "non-finite state".into() });
        }
        let new_energy = 0.5 * norm_sqr;
        let increase = new_energy - energy;
        if increase > ENERGY_INCREASE_TOL {
            return Err(Error::EnergyIncrease { increase });
        }
        diag.max_energy_increase = diag.max_energy_increase.max(increase);
        diag.max_norm_excess = diag.max_norm_excess.max(norm_sqr.sqrt() - y0_norm);
        if y0_norm_k > 0.0 {
            let nk = weighted_norm_sqr(&y, sys.k_weights()).sqrt();
            diag.c_star = diag.c_star.max(nk / y0_norm_k);
        }
        energy = new_energy;
        diag.steps = n;

        let stop = stop_below.is_some_and(|b| energy < b);
        if n % opts.stride == 0 || n == total_steps || stop {
            rec.push(sys, t, &y);
        }
        if stop {
            diag.stopped_early = n < total_steps;
            break;
        }
    }
    diag.halvings = stepper.halvings + tail_stepper.map_or(0, |s| s.halvings);
    diag.y0_norm = y0_norm;
    diag.y0_norm_k = y0_norm_k;
    rec.traj.diagnostics = diag;
    Ok(rec.traj)
}

/// `max_n |E(t_{n+1}) - E(t_n) - int dE/dt|` with the integral of the
/// recorded energy rate by the trapezoid rule.
pub fn dissipation_residual(sys: &SpectralSystem, law: &FeedbackLaw, traj: &Trajectory) -> Result<f64> {
    if traj.stride != 1 {
        return Err(Error::StrideRequired);
    }
    if traj.law != *law {
        return Err(Error::InvalidArgument("trajectory was produced by a different law".into()));
    }
    if let Some(s) = traj.states.first() {
        if s.dim() != sys.n() {
            return Err(Error::DimensionMismatch { expected: sys.n(), got: s.dim() });
        }
    }
    let rates = traj.energy_rates();
    let mut worst = 0.0f64;
    for i in 1..traj.len() {
        let h = traj.times[i] - traj.times[i - 1];
        let predicted = 0.5 * h * (rates[i] + rates[i - 1]);
        let actual = traj.energies[i] - traj.energies[i - 1];
        worst = worst.max((actual - predicted).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn oracle(b: f64) -> SpectralSystem {
        let eig = vec![C64::new(0.0, 1.0), C64::new(0.0, -1.0)];
        let bm = DMatrix::from_diagonal_element(2, 2, C64::new(b, 0.0));
        SpectralSystem::new(eig, bm, None, 0.5, "oracle").unwrap()
    }

    fn unit_y0() -> State {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        State::new(vec![C64::new(h, 0.0), C64::new(h, 0.0)]).unwrap()
    }

    #[test]
    fn exp_m1_matches_exp() {
        for k in 0..50 {
            let z = C64::new(-0.3 + 0.02 * k as f64, 0.7 * k as f64 - 9.0);
            assert!((exp_m1(z) - (z.exp() - 1.0)).norm() < 1e-14);
        }
        let tiny = C64::new(0.0, 1e-9);
        assert!((exp_m1(tiny) - C64::new(-5e-19, 1e-9)).norm() < 1e-30);
    }

    #[test]
    fn linear_flow_half_period() {
        let sys = oracle(1.0);
        let y = State::new(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).unwrap();
        let z = linear_flow(&sys, &y, std::f64::consts::PI).unwrap();
        for c in z.coeffs() {
            assert!((c - C64::new(-1.0, 0.0)).norm() < 1e-15);
        }
        assert_eq!(linear_flow(&sys, &y, 0.0).unwrap(), y);
        assert!(linear_flow(&sys, &y, -1.0).is_err());
    }

    #[test]
    fn control_examples() {
        let sys = oracle(1.0);
        let law0 = FeedbackLaw::new(0.0, 1e-14).unwrap();
        let law2 = FeedbackLaw::new(2.0, 1e-14).unwrap();
        assert_eq!(control_value(&sys, &law0, &State::zeros(2)).unwrap(), 0.0);
        let y = State::new(vec![C64::new(0.3, 0.0), C64::new(0.0, 0.4)]).unwrap();
        assert!((control_value(&sys, &law2, &y).unwrap() + 1.0).abs() < 1e-15);
        let half = State::new(vec![C64::new(0.5, 0.0), C64::new(0.0, 0.0)]).unwrap();
        assert!((control_value(&sys, &law0, &half).unwrap() + 0.25).abs() < 1e-15);
        assert!(FeedbackLaw::new(2.5, 1e-14).is_err());
        assert!(FeedbackLaw::new(1.0, 0.0).is_err());
    }

    #[test]
    fn zero_damping_step_is_linear_flow() {
        let sys = oracle(0.0);
        let law = FeedbackLaw::new(0.0, 1e-14).unwrap();
        let y = unit_y0();
        let a = closed_loop_step(&sys, &law, &y, 0.01).unwrap();
        let b = linear_flow(&sys, &y, 0.01).unwrap();
        for (x, z) in a.coeffs().iter().zip(b.coeffs()) {
            assert!((x - z).norm() < 1e-15);
        }
    }

    #[test]
    fn single_step_matches_scalar_law() {
        // s' = -2 s^2 from s = 1 over h: s(h) = 1 / (1 + 2h). The scalar
        // collocation solve has local error O(h^5).
        let sys = oracle(1.0);
        let law = FeedbackLaw::new(0.0, 1e-14).unwrap();
        let err = |h: f64| {
            let y = closed_loop_step(&sys, &law, &unit_y0(), h).unwrap();
            (y.norm_sqr() - 1.0 / (1.0 + 2.0 * h)).abs()
        };
        let (coarse, fine) = (err(0.1), err(0.05));
        assert!(coarse < 1e-6, "{coarse:e}");
        assert!(coarse / fine > 20.0, "{coarse:e} {fine:e}");
        assert!(err(1e-3) < 1e-15);
    }

    #[test]
    fn tail_step_reaches_t_final() {
        let sys = oracle(1.0);
        let law = FeedbackLaw::new(2.0, 1e-14).unwrap();
        let traj = simulate(&sys, &law, &unit_y0(), &SimOptions::new(0.3, 1.0)).unwrap();
        assert_eq!(traj.times.len(), 5);
        assert_eq!(traj.t_end(), 1.0);
        assert!((2.0 * traj.energies[4] - (-2.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn csv_header_and_rows() {
        let sys = oracle(1.0);
        let law = FeedbackLaw::new(0.0, 1e-14).unwrap();
        let traj = simulate(&sys, &law, &unit_y0(), &SimOptions::new(0.1, 0.2)).unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,energy,control,norm_h,norm_k"));
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.ends_with('\n'));
    }
}
