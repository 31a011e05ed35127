//! Observation functional `I(z) = int_0^T |<B S(t) z, S(t) z>| dt`, sampled
//! estimates of the constants of the observability inequalities, and the
//! trajectory bound relating `I(y(t))` to the dissipation on `[t, t + T]`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::propagator::{linear_flow, FeedbackLaw, Trajectory};
use crate::spectral::{HFunction, SpectralSystem, State, C64};

/// Bisection tolerance, in time, for sign changes of the integrand.
pub const KINK_TOL: f64 = 1e-10;
/// Sweeps of coordinate descent refining the sampled minimum.
pub const DESCENT_SWEEPS: usize = 100;
/// An estimate counts as corroborating an inequality when it exceeds this
/// fraction of `T ||B||`, the largest value the exact ratio can take.
pub const CORROBORATION_FRACTION: f64 = 1e-3;
/// Relative slack of the trajectory bound check.
pub const LEMMA2_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flavor {
    /// `I(z) >= delta ||z||^2`
    Exact,
    /// `I(z) >= delta ||z||_L^2`
    WeakL,
    /// `I(z) >= delta ||z||_K^2 H(||z||^2 / ||z||_K^2)`
    WeakH,
    /// `I(z) >= delta ||S(T) z||_L^2`
    NullCtrl,
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flavor::Exact => "exact",
            Flavor::WeakL => "weak-L",
            Flavor::WeakH => "weak-H",
            Flavor::NullCtrl => "null-ctrl",
        })
    }
}

impl FromStr for Flavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exact" => Ok(Flavor::Exact),
            "weak-L" => Ok(Flavor::WeakL),
            "weak-H" => Ok(Flavor::WeakH),
            "null-ctrl" => Ok(Flavor::NullCtrl),
            other => Err(Error::InvalidArgument(format!("unknown observability flavor '{other}'"))),
        }
    }
}

impl Serialize for Flavor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Number of trapezoid panels covering `[0, horizon]` with spacing at most
/// `quad_dt`.
pub fn panel_count(horizon: f64, quad_dt: f64) -> Result<usize> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon T = {horizon} must be positive")));
    }
    if !(quad_dt > 0.0 && quad_dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("quad_dt = {quad_dt} must be positive")));
    }
    Ok(((horizon / quad_dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize)
}

/// Composite trapezoid rule for `int_a^b |f|` on `panels` equal panels;
/// panels across which `f` changes sign are split at the root, located by
/// bisection to [`KINK_TOL`].
pub fn abs_trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    let mut t0 = a;
    let mut f0 = f(a);
    for i in 1..=panels {
        let t1 = if i == panels { b } else { a + i as f64 * h };
        let f1 = f(t1);
        if f0 * f1 < 0.0 {
            let (mut lo, mut hi, mut flo) = (t0, t1, f0);
            while hi - lo > KINK_TOL {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm * flo > 0.0 {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            let root = 0.5 * (lo + hi);
            total += 0.5 * (root - t0) * f0.abs() + 0.5 * (t1 - root) * f1.abs();
        } else {
            total += 0.5 * (t1 - t0) * (f0.abs() + f1.abs());
        }
        t0 = t1;
        f0 = f1;
    }
    total
}

/// `I(z)` by the trapezoid rule on nodes spaced at most `quad_dt`, with the
/// exact linear flow at every node.
pub fn obs_integral(sys: &SpectralSystem, z: &State, horizon: f64, quad_dt: f64) -> Result<f64> {
    if z.dim() != sys.n() {
        return Err(Error::DimensionMismatch { expected: sys.n(), got: z.dim() });
    }
    if z.is_zero() {
        return Err(Error::ZeroState);
    }
    let panels = panel_count(horizon, quad_dt)?;
    let range = sys.range();
    let integrand = |t: f64| -> f64 {
        let zt = linear_flow(sys, z, t).expect("nonnegative time");
        let mut s = range.scratch();
        range.quad_form(zt.coeffs(), &mut s)
    };
    Ok(abs_trapezoid(integrand, 0.0, horizon, panels))
}

/// `sum_{n=0}^{N} w_n exp(sigma t_n)` for trapezoid weights on `N` panels of
/// width `h`.
fn trapezoid_exponential(sigma: C64, h: f64, panels: usize) -> C64 {
    let x = sigma * h;
    let nodes = panels as f64;
    let last = exp_reduced(x * nodes);
    if x.re == 0.0 && x.im == 0.0 {
        return C64::new(h * nodes, 0.0);
    }
    let d = expm1_reduced(x);
    let total = if d.norm() < 1e-6 {
        (0..=panels).map(|k| exp_reduced(x * k as f64)).sum::<C64>()
    } else {
        expm1_reduced(x * (nodes + 1.0)) / d
    };
    (total - (C64::new(1.0, 0.0) + last) * 0.5) * h
}

/// `exp(z)` with the imaginary part reduced modulo `2 pi` first.
fn exp_reduced(z: C64) -> C64 {
    let im = z.im.rem_euclid(std::f64::consts::TAU);
    C64::from_polar(z.re.exp(), im)
}

/// `exp(z) - 1` accurate for small `|z|` after reducing the imaginary part.
fn expm1_reduced(z: C64) -> C64 {
    let mut b = z.im.rem_euclid(std::f64::consts::TAU);
    if b > std::f64::consts::PI {
        b -= std::f64::consts::TAU;
    }
    let em1 = z.re.exp_m1();
    let (sin_b, cos_b) = b.sin_cos();
    let half = (0.5 * b).sin();
    let cos_m1 = -2.0 * half * half;
    C64::new(em1 * cos_b + cos_m1, (em1 + 1.0) * sin_b)
}

/// Hermitian matrix `G` with `z^H G z` equal to the trapezoid value of the
/// (nonnegative) observation integrand, `G_jk = B_jk sum_n w_n
/// exp((conj lambda_j + lambda_k) t_n)`.
#[derive(Clone, Debug)]
pub struct ObservationGramian {
    horizon: f64,
    quad_dt: f64,
    panels: usize,
    g: DMatrix<C64>,
}

impl ObservationGramian {
    pub fn new(sys: &SpectralSystem, horizon: f64, quad_dt: f64) -> Result<Self> {
        let panels = panel_count(horizon, quad_dt)?;
        let h = horizon / panels as f64;
        let n = sys.n();
        let lam = sys.eigenvalues();
        let b = sys.b_matrix();
        let mut g = DMatrix::<C64>::zeros(n, n);
        for j in 0..n {
            for k in j..n {
                if b[(j, k)] == C64::new(0.0, 0.0) {
                    continue;
                }
                let w = trapezoid_exponential(lam[j].conj() + lam[k], h, panels);
                let v = b[(j, k)] * w;
                g[(j, k)] = v;
                g[(k, j)] = v.conj();
            }
            g[(j, j)].im = 0.0;
        }
        Ok(ObservationGramian { horizon, quad_dt, panels, g })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn quad_dt(&self) -> f64 {
        self.quad_dt
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.g
    }

    /// `I(z)` evaluated as `z^H G z`.
    pub fn integral(&self, z: &State) -> Result<f64> {
        let n = self.g.nrows();
        if z.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: z.dim() });
        }
        Ok(hermitian_form(&self.g, z.coeffs()).max(0.0))
    }
}

fn hermitian_form(g: &DMatrix<C64>, z: &[C64]) -> f64 {
    let n = z.len();
    let mut acc = 0.0;
    for k in 0..n {
        let col = g.column(k);
        let mut gz = C64::new(0.0, 0.0);
        for j in 0..n {
            gz += z[j].conj() * col[j];
        }
        acc += (gz * z[k]).re;
    }
    acc
}

/// Quadratic quantities of a state from which every ratio is formed.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Stats {
    /// `I(z)`
    num: f64,
    /// `||z||^2`
    h2: f64,
    /// `||z||_K^2`
    k2: f64,
    /// `||z||_L^2`
    l2: f64,
    /// `||S(T) z||_L^2`
    nc: f64,
}

/// Everything needed to evaluate a flavor ratio for many states.
pub struct ObservabilityProblem<'a> {
    sys: &'a SpectralSystem,
    gram: ObservationGramian,
    flavor: Flavor,
    hfun: Option<HFunction>,
    null_weights: Vec<f64>,
}

impl<'a> ObservabilityProblem<'a> {
    pub fn new(
        sys: &'a SpectralSystem,
        horizon: f64,
        quad_dt: f64,
        flavor: Flavor,
        hfun: Option<HFunction>,
    ) -> Result<Self> {
        if flavor == Flavor::WeakH && hfun.is_none() {
            return Err(Error::InvalidArgument("the weak-H flavor needs an H function".into()));
        }
        let gram = ObservationGramian::new(sys, horizon, quad_dt)?;
        let null_weights =
            sys.l_weights().iter().zip(sys.eigenvalues()).map(|(l, lam)| l * (2.0 * lam.re * horizon).exp()).collect();
        Ok(ObservabilityProblem { sys, gram, flavor, hfun, null_weights })
    }

    pub fn gramian(&self) -> &ObservationGramian {
        &self.gram
    }

    fn stats(&self, z: &[C64]) -> Stats {
        let mut s = Stats { num: hermitian_form(&self.gram.g, z), h2: 0.0, k2: 0.0, l2: 0.0, nc: 0.0 };
        let (kw, lw) = (self.sys.k_weights(), self.sys.l_weights());
        for j in 0..z.len() {
            let a = z[j].norm_sqr();
            s.h2 += a;
            s.k2 += kw[j] * a;
            s.l2 += lw[j] * a;
            s.nc += self.null_weights[j] * a;
        }
        s
    }

    /// Natural log of the flavor ratio; `-inf` when `I(z) = 0`.
    fn ln_ratio_of(&self, s: &Stats) -> Result<f64> {
        let ln_num = s.num.max(0.0).ln();
        Ok(match self.flavor {
            Flavor::Exact => ln_num - s.h2.ln(),
            Flavor::WeakL => ln_num - s.l2.ln(),
            Flavor::NullCtrl => {
                if s.nc == 0.0 {
                    f64::INFINITY
                } else {
                    ln_num - s.nc.ln()
                }
            }
            Flavor::WeakH => {
                let h = self.hfun.as_ref().expect("checked at construction");
                ln_num - s.k2.ln() - h.ln_value(s.h2 / s.k2)?
            }
        })
    }

    /// Flavor ratio of `z`, evaluated on the unit sphere of the norm the
    /// flavor normalizes by (the K-sphere for weak-H, the H-sphere
    /// otherwise).
    pub fn ratio(&self, z: &State) -> Result<f64> {
        Ok(self.ln_ratio(z)?.exp())
    }

    pub fn ln_ratio(&self, z: &State) -> Result<f64> {
        if z.dim() != self.sys.n() {
            return Err(Error::DimensionMismatch { expected: self.sys.n(), got: z.dim() });
        }
        if z.is_zero() {
            return Err(Error::ZeroState);
        }
        let scale = if self.flavor == Flavor::WeakH { self.sys.norm_k(z)? } else { z.norm_sqr().sqrt() };
        let unit = z.scaled(1.0 / scale);
        self.ln_ratio_of(&self.stats(unit.coeffs()))
    }

    /// Coordinate descent on `objective(stats)` starting from `z`; each
    /// trial moves one coordinate by `+/- s` or `+/- i s`.
    fn descend(&self, z: &mut Vec<C64>, objective: &dyn Fn(&Stats) -> Result<f64>) -> Result<f64> {
        let n = z.len();
        let g = &self.gram.g;
        let (kw, lw, nw) = (self.sys.k_weights(), self.sys.l_weights(), &self.null_weights);
        let normalize = |z: &mut Vec<C64>| {
            let norm = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            z.iter_mut().for_each(|c| *c /= norm);
        };
        normalize(z);
        let mut step = 0.1;
        let mut stats = self.stats(z);
        let mut best = objective(&stats)?;
        for _ in 0..DESCENT_SWEEPS {
            let mut gz: Vec<C64> = (0..n).map(|j| (0..n).map(|k| g[(j, k)] * z[k]).sum()).collect();
            let mut improved = false;
            for j in 0..n {
                for alpha in [C64::new(step, 0.0), C64::new(-step, 0.0), C64::new(0.0, step), C64::new(0.0, -step)] {
                    let da = 2.0 * (z[j].conj() * alpha).re + alpha.norm_sqr();
                    let trial = Stats {
                        num: stats.num + 2.0 * (alpha.conj() * gz[j]).re + alpha.norm_sqr() * g[(j, j)].re,
                        h2: stats.h2 + da,
                        k2: stats.k2 + kw[j] * da,
                        l2: stats.l2 + lw[j] * da,
                        nc: stats.nc + nw[j] * da,
                    };
                    if !(trial.h2 > 0.0) {
                        continue;
                    }
                    let value = match objective(&trial) {
                        Ok(v) => v,
                        Err(_) => continue,
                    };
                    if value < best {
                        best = value;
                        stats = trial;
                        z[j] += alpha;
                        for (row, gzr) in gz.iter_mut().enumerate() {
                            *gzr += g[(row, j)] * alpha;
                        }
                        improved = true;
                    }
                }
            }
            normalize(z);
            stats = self.stats(z);
            best = objective(&stats)?;
            if !improved {
                step *= 0.5;
            }
        }
        Ok(best)
    }
}

/// Seeded states uniform on the unit sphere (normalized complex Gaussians)
/// followed by every canonical basis vector.
pub fn sample_states(n: usize, n_samples: usize, seed: u64) -> Vec<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_samples + n);
    while out.len() < n_samples {
        let coeffs: Vec<C64> =
            (0..n).map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))).collect();
        let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.push(State::new_unchecked(coeffs.into_iter().map(|c| c / norm).collect()));
        }
    }
    out.extend((0..n).map(|j| State::basis(n, j)));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservabilityReport {
    pub flavor: Flavor,
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Refined minimum of the flavor ratio; never above `sample_minimum`.
    pub delta_estimate: f64,
    pub ln_delta: f64,
    /// Minimum over the sample set alone.
    pub sample_minimum: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub quad_dt: f64,
    /// State attaining `delta_estimate`, normalized as the flavor requires.
    pub worst_sample: State,
    pub hfun: Option<HFunction>,
    pub corroborated: bool,
    pub verdict: String,
}

/// Sampled estimate of the largest `delta` for which the flavor's
/// observability inequality holds on the truncation.
pub fn estimate_delta(
    sys: &SpectralSystem,
    horizon: f64,
    flavor: Flavor,
    hfun: Option<HFunction>,
    n_samples: usize,
    seed: u64,
    quad_dt: f64,
) -> Result<ObservabilityReport> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    let problem = ObservabilityProblem::new(sys, horizon, quad_dt, flavor, hfun)?;
    let samples = sample_states(sys.n(), n_samples, seed);
    let mut worst: Option<(f64, usize)> = None;
    for (i, z) in samples.iter().enumerate() {
        let v = problem.ln_ratio(z)?;
        if worst.is_none_or(|(w, _)| v < w) {
            worst = Some((v, i));
        }
    }
    let (ln_sample_min, idx) = worst.expect("sample set is nonempty");

    let mut z = samples[idx].coeffs().to_vec();
    let objective = |s: &Stats| problem.ln_ratio_of(s);
    let refined = if ln_sample_min.is_finite() { problem.descend(&mut z, &objective)? } else { f64::NEG_INFINITY };
    let (ln_delta, worst_state) = if refined < ln_sample_min {
        (refined, State::new_unchecked(z))
    } else {
        (ln_sample_min, samples[idx].clone())
    };
    let scale = if flavor == Flavor::WeakH { sys.norm_k(&worst_state)? } else { worst_state.norm_sqr().sqrt() };
    let worst_state = worst_state.scaled(1.0 / scale);
    let delta = ln_delta.exp();
    let threshold = CORROBORATION_FRACTION * horizon * sys.op_norm_b();
    let corroborated = delta > threshold && delta.is_finite();
    let verdict = format!("{flavor} observability {}", if corroborated { "corroborated" } else { "not corroborated" });
    Ok(ObservabilityReport {
        flavor,
        horizon,
        delta_estimate: delta,
        ln_delta,
        sample_minimum: ln_sample_min.exp(),
        n_samples,
        seed,
        quad_dt,
        worst_sample: worst_state,
        hfun,
        corroborated,
        verdict,
    })
}

/// Smallest `c_T >= 1` for which `I(z) >= ||z||_K^2 exp(-c_T ||z||_K / ||z||)`
/// holds on the sample set and its descent refinement, i.e. the weak-H
/// inequality with `delta = 1` and `H(x) = exp(-c_T / sqrt x)`.
pub fn calibrate_log_exponential(
    sys: &SpectralSystem,
    horizon: f64,
    n_samples: usize,
    seed: u64,
    quad_dt: f64,
) -> Result<f64> {
    let problem = ObservabilityProblem::new(sys, horizon, quad_dt, Flavor::Exact, None)?;
    // Minimizing the negative of sqrt(x) ln(||z||_K^2 / I(z)).
    let objective = |s: &Stats| -> Result<f64> {
        if s.num <= 0.0 {
            return Err(Error::InvalidArgument("unobserved state".into()));
        }
        Ok(-(s.h2 / s.k2).sqrt() * (s.k2 / s.num).ln())
    };
    let mut best: Option<(f64, usize)> = None;
    let samples = sample_states(sys.n(), n_samples, seed);
    for (i, z) in samples.iter().enumerate() {
        let v = objective(&problem.stats(z.coeffs()))?;
        if best.is_none_or(|(b, _)| v < b) {
            best = Some((v, i));
        }
    }
    let (start, idx) = best.expect("sample set is nonempty");
    let mut z = samples[idx].coeffs().to_vec();
    let refined = problem.descend(&mut z, &objective)?.min(start);
    Ok((-refined).max(1.0))
}

/// Outcome of [`lemma2_check`]. `rhs_squared_norm` carries `||B||^2` in the
/// constant, `rhs_plain_norm` carries `||B||`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma2Report {
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs_squared_norm: Vec<f64>,
    pub rhs_plain_norm: Vec<f64>,
    pub max_violation: f64,
    pub min_margin: f64,
    pub satisfied: bool,
    pub max_violation_plain: f64,
    pub satisfied_plain: bool,
}

/// Checks, at every recorded `t` with `t + T` inside the trajectory,
///
/// ```text
/// int_0^T <B S(s) y(t), S(s) y(t)> ds
///   <= (2 T^{3/2} ||B||^2 ||y0||^{2-r} + T^{1/2}) ||y(t)||^{r/2}
///      (int_t^{t+T} <y, By>^2 / ||y||^r ds)^{1/2}
/// ```
///
/// together with the variant whose constant carries `||B||` instead of
/// `||B||^2`.
pub fn lemma2_check(
    sys: &SpectralSystem,
    law: &FeedbackLaw,
    traj: &Trajectory,
    horizon: f64,
    quad_dt: f64,
) -> Result<Lemma2Report> {
    if traj.stride != 1 {
        return Err(Error::StrideRequired);
    }
    if traj.states.len() != traj.len() {
        return Err(Error::InvalidArgument("trajectory does not carry its states".into()));
    }
    if traj.t_end() + 1e-9 * horizon < horizon {
        return Err(Error::HorizonTooShort { needed: horizon, available: traj.t_end() });
    }
    let dt = traj.dt;
    let offset = (horizon / dt).round() as usize;
    if ((offset as f64) * dt - horizon).abs() > 1e-9 * horizon {
        return Err(Error::InvalidArgument(format!("horizon {horizon} is not a multiple of the time step {dt}")));
    }
    let r = law.r();
    let eps = law.state_epsilon();
    let integrand: Vec<f64> = traj
        .damping
        .iter()
        .zip(&traj.norms_h)
        .map(|(q, nh)| if *nh <= eps || !law.is_active() { 0.0 } else { q * q / nh.powf(r) })
        .collect();
    let mut prefix = vec![0.0; integrand.len()];
    for i in 1..integrand.len() {
        let h = traj.times[i] - traj.times[i - 1];
        prefix[i] = prefix[i - 1] + 0.5 * h * (integrand[i] + integrand[i - 1]);
    }

    let gram = ObservationGramian::new(sys, horizon, quad_dt)?;
    let b_norm = sys.op_norm_b();
    let y0_norm = traj.norms_h[0];
    let head = |b_pow: f64| -> f64 {
        let y0_factor = if y0_norm == 0.0 { 0.0 } else { y0_norm.powf(2.0 - r) };
        2.0 * horizon.powf(1.5) * b_norm.powf(b_pow) * y0_factor + horizon.sqrt()
    };
    let (head_sq, head_plain) = (head(2.0), head(1.0));

    let mut out = Lemma2Report {
        times: Vec::new(),
        lhs: Vec::new(),
        rhs_squared_norm: Vec::new(),
        rhs_plain_norm: Vec::new(),
        max_violation: f64::NEG_INFINITY,
        min_margin: f64::INFINITY,
        satisfied: true,
        max_violation_plain: f64::NEG_INFINITY,
        satisfied_plain: true,
    };
    for i in 0..traj.len() {
        if i + offset >= traj.len() {
            break;
        }
        let nh = traj.norms_h[i];
        let lhs = if nh == 0.0 { 0.0 } else { gram.integral(&traj.states[i])? };
        let tail = (prefix[i + offset] - prefix[i]).max(0.0).sqrt();
        let factor = if nh == 0.0 { 0.0 } else { nh.powf(0.5 * r) * tail };
        let (rhs_sq, rhs_plain) = (head_sq * factor, head_plain * factor);
        let slack = |rhs: f64| lhs <= rhs * (1.0 + LEMMA2_TOL) + f64::MIN_POSITIVE;
        out.satisfied &= slack(rhs_sq);
        out.satisfied_plain &= slack(rhs_plain);
        out.max_violation = out.max_violation.max(lhs - rhs_sq);
        out.max_violation_plain = out.max_violation_plain.max(lhs - rhs_plain);
        if rhs_sq > 0.0 {
            out.min_margin = out.min_margin.min((rhs_sq - lhs) / rhs_sq);
        }
        out.times.push(traj.times[i]);
        out.lhs.push(lhs);
        out.rhs_squared_norm.push(rhs_sq);
        out.rhs_plain_norm.push(rhs_plain);
    }
    if out.times.is_empty() {
        return Err(Error::HorizonTooShort { needed: horizon, available: traj.t_end() });
    }
    Ok(out)
}
