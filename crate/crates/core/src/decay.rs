//! Decay diagnostics: the extremal sequences of the discrete decay lemma,
//! the sampled sequences `s_k = ||y(kT)||^2` used in the rate proofs, power
//! law fits and split-sample validation of upper bounds.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::propagator::Trajectory;
use crate::spectral::HFunction;

/// Points kept by the log-spaced thinning of [`fit_power`].
pub const FIT_POINTS: usize = 256;
/// Energies below this fraction of the first energy in the window are
/// treated as floating-point floor and cut from fits and validations.
pub const FLOOR_RATIO: f64 = 1e-12;

/// Result of [`lemma1_verify`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma1Report {
    /// `a_0, ..., a_{k_max}`.
    pub sequence: Vec<f64>,
    /// `max_k a_k (k+1)^{1/(alpha+1)}`.
    pub m_empirical: f64,
    pub bounded: bool,
    /// `k -> a_k (k+1)^{1/(alpha+1)}` is nonincreasing on `k >= k_max / 2`.
    pub tail_nonincreasing: bool,
    /// Largest relative increase of the scaled sequence on the tail.
    pub tail_max_increase: f64,
    pub holds: bool,
    /// `max_k |a_{k+1} + C a_{k+1}^{alpha+2} - a_k| / a_k`.
    pub max_hypothesis_residual: f64,
}

/// Builds the extremal sequence `a_{k+1} + C a_{k+1}^{alpha+2} = a_k` and
/// tests the conclusion `a_k <= M (k+1)^{-1/(alpha+1)}`.
pub fn lemma1_verify(a0: f64, c: f64, alpha: f64, k_max: usize) -> Result<Lemma1Report> {
    if !(a0 > 0.0 && a0.is_finite()) {
        return Err(Error::InvalidArgument(format!("a0 = {a0} must be positive")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("C = {c} must be positive")));
    }
    if !(alpha > -1.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must exceed -1")));
    }
    if k_max < 10 {
        return Err(Error::InvalidArgument(format!("k_max = {k_max} must be at least 10")));
    }
    let power = alpha + 2.0;
    let gamma = 1.0 / (alpha + 1.0);
    let mut seq = Vec::with_capacity(k_max + 1);
    seq.push(a0);
    let mut residual = 0.0f64;
    for k in 0..k_max {
        let prev = seq[k];
        let next = implicit_step(prev, c, power)?;
        residual = residual.max((next + c * next.powf(power) - prev).abs() / prev);
        seq.push(next);
    }
    let scaled: Vec<f64> = seq.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64).powf(gamma)).collect();
    let m_empirical = scaled.iter().copied().fold(0.0, f64::max);
    let bounded = m_empirical.is_finite() && scaled.iter().all(|b| b.is_finite());
    let tail = &scaled[k_max / 2..];
    let tail_max_increase = tail.windows(2).map(|w| (w[1] - w[0]) / w[0]).fold(f64::NEG_INFINITY, f64::max);
    let tail_nonincreasing = tail.windows(2).all(|w| w[1] <= w[0]);
    Ok(Lemma1Report {
        sequence: seq,
        m_empirical,
        bounded,
        tail_nonincreasing,
        tail_max_increase,
        holds: bounded && tail_nonincreasing,
        max_hypothesis_residual: residual,
    })
}

/// Root of `x + c x^p = a` in `(0, a)`: Newton steps safeguarded by the
/// bisection bracket.
fn implicit_step(a: f64, c: f64, p: f64) -> Result<f64> {
    let g = |x: f64| x + c * x.powf(p) - a;
    let (mut lo, mut hi) = (0.0, a);
    // The explicit guess is good when c a^{p-1} is small.
    let mut x = a / (1.0 + c * a.powf(p - 1.0));
    for _ in 0..200 {
        let gx = g(x);
        if gx == 0.0 {
            return Ok(x);
        }
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = 1.0 + c * p * x.powf(p - 1.0);
        let mut next = x - gx / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x || hi - lo <= 1e-14 * hi {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::RootFind(format!("no convergence solving x + {c} x^{p} = {a}")))
}

/// Sampled sequences of the rate proofs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProofSequences {
    pub period: f64,
    /// `s_k = ||y(kT)||^2`.
    pub s: Vec<f64>,
    /// Present when an `H` function was supplied.
    pub e: Option<Vec<f64>>,
    pub s_nonincreasing: bool,
    pub e_nonincreasing: Option<bool>,
    pub e_over_s_nonincreasing: Option<bool>,
}

/// `||y(t)||^2` by linear interpolation of the recorded energies.
pub fn norm_sqr_at(traj: &Trajectory, t: f64) -> Result<f64> {
    let times = &traj.times;
    if traj.is_empty() || t < times[0] || t > traj.t_end() * (1.0 + 1e-12) {
        return Err(Error::HorizonTooShort { needed: t, available: traj.t_end() });
    }
    let i = times.partition_point(|&x| x <= t);
    if i == 0 {
        return Ok(2.0 * traj.energies[0]);
    }
    if i >= times.len() {
        return Ok(2.0 * traj.energies[times.len() - 1]);
    }
    let (t0, t1) = (times[i - 1], times[i]);
    let w = (t - t0) / (t1 - t0);
    Ok(2.0 * ((1.0 - w) * traj.energies[i - 1] + w * traj.energies[i]))
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + f64::MIN_POSITIVE)
}

/// Extracts `s_k` and, given `H`, the auxiliary sequence of the rate
/// proofs: `e_k = s_k H^2(x_k)` for the quadratic control and
/// `e_k = H^2(x_k)` for the normalized control (`r = 2`), with
/// `x_k = s_k / (C*^2 ||y0||_{D(A)}^2)` and `C*` the monitored bound on
/// `||y(t)||_K / ||y0||_K`.
pub fn extract_proof_sequences(
    traj: &Trajectory,
    period: f64,
    hfun: Option<&HFunction>,
    y0_norm_da: f64,
) -> Result<ProofSequences> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidArgument(format!("period {period} must be positive")));
    }
    let count = (traj.t_end() / period * (1.0 + 1e-12)).floor() as usize;
    if count < 1 {
        return Err(Error::HorizonTooShort { needed: period, available: traj.t_end() });
    }
    let s =
        (0..=count).map(|k| norm_sqr_at(traj, (k as f64 * period).min(traj.t_end()))).collect::<Result<Vec<f64>>>()?;
    let s_nonincreasing = nonincreasing(&s);
    let (e, e_mono, ratio_mono) = match hfun {
        None => (None, None, None),
        Some(h) => {
            if !(y0_norm_da > 0.0) {
                return Err(Error::ZeroState);
            }
            let c_star = traj.diagnostics.c_star.max(1.0);
            let scale = c_star * c_star * y0_norm_da * y0_norm_da;
            let normalized = traj.law.r() == 2.0;
            let mut e = Vec::with_capacity(s.len());
            for &sk in &s {
                let hv = if sk > 0.0 { h.value(sk / scale)? } else { 0.0 };
                e.push(if normalized { hv * hv } else { sk * hv * hv });
            }
            let ratio: Vec<f64> = e.iter().zip(&s).map(|(e, s)| if *s > 0.0 { e / s } else { 0.0 }).collect();
            let em = nonincreasing(&e);
            let rm = nonincreasing(&ratio);
            (Some(e), Some(em), Some(rm))
        }
    };
    Ok(ProofSequences { period, s, e, s_nonincreasing, e_nonincreasing: e_mono, e_over_s_nonincreasing: ratio_mono })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    Power,
    LogSquare,
    CustomBound,
}

/// Candidate upper bound `b(t)` for `E(t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundKind {
    /// `t^{-p} ||y0||_{D(A)}^2`
    Power(f64),
    /// `||y0||_{D(A)}^2 / ln(1 + t)^2`
    LogSquare,
    /// `H^{-1}(1 / t)`
    HfunInverse(HFunction),
    /// `K^{-1}(1 / t)` with `K(x) = x H(x)`
    KfunInverse(HFunction),
}

impl BoundKind {
    pub fn model(&self) -> DecayModel {
        match self {
            BoundKind::Power(_) => DecayModel::Power,
            BoundKind::LogSquare => DecayModel::LogSquare,
            _ => DecayModel::CustomBound,
        }
    }

    pub fn eval(&self, t: f64, y0_norm_da: f64) -> Result<f64> {
        let scale = y0_norm_da * y0_norm_da;
        let v = match self {
            BoundKind::Power(p) => t.powf(-p) * scale,
            BoundKind::LogSquare => {
                let l = t.ln_1p();
                scale / (l * l)
            }
            BoundKind::HfunInverse(h) => h.inverse(1.0 / t)?,
            BoundKind::KfunInverse(h) => h.k_inverse(1.0 / t)?,
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::VanishingBound { t });
        }
        Ok(v)
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundKind::Power(p) => write!(f, "power:{p}"),
            BoundKind::LogSquare => write!(f, "log_square"),
            BoundKind::HfunInverse(h) => write!(f, "hfun_inverse:{h}"),
            BoundKind::KfunInverse(h) => write!(f, "kfun_inverse:{h}"),
        }
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    /// `power:p`, `log_square`, `hfun_inverse:<H>` or `kfun_inverse:<H>`
    /// with `<H>` an [`HFunction`] descriptor.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "log_square" {
            return Ok(BoundKind::LogSquare);
        }
        let (kind, arg) = s.split_once(':').ok_or_else(|| Error::InvalidArgument(format!("unknown bound '{s}'")))?;
        match kind {
            "power" => {
                let p: f64 = arg.parse().map_err(|_| Error::InvalidArgument(format!("bad power exponent '{arg}'")))?;
                if !(p > 0.0 && p.is_finite()) {
                    return Err(Error::InvalidArgument(format!("power exponent {p} must be positive")));
                }
                Ok(BoundKind::Power(p))
            }
            "hfun_inverse" => Ok(BoundKind::HfunInverse(arg.parse()?)),
            "kfun_inverse" => Ok(BoundKind::KfunInverse(arg.parse()?)),
            other => Err(Error::InvalidArgument(format!("unknown bound kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub model: DecayModel,
    /// Bound descriptor for validations, absent for fits.
    pub bound: Option<String>,
    /// Fitted exponent (fits) or calibrated constant `C` (validations).
    pub exponent_or_constant: f64,
    pub window: (f64, f64),
    /// RMS of the log residuals.
    pub residual: f64,
    pub validated: Option<bool>,
    pub validation_margin: Option<f64>,
    pub slack: Option<f64>,
    pub points: usize,
}

/// Indices of the samples with `t` in `[lo, hi]`, stopping before the first
/// energy below [`FLOOR_RATIO`] times the first one in the window.
fn window_indices(times: &[f64], energies: &[f64], window: (f64, f64)) -> Result<Vec<usize>> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!("empty window ({lo}, {hi})")));
    }
    let mut idx = Vec::new();
    let mut first: Option<f64> = None;
    for (i, (&t, &e)) in times.iter().zip(energies).enumerate() {
        if t < lo || t > hi {
            continue;
        }
        if !(e > 0.0) {
            if idx.is_empty() {
                return Err(Error::Decayed { t });
            }
            break;
        }
        let e_first = *first.get_or_insert(e);
        if e < FLOOR_RATIO * e_first {
            break;
        }
        idx.push(i);
    }
    Ok(idx)
}

/// Least-squares slope of `ln E` against `ln t` over the window.
pub fn fit_power(traj: &Trajectory, window: (f64, f64)) -> Result<DecayFit> {
    fit_power_series(&traj.times, &traj.energies, window)
}

/// [`fit_power`] on bare series.
pub fn fit_power_series(times: &[f64], energies: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let window = (window.0.max(f64::MIN_POSITIVE), window.1);
    let idx = window_indices(times, energies, window)?;
    let idx = log_thin(times, &idx, FIT_POINTS);
    if idx.len() < 2 {
        return Err(Error::InvalidArgument("fewer than two samples in the fit window".into()));
    }
    let xs: Vec<f64> = idx.iter().map(|&i| times[i].ln()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| energies[i].ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidArgument("fit window spans a single time".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    Ok(DecayFit {
        model: DecayModel::Power,
        bound: None,
        exponent_or_constant: slope,
        window: (times[idx[0]], times[*idx.last().expect("nonempty")]),
        residual: rms,
        validated: None,
        validation_margin: None,
        slack: None,
        points: idx.len(),
    })
}

/// Keeps at most `target` indices, nearest to a logarithmic grid in `t`.
fn log_thin(times: &[f64], idx: &[usize], target: usize) -> Vec<usize> {
    if idx.len() <= target {
        return idx.to_vec();
    }
    let (t0, t1) = (times[idx[0]].ln(), times[*idx.last().expect("nonempty")].ln());
    let mut out: Vec<usize> = Vec::with_capacity(target);
    let mut cursor = 0;
    for g in 0..target {
        let goal = t0 + (t1 - t0) * g as f64 / (target - 1) as f64;
        while cursor + 1 < idx.len() && times[idx[cursor + 1]].ln() <= goal {
            cursor += 1;
        }
        let pick = if cursor + 1 < idx.len()
            && (times[idx[cursor + 1]].ln() - goal).abs() < (times[idx[cursor]].ln() - goal).abs()
        {
            cursor + 1
        } else {
            cursor
        };
        if out.last() != Some(&idx[pick]) {
            out.push(idx[pick]);
        }
    }
    out
}

/// Split-sample test of `E(t) <= C b(t)`: `C` is the largest `E / b` on the
/// first `split` fraction of the window (in time); the bound is validated
/// when `E < C b (1 + slack)` at every later sample.
pub fn validate_bound(
    traj: &Trajectory,
    bound: &BoundKind,
    y0_norm_da: f64,
    window: (f64, f64),
    split: f64,
    slack: f64,
) -> Result<DecayFit> {
    validate_bound_series(&traj.times, &traj.energies, bound, y0_norm_da, window, split, slack)
}

/// [`validate_bound`] on bare series.
pub fn validate_bound_series(
    times: &[f64],
    energies: &[f64],
    bound: &BoundKind,
    y0_norm_da: f64,
    window: (f64, f64),
    split: f64,
    slack: f64,
) -> Result<DecayFit> {
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::InvalidArgument(format!("split {split} outside (0, 1)")));
    }
    if !(slack >= 0.0 && slack.is_finite()) {
        return Err(Error::InvalidArgument(format!("slack {slack} must be nonnegative")));
    }
    let window = (window.0.max(f64::MIN_POSITIVE), window.1);
    let idx = window_indices(times, energies, window)?;
    if idx.len() < 2 {
        return Err(Error::InvalidArgument("fewer than two samples in the validation window".into()));
    }
    let (t_lo, t_hi) = (times[idx[0]], times[*idx.last().expect("nonempty")]);
    let t_split = t_lo + split * (t_hi - t_lo);
    let mut ratios = Vec::with_capacity(idx.len());
    for &i in &idx {
        ratios.push((times[i], energies[i] / bound.eval(times[i], y0_norm_da)?));
    }
    let calib: Vec<f64> = ratios.iter().filter(|(t, _)| *t <= t_split).map(|(_, r)| *r).collect();
    let check: Vec<f64> = ratios.iter().filter(|(t, _)| *t > t_split).map(|(_, r)| *r).collect();
    if calib.is_empty() || check.is_empty() {
        return Err(Error::InvalidArgument("split leaves an empty calibration or validation set".into()));
    }
    let c = calib.iter().copied().fold(0.0, f64::max);
    let worst = check.iter().copied().fold(0.0, f64::max) / c;
    let validated = check.iter().all(|r| *r < c * (1.0 + slack));
    let residual = (ratios.iter().map(|(_, r)| (r / c).ln().powi(2)).sum::<f64>() / ratios.len() as f64).sqrt();
    Ok(DecayFit {
        model: bound.model(),
        bound: Some(bound.to_string()),
        exponent_or_constant: c,
        window: (t_lo, t_hi),
        residual,
        validated: Some(validated),
        validation_margin: Some(1.0 - worst),
        slack: Some(slack),
        points: idx.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn implicit_step_solves_the_recursion() {
        for (a, c, p) in [(1.0, 1.0, 2.0), (10.0, 0.01, 4.5), (0.1, 5.0, 1.1), (1e-30, 1.0, 2.0)] {
            let x = implicit_step(a, c, p).unwrap();
            assert!(x > 0.0 && x <= a);
            assert!((x + c * x.powf(p) - a).abs() <= 1e-13 * a);
        }
    }

    #[test]
    fn extremal_sequence_basic_case() {
        let rep = lemma1_verify(1.0, 1.0, 0.0, 1000).unwrap();
        assert!(rep.holds && rep.bounded && rep.tail_nonincreasing);
        assert!(rep.m_empirical.is_finite() && rep.m_empirical >= 1.0);
        assert!(rep.max_hypothesis_residual < 1e-13);
        assert!(lemma1_verify(0.0, 1.0, 0.0, 100).is_err());
        assert!(lemma1_verify(1.0, 1.0, -1.0, 100).is_err());
    }

    #[test]
    fn small_start_scaled_sequence_grows_towards_its_limit() {
        // With a0 below ((alpha+1) C)^{-1/(alpha+1)} the scaled sequence
        // increases towards that value instead of settling from above.
        let rep = lemma1_verify(0.1, 0.01, 0.0, 1000).unwrap();
        assert!(rep.bounded);
        assert!(!rep.tail_nonincreasing);
        assert!(rep.m_empirical < 100.0);
    }

    #[test]
    fn bound_descriptors() {
        for s in ["power:0.3333", "log_square", "hfun_inverse:logexp:2", "kfun_inverse:power:0.5"] {
            assert_eq!(s.parse::<BoundKind>().unwrap().to_string(), s);
        }
        assert!("power:-1".parse::<BoundKind>().is_err());
        assert!("exp".parse::<BoundKind>().is_err());
    }

    #[test]
    fn log_thinning_keeps_endpoints() {
        let times: Vec<f64> = (1..=10_000).map(|i| i as f64).collect();
        let idx: Vec<usize> = (0..times.len()).collect();
        let out = log_thin(&times, &idx, 64);
        assert_eq!(out[0], 0);
        assert_eq!(*out.last().unwrap(), 9999);
        assert!(out.windows(2).all(|w| w[0] < w[1]));
    }
}
