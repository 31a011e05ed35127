//! Finite spectral representation of the state space triple `(H, K, L)`.
//!
//! A [`SpectralSystem`] stores the generator `A` through its eigenvalues
//! (it acts diagonally on the coordinates), the bounded damping operator `B`
//! as a dense Hermitian positive semidefinite matrix in the same basis, and
//! the weights of the stronger norm `K`. The weights of the weaker norm `L`
//! are derived as `l_j = k_j^{-(1-theta)/theta}`, so that by Hölder
//!
//! ```text
//! ||y|| <= ||y||_L^theta ||y||_K^(1-theta)
//! ```
//!
//! holds for every state, with equality on single modes.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::factor::{RangeBasis, Scratch};

pub type C64 = Complex64;

/// Tolerance of the Hermitian and PSD checks at construction.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues of the damping core below this fraction of the largest one
/// are treated as exact zeros of the range factorization.
const RANK_CUTOFF: f64 = 1e-14;

/// Coordinates of a state in the spectral basis.
#[derive(Clone, Debug, PartialEq)]
pub struct State(Vec<C64>);

impl State {
    pub fn new(coeffs: Vec<C64>) -> Result<Self> {
        if let Some(j) = coeffs.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite coefficient at index {j}")));
        }
        Ok(State(coeffs))
    }

    pub(crate) fn new_unchecked(coeffs: Vec<C64>) -> Self {
        State(coeffs)
    }

    pub fn zeros(n: usize) -> Self {
        State(vec![C64::new(0.0, 0.0); n])
    }

    /// Canonical basis vector `e_j` (zero-based).
    pub fn basis(n: usize, j: usize) -> Self {
        let mut s = State::zeros(n);
        s.0[j] = C64::new(1.0, 0.0);
        s
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.0
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.0
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.0
    }

    /// Squared Euclidean norm of the coordinates.
    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn scaled(&self, factor: f64) -> State {
        State(self.0.iter().map(|c| c * factor).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }
}

impl Serialize for State {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(self.0.len()))?;
        for c in &self.0 {
            seq.serialize_element(&[c.re, c.im])?;
        }
        seq.end()
    }
}

/// Result of [`SpectralSystem::check_interpolation`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InterpolationCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Factored damping operator `B = W^H G W` used by assembled models: `W` has
/// orthonormal sparse rows, `G` is real symmetric positive semidefinite.
#[derive(Clone, Debug)]
pub struct DampingFactor {
    pub rows: Vec<Vec<(usize, C64)>>,
    pub core: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct SpectralSystem {
    eigenvalues: Vec<C64>,
    b_matrix: DMatrix<C64>,
    k_weights: Vec<f64>,
    l_weights: Vec<f64>,
    theta: f64,
    label: String,
    range: RangeBasis,
    b_norm: f64,
}

/// Graph-norm weights `1 + |lambda_j|^2`, so that `||y||_K` is the norm of
/// `D(A)`.
pub fn graph_norm_weights(eigenvalues: &[C64]) -> Vec<f64> {
    eigenvalues.iter().map(|l| 1.0 + l.norm_sqr()).collect()
}

impl SpectralSystem {
    /// Builds a system from a dense damping matrix. `k_weights = None` selects
    /// the graph-norm weights.
    pub fn new(
        eigenvalues: Vec<C64>,
        b_matrix: DMatrix<C64>,
        k_weights: Option<Vec<f64>>,
        theta: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        let n = eigenvalues.len();
        if b_matrix.nrows() != n || b_matrix.ncols() != n {
            return Err(Error::InvalidSystem(format!(
                "b_matrix is {}x{}, expected {n}x{n}",
                b_matrix.nrows(),
                b_matrix.ncols()
            )));
        }
        check_hermitian(&b_matrix)?;
        let eig = SymmetricEigen::new(b_matrix.clone());
        let spectrum: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let b_norm = check_psd(&spectrum)?;

        let keep: Vec<usize> = (0..n).filter(|&l| spectrum[l] > RANK_CUTOFF * b_norm).collect();
        let mut q_re = Vec::with_capacity(n * keep.len());
        let mut q_im = Vec::with_capacity(n * keep.len());
        for &l in &keep {
            for i in 0..n {
                let v = eig.eigenvectors[(i, l)];
                q_re.push(v.re);
                q_im.push(v.im);
            }
        }
        let mu = keep.iter().map(|&l| spectrum[l]).collect();
        let range = RangeBasis::new(n, None, n, q_re, Some(q_im), mu);
        Self::assemble(eigenvalues, b_matrix, k_weights, theta, label.into(), range, b_norm)
    }

    /// Builds a system whose damping operator is given in factored form.
    pub fn from_factor(
        eigenvalues: Vec<C64>,
        factor: DampingFactor,
        k_weights: Option<Vec<f64>>,
        theta: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        let n = eigenvalues.len();
        let m = factor.rows.len();
        if factor.core.nrows() != m || factor.core.ncols() != m {
            return Err(Error::InvalidSystem("core matrix does not match embedding".into()));
        }
        for (i, row) in factor.rows.iter().enumerate() {
            if let Some(&(p, _)) = row.iter().find(|(p, _)| *p >= n) {
                return Err(Error::InvalidSystem(format!("embedding row {i} references column {p}")));
            }
        }
        check_row_orthonormal(&factor.rows, n)?;
        let core = &factor.core;
        let asym = (core - core.transpose()).abs().max();
        if asym > HERMITIAN_TOL * core.abs().max().max(1.0) {
            return Err(Error::InvalidSystem(format!("core matrix not symmetric ({asym:e})")));
        }

        // Dense B = W^H G W.
        let mut b_matrix = DMatrix::<C64>::zeros(n, n);
        for (i, ri) in factor.rows.iter().enumerate() {
            for (j, rj) in factor.rows.iter().enumerate() {
                let g = core[(i, j)];
                if g == 0.0 {
                    continue;
                }
                for &(p, wp) in ri {
                    for &(q, wq) in rj {
                        b_matrix[(p, q)] += wp.conj() * g * wq;
                    }
                }
            }
        }
        check_hermitian(&b_matrix)?;

        let eig = SymmetricEigen::new(core.clone());
        let spectrum: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let b_norm = check_psd(&spectrum)?;
        let keep: Vec<usize> = (0..m).filter(|&l| spectrum[l] > RANK_CUTOFF * b_norm).collect();
        let mut q_re = Vec::with_capacity(m * keep.len());
        for &l in &keep {
            q_re.extend(eig.eigenvectors.column(l).iter());
        }
        let mu = keep.iter().map(|&l| spectrum[l]).collect();
        let range = RangeBasis::new(n, Some(factor.rows), m, q_re, None, mu);
        Self::assemble(eigenvalues, b_matrix, k_weights, theta, label.into(), range, b_norm)
    }

    fn assemble(
        eigenvalues: Vec<C64>,
        b_matrix: DMatrix<C64>,
        k_weights: Option<Vec<f64>>,
        theta: f64,
        label: String,
        range: RangeBasis,
        b_norm: f64,
    ) -> Result<Self> {
        let n = eigenvalues.len();
        if n == 0 {
            return Err(Error::InvalidSystem("empty truncation".into()));
        }
        if let Some(j) = eigenvalues.iter().position(|l| !l.re.is_finite() || !l.im.is_finite() || l.re > 0.0) {
            return Err(Error::InvalidSystem(format!(
                "eigenvalue {j} = {} does not generate a contraction",
                eigenvalues[j]
            )));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidSystem(format!("theta = {theta} outside (0, 1)")));
        }
        let k_weights = k_weights.unwrap_or_else(|| graph_norm_weights(&eigenvalues));
        if k_weights.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: k_weights.len() });
        }
        if let Some(j) = k_weights.iter().position(|k| !k.is_finite() || *k < 1.0) {
            return Err(Error::InvalidSystem(format!("k_{j} = {} must be >= 1", k_weights[j])));
        }
        let expo = -(1.0 - theta) / theta;
        let l_weights: Vec<f64> = k_weights.iter().map(|k| k.powf(expo)).collect();
        for (j, (l, k)) in l_weights.iter().zip(&k_weights).enumerate() {
            let prod = l.powf(theta) * k.powf(1.0 - theta);
            if (prod - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidSystem(format!(
                    "weights of mode {j} break the interpolation identity ({prod})"
                )));
            }
        }
        Ok(SpectralSystem { eigenvalues, b_matrix, k_weights, l_weights, theta, label, range, b_norm })
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn b_matrix(&self) -> &DMatrix<C64> {
        &self.b_matrix
    }

    pub fn k_weights(&self) -> &[f64] {
        &self.k_weights
    }

    pub fn l_weights(&self) -> &[f64] {
        &self.l_weights
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// True when every eigenvalue is purely imaginary (unitary linear flow).
    pub fn is_conservative(&self) -> bool {
        self.eigenvalues.iter().all(|l| l.re == 0.0)
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max)
    }

    fn check_dim(&self, y: &State) -> Result<()> {
        if y.dim() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: y.dim() });
        }
        Ok(())
    }

    pub fn norm_h(&self, y: &State) -> Result<f64> {
        self.check_dim(y)?;
        Ok(y.norm_sqr().sqrt())
    }

    pub fn norm_k(&self, y: &State) -> Result<f64> {
        self.check_dim(y)?;
        Ok(weighted_norm_sqr(y.coeffs(), &self.k_weights).sqrt())
    }

    pub fn norm_l(&self, y: &State) -> Result<f64> {
        self.check_dim(y)?;
        Ok(weighted_norm_sqr(y.coeffs(), &self.l_weights).sqrt())
    }

    pub fn check_interpolation(&self, y: &State) -> Result<InterpolationCheck> {
        self.check_dim(y)?;
        if y.is_zero() {
            return Err(Error::ZeroState);
        }
        let lhs = self.norm_h(y)?;
        let rhs = self.norm_l(y)?.powf(self.theta) * self.norm_k(y)?.powf(1.0 - self.theta);
        Ok(InterpolationCheck { lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-12) })
    }

    /// Operator norm of `B`, i.e. its largest eigenvalue, taken from the
    /// Hermitian eigendecomposition computed at construction.
    pub fn op_norm_b(&self) -> f64 {
        self.b_norm
    }

    /// `<B y, y>` evaluated from the dense matrix, with the Hermitian and
    /// sign checks applied to the result.
    pub fn quad_form_b(&self, y: &State) -> Result<f64> {
        self.check_dim(y)?;
        let z = y.coeffs();
        let n = self.n();
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..n {
            let mut row = C64::new(0.0, 0.0);
            for k in 0..n {
                row += self.b_matrix[(j, k)] * z[k];
            }
            acc += z[j].conj() * row;
        }
        let scale = y.norm_sqr();
        let tol = 1e-12 * scale.max(f64::MIN_POSITIVE) * self.b_norm.max(1.0);
        if acc.im.abs() > tol {
            return Err(Error::HermiticityViolation { imag: acc.im });
        }
        if acc.re < -tol {
            return Err(Error::InvalidSystem(format!("negative damping form {:e}", acc.re)));
        }
        Ok(acc.re.max(0.0))
    }

    /// `<B y, y>` through the range factorization; `O(n rank)` instead of
    /// `O(n^2)`. Agrees with [`quad_form_b`](Self::quad_form_b) to rounding.
    pub fn damping_form(&self, y: &State) -> Result<f64> {
        self.check_dim(y)?;
        let mut s = self.range.scratch();
        Ok(self.range.quad_form(y.coeffs(), &mut s).max(0.0))
    }

    pub(crate) fn range(&self) -> &RangeBasis {
        &self.range
    }

    pub(crate) fn scratch(&self) -> Scratch {
        self.range.scratch()
    }

    pub fn snapshot(&self) -> SystemSnapshot {
        let n = self.n();
        let mut b = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                let z = self.b_matrix[(j, k)];
                b.push([z.re, z.im]);
            }
        }
        SystemSnapshot {
            n,
            eigenvalues: self.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
            b_matrix: b,
            k_weights: self.k_weights.clone(),
            theta: self.theta,
            label: self.label.clone(),
        }
    }

    pub fn from_snapshot(snap: &SystemSnapshot) -> Result<Self> {
        let n = snap.n;
        if snap.eigenvalues.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: snap.eigenvalues.len() });
        }
        if snap.b_matrix.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: snap.b_matrix.len() });
        }
        let eigenvalues = snap.eigenvalues.iter().map(|&[re, im]| C64::new(re, im)).collect();
        let b = DMatrix::from_fn(n, n, |j, k| {
            let [re, im] = snap.b_matrix[j * n + k];
            C64::new(re, im)
        });
        SpectralSystem::new(eigenvalues, b, Some(snap.k_weights.clone()), snap.theta, snap.label.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.snapshot())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: SystemSnapshot = serde_json::from_str(text)?;
        Self::from_snapshot(&snap)
    }
}

/// JSON form of a [`SpectralSystem`]: complex numbers as `[re, im]` pairs,
/// `b_matrix` row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSnapshot {
    pub n: usize,
    pub eigenvalues: Vec<[f64; 2]>,
    pub b_matrix: Vec<[f64; 2]>,
    pub k_weights: Vec<f64>,
    pub theta: f64,
    pub label: String,
}

pub(crate) fn weighted_norm_sqr(z: &[C64], w: &[f64]) -> f64 {
    z.iter().zip(w).map(|(c, w)| w * c.norm_sqr()).sum()
}

fn check_hermitian(b: &DMatrix<C64>) -> Result<()> {
    let n = b.nrows();
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let mut worst = 0.0f64;
    for j in 0..n {
        for k in j..n {
            worst = worst.max((b[(j, k)] - b[(k, j)].conj()).norm());
        }
    }
    if worst > HERMITIAN_TOL * scale {
        return Err(Error::InvalidSystem(format!("b_matrix is not Hermitian (defect {worst:e})")));
    }
    Ok(())
}

/// Returns the largest eigenvalue after checking that none is negative
/// beyond tolerance.
fn check_psd(spectrum: &[f64]) -> Result<f64> {
    let top = spectrum.iter().copied().fold(0.0, f64::max);
    let bottom = spectrum.iter().copied().fold(f64::INFINITY, f64::min);
    if bottom < -HERMITIAN_TOL * top.max(1.0) {
        return Err(Error::InvalidSystem(format!("b_matrix is not positive semidefinite (eigenvalue {bottom:e})")));
    }
    Ok(top)
}

fn check_row_orthonormal(rows: &[Vec<(usize, C64)>], n: usize) -> Result<()> {
    let mut dense_i = vec![C64::new(0.0, 0.0); n];
    for (i, ri) in rows.iter().enumerate() {
        for &(p, w) in ri {
            dense_i[p] += w;
        }
        for (j, rj) in rows.iter().enumerate().skip(i) {
            let dot: C64 = rj.iter().map(|&(p, w)| dense_i[p].conj() * w).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            if (dot - target).norm() > 1e-12 {
                return Err(Error::InvalidSystem(format!("embedding rows {i}, {j} not orthonormal ({dot})")));
            }
        }
        for &(p, _) in ri {
            dense_i[p] = C64::new(0.0, 0.0);
        }
    }
    Ok(())
}

/// Power iteration estimate of the spectral norm of a Hermitian matrix.
///
/// Kept as an independent check of [`SpectralSystem::op_norm_b`]; its
/// convergence degrades when the top of the spectrum is clustered.
pub fn power_iteration_norm(b: &DMatrix<C64>, max_iter: usize, tol: f64) -> f64 {
    let n = b.nrows();
    if n == 0 {
        return 0.0;
    }
    // Deterministic start with weight on every coordinate.
    let mut v: Vec<C64> = (0..n).map(|i| C64::new(1.0 + 0.1 * i as f64, 0.05 * i as f64)).collect();
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|c| *c /= norm);
        let w: Vec<C64> = (0..n).map(|j| (0..n).map(|k| b[(j, k)] * v[k]).sum()).collect();
        let rayleigh: f64 = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum();
        let converged = (rayleigh - estimate).abs() <= tol * rayleigh.abs();
        estimate = rayleigh;
        v = w;
        if converged {
            break;
        }
    }
    estimate.abs()
}

/// Which member of the modulus family `H` is in use.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HKind {
    /// `H(x) = 1`
    Constant,
    /// `H(x) = x^s`
    Power(f64),
    /// `H(x) = exp(-c_T / sqrt(x))`
    LogExponential(f64),
}

/// Continuous increasing modulus `H : (0, inf) -> (0, inf)` entering the
/// weak observability inequality, together with `K(x) = x H(x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HFunction(HKind);

impl HFunction {
    pub fn constant() -> Self {
        HFunction(HKind::Constant)
    }

    pub fn power(s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidArgument(format!("power exponent {s} must be positive")));
        }
        Ok(HFunction(HKind::Power(s)))
    }

    /// Rejects `c_t` for which `x -> H(x)^2 / x` fails to increase on a grid
    /// of `(0, 1]` (analytically this needs `c_t >= 1`).
    pub fn log_exponential(c_t: f64) -> Result<Self> {
        if !(c_t.is_finite() && c_t > 0.0) {
            return Err(Error::InvalidArgument(format!("c_T = {c_t} must be positive")));
        }
        let h = HFunction(HKind::LogExponential(c_t));
        if !h.supports_normalized_rate() {
            return Err(Error::InvalidArgument(format!("c_T = {c_t}: H^2(x)/x is not increasing on (0, 1)")));
        }
        Ok(h)
    }

    pub fn kind(&self) -> HKind {
        self.0
    }

    /// `ln H(x)`; stays finite where `H` itself underflows.
    pub fn ln_value(&self, x: f64) -> Result<f64> {
        if !(x.is_finite() && x > 0.0) {
            return Err(Error::InvalidArgument(format!("H evaluated at {x}, outside (0, inf)")));
        }
        Ok(match self.0 {
            HKind::Constant => 0.0,
            HKind::Power(s) => s * x.ln(),
            HKind::LogExponential(c) => -c / x.sqrt(),
        })
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        Ok(self.ln_value(x)?.exp())
    }

    /// `K(x) = x H(x)`.
    pub fn k_value(&self, x: f64) -> Result<f64> {
        Ok(x * self.value(x)?)
    }

    /// `H^{-1}(v)` by bisection in `ln x`.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        if matches!(self.0, HKind::Constant) {
            return Err(Error::InvalidArgument("constant H is not invertible".into()));
        }
        invert_increasing(|u| self.ln_value(u.exp()), v)
    }

    /// `K^{-1}(v)` by bisection in `ln x`.
    pub fn k_inverse(&self, v: f64) -> Result<f64> {
        invert_increasing(|u| Ok(u + self.ln_value(u.exp())?), v)
    }

    /// Whether `x -> H(x)^2 / x` is strictly increasing on a grid of `(0, 1]`,
    /// the hypothesis of the normalized-control rate.
    pub fn supports_normalized_rate(&self) -> bool {
        let g = |x: f64| 2.0 * self.ln_value(x).unwrap_or(f64::NEG_INFINITY) - x.ln();
        let mut grid: Vec<f64> = (1..=1000).map(|i| i as f64 / 1000.0).collect();
        grid.extend((0..=80).map(|i| 10f64.powf(-8.0 + 0.1 * i as f64)));
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        grid.windows(2).all(|w| g(w[1]) > g(w[0]))
    }
}

/// Solves `f(x) = v` for increasing `f` given `ln f` as a function of
/// `u = ln x`.
fn invert_increasing(ln_f: impl Fn(f64) -> Result<f64>, v: f64) -> Result<f64> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidArgument(format!("cannot invert at {v}")));
    }
    let target = v.ln();
    let g = |u: f64| -> Result<f64> { Ok(ln_f(u)? - target) };
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let mut expansions = 0;
    while g(lo)? > 0.0 {
        lo *= 2.0;
        expansions += 1;
        if lo < -1400.0 || expansions > 64 {
            return Err(Error::RootFind(format!("no preimage of {v} (below range)")));
        }
    }
    while g(hi)? < 0.0 {
        hi *= 2.0;
        expansions += 1;
        if hi > 1400.0 || expansions > 64 {
            return Err(Error::RootFind(format!("no preimage of {v} (above range)")));
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

impl fmt::Display for HFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            HKind::Constant => write!(f, "constant"),
            HKind::Power(s) => write!(f, "power:{s}"),
            HKind::LogExponential(c) => write!(f, "logexp:{c}"),
        }
    }
}

impl FromStr for HFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "constant" {
            return Ok(HFunction::constant());
        }
        let (kind, arg) =
            s.split_once(':').ok_or_else(|| Error::InvalidArgument(format!("unknown H descriptor '{s}'")))?;
        let value: f64 = arg.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad H parameter '{arg}'")))?;
        match kind.trim() {
            "power" => HFunction::power(value),
            "logexp" => HFunction::log_exponential(value),
            other => Err(Error::InvalidArgument(format!("unknown H kind '{other}'"))),
        }
    }
}

impl Serialize for HFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for HFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn diag_system(b: &[f64], k: Option<Vec<f64>>, theta: f64) -> SpectralSystem {
        let n = b.len();
        let eig = (0..n).map(|j| c(0.0, (j + 1) as f64)).collect();
        let bm = DMatrix::from_fn(n, n, |i, j| if i == j { c(b[i], 0.0) } else { c(0.0, 0.0) });
        SpectralSystem::new(eig, bm, k, theta, "test").unwrap()
    }

    #[test]
    fn h_norm_examples() {
        let sys = diag_system(&[1.0, 1.0], None, 0.5);
        assert_eq!(sys.norm_h(&State::zeros(2)).unwrap(), 0.0);
        assert_eq!(sys.norm_h(&State::basis(2, 0)).unwrap(), 1.0);
        let y = State::new(vec![c(3.0, 0.0), c(0.0, 4.0)]).unwrap();
        assert!((sys.norm_h(&y).unwrap() - 5.0).abs() < 1e-15);
        assert!(matches!(sys.norm_h(&State::zeros(3)), Err(Error::DimensionMismatch { expected: 2, got: 3 })));
    }

    #[test]
    fn single_mode_weighted_norms() {
        let theta = 0.3;
        let sys = diag_system(&[1.0, 0.0, 2.0], Some(vec![1.0, 9.0, 40.0]), theta);
        for j in 0..3 {
            let e = State::basis(3, j);
            let k = sys.k_weights()[j];
            assert!((sys.norm_k(&e).unwrap() - k.sqrt()).abs() < 1e-14);
            let expect_l = k.powf(-(1.0 - theta) / (2.0 * theta));
            assert!((sys.norm_l(&e).unwrap() - expect_l).abs() < 1e-14 * expect_l.max(1.0));
            let check = sys.check_interpolation(&e).unwrap();
            assert!((check.rhs / check.lhs - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_weights_make_norms_coincide() {
        let sys = diag_system(&[1.0, 1.0, 1.0], Some(vec![1.0; 3]), 0.4);
        let y = State::new(vec![c(0.3, -1.0), c(2.0, 0.1), c(-0.7, 0.7)]).unwrap();
        let h = sys.norm_h(&y).unwrap();
        assert!((sys.norm_k(&y).unwrap() - h).abs() < 1e-14);
        assert!((sys.norm_l(&y).unwrap() - h).abs() < 1e-14);
        let check = sys.check_interpolation(&y).unwrap();
        assert!((check.lhs - check.rhs).abs() < 1e-14);
    }

    #[test]
    fn two_equal_modes_strict_interpolation() {
        // k = (1, 4), theta = 1/2: l = (1, 1/4). With |y_1| = |y_2| = 1:
        // ||y|| = sqrt 2, ||y||_L = sqrt(5/4), ||y||_K = sqrt 5,
        // rhs = (5/4)^{1/4} 5^{1/4} = 5^{1/2} / 2^{1/2} = sqrt(5/2) > sqrt 2.
        let sys = diag_system(&[1.0, 1.0], Some(vec![1.0, 4.0]), 0.5);
        let y = State::new(vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let check = sys.check_interpolation(&y).unwrap();
        assert!((check.lhs - 2f64.sqrt()).abs() < 1e-14);
        assert!((check.rhs - 2.5f64.sqrt()).abs() < 1e-14);
        assert!(check.holds && check.lhs < check.rhs);
        assert!(matches!(sys.check_interpolation(&State::zeros(2)), Err(Error::ZeroState)));
    }

    #[test]
    fn op_norm_examples() {
        assert!((diag_system(&[1.0, 1.0], None, 0.5).op_norm_b() - 1.0).abs() < 1e-12);
        assert_eq!(diag_system(&[0.0, 0.0], None, 0.5).op_norm_b(), 0.0);
        assert!((diag_system(&[2.0, 0.5], None, 0.5).op_norm_b() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quad_form_examples() {
        let sys = diag_system(&[1.0, 1.0], None, 0.5);
        let y = State::new(vec![c(1.0, 2.0), c(-0.5, 0.25)]).unwrap();
        assert!((sys.quad_form_b(&y).unwrap() - y.norm_sqr()).abs() < 1e-14);
        assert_eq!(sys.quad_form_b(&State::zeros(2)).unwrap(), 0.0);
        assert!((sys.damping_form(&y).unwrap() - y.norm_sqr()).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_systems() {
        let eig = vec![c(0.0, 1.0), c(0.0, -1.0)];
        let non_herm = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.1), c(0.5, 0.1), c(1.0, 0.0)]);
        assert!(SpectralSystem::new(eig.clone(), non_herm, None, 0.5, "x").is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        assert!(SpectralSystem::new(eig.clone(), indefinite, None, 0.5, "x").is_err());
        let ok = DMatrix::identity(2, 2);
        assert!(SpectralSystem::new(eig.clone(), ok.clone(), None, 1.0, "x").is_err());
        assert!(SpectralSystem::new(eig.clone(), ok.clone(), Some(vec![0.5, 1.0]), 0.5, "x").is_err());
        let growing = vec![c(0.1, 1.0), c(0.0, -1.0)];
        assert!(SpectralSystem::new(growing, ok, None, 0.5, "x").is_err());
    }

    #[test]
    fn snapshot_json_round_trip() {
        let eig = vec![c(0.0, 1.0), c(-0.5, -2.0)];
        let b = DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, -0.5), c(0.5, 0.5), c(1.0, 0.0)]);
        let sys = SpectralSystem::new(eig, b, None, 0.25, "custom").unwrap();
        let text = sys.to_json().unwrap();
        let back = SpectralSystem::from_json(&text).unwrap();
        assert_eq!(back.snapshot(), sys.snapshot());
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["b_matrix"][1], serde_json::json!([0.5, -0.5]));
        assert_eq!(v["eigenvalues"][1], serde_json::json!([-0.5, -2.0]));
    }

    #[test]
    fn power_iteration_matches_eigendecomposition() {
        let b = DMatrix::from_row_slice(
            3,
            3,
            &[
                c(2.0, 0.0),
                c(0.3, 0.2),
                c(0.0, 0.0),
                c(0.3, -0.2),
                c(1.0, 0.0),
                c(0.1, 0.0),
                c(0.0, 0.0),
                c(0.1, 0.0),
                c(0.5, 0.0),
            ],
        );
        let eig = vec![c(0.0, 1.0), c(0.0, 2.0), c(0.0, 3.0)];
        let sys = SpectralSystem::new(eig, b.clone(), None, 0.5, "x").unwrap();
        let est = power_iteration_norm(&b, 10_000, 1e-15);
        assert!((est - sys.op_norm_b()).abs() < 1e-10 * sys.op_norm_b());
    }

    #[test]
    fn hfunction_descriptors() {
        for text in ["constant", "power:0.75", "logexp:2.5"] {
            let h: HFunction = text.parse().unwrap();
            assert_eq!(h.to_string(), text);
        }
        assert!("logexp:0.5".parse::<HFunction>().is_err());
        assert!("power:-1".parse::<HFunction>().is_err());
        assert!("spline:1".parse::<HFunction>().is_err());
    }

    #[test]
    fn log_exponential_threshold_is_one() {
        assert!(HFunction::log_exponential(1.0).is_ok());
        assert!(HFunction::log_exponential(0.98).is_err());
        assert!(HFunction::power(0.75).unwrap().supports_normalized_rate());
        assert!(!HFunction::power(0.5).unwrap().supports_normalized_rate());
        assert!(!HFunction::constant().supports_normalized_rate());
    }

    #[test]
    fn inverse_matches_closed_form() {
        let h = HFunction::log_exponential(1.5).unwrap();
        for v in [1e-6f64, 1e-3, 0.2, 0.9] {
            // exp(-c / sqrt x) = v  <=>  x = (c / ln(1/v))^2
            let exact = (1.5 / (1.0 / v).ln()).powi(2);
            let x = h.inverse(v).unwrap();
            assert!((x - exact).abs() < 1e-12 * exact);
        }
        assert!(h.inverse(1.0).is_err());
        assert!(HFunction::constant().inverse(0.5).is_err());
        let p = HFunction::power(2.0).unwrap();
        assert!((p.inverse(0.25).unwrap() - 0.5).abs() < 1e-14);
        assert!((p.k_inverse(8.0).unwrap() - 2.0).abs() < 1e-13);
        assert!((HFunction::constant().k_inverse(0.125).unwrap() - 0.125).abs() < 1e-15);
    }
}
