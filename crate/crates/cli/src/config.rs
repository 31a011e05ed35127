//! Line-based `key = value` experiment configuration.
//!
//! Keys are dotted (`control.r = 2`), `#` starts a comment, lists are
//! whitespace separated and complex numbers are written `re,im`. Every key
//! except `mode` and `model.family` has a default; see [`KEYS`].

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use bistab_core::decay::BoundKind;
use bistab_core::models::{DampingProfile, ModelFamily, ModelSpec};
use bistab_core::observability::Flavor;
use bistab_core::{HFunction, C64};

use crate::error::{CliError, Result};

/// Every accepted key with its default (`None` marks required keys).
pub const KEYS: &[(&str, Option<&str>)] = &[
    ("mode", None),
    ("preset", Some("none")),
    ("model.family", None),
    ("model.n_modes", Some("64")),
    ("model.beta", Some("0")),
    ("model.theta", Some("0.5")),
    ("model.damping.kind", Some("interval")),
    ("model.damping.interval", Some("0 1.5707963267948966")),
    ("model.damping.amplitude", Some("1")),
    ("model.eigenvalues", Some("")),
    ("model.b", Some("")),
    ("control.r", Some("0")),
    ("control.state_epsilon", Some("auto")),
    ("control.enabled", Some("true")),
    ("numerics.dt", Some("auto")),
    ("numerics.t_final", Some("10")),
    ("numerics.stride", Some("1")),
    ("numerics.quad_dt", Some("0.001")),
    ("numerics.stop_energy_ratio", Some("none")),
    ("init.exponent", Some("2")),
    ("init.seed", Some("1")),
    ("init.state", Some("auto")),
    ("obs.T", Some("6.283185307179586")),
    ("obs.flavor", Some("exact")),
    ("obs.hfun", Some("constant")),
    ("obs.n_samples", Some("1000")),
    ("obs.seed", Some("0")),
    ("analysis.fit", Some("true")),
    ("analysis.bounds", Some("")),
    ("analysis.window", Some("auto")),
    ("analysis.split", Some("0.5")),
    ("analysis.slack", Some("1")),
    ("analysis.checks", Some("true")),
    ("analysis.check_dt", Some("0.001")),
    ("analysis.check_t_final", Some("auto")),
    ("analysis.proof_period", Some("none")),
    ("output.dir", Some("bistab-out")),
    ("output.emit_plots", Some("true")),
    ("output.plot_timestamp", Some("false")),
    ("sweep.r", Some("")),
    ("sweep.beta", Some("")),
    ("sweep.interval", Some("")),
    ("sweep.n_modes", Some("")),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Observability,
    Sweep,
    Preset,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Simulate => "simulate",
            Mode::Observability => "observability",
            Mode::Sweep => "sweep",
            Mode::Preset => "preset",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "simulate" => Ok(Mode::Simulate),
            "observability" => Ok(Mode::Observability),
            "sweep" => Ok(Mode::Sweep),
            "preset" => Ok(Mode::Preset),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

/// Which system to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemKind {
    Family(ModelFamily),
    /// Two modes `+/- i` with `B = I`.
    Oracle2d,
    /// Eigenvalues and `B` given inline.
    Custom,
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemKind::Family(m) => write!(f, "{m}"),
            SystemKind::Oracle2d => f.write_str("oracle2d"),
            SystemKind::Custom => f.write_str("custom"),
        }
    }
}

impl FromStr for SystemKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "oracle2d" => Ok(SystemKind::Oracle2d),
            "custom" => Ok(SystemKind::Custom),
            other => other.parse().map(SystemKind::Family).map_err(|e: bistab_core::Error| e.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DampingKind {
    Interval,
    Global,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub system: SystemKind,
    pub n_modes: usize,
    pub beta: f64,
    pub theta: f64,
    pub damping_kind: DampingKind,
    pub interval: (f64, f64),
    pub amplitude: f64,
    pub eigenvalues: Vec<C64>,
    pub b_rows: Vec<Vec<C64>>,
}

impl ModelConfig {
    pub fn damping(&self) -> bistab_core::Result<DampingProfile> {
        match self.damping_kind {
            DampingKind::Global => DampingProfile::global(self.amplitude),
            DampingKind::Interval => DampingProfile::interval(self.interval.0, self.interval.1, self.amplitude),
        }
    }

    /// Model spec of a sine-basis family, `None` for the other systems.
    pub fn spec(&self) -> bistab_core::Result<Option<ModelSpec>> {
        match self.system {
            SystemKind::Family(family) => Ok(Some(
                ModelSpec::new(family, self.n_modes, self.damping()?).with_beta(self.beta).with_theta(self.theta),
            )),
            _ => Ok(None),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlConfig {
    pub r: f64,
    /// `None` selects `1e-14 ||y0||`.
    pub state_epsilon: Option<f64>,
    pub enabled: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NumericsConfig {
    /// `None` selects `1e-3` for explicit systems and
    /// `min(1e-3, 0.1 / max |lambda|)` for model families.
    pub dt: Option<f64>,
    pub t_final: f64,
    pub stride: usize,
    pub quad_dt: f64,
    pub stop_energy_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitConfig {
    pub exponent: f64,
    pub seed: u64,
    /// Explicit initial state; `None` draws a smooth random one (or the
    /// oracle state for `oracle2d`).
    pub state: Option<Vec<C64>>,
}

/// Modulus for the weak-H flavor, possibly calibrated at run time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HChoice {
    Fixed(HFunction),
    /// `exp(-c_T / sqrt x)` with `c_T` calibrated on the system.
    LogExpAuto,
}

impl fmt::Display for HChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HChoice::Fixed(h) => write!(f, "{h}"),
            HChoice::LogExpAuto => f.write_str("logexp:auto"),
        }
    }
}

impl FromStr for HChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "logexp:auto" {
            return Ok(HChoice::LogExpAuto);
        }
        s.parse().map(HChoice::Fixed).map_err(|e: bistab_core::Error| e.to_string())
    }
}

impl HChoice {
    pub fn resolve(&self, c_t: Option<f64>) -> bistab_core::Result<HFunction> {
        match self {
            HChoice::Fixed(h) => Ok(*h),
            HChoice::LogExpAuto => {
                let c = c_t.ok_or_else(|| bistab_core::Error::InvalidArgument("c_T not calibrated".into()))?;
                HFunction::log_exponential(c)
            }
        }
    }
}

/// Bound validation request, possibly using the calibrated `c_T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundChoice {
    Fixed(BoundKind),
    HfunInverseAuto,
    KfunInverseAuto,
}

impl fmt::Display for BoundChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundChoice::Fixed(b) => write!(f, "{b}"),
            BoundChoice::HfunInverseAuto => f.write_str("hfun_inverse:logexp:auto"),
            BoundChoice::KfunInverseAuto => f.write_str("kfun_inverse:logexp:auto"),
        }
    }
}

impl FromStr for BoundChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "hfun_inverse:logexp:auto" => Ok(BoundChoice::HfunInverseAuto),
            "kfun_inverse:logexp:auto" => Ok(BoundChoice::KfunInverseAuto),
            other => other.parse().map(BoundChoice::Fixed).map_err(|e: bistab_core::Error| e.to_string()),
        }
    }
}

impl BoundChoice {
    pub fn needs_calibration(&self) -> bool {
        !matches!(self, BoundChoice::Fixed(_))
    }

    pub fn resolve(&self, c_t: Option<f64>) -> bistab_core::Result<BoundKind> {
        let h = || HChoice::LogExpAuto.resolve(c_t);
        Ok(match self {
            BoundChoice::Fixed(b) => *b,
            BoundChoice::HfunInverseAuto => BoundKind::HfunInverse(h()?),
            BoundChoice::KfunInverseAuto => BoundKind::KfunInverse(h()?),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObsConfig {
    pub horizon: f64,
    pub flavor: Flavor,
    pub hfun: HChoice,
    pub n_samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisConfig {
    pub fit: bool,
    pub bounds: Vec<BoundChoice>,
    /// `None` selects `(min(10 T, t_final / 10), t_final)`.
    pub window: Option<(f64, f64)>,
    pub split: f64,
    pub slack: f64,
    /// Dissipation and trajectory-bound checks on a short stride-1 run.
    pub checks: bool,
    pub check_dt: f64,
    /// `None` selects `min(t_final, 1.5 T)`.
    pub check_t_final: Option<f64>,
    pub proof_period: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub emit_plots: bool,
    pub plot_timestamp: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub r: Vec<f64>,
    pub beta: Vec<f64>,
    pub interval: Vec<(f64, f64)>,
    pub n_modes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub preset: Option<String>,
    pub model: ModelConfig,
    pub control: ControlConfig,
    pub numerics: NumericsConfig,
    pub init: InitConfig,
    pub obs: ObsConfig,
    pub analysis: AnalysisConfig,
    pub output: OutputConfig,
    pub sweep: SweepConfig,
}

impl ExperimentConfig {
    /// Config with every default in place.
    pub fn new(mode: Mode, system: SystemKind) -> Self {
        ExperimentConfig {
            mode,
            preset: None,
            model: ModelConfig {
                system,
                n_modes: 64,
                beta: 0.0,
                theta: 0.5,
                damping_kind: DampingKind::Interval,
                interval: (0.0, FRAC_PI_2),
                amplitude: 1.0,
                eigenvalues: Vec::new(),
                b_rows: Vec::new(),
            },
            control: ControlConfig { r: 0.0, state_epsilon: None, enabled: true },
            numerics: NumericsConfig { dt: None, t_final: 10.0, stride: 1, quad_dt: 1e-3, stop_energy_ratio: None },
            init: InitConfig { exponent: 2.0, seed: 1, state: None },
            obs: ObsConfig {
                horizon: TAU,
                flavor: Flavor::Exact,
                hfun: HChoice::Fixed(HFunction::constant()),
                n_samples: 1000,
                seed: 0,
            },
            analysis: AnalysisConfig {
                fit: true,
                bounds: Vec::new(),
                window: None,
                split: 0.5,
                slack: 1.0,
                checks: true,
                check_dt: 1e-3,
                check_t_final: None,
                proof_period: None,
            },
            output: OutputConfig { dir: PathBuf::from("bistab-out"), emit_plots: true, plot_timestamp: false },
            sweep: SweepConfig { r: Vec::new(), beta: Vec::new(), interval: Vec::new(), n_modes: Vec::new() },
        }
    }

    /// Sets the seeds of the initial state and of the observability samples.
    pub fn set_seed(&mut self, seed: u64) {
        self.init.seed = seed;
        self.obs.seed = seed;
    }

    /// Cross-field checks that single keys cannot express.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if self.mode == Mode::Preset {
            if self.preset.is_none() {
                return Err(CliError::MissingKey("preset".into()));
            }
            return Ok(());
        }
        if m.system == SystemKind::Custom {
            let n = m.eigenvalues.len();
            if n == 0 {
                return Err(CliError::Invalid("custom systems need model.eigenvalues".into()));
            }
            if m.b_rows.len() != n || m.b_rows.iter().any(|row| row.len() != n) {
                return Err(CliError::Invalid(format!("model.b must be a {n} x {n} matrix")));
            }
        }
        if let Some(state) = &self.init.state {
            if m.system != SystemKind::Custom && m.system != SystemKind::Oracle2d {
                let spec = m.spec()?.expect("family system");
                if state.len() != spec.dim() {
                    return Err(CliError::Invalid(format!(
                        "init.state has {} entries, the system has dimension {}",
                        state.len(),
                        spec.dim()
                    )));
                }
            }
        }
        if let SystemKind::Family(_) = m.system {
            m.spec()?.expect("family system").validate()?;
        }
        if let Some((lo, hi)) = self.analysis.window {
            if !(lo < hi) {
                return Err(CliError::Invalid(format!("analysis.window ({lo}, {hi}) is empty")));
            }
        }
        if self.mode == Mode::Sweep
            && self.sweep.r.is_empty()
            && self.sweep.beta.is_empty()
            && self.sweep.interval.is_empty()
            && self.sweep.n_modes.is_empty()
        {
            return Err(CliError::Invalid("sweep mode needs at least one sweep.* list".into()));
        }
        Ok(())
    }

    /// Serializes every effective value; [`parse_config`] reads it back to
    /// an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let opt = |v: Option<f64>, none: &str| v.map_or(none.to_string(), |x| x.to_string());
        let m = &self.model;
        kv("mode", self.mode.to_string());
        kv("preset", self.preset.clone().unwrap_or_else(|| "none".into()));
        kv("model.family", m.system.to_string());
        kv("model.n_modes", m.n_modes.to_string());
        kv("model.beta", m.beta.to_string());
        kv("model.theta", m.theta.to_string());
        kv(
            "model.damping.kind",
            match m.damping_kind {
                DampingKind::Interval => "interval".into(),
                DampingKind::Global => "global".into(),
            },
        );
        kv("model.damping.interval", format!("{} {}", m.interval.0, m.interval.1));
        kv("model.damping.amplitude", m.amplitude.to_string());
        kv("model.eigenvalues", join_complex(&m.eigenvalues));
        kv("model.b", m.b_rows.iter().map(|r| join_complex(r)).collect::<Vec<_>>().join("; "));
        kv("control.r", self.control.r.to_string());
        kv("control.state_epsilon", opt(self.control.state_epsilon, "auto"));
        kv("control.enabled", self.control.enabled.to_string());
        let n = &self.numerics;
        kv("numerics.dt", opt(n.dt, "auto"));
        kv("numerics.t_final", n.t_final.to_string());
        kv("numerics.stride", n.stride.to_string());
        kv("numerics.quad_dt", n.quad_dt.to_string());
        kv("numerics.stop_energy_ratio", opt(n.stop_energy_ratio, "none"));
        kv("init.exponent", self.init.exponent.to_string());
        kv("init.seed", self.init.seed.to_string());
        kv("init.state", self.init.state.as_ref().map_or("auto".into(), |s| join_complex(s)));
        let o = &self.obs;
        kv("obs.T", o.horizon.to_string());
        kv("obs.flavor", o.flavor.to_string());
        kv("obs.hfun", o.hfun.to_string());
        kv("obs.n_samples", o.n_samples.to_string());
        kv("obs.seed", o.seed.to_string());
        let a = &self.analysis;
        kv("analysis.fit", a.fit.to_string());
        kv("analysis.bounds", a.bounds.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" "));
        kv("analysis.window", a.window.map_or("auto".into(), |(lo, hi)| format!("{lo} {hi}")));
        kv("analysis.split", a.split.to_string());
        kv("analysis.slack", a.slack.to_string());
        kv("analysis.checks", a.checks.to_string());
        kv("analysis.check_dt", a.check_dt.to_string());
        kv("analysis.check_t_final", opt(a.check_t_final, "auto"));
        kv("analysis.proof_period", opt(a.proof_period, "none"));
        kv("output.dir", self.output.dir.display().to_string());
        kv("output.emit_plots", self.output.emit_plots.to_string());
        kv("output.plot_timestamp", self.output.plot_timestamp.to_string());
        let s = &self.sweep;
        kv("sweep.r", join(&s.r));
        kv("sweep.beta", join(&s.beta));
        kv("sweep.interval", s.interval.iter().map(|(a, b)| format!("{a}:{b}")).collect::<Vec<_>>().join(" "));
        kv("sweep.n_modes", join(&s.n_modes));
        out
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn join_complex(v: &[C64]) -> String {
    v.iter().map(|c| format!("{},{}", c.re, c.im)).collect::<Vec<_>>().join(" ")
}

/// Parses a config; unknown keys, repeated keys and malformed values are
/// reported with their line number.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| CliError::Syntax { line, message: format!("expected 'key = value', got '{content}'") })?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(CliError::Syntax { line, message: "empty key".into() });
        }
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(CliError::UnknownKey { line, key });
        }
        if !seen.insert(key.clone()) {
            return Err(CliError::Syntax { line, message: format!("key '{key}' given twice") });
        }
        entries.push((line, key, value.trim().to_string()));
    }

    let find = |k: &str| entries.iter().find(|(_, key, _)| key == k);
    let (mode_line, _, mode_text) = find("mode").ok_or_else(|| CliError::MissingKey("mode".into()))?;
    let mode: Mode =
        mode_text.parse().map_err(|message| CliError::BadValue { line: *mode_line, key: "mode".into(), message })?;

    let system = match find("model.family") {
        Some((line, key, v)) => v.parse().map_err(|message| bad(*line, key, message))?,
        None if mode == Mode::Preset => SystemKind::Oracle2d,
        None => return Err(CliError::MissingKey("model.family".into())),
    };
    let mut cfg = ExperimentConfig::new(mode, system);

    for (line, key, value) in &entries {
        if mode == Mode::Preset && !matches!(key.as_str(), "mode" | "preset") && !key.starts_with("output.") {
            return Err(CliError::BadValue {
                line: *line,
                key: key.clone(),
                message: "preset configs accept only 'preset' and output.* keys".into(),
            });
        }
        apply(&mut cfg, key, value).map_err(|message| bad(*line, key, message))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn bad(line: usize, key: &str, message: String) -> CliError {
    CliError::BadValue { line, key: key.to_string(), message }
}

type Parsed<T> = std::result::Result<T, String>;

fn float(v: &str) -> Parsed<f64> {
    let x: f64 = v.parse().map_err(|_| format!("'{v}' is not a number"))?;
    if !x.is_finite() {
        return Err(format!("'{v}' is not finite"));
    }
    Ok(x)
}

fn positive(v: &str) -> Parsed<f64> {
    let x = float(v)?;
    if x <= 0.0 {
        return Err(format!("{x} must be positive"));
    }
    Ok(x)
}

fn integer<T: FromStr>(v: &str) -> Parsed<T> {
    v.parse().map_err(|_| format!("'{v}' is not a nonnegative integer"))
}

fn boolean(v: &str) -> Parsed<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("'{v}' is not true or false")),
    }
}

fn auto_or(v: &str, word: &str, f: impl Fn(&str) -> Parsed<f64>) -> Parsed<Option<f64>> {
    if v == word {
        Ok(None)
    } else {
        f(v).map(Some)
    }
}

fn complex(token: &str) -> Parsed<C64> {
    match token.split_once(',') {
        Some((re, im)) => Ok(C64::new(float(re)?, float(im)?)),
        None => Ok(C64::new(float(token)?, 0.0)),
    }
}

fn complex_list(v: &str) -> Parsed<Vec<C64>> {
    v.split_whitespace().map(complex).collect()
}

fn list<T>(v: &str, f: impl Fn(&str) -> Parsed<T>) -> Parsed<Vec<T>> {
    v.split_whitespace().map(f).collect()
}

fn pair(v: &str) -> Parsed<(f64, f64)> {
    let xs = list(v, float)?;
    match xs.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(format!("expected two numbers, got '{v}'")),
    }
}

fn r_value(v: &str) -> Parsed<f64> {
    let r = float(v)?;
    if r > 2.0 {
        return Err(format!("r = {r} exceeds 2"));
    }
    Ok(r)
}

fn apply(cfg: &mut ExperimentConfig, key: &str, v: &str) -> Parsed<()> {
    match key {
        "mode" | "model.family" => {}
        "preset" => cfg.preset = if v == "none" { None } else { Some(v.to_string()) },
        "model.n_modes" => cfg.model.n_modes = integer(v)?,
        "model.beta" => cfg.model.beta = float(v)?,
        "model.theta" => {
            let t = float(v)?;
            if !(t > 0.0 && t < 1.0) {
                return Err(format!("theta = {t} outside (0, 1)"));
            }
            cfg.model.theta = t;
        }
        "model.damping.kind" => {
            cfg.model.damping_kind = match v {
                "interval" => DampingKind::Interval,
                "global" => DampingKind::Global,
                _ => return Err(format!("'{v}' is not interval or global")),
            }
        }
        "model.damping.interval" => cfg.model.interval = pair(v)?,
        "model.damping.amplitude" => cfg.model.amplitude = positive(v)?,
        "model.eigenvalues" => cfg.model.eigenvalues = complex_list(v)?,
        "model.b" => {
            cfg.model.b_rows =
                if v.is_empty() { Vec::new() } else { v.split(';').map(complex_list).collect::<Parsed<_>>()? }
        }
        "control.r" => cfg.control.r = r_value(v)?,
        "control.state_epsilon" => cfg.control.state_epsilon = auto_or(v, "auto", positive)?,
        "control.enabled" => cfg.control.enabled = boolean(v)?,
        "numerics.dt" => cfg.numerics.dt = auto_or(v, "auto", positive)?,
        "numerics.t_final" => cfg.numerics.t_final = positive(v)?,
        "numerics.stride" => {
            let s: usize = integer(v)?;
            if s == 0 {
                return Err("stride must be at least 1".into());
            }
            cfg.numerics.stride = s;
        }
        "numerics.quad_dt" => cfg.numerics.quad_dt = positive(v)?,
        "numerics.stop_energy_ratio" => {
            let r = auto_or(v, "none", positive)?;
            if r.is_some_and(|r| r >= 1.0) {
                return Err("stop_energy_ratio must be below 1".into());
            }
            cfg.numerics.stop_energy_ratio = r;
        }
        "init.exponent" => cfg.init.exponent = float(v)?,
        "init.seed" => cfg.init.seed = integer(v)?,
        "init.state" => cfg.init.state = if v == "auto" { None } else { Some(complex_list(v)?) },
        "obs.T" => cfg.obs.horizon = positive(v)?,
        "obs.flavor" => cfg.obs.flavor = v.parse().map_err(|e: bistab_core::Error| e.to_string())?,
        "obs.hfun" => cfg.obs.hfun = v.parse()?,
        "obs.n_samples" => {
            let n: usize = integer(v)?;
            if n == 0 {
                return Err("n_samples must be at least 1".into());
            }
            cfg.obs.n_samples = n;
        }
        "obs.seed" => cfg.obs.seed = integer(v)?,
        "analysis.fit" => cfg.analysis.fit = boolean(v)?,
        "analysis.bounds" => cfg.analysis.bounds = list(v, |s| s.parse())?,
        "analysis.window" => cfg.analysis.window = if v == "auto" { None } else { Some(pair(v)?) },
        "analysis.split" => {
            let s = float(v)?;
            if !(s > 0.0 && s < 1.0) {
                return Err(format!("split {s} outside (0, 1)"));
            }
            cfg.analysis.split = s;
        }
        "analysis.slack" => {
            let s = float(v)?;
            if s < 0.0 {
                return Err(format!("slack {s} is negative"));
            }
            cfg.analysis.slack = s;
        }
        "analysis.checks" => cfg.analysis.checks = boolean(v)?,
        "analysis.check_dt" => cfg.analysis.check_dt = positive(v)?,
        "analysis.check_t_final" => cfg.analysis.check_t_final = auto_or(v, "auto", positive)?,
        "analysis.proof_period" => cfg.analysis.proof_period = auto_or(v, "none", positive)?,
        "output.dir" => {
            if v.is_empty() {
                return Err("output directory is empty".into());
            }
            cfg.output.dir = PathBuf::from(v);
        }
        "output.emit_plots" => cfg.output.emit_plots = boolean(v)?,
        "output.plot_timestamp" => cfg.output.plot_timestamp = boolean(v)?,
        "sweep.r" => cfg.sweep.r = list(v, r_value)?,
        "sweep.beta" => cfg.sweep.beta = list(v, float)?,
        "sweep.interval" => {
            cfg.sweep.interval = list(v, |tok| {
                let (a, b) = tok.split_once(':').ok_or_else(|| format!("'{tok}' is not x0:x1"))?;
                Ok((float(a)?, float(b)?))
            })?
        }
        "sweep.n_modes" => cfg.sweep.n_modes = list(v, integer)?,
        other => return Err(format!("unhandled key '{other}'")),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config("mode = simulate\nmodel.family = wave1d\n").unwrap();
        let mut expected = ExperimentConfig::new(Mode::Simulate, SystemKind::Family(ModelFamily::Wave1d));
        expected.preset = None;
        assert_eq!(cfg, expected);
        assert_eq!(cfg.model.n_modes, 64);
        assert_eq!(cfg.model.interval, (0.0, FRAC_PI_2));
    }

    #[test]
    fn every_key_has_a_handler() {
        let mut cfg = ExperimentConfig::new(Mode::Simulate, SystemKind::Oracle2d);
        for (key, default) in KEYS {
            if let Some(d) = default {
                apply(&mut cfg, key, d).unwrap_or_else(|e| panic!("{key}: {e}"));
            }
        }
        assert_eq!(cfg, ExperimentConfig::new(Mode::Simulate, SystemKind::Oracle2d));
    }

    #[test]
    fn rejects_out_of_scope_exponent() {
        let err = parse_config("mode = simulate\nmodel.family = wave1d\ncontrol.r = 3\n").unwrap_err();
        assert!(matches!(err, CliError::BadValue { line: 3, .. }), "{err}");
    }
}
