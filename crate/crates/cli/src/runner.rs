//! Executes configs and writes their artifacts.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use bistab_core::decay::{self, BoundKind, DecayFit, ProofSequences};
use bistab_core::models::{self, ModelSpec};
use bistab_core::observability::{self, Flavor, ObservabilityReport};
use bistab_core::propagator::{self, FeedbackLaw, SimDiagnostics, SimOptions, Trajectory};
use bistab_core::{SpectralSystem, State};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::{ExperimentConfig, HChoice, Mode, SystemKind};
use crate::error::{CliError, Result};
use crate::plot::{self, Series, TimeAxis};
use crate::presets;

/// Options that do not change results.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunContext {
    pub quiet: bool,
}

impl RunContext {
    pub fn progress(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

/// What a run produced.
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub artifacts: Vec<PathBuf>,
    /// Names of failed preset checks.
    pub failed_checks: Vec<String>,
}

/// Runs any mode and writes its artifacts under `cfg.output.dir`.
pub fn run(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<RunOutcome> {
    cfg.validate()?;
    match cfg.mode {
        Mode::Simulate => {
            let report = run_simulation(cfg, &cfg.output.dir, ctx)?;
            Ok(RunOutcome { artifacts: report.artifacts, failed_checks: Vec::new() })
        }
        Mode::Observability => {
            let out = run_observability(cfg, &cfg.output.dir, ctx)?;
            Ok(RunOutcome { artifacts: out.artifacts, failed_checks: Vec::new() })
        }
        Mode::Sweep => run_sweep(cfg, ctx),
        Mode::Preset => {
            let name = cfg.preset.as_deref().ok_or_else(|| CliError::MissingKey("preset".into()))?;
            Ok(presets::run_preset(name, &cfg.output, None, ctx)?.into_outcome())
        }
    }
}

/// Built system with its initial state and default step.
pub struct Setup {
    pub sys: SpectralSystem,
    pub spec: Option<ModelSpec>,
    pub y0: State,
    pub dt: f64,
}

pub fn build_system(cfg: &ExperimentConfig) -> Result<SpectralSystem> {
    let m = &cfg.model;
    Ok(match m.system {
        SystemKind::Family(_) => models::build(&m.spec()?.expect("family system"))?,
        SystemKind::Oracle2d => models::oracle_2d().0,
        SystemKind::Custom => {
            let n = m.eigenvalues.len();
            let b = DMatrix::from_fn(n, n, |i, j| m.b_rows[i][j]);
            SpectralSystem::new(m.eigenvalues.clone(), b, None, m.theta, "custom")?
        }
    })
}

pub fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    let sys = build_system(cfg)?;
    let spec = cfg.model.spec()?;
    let y0 = match (&cfg.init.state, cfg.model.system) {
        (Some(coeffs), _) => {
            if coeffs.len() != sys.n() {
                return Err(CliError::Invalid(format!(
                    "init.state has {} entries, the system has dimension {}",
                    coeffs.len(),
                    sys.n()
                )));
            }
            State::new(coeffs.clone())?
        }
        (None, SystemKind::Oracle2d) => models::oracle_2d().1,
        (None, _) => models::initial_state(&sys, cfg.init.exponent, cfg.init.seed)?,
    };
    let dt = cfg.numerics.dt.unwrap_or_else(|| default_dt(&sys, cfg.model.system));
    Ok(Setup { sys, spec, y0, dt })
}

/// `1e-3` for explicit systems, `min(1e-3, 0.1 / max |lambda|)` for model
/// families.
pub fn default_dt(sys: &SpectralSystem, system: SystemKind) -> f64 {
    match system {
        SystemKind::Family(_) => (0.1 / sys.max_abs_eigenvalue().max(f64::MIN_POSITIVE)).min(1e-3),
        _ => 1e-3,
    }
}

pub fn feedback_law(cfg: &ExperimentConfig, y0: &State) -> Result<FeedbackLaw> {
    let eps = cfg.control.state_epsilon.unwrap_or_else(|| propagator::default_epsilon(y0));
    let law = FeedbackLaw::new(cfg.control.r, eps)?;
    Ok(if cfg.control.enabled { law } else { law.disabled() })
}

/// One fit or bound validation; failures such as a fully decayed window
/// are reported instead of aborting the run.
#[derive(Clone, Debug, Serialize)]
pub struct AnalysisEntry {
    pub kind: &'static str,
    pub bound: Option<String>,
    pub result: Option<DecayFit>,
    pub error: Option<String>,
}

impl AnalysisEntry {
    pub fn validated(&self) -> bool {
        self.result.as_ref().and_then(|f| f.validated) == Some(true)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DissipationCheck {
    pub dt: f64,
    pub t_final: f64,
    pub residual: f64,
    pub residual_half_dt: f64,
    /// `residual / residual_half_dt`.
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryBoundCheck {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub points: usize,
    pub satisfied: bool,
    pub max_violation: f64,
    pub min_margin: f64,
    pub satisfied_plain: bool,
    pub max_violation_plain: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub system: String,
    pub dim: usize,
    pub dt: f64,
    pub r: f64,
    pub control_enabled: bool,
    pub state_epsilon: f64,
    pub y0_norm: f64,
    pub y0_norm_da: f64,
    pub e0: f64,
    pub t_end: f64,
    pub final_energy: f64,
    pub diagnostics: SimDiagnostics,
    pub c_t: Option<f64>,
    pub dissipation: Option<DissipationCheck>,
    pub trajectory_bound: Option<TrajectoryBoundCheck>,
    pub proof_sequences: Option<ProofSequences>,
}

/// Everything [`run_simulation`] computed.
pub struct SimulationReport {
    pub trajectory: Trajectory,
    pub analyses: Vec<AnalysisEntry>,
    pub checks: CheckReport,
    pub observability: Option<ObservabilityReport>,
    pub artifacts: Vec<PathBuf>,
    /// Wall time of the whole run; kept out of the artifacts.
    pub elapsed: Duration,
}

impl SimulationReport {
    pub fn fit_exponent(&self) -> Option<f64> {
        self.analyses.iter().find(|a| a.kind == "fit").and_then(|a| a.result.as_ref()).map(|f| f.exponent_or_constant)
    }

    pub fn validation(&self, bound: &str) -> Option<&AnalysisEntry> {
        self.analyses.iter().find(|a| a.kind == "validation" && a.bound.as_deref() == Some(bound))
    }
}

/// Calibrated `c_T` and the weak-H report that goes with it.
fn calibrate(cfg: &ExperimentConfig, sys: &SpectralSystem) -> Result<(f64, ObservabilityReport)> {
    let o = &cfg.obs;
    let c_t = observability::calibrate_log_exponential(sys, o.horizon, o.n_samples, o.seed, cfg.numerics.quad_dt)?;
    let h = HChoice::LogExpAuto.resolve(Some(c_t))?;
    let report = observability::estimate_delta(
        sys,
        o.horizon,
        Flavor::WeakH,
        Some(h),
        o.n_samples,
        o.seed,
        cfg.numerics.quad_dt,
    )?;
    Ok((c_t, report))
}

/// Window used when `analysis.window = auto`: skips the transient before
/// `10 T`, or the first tenth of the run when it stopped before `10 T`.
pub fn default_window(cfg: &ExperimentConfig, t_end: f64) -> (f64, f64) {
    let transient = (10.0 * cfg.obs.horizon).min(cfg.numerics.t_final / 10.0);
    let start = if transient < t_end { transient } else { t_end / 10.0 };
    (start, t_end)
}

/// `simulate` mode: trajectory, fits, validations, checks and plot.
pub fn run_simulation(cfg: &ExperimentConfig, dir: &Path, ctx: &RunContext) -> Result<SimulationReport> {
    let started = Instant::now();
    let Setup { sys, y0, dt, .. } = setup(cfg)?;
    let law = feedback_law(cfg, &y0)?;
    ensure_dir(dir)?;
    let mut artifacts = Vec::new();

    let needs_c_t = cfg.obs.hfun == HChoice::LogExpAuto || cfg.analysis.bounds.iter().any(|b| b.needs_calibration());
    let (c_t, obs_report) = if needs_c_t {
        let (c, rep) = calibrate(cfg, &sys)?;
        artifacts.push(write_json(&dir.join("observability.json"), &ObservabilityArtifact::new(&sys, &rep, Some(c)))?);
        (Some(c), Some(rep))
    } else {
        (None, None)
    };

    ctx.progress(&format!("simulating {} (dim {}, dt {dt:e}, t_final {})", sys.label(), sys.n(), cfg.numerics.t_final));
    let opts = SimOptions::new(dt, cfg.numerics.t_final)
        .stride(cfg.numerics.stride)
        .stop_energy_ratio(cfg.numerics.stop_energy_ratio);
    let traj = propagator::simulate(&sys, &law, &y0, &opts)?;
    let csv = dir.join("trajectory.csv");
    traj.write_csv(&csv)?;
    artifacts.push(csv);

    let y0_norm_da = sys.norm_k(&y0)?;
    let window = cfg.analysis.window.unwrap_or_else(|| default_window(cfg, traj.t_end()));
    let mut analyses = Vec::new();
    if cfg.analysis.fit {
        let res = decay::fit_power(&traj, window);
        analyses.push(entry("fit", None, res));
    }
    let mut bounds = Vec::new();
    for choice in &cfg.analysis.bounds {
        let bound = choice.resolve(c_t)?;
        let res = decay::validate_bound(&traj, &bound, y0_norm_da, window, cfg.analysis.split, cfg.analysis.slack);
        analyses.push(entry("validation", Some(bound.to_string()), res));
        bounds.push(bound);
    }

    let proof_sequences = match cfg.analysis.proof_period {
        Some(period) => {
            let h = cfg.obs.hfun.resolve(c_t)?;
            Some(decay::extract_proof_sequences(&traj, period, Some(&h), y0_norm_da)?)
        }
        None => None,
    };

    let (dissipation, trajectory_bound) =
        if cfg.analysis.checks { run_checks(cfg, &sys, &law, &y0, ctx)? } else { (None, None) };

    let e0 = traj.energies[0];
    let checks = CheckReport {
        system: sys.label().to_string(),
        dim: sys.n(),
        dt,
        r: law.r(),
        control_enabled: law.is_active(),
        state_epsilon: law.state_epsilon(),
        y0_norm: y0.norm_sqr().sqrt(),
        y0_norm_da,
        e0,
        t_end: traj.t_end(),
        final_energy: *traj.energies.last().expect("trajectory has its initial point"),
        diagnostics: traj.diagnostics.clone(),
        c_t,
        dissipation,
        trajectory_bound,
        proof_sequences,
    };
    artifacts.push(write_json(&dir.join("checks.json"), &checks)?);
    artifacts.push(write_json(&dir.join("decay.json"), &DecayArtifact { window, analyses: analyses.clone() })?);
    artifacts.push(write_config(dir, cfg)?);

    if cfg.output.emit_plots {
        let svg = energy_plot(cfg, &traj, &analyses, &bounds, y0_norm_da);
        artifacts.push(write_text(&dir.join("energy.svg"), &svg)?);
    }
    Ok(SimulationReport {
        trajectory: traj,
        analyses,
        checks,
        observability: obs_report,
        artifacts,
        elapsed: started.elapsed(),
    })
}

fn entry(kind: &'static str, bound: Option<String>, res: bistab_core::Result<DecayFit>) -> AnalysisEntry {
    match res {
        Ok(fit) => AnalysisEntry { kind, bound, result: Some(fit), error: None },
        Err(e) => AnalysisEntry { kind, bound, result: None, error: Some(e.to_string()) },
    }
}

/// Horizon of the trajectory-bound check: `T` rounded to a multiple of `dt`.
pub fn check_horizon(horizon: f64, dt: f64) -> f64 {
    (horizon / dt).round().max(1.0) * dt
}

/// Dissipation residual at `check_dt` and `check_dt / 2`, and the
/// trajectory bound along the `check_dt` run.
fn run_checks(
    cfg: &ExperimentConfig,
    sys: &SpectralSystem,
    law: &FeedbackLaw,
    y0: &State,
    ctx: &RunContext,
) -> Result<(Option<DissipationCheck>, Option<TrajectoryBoundCheck>)> {
    let dt = cfg.analysis.check_dt;
    let horizon = check_horizon(cfg.obs.horizon, dt);
    let t_check = cfg.analysis.check_t_final.unwrap_or_else(|| cfg.numerics.t_final.min(1.5 * horizon));
    ctx.progress(&format!("checking dissipation and trajectory bound on [0, {t_check}] at dt {dt:e}"));
    let traj = propagator::simulate(sys, law, y0, &SimOptions::new(dt, t_check).record_states(true))?;
    let residual = propagator::dissipation_residual(sys, law, &traj)?;
    let fine = propagator::simulate(sys, law, y0, &SimOptions::new(0.5 * dt, t_check))?;
    let residual_half_dt = propagator::dissipation_residual(sys, law, &fine)?;
    let dissipation = DissipationCheck {
        dt,
        t_final: t_check,
        residual,
        residual_half_dt,
        ratio: if residual_half_dt > 0.0 { residual / residual_half_dt } else { f64::INFINITY },
    };
    let bound = if traj.t_end() > horizon {
        let rep = observability::lemma2_check(sys, law, &traj, horizon, cfg.numerics.quad_dt)?;
        Some(TrajectoryBoundCheck {
            horizon,
            points: rep.times.len(),
            satisfied: rep.satisfied,
            max_violation: rep.max_violation,
            min_margin: rep.min_margin,
            satisfied_plain: rep.satisfied_plain,
            max_violation_plain: rep.max_violation_plain,
        })
    } else {
        None
    };
    Ok((Some(dissipation), bound))
}

#[derive(Serialize)]
struct DecayArtifact {
    window: (f64, f64),
    analyses: Vec<AnalysisEntry>,
}

#[derive(Serialize)]
pub struct ObservabilityArtifact<'a> {
    pub system: &'a str,
    pub dim: usize,
    pub op_norm_b: f64,
    pub c_t: Option<f64>,
    pub report: &'a ObservabilityReport,
}

impl<'a> ObservabilityArtifact<'a> {
    pub fn new(sys: &'a SpectralSystem, report: &'a ObservabilityReport, c_t: Option<f64>) -> Self {
        ObservabilityArtifact { system: sys.label(), dim: sys.n(), op_norm_b: sys.op_norm_b(), c_t, report }
    }
}

fn energy_plot(
    cfg: &ExperimentConfig,
    traj: &Trajectory,
    analyses: &[AnalysisEntry],
    bounds: &[BoundKind],
    y0_norm_da: f64,
) -> String {
    let log_axis = bounds.iter().any(|b| !matches!(b, BoundKind::Power(_)));
    let axis = if log_axis { TimeAxis::LogLog } else { TimeAxis::Log };
    let mut series = vec![Series {
        name: "E(t)".into(),
        points: traj.times.iter().copied().zip(traj.energies.iter().copied()).collect(),
        dashed: false,
    }];
    let validations = analyses.iter().filter(|a| a.kind == "validation");
    for (bound, a) in bounds.iter().zip(validations) {
        let Some(fit) = &a.result else { continue };
        let c = fit.exponent_or_constant;
        let (lo, hi) = fit.window;
        let points = traj
            .times
            .iter()
            .filter(|t| **t >= lo && **t <= hi)
            .filter_map(|t| bound.eval(*t, y0_norm_da).ok().map(|b| (*t, c * b)))
            .collect();
        series.push(Series { name: format!("C * {bound}"), points, dashed: true });
    }
    let timestamp = cfg.output.plot_timestamp.then(unix_time);
    plot::decay_svg(&format!("energy decay, r = {}", cfg.control.r), axis, &series, timestamp)
}

fn unix_time() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub struct ObservabilityOutcome {
    pub report: ObservabilityReport,
    pub c_t: Option<f64>,
    pub artifacts: Vec<PathBuf>,
}

/// `observability` mode: one report for the configured flavor.
pub fn run_observability(cfg: &ExperimentConfig, dir: &Path, ctx: &RunContext) -> Result<ObservabilityOutcome> {
    let sys = build_system(cfg)?;
    ensure_dir(dir)?;
    let o = &cfg.obs;
    ctx.progress(&format!("estimating {} observability of {} (T = {})", o.flavor, sys.label(), o.horizon));
    let (report, c_t) = match (o.flavor, o.hfun) {
        (Flavor::WeakH, HChoice::LogExpAuto) => {
            let (c, rep) = calibrate(cfg, &sys)?;
            (rep, Some(c))
        }
        (flavor, choice) => {
            let h = match flavor {
                Flavor::WeakH => Some(choice.resolve(None)?),
                _ => None,
            };
            let rep =
                observability::estimate_delta(&sys, o.horizon, flavor, h, o.n_samples, o.seed, cfg.numerics.quad_dt)?;
            (rep, None)
        }
    };
    let artifacts = vec![
        write_json(&dir.join("observability.json"), &ObservabilityArtifact::new(&sys, &report, c_t))?,
        write_config(dir, cfg)?,
    ];
    Ok(ObservabilityOutcome { report, c_t, artifacts })
}

/// Grid point of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub r: f64,
    pub beta: f64,
    pub interval: (f64, f64),
    pub n_modes: usize,
}

impl GridPoint {
    pub fn key(&self) -> String {
        format!("r={}_beta={}_x0={}_x1={}_n={}", self.r, self.beta, self.interval.0, self.interval.1, self.n_modes)
    }

    fn sort_key(&self) -> (f64, f64, f64, f64, usize) {
        (self.r, self.beta, self.interval.0, self.interval.1, self.n_modes)
    }
}

/// Cartesian product of the sweep lists; an empty list contributes the
/// base config's value. Sorted by grid key.
pub fn sweep_grid(cfg: &ExperimentConfig) -> Vec<GridPoint> {
    let s = &cfg.sweep;
    let or = |v: &Vec<f64>, base: f64| if v.is_empty() { vec![base] } else { v.clone() };
    let rs = or(&s.r, cfg.control.r);
    let betas = or(&s.beta, cfg.model.beta);
    let intervals = if s.interval.is_empty() { vec![cfg.model.interval] } else { s.interval.clone() };
    let ns = if s.n_modes.is_empty() { vec![cfg.model.n_modes] } else { s.n_modes.clone() };
    let mut grid = Vec::new();
    for &r in &rs {
        for &beta in &betas {
            for &interval in &intervals {
                for &n_modes in &ns {
                    grid.push(GridPoint { r, beta, interval, n_modes });
                }
            }
        }
    }
    grid.sort_by(|a, b| {
        let (x, y) = (a.sort_key(), b.sort_key());
        x.0.total_cmp(&y.0)
            .then(x.1.total_cmp(&y.1))
            .then(x.2.total_cmp(&y.2))
            .then(x.3.total_cmp(&y.3))
            .then(x.4.cmp(&y.4))
    });
    grid.dedup();
    grid
}

/// Row of `summary.csv`.
struct SweepRow {
    key: String,
    point: GridPoint,
    t_end: f64,
    final_energy: f64,
    fit_exponent: Option<f64>,
    residual: Option<f64>,
    bound_ok: Option<bool>,
    validated: Option<bool>,
    delta: f64,
}

/// `sweep` mode: one sub-directory per grid point plus `summary.csv`.
pub fn run_sweep(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<RunOutcome> {
    let grid = sweep_grid(cfg);
    ensure_dir(&cfg.output.dir)?;
    let rows = parallel_map(&grid, |point| -> Result<(SweepRow, Vec<PathBuf>)> {
        let mut sub = cfg.clone();
        sub.mode = Mode::Simulate;
        sub.control.r = point.r;
        sub.model.beta = point.beta;
        sub.model.interval = point.interval;
        sub.model.n_modes = point.n_modes;
        sub.validate()?;
        let key = point.key();
        let dir = cfg.output.dir.join(&key);
        ctx.progress(&format!("sweep point {key}"));
        let rep = run_simulation(&sub, &dir, ctx)?;
        let obs = run_observability(&sub, &dir, &RunContext { quiet: true })?;
        let mut artifacts = rep.artifacts.clone();
        artifacts.extend(obs.artifacts);
        let validations: Vec<&AnalysisEntry> = rep.analyses.iter().filter(|a| a.kind == "validation").collect();
        let row = SweepRow {
            key,
            point: point.clone(),
            t_end: rep.checks.t_end,
            final_energy: rep.checks.final_energy,
            fit_exponent: rep.fit_exponent(),
            residual: rep.checks.dissipation.as_ref().map(|d| d.residual),
            bound_ok: rep.checks.trajectory_bound.as_ref().map(|b| b.satisfied),
            validated: (!validations.is_empty()).then(|| validations.iter().all(|a| a.validated())),
            delta: obs.report.delta_estimate,
        };
        Ok((row, artifacts))
    });
    let mut outcome = RunOutcome::default();
    let mut csv = String::from(
        "key,r,beta,x0,x1,n_modes,t_end,final_energy,fit_exponent,dissipation_residual,trajectory_bound,validated,delta,flavor\n",
    );
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
    let optb = |v: Option<bool>| v.map_or(String::new(), |x| x.to_string());
    for res in rows {
        let (row, artifacts) = res?;
        outcome.artifacts.extend(artifacts);
        let p = &row.point;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{:e},{:e},{},{},{},{},{:e},{}\n",
            row.key,
            p.r,
            p.beta,
            p.interval.0,
            p.interval.1,
            p.n_modes,
            row.t_end,
            row.final_energy,
            opt(row.fit_exponent),
            opt(row.residual),
            optb(row.bound_ok),
            optb(row.validated),
            row.delta,
            cfg.obs.flavor
        ));
    }
    outcome.artifacts.push(write_text(&cfg.output.dir.join("summary.csv"), &csv)?);
    Ok(outcome)
}

/// Maps `f` over `items` on a pool of scoped threads; results keep the
/// order of `items`.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len()).max(1);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("worker panicked").into_iter().map(|r| r.expect("every item processed")).collect()
}

/// Outcome of [`interpolation_survey`].
#[derive(Clone, Debug, Serialize)]
pub struct InterpolationSurvey {
    pub states: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` over the random states.
    pub max_ratio: f64,
    /// Largest `|lhs - rhs| / lhs` over single-mode states.
    pub single_mode_defect: f64,
}

/// Interpolation inequality on seeded random states and on every basis
/// vector (where it is an equality).
pub fn interpolation_survey(sys: &SpectralSystem, n_states: usize, seed: u64) -> Result<InterpolationSurvey> {
    let samples = observability::sample_states(sys.n(), n_states, seed);
    let mut out = InterpolationSurvey { states: n_states, violations: 0, max_ratio: 0.0, single_mode_defect: 0.0 };
    for z in &samples[..n_states] {
        let c = sys.check_interpolation(z)?;
        out.violations += usize::from(!c.holds);
        out.max_ratio = out.max_ratio.max(c.lhs / c.rhs);
    }
    for z in &samples[n_states..] {
        let c = sys.check_interpolation(z)?;
        out.single_mode_defect = out.single_mode_defect.max((c.lhs - c.rhs).abs() / c.lhs);
    }
    Ok(out)
}

/// Relative energy drift over `steps` steps with the control forced off.
pub fn conservation_drift(sys: &SpectralSystem, y0: &State, dt: f64, steps: usize) -> Result<f64> {
    let law = FeedbackLaw::for_initial_state(0.0, y0)?.disabled();
    let traj = propagator::simulate(sys, &law, y0, &SimOptions::new(dt, steps as f64 * dt))?;
    let e0 = traj.energies[0];
    Ok(traj.energies.iter().map(|e| (e - e0).abs() / e0).fold(0.0, f64::max))
}

/// Effective config next to the results. `output.dir` is left out so that
/// identical runs into different directories give identical files.
fn write_config(dir: &Path, cfg: &ExperimentConfig) -> Result<PathBuf> {
    let text: String =
        cfg.to_text().lines().filter(|l| !l.starts_with("output.dir ")).map(|l| format!("{l}\n")).collect();
    write_text(&dir.join("config.txt"), &text)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))
}

pub fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    std::fs::write(path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    Ok(path.to_path_buf())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value).map_err(bistab_core::Error::from)?;
    text.push('\n');
    write_text(path, &text)
}
