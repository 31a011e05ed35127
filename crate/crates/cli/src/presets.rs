//! Named experiment bundles with built-in checks.

use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;

use bistab_core::decay::BoundKind;
use bistab_core::models::ModelFamily;
use bistab_core::observability::Flavor;
use bistab_core::propagator::Trajectory;
use serde::Serialize;

use crate::config::{BoundChoice, ExperimentConfig, HChoice, Mode, OutputConfig, SystemKind};
use crate::error::{CliError, Result};
use crate::runner::{self, RunContext, RunOutcome, SimulationReport};

pub const PRESETS: [&str; 4] = ["oracle-2d", "paper-3.1-coupled", "paper-3.2-logdecay", "paper-3.3-schrodinger"];

/// Largest tolerated per-step dissipation residual at the check step.
pub const DISSIPATION_TOL: f64 = 1e-6;
/// Smallest accepted residual ratio when the check step is halved; a
/// second-order method gives 4, the energy identity here gives 8.
pub const DISSIPATION_RATIO_MIN: f64 = 3.4;
pub const CONSERVATION_TOL: f64 = 1e-12;
pub const CONSERVATION_STEPS: usize = 10_000;
pub const INTERPOLATION_STATES: usize = 10_000;
pub const SINGLE_MODE_TOL: f64 = 1e-12;
pub const ORACLE_TOL: f64 = 1e-6;
pub const DELTA_TOL: f64 = 1e-9;

/// One run of a preset.
#[derive(Clone, Debug)]
pub struct PresetRun {
    pub name: &'static str,
    pub config: ExperimentConfig,
}

fn base(system: SystemKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(Mode::Simulate, system);
    cfg.model.interval = (0.0, FRAC_PI_2);
    cfg.model.n_modes = 64;
    cfg
}

fn with_r(cfg: &ExperimentConfig, r: f64) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.control.r = r;
    c
}

fn observability(cfg: &ExperimentConfig, flavor: Flavor, hfun: HChoice) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.mode = Mode::Observability;
    c.obs.flavor = flavor;
    c.obs.hfun = hfun;
    c
}

/// Expands a preset name into its runs.
pub fn expand(name: &str) -> Result<Vec<PresetRun>> {
    let run = |name, config| PresetRun { name, config };
    match name {
        "oracle-2d" => {
            let mut cfg = base(SystemKind::Oracle2d);
            cfg.numerics.dt = Some(1e-3);
            let mut p0 = with_r(&cfg, 0.0);
            p0.numerics.t_final = 100.0;
            p0.analysis.bounds = vec![BoundChoice::Fixed(BoundKind::Power(1.0))];
            let mut p2 = with_r(&cfg, 2.0);
            p2.numerics.t_final = 10.0;
            let obs = observability(&cfg, Flavor::Exact, HChoice::Fixed(bistab_core::HFunction::constant()));
            Ok(vec![run("p0", p0), run("p2", p2), run("exact", obs)])
        }
        "paper-3.1-coupled" => {
            let mut cfg = base(SystemKind::Family(ModelFamily::CoupledWave1d));
            cfg.model.beta = 0.1;
            cfg.numerics.t_final = 1e4;
            cfg.numerics.stride = 100;
            cfg.analysis.window = Some((10.0, 1e4));
            let mut p0 = with_r(&cfg, 0.0);
            p0.analysis.bounds =
                vec![BoundChoice::Fixed(BoundKind::Power(1.0 / 3.0)), BoundChoice::Fixed(BoundKind::Power(1.0))];
            let mut p2 = with_r(&cfg, 2.0);
            p2.analysis.bounds = vec![BoundChoice::Fixed(BoundKind::Power(1.0))];
            let obs = observability(&cfg, Flavor::WeakL, HChoice::Fixed(bistab_core::HFunction::constant()));
            Ok(vec![run("p0", p0), run("p2", p2), run("weak-L", obs)])
        }
        "paper-3.2-logdecay" | "paper-3.3-schrodinger" => {
            let family = if name == "paper-3.2-logdecay" { ModelFamily::Wave1d } else { ModelFamily::Schrodinger1d };
            let mut cfg = base(SystemKind::Family(family));
            cfg.control.r = 2.0;
            cfg.numerics.t_final = 1e6;
            cfg.numerics.stop_energy_ratio = Some(1e-12);
            cfg.numerics.stride = 100;
            cfg.obs.hfun = HChoice::LogExpAuto;
            cfg.analysis.bounds = vec![BoundChoice::Fixed(BoundKind::LogSquare), BoundChoice::HfunInverseAuto];
            cfg.analysis.proof_period = Some(cfg.obs.horizon);
            let obs = observability(&cfg, Flavor::WeakH, HChoice::LogExpAuto);
            Ok(vec![run("p2", cfg), run("weak-H", obs)])
        }
        other => Err(CliError::UnknownPreset(other.to_string())),
    }
}

/// A named pass/fail check with the measured value and its threshold.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), passed: value < threshold, value, threshold, detail: "value < threshold".into() }
    }

    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), passed: value <= threshold, value, threshold, detail: "value <= threshold".into() }
    }

    fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), passed: value > threshold, value, threshold, detail: "value > threshold".into() }
    }

    fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, value: f64::from(u8::from(passed)), threshold: 1.0, detail: detail.into() }
    }
}

/// Results of a preset.
pub struct PresetBundle {
    pub name: String,
    pub dir: PathBuf,
    pub simulations: Vec<(&'static str, SimulationReport)>,
    pub observability: Vec<(&'static str, bistab_core::observability::ObservabilityReport)>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<PathBuf>,
}

impl PresetBundle {
    pub fn failed_checks(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect()
    }

    pub fn into_outcome(self) -> RunOutcome {
        let failed_checks = self.failed_checks();
        RunOutcome { artifacts: self.artifacts, failed_checks }
    }

    pub fn simulation(&self, name: &str) -> Option<&SimulationReport> {
        self.simulations.iter().find(|(n, _)| *n == name).map(|(_, r)| r)
    }
}

#[derive(Serialize)]
struct AcceptanceArtifact<'a> {
    preset: &'a str,
    passed: bool,
    checks: &'a [Check],
}

/// Relative error of the recorded energies against `exact(t)`.
fn oracle_error(traj: &Trajectory, exact: impl Fn(f64) -> f64) -> f64 {
    traj.times.iter().zip(&traj.energies).map(|(t, e)| (e / exact(*t) - 1.0).abs()).fold(0.0, f64::max)
}

/// Runs every part of a preset under `output.dir/<name>` and evaluates its
/// checks. `seed` replaces the seeds of the initial state and samples.
pub fn run_preset(name: &str, output: &OutputConfig, seed: Option<u64>, ctx: &RunContext) -> Result<PresetBundle> {
    let runs = expand(name)?;
    let dir = output.dir.join(name);
    runner::ensure_dir(&dir)?;
    let mut bundle = PresetBundle {
        name: name.to_string(),
        dir: dir.clone(),
        simulations: Vec::new(),
        observability: Vec::new(),
        checks: Vec::new(),
        artifacts: Vec::new(),
    };
    let prepared: Vec<PresetRun> = runs
        .into_iter()
        .map(|mut run| {
            run.config.output = OutputConfig { dir: dir.join(run.name), ..output.clone() };
            if let Some(s) = seed {
                run.config.set_seed(s);
            }
            run
        })
        .collect();
    let results = runner::parallel_map(&prepared, |run| -> Result<Outcome> {
        ctx.progress(&format!("preset {name}: {}", run.name));
        match run.config.mode {
            Mode::Observability => {
                let out = runner::run_observability(&run.config, &run.config.output.dir, ctx)?;
                Ok(Outcome::Observability(out))
            }
            _ => Ok(Outcome::Simulation(Box::new(runner::run_simulation(&run.config, &run.config.output.dir, ctx)?))),
        }
    });
    for (run, res) in prepared.iter().zip(results) {
        match res? {
            Outcome::Simulation(rep) => {
                bundle.artifacts.extend(rep.artifacts.iter().cloned());
                bundle.simulations.push((run.name, *rep));
            }
            Outcome::Observability(out) => {
                bundle.artifacts.extend(out.artifacts.iter().cloned());
                bundle.observability.push((run.name, out.report));
            }
        }
    }
    bundle.checks = evaluate(name, &prepared, &bundle)?;
    let passed = bundle.checks.iter().all(|c| c.passed);
    bundle.artifacts.push(runner::write_json(
        &dir.join("acceptance.json"),
        &AcceptanceArtifact { preset: name, passed, checks: &bundle.checks },
    )?);
    Ok(bundle)
}

enum Outcome {
    Simulation(Box<SimulationReport>),
    Observability(runner::ObservabilityOutcome),
}

fn evaluate(name: &str, runs: &[PresetRun], bundle: &PresetBundle) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let sim_runs = runs.iter().filter(|r| r.config.mode == Mode::Simulate);
    for run in sim_runs {
        let rep = bundle.simulation(run.name).expect("simulation ran");
        if let Some(d) = &rep.checks.dissipation {
            checks.push(Check::below(format!("{}: dissipation residual", run.name), d.residual, DISSIPATION_TOL));
            checks.push(Check::above(
                format!("{}: dissipation residual ratio at half step", run.name),
                d.ratio,
                DISSIPATION_RATIO_MIN,
            ));
        }
        match &rep.checks.trajectory_bound {
            Some(b) => checks.push(Check::flag(
                format!("{}: trajectory bound", run.name),
                b.satisfied,
                format!("max violation {:e}, min margin {:e}", b.max_violation, b.min_margin),
            )),
            None => checks.push(Check::flag(format!("{}: trajectory bound", run.name), false, "check run too short")),
        }
        checks.push(Check::at_most(
            format!("{}: energy increase per step", run.name),
            rep.checks.diagnostics.max_energy_increase,
            0.0,
        ));
    }

    // Conservation and interpolation on the preset's system.
    let first = &runs[0].config;
    let setup = runner::setup(first)?;
    let drift = runner::conservation_drift(&setup.sys, &setup.y0, setup.dt, CONSERVATION_STEPS)?;
    checks.push(Check::below("conservation drift with control off", drift, CONSERVATION_TOL));
    let survey = runner::interpolation_survey(&setup.sys, INTERPOLATION_STATES, first.obs.seed)?;
    checks.push(Check::at_most("interpolation violations", survey.violations as f64, 0.0));
    checks.push(Check::at_most("interpolation single-mode defect", survey.single_mode_defect, SINGLE_MODE_TOL));

    let obs = |n: &str| bundle.observability.iter().find(|(k, _)| *k == n).map(|(_, r)| r).expect("report");
    let validated = |run: &str, bound: &str| {
        let entry = bundle.simulation(run).and_then(|r| r.validation(bound));
        let ok = entry.is_some_and(|e| e.validated());
        let detail = match entry {
            Some(e) => match (&e.result, &e.error) {
                (Some(f), _) => format!("C = {:e}, margin {:?}", f.exponent_or_constant, f.validation_margin),
                (None, Some(err)) => err.clone(),
                _ => String::new(),
            },
            None => "not run".into(),
        };
        Check::flag(format!("{run}: {bound} validated"), ok, detail)
    };
    let exponent = |run: &str| bundle.simulation(run).and_then(|r| r.fit_exponent()).unwrap_or(f64::NAN);

    match name {
        "oracle-2d" => {
            let p0 = &bundle.simulation("p0").expect("p0").trajectory;
            let e0 = p0.energies[0];
            let err0 = oracle_error(p0, |t| e0 / (1.0 + 4.0 * e0 * t));
            checks.push(Check::below("p0: energy vs E0/(1+4 E0 t)", err0, ORACLE_TOL));
            let p2 = &bundle.simulation("p2").expect("p2").trajectory;
            let e0 = p2.energies[0];
            let err2 = oracle_error(p2, |t| e0 * (-2.0 * t).exp());
            checks.push(Check::below("p2: energy vs E0 exp(-2t)", err2, ORACLE_TOL));
            let rep = obs("exact");
            checks.push(Check::below("exact: |delta - T|", (rep.delta_estimate - rep.horizon).abs(), DELTA_TOL));
        }
        "paper-3.1-coupled" => {
            checks.push(validated("p0", &BoundKind::Power(1.0 / 3.0).to_string()));
            checks.push(Check::at_most("p0: fitted exponent", exponent("p0"), -0.30));
            checks.push(validated("p2", &BoundKind::Power(1.0).to_string()));
            checks.push(Check::at_most("p2: fitted exponent", exponent("p2"), -0.8));
            checks.push(Check::above("weak-L: delta", obs("weak-L").delta_estimate, 0.0));
        }
        _ => {
            checks.push(validated("p2", &BoundKind::LogSquare.to_string()));
            checks.push(Check::above("weak-H: delta", obs("weak-H").delta_estimate, 0.0));
        }
    }
    Ok(checks)
}
