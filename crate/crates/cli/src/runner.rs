//! Time-stepping loop shared by `run`, `converge`, and `compare`: advances
//! the chosen scheme, monitors the maximum principle and the energy record,
//! collects snapshots, and assembles the machine-readable summary.

use std::time::Instant;

use ac_core::baselines::{self, BaselineError};
use ac_core::diagnostics::{
    check_energy_monotone, discrete_energy, error_norms, error_norms_rms, EnergyRecord,
    MonotoneVerdict,
};
use ac_core::grid::ScalarField;
use ac_core::kinetic::{kinetic_step, moment_phi, DistributionField, LatticeModel};
use ac_core::problems::{self, Problem};
use ac_core::scheme::{self, SchemeError, SchemeParams};

use crate::config::{Resolved, RunConfig, SchemeKind};
use crate::output::{self, Summary};
use crate::CliError;

/// Over-unity slack for the maximum-principle monitor: the cubic stage maps
/// `|xi| <= 1` into `[-1, 1]` exactly in real arithmetic, so anything beyond
/// a few ulps is a genuine violation.
pub const MAX_PRINCIPLE_SLACK: f64 = 1e-13;

/// Newton tolerance and iteration cap used when the implicit baseline runs
/// under the CLI.
pub const CN_NEWTON_TOL: f64 = 1e-12;
pub const CN_MAX_ITERS: usize = 50;

pub struct RunOutcome {
    pub records: Vec<EnergyRecord>,
    pub record_steps: Vec<usize>,
    pub snapshots: Vec<(usize, ScalarField)>,
    pub final_phi: ScalarField,
    pub monotone: MonotoneVerdict,
    pub max_abs_peak: f64,
    /// `(inf, l2, rms)` against the closed-form solution, when one exists.
    pub exact_err: Option<(f64, f64, f64)>,
    pub summary: Summary,
}

/// March the state one step; kinetic runs carry the distribution field
/// between calls and hand back its zeroth moment.
struct Stepper {
    kind: SchemeKind,
    params: SchemeParams,
    dist: Option<(DistributionField, LatticeModel)>,
    newton_fallbacks: u64,
    xi_min: f64,
    xi_max: f64,
    cn_newton_iters: u64,
    cn_cg_iters: u64,
}

impl Stepper {
    fn new(kind: SchemeKind, params: SchemeParams, phi0: &ScalarField) -> Self {
        let dist = (kind == SchemeKind::Kinetic).then(|| {
            let model = LatticeModel::from_params(&params);
            (DistributionField::at_equilibrium(phi0, &model), model)
        });
        Stepper {
            kind,
            params,
            dist,
            newton_fallbacks: 0,
            xi_min: f64::INFINITY,
            xi_max: f64::NEG_INFINITY,
            cn_newton_iters: 0,
            cn_cg_iters: 0,
        }
    }

    fn advance(&mut self, phi: &ScalarField, step: usize, t: f64) -> Result<ScalarField, CliError> {
        match self.kind {
            SchemeKind::RlbMieFd => {
                let (next, report) =
                    scheme::step(phi, &self.params).map_err(|e| map_scheme_err(e, step, t))?;
                self.newton_fallbacks += report.newton_fallback_count as u64;
                self.xi_min = self.xi_min.min(report.xi_range.0);
                self.xi_max = self.xi_max.max(report.xi_range.1);
                Ok(next)
            }
            SchemeKind::FexFd => {
                baselines::fex_fd_step(phi, &self.params).map_err(|e| map_baseline_err(e, step, t))
            }
            SchemeKind::Cn => {
                let (next, report) =
                    baselines::cn_step(phi, &self.params, CN_NEWTON_TOL, CN_MAX_ITERS)
                        .map_err(|e| map_baseline_err(e, step, t))?;
                self.cn_newton_iters += report.newton_iters as u64;
                self.cn_cg_iters += report.cg_iters_total as u64;
                Ok(next)
            }
            SchemeKind::Kinetic => {
                let (dist, model) = self.dist.as_mut().expect("kinetic state initialized");
                let next = kinetic_step(dist, &self.params, model)
                    .map_err(|e| map_scheme_err(e, step, t))?;
                let phi_next = moment_phi(&next);
                *dist = next;
                Ok(phi_next)
            }
        }
    }
}

fn map_scheme_err(e: SchemeError, step: usize, t: f64) -> CliError {
    match e {
        SchemeError::XiOutOfRange { node, xi } => CliError::Invariant {
            step,
            t,
            what: format!("linear stage left [-1, 1] at node {node}: xi = {xi:.6e}"),
        },
        SchemeError::NonFinite { node } => CliError::Numeric(format!(
            "non-finite value at node {node} (step {step}, t = {t:.6})"
        )),
        other => CliError::Config(other.to_string()),
    }
}

fn map_baseline_err(e: BaselineError, step: usize, t: f64) -> CliError {
    match e {
        BaselineError::NonFinite { node } => CliError::Numeric(format!(
            "non-finite value at node {node} (step {step}, t = {t:.6})"
        )),
        BaselineError::NewtonDidNotConverge {
            iters,
            tol,
            residual,
        } => CliError::Numeric(format!(
            "implicit solve stalled at step {step} (t = {t:.6}): residual {residual:.3e} after {iters} iterations (tol {tol:.3e})"
        )),
        BaselineError::Grid(g) => CliError::Config(g.to_string()),
    }
}

/// Execute a resolved configuration. Validated mode (`allow_unsafe = false`)
/// turns the monitors into hard errors; otherwise they only record.
pub fn run_simulation(cfg: &RunConfig, resolved: &Resolved) -> Result<RunOutcome, CliError> {
    let started = Instant::now();
    let validated = resolved.params.validated;
    let dt = resolved.params.dt;
    let steps = resolved.steps;

    let mut phi = resolved
        .problem
        .initial_field(&resolved.spec)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut stepper = Stepper::new(cfg.scheme, resolved.params, &phi);

    let mut records = Vec::new();
    let mut record_steps = Vec::new();
    let mut snapshots = Vec::new();
    let mut max_abs_peak = 0.0f64;
    let mut mp_first_violation: Option<usize> = None;

    let record = |phi: &ScalarField,
                      step: usize,
                      records: &mut Vec<EnergyRecord>,
                      record_steps: &mut Vec<usize>|
     -> Result<(), CliError> {
        let energy = discrete_energy(phi, &resolved.params);
        let max_abs = phi.max_abs();
        let rec = EnergyRecord {
            t: step as f64 * dt,
            energy,
            max_abs,
        };
        if validated && energy_guarded(cfg.scheme) {
            if let Some(prev) = records.last() {
                let tol = 1e-12 * prev.energy.abs().max(1.0);
                if energy > prev.energy + tol {
                    return Err(CliError::Invariant {
                        step,
                        t: rec.t,
                        what: format!(
                            "energy increased: {:.16e} -> {:.16e}",
                            prev.energy, energy
                        ),
                    });
                }
            }
        }
        records.push(rec);
        record_steps.push(step);
        Ok(())
    };

    record(&phi, 0, &mut records, &mut record_steps)?;
    max_abs_peak = max_abs_peak.max(records[0].max_abs);
    if resolved.snapshot_steps.contains(&0) {
        snapshots.push((0, phi.clone()));
    }

    for step in 1..=steps {
        let t = step as f64 * dt;
        phi = stepper.advance(&phi, step, t)?;

        let max_abs = phi.max_abs();
        max_abs_peak = max_abs_peak.max(max_abs);
        if max_abs > 1.0 + MAX_PRINCIPLE_SLACK {
            if validated {
                return Err(CliError::Invariant {
                    step,
                    t,
                    what: format!("maximum principle violated: max|phi| = {max_abs:.16e}"),
                });
            }
            mp_first_violation.get_or_insert(step);
        }

        if step % cfg.energy_every == 0 || step == steps {
            record(&phi, step, &mut records, &mut record_steps)?;
        }
        if resolved.snapshot_steps.binary_search(&step).is_ok() {
            snapshots.push((step, phi.clone()));
        }
    }

    let monotone = check_energy_monotone(&records, None);
    let exact_err = exact_errors(&resolved.problem, &phi, steps as f64 * dt)?;
    let wall = started.elapsed().as_secs_f64();

    let summary = build_summary(
        cfg,
        resolved,
        &records,
        &monotone,
        &phi,
        &stepper,
        max_abs_peak,
        mp_first_violation,
        exact_err,
        wall,
    )?;

    Ok(RunOutcome {
        records,
        record_steps,
        snapshots,
        final_phi: phi,
        monotone,
        max_abs_peak,
        exact_err,
        summary,
    })
}

/// Error norms against the closed-form solution at time `t`, for problems
/// that have one.
fn exact_errors(
    problem: &Problem,
    phi: &ScalarField,
    t: f64,
) -> Result<Option<(f64, f64, f64)>, CliError> {
    let Problem::TravelingWave { eps_interface } = *problem else {
        return Ok(None);
    };
    let exact = ScalarField::from_fn(*phi.spec(), |x| {
        problems::traveling_wave_exact(x[0], t, eps_interface)
    });
    let (err_inf, err_l2) =
        error_norms(phi, &exact).map_err(|e| CliError::Numeric(e.to_string()))?;
    let (_, err_rms) =
        error_norms_rms(phi, &exact).map_err(|e| CliError::Numeric(e.to_string()))?;
    Ok(Some((err_inf, err_l2, err_rms)))
}

/// The discrete energy law is guaranteed for the closed-form scheme and its
/// kinetic form under the validity window; the explicit and implicit
/// baselines carry their own (different) conditions, so for them the monitor
/// records instead of aborting.
fn energy_guarded(kind: SchemeKind) -> bool {
    matches!(kind, SchemeKind::RlbMieFd | SchemeKind::Kinetic)
}

#[allow(clippy::too_many_arguments)]
fn build_summary(
    cfg: &RunConfig,
    resolved: &Resolved,
    records: &[EnergyRecord],
    monotone: &MonotoneVerdict,
    final_phi: &ScalarField,
    stepper: &Stepper,
    max_abs_peak: f64,
    mp_first_violation: Option<usize>,
    exact_err: Option<(f64, f64, f64)>,
    wall: f64,
) -> Result<Summary, CliError> {
    let p = &resolved.params;
    let t_final = resolved.steps as f64 * p.dt;
    let mut s = Summary::new();

    s.push_str("scheme", cfg.scheme.tag());
    s.push_str("problem", resolved.problem.tag());
    output::describe_grid(&mut s, &resolved.spec);
    s.push_f64("dt", p.dt);
    s.push_usize("steps", resolved.steps);
    s.push_f64("t_final", t_final);
    s.push_f64("eps_interface", p.eps_interface);
    s.push_f64("eps_ratio", p.eps_ratio);
    s.push_f64("omega1", p.omega1);
    s.push_f64("relaxation_s", p.s);
    s.push_str("validated", if p.validated { "yes" } else { "no" });
    s.push_str("window_ok", if resolved.window_ok { "yes" } else { "no" });
    if let Some(note) = &resolved.window_note {
        s.push_str("window_note", note.clone());
    }
    if cfg.scheme == SchemeKind::FexFd {
        s.push_str(
            "explicit_window_ok",
            if baselines::fex_window_satisfied(p) { "yes" } else { "no" },
        );
    }

    let first = records.first().expect("step-0 record");
    let last = records.last().expect("final record");
    s.push_f64("energy_initial", first.energy);
    s.push_f64("energy_final", last.energy);
    s.push_str("energy_monotone", if monotone.pass { "pass" } else { "fail" });
    if let Some(i) = monotone.first_violation {
        s.push_usize("energy_first_violation_record", i);
        s.push_f64("energy_max_increase", monotone.max_increase);
    }

    s.push_f64("max_abs_initial", first.max_abs);
    s.push_f64("max_abs_peak", max_abs_peak);
    s.push_f64("max_abs_final", last.max_abs);
    s.push_str(
        "max_principle_ok",
        if max_abs_peak <= 1.0 + MAX_PRINCIPLE_SLACK { "yes" } else { "no" },
    );
    if let Some(step) = mp_first_violation {
        s.push_usize("max_principle_first_violation_step", step);
    }

    match cfg.scheme {
        SchemeKind::RlbMieFd => {
            s.push_usize("newton_fallbacks", stepper.newton_fallbacks as usize);
            if stepper.xi_min.is_finite() {
                s.push_f64("xi_min", stepper.xi_min);
                s.push_f64("xi_max", stepper.xi_max);
            }
        }
        SchemeKind::Cn => {
            s.push_usize("newton_iters_total", stepper.cn_newton_iters as usize);
            s.push_usize("cg_iters_total", stepper.cn_cg_iters as usize);
        }
        _ => {}
    }

    if let Some((err_inf, err_l2, err_rms)) = exact_err {
        s.push_f64("err_inf", err_inf);
        s.push_f64("err_l2", err_l2);
        s.push_f64("err_rms", err_rms);
    }

    if matches!(resolved.problem, Problem::Circle2D { .. } | Problem::Sphere3D { .. }) {
        match problems::extract_radius(final_phi) {
            Some(r) => s.push_f64("radius_extracted", r),
            None => s.push_str("radius_extracted", "-"),
        }
        match resolved.problem.expected_radius(t_final) {
            Some(r) => s.push_f64("radius_expected", r),
            None => s.push_str("radius_expected", "-"),
        }
        if let Some(te) = resolved.problem.extinction_time() {
            s.push_f64("extinction_time_expected", te);
        }
    }

    s.push_str("wall_seconds", format!("{wall:.3}"));
    Ok(s)
}

/// Run and write `energy.csv`, requested snapshots, and `summary.txt` into
/// the configured output directory.
pub fn run_and_write(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let resolved = cfg.resolve()?;
    let outcome = run_simulation(cfg, &resolved)?;

    let dir = &cfg.output_dir;
    output::write_atomic(
        dir,
        "energy.csv",
        output::energy_csv(&outcome.records, &outcome.record_steps).as_bytes(),
    )?;
    for (step, field) in &outcome.snapshots {
        let name = output::snapshot_name(*step, cfg.snapshot_format);
        match cfg.snapshot_format {
            crate::config::SnapshotFormat::Csv => {
                output::write_atomic(dir, &name, output::snapshot_csv(field).as_bytes())?;
            }
            crate::config::SnapshotFormat::Binary => {
                output::write_atomic(dir, &name, &output::snapshot_binary(field))?;
            }
        }
    }
    output::write_atomic(dir, "summary.txt", outcome.summary.render().as_bytes())?;
    Ok(outcome)
}
