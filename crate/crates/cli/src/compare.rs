//! Side-by-side scheme comparison: run several configurations of the same
//! problem and tabulate errors, extrema, and energy behavior.

use crate::config::RunConfig;
use crate::runner::run_simulation;
use crate::CliError;

#[derive(Clone, Debug)]
pub struct CompareRow {
    pub scheme: String,
    pub dt: f64,
    pub steps: usize,
    pub err_inf: Option<f64>,
    pub err_rms: Option<f64>,
    pub max_abs_peak: f64,
    pub max_abs_final: f64,
    pub energy_final: f64,
    pub monotone: bool,
}

/// All configurations must pose the same experiment (problem, resolution,
/// interface width, end time); scheme and step size are the free columns.
fn check_comparable(cfgs: &[RunConfig]) -> Result<(), CliError> {
    let first = &cfgs[0];
    for c in &cfgs[1..] {
        if c.problem != first.problem {
            return Err(CliError::Config(format!(
                "cannot compare different problems: {} vs {}",
                first.problem.tag(),
                c.problem.tag()
            )));
        }
        if c.n != first.n {
            return Err(CliError::Config(format!(
                "cannot compare different resolutions: n = {} vs {}",
                first.n, c.n
            )));
        }
        if (c.t_end - first.t_end).abs() > 1e-9 * first.t_end.max(1.0) {
            return Err(CliError::Config(format!(
                "cannot compare different end times: {} vs {}",
                first.t_end, c.t_end
            )));
        }
    }
    Ok(())
}

pub fn run_compare(cfgs: &[RunConfig]) -> Result<Vec<CompareRow>, CliError> {
    if cfgs.len() < 2 {
        return Err(CliError::Config(
            "compare needs at least two configurations".into(),
        ));
    }
    check_comparable(cfgs)?;

    let mut eps_seen: Option<f64> = None;
    let mut rows = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        let resolved = cfg.resolve()?;
        if let Some(eps) = resolved.problem.eps_interface() {
            match eps_seen {
                None => eps_seen = Some(eps),
                Some(prev) if (prev - eps).abs() > 1e-9 * prev.abs().max(1.0) => {
                    return Err(CliError::Config(format!(
                        "cannot compare different equations: interface width {eps} vs {prev}"
                    )));
                }
                _ => {}
            }
        }
        let out = run_simulation(cfg, &resolved)?;
        let last = out.records.last().expect("final record");
        rows.push(CompareRow {
            scheme: cfg.scheme.tag().to_string(),
            dt: cfg.dt,
            steps: resolved.steps,
            err_inf: out.exact_err.map(|(inf, _, _)| inf),
            err_rms: out.exact_err.map(|(_, _, rms)| rms),
            max_abs_peak: out.max_abs_peak,
            max_abs_final: last.max_abs,
            energy_final: last.energy,
            monotone: out.monotone.pass,
        });
    }
    Ok(rows)
}

/// Run the comparison and write `compare.csv` into the first configuration's
/// output directory.
pub fn run_and_write(cfgs: &[RunConfig]) -> Result<Vec<CompareRow>, CliError> {
    let rows = run_compare(cfgs)?;
    crate::output::write_atomic(
        &cfgs[0].output_dir,
        "compare.csv",
        crate::output::compare_csv(&rows).as_bytes(),
    )?;
    Ok(rows)
}
