//! Mesh-refinement studies: run a ladder of resolutions, measure errors
//! against an exact solution or a fine self-reference, and report observed
//! convergence rates.

use ac_core::diagnostics::{convergence_rates_general, ErrorReport};
use ac_core::grid::{BoundaryCondition, GridSpec, ScalarField};
use ac_core::problems::{self, Problem};

use crate::config::{DtRule, ProblemKind, RefMode, RunConfig};
use crate::runner::run_simulation;
use crate::CliError;

#[derive(Clone, Copy, Debug)]
pub struct ConvergeLevel {
    pub n: usize,
    pub dx: f64,
    pub dt: f64,
    pub steps: usize,
    pub err_inf: f64,
    /// `sqrt(dx^d * sum(delta^2))`: the grid-weighted 2-norm.
    pub err_l2: f64,
    /// Plain root-mean-square over the compared nodes.
    pub err_rms: f64,
    pub cr_inf: Option<f64>,
    pub cr_l2: Option<f64>,
    pub cr_rms: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ConvergeTable {
    pub levels: Vec<ConvergeLevel>,
    /// `exact` or `self (n = ..., dt = ...)`.
    pub reference: String,
}

/// Resolutions to run: an explicit `levels_n` list wins; otherwise `count`
/// doublings of the base resolution.
fn ladder(cfg: &RunConfig, count: Option<usize>) -> Result<Vec<usize>, CliError> {
    let levels = match &cfg.levels_n {
        Some(list) => list.clone(),
        None => {
            let k = count.unwrap_or(3);
            (0..k).map(|i| cfg.n << i).collect()
        }
    };
    if levels.len() < 2 {
        return Err(CliError::Config(
            "a convergence study needs at least two levels".into(),
        ));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config(
            "levels_n must be strictly increasing".into(),
        ));
    }
    Ok(levels)
}

fn level_dt(cfg: &RunConfig, n_base: usize, n_level: usize) -> f64 {
    match cfg.dt_rule {
        DtRule::FixedRatioDx2 => cfg.dt * (n_base as f64 / n_level as f64).powi(2),
        DtRule::Fixed => cfg.dt,
    }
}

/// Coarse stored nodes that coincide with fine stored nodes, as
/// `(coarse_flat, fine_flat)` pairs. Periodic and Dirichlet grids match every
/// stored node; cell-centered Neumann grids match the `n` true cells per axis
/// (the half-spacing outer layers of the two grids never coincide) and need
/// an odd refinement ratio.
fn coincident_nodes(
    coarse: &GridSpec,
    fine: &GridSpec,
) -> Result<Vec<(usize, usize)>, CliError> {
    let (nc, nf) = (coarse.cells_per_axis(), fine.cells_per_axis());
    if coarse.boundary_condition() != fine.boundary_condition()
        || coarse.dimension() != fine.dimension()
    {
        return Err(CliError::Config(
            "reference and level grids use different layouts".into(),
        ));
    }
    if nf % nc != 0 {
        return Err(CliError::Config(format!(
            "reference resolution {nf} is not a multiple of level resolution {nc}"
        )));
    }
    let r = nf / nc;
    let axis_map: Vec<(usize, usize)> = match coarse.boundary_condition() {
        BoundaryCondition::Periodic => (0..=nc).map(|i| (i, r * i)).collect(),
        BoundaryCondition::HomogeneousDirichlet => {
            (0..nc - 1).map(|j| (j, r * (j + 1) - 1)).collect()
        }
        BoundaryCondition::HomogeneousNeumann => {
            if r % 2 == 0 {
                return Err(CliError::Config(format!(
                    "cell-centered grids only share nodes at odd refinement ratios, got {r}"
                )));
            }
            (1..=nc).map(|i| (i, r * i - (r - 1) / 2)).collect()
        }
    };

    let d = coarse.dimension();
    let mut pairs = Vec::with_capacity(axis_map.len().pow(d as u32));
    let mut odo = vec![0usize; d];
    loop {
        let mut cidx = [0usize; 3];
        let mut fidx = [0usize; 3];
        for axis in 0..d {
            let (c, f) = axis_map[odo[axis]];
            cidx[axis] = c;
            fidx[axis] = f;
        }
        pairs.push((coarse.flat_index(&cidx[..d]), fine.flat_index(&fidx[..d])));
        let mut axis = d;
        loop {
            if axis == 0 {
                return Ok(pairs);
            }
            axis -= 1;
            odo[axis] += 1;
            if odo[axis] < axis_map.len() {
                break;
            }
            odo[axis] = 0;
        }
    }
}

/// Max, grid-weighted 2-norm, and RMS of the difference over the paired nodes.
fn paired_norms(
    numeric: &ScalarField,
    reference: &ScalarField,
    pairs: &[(usize, usize)],
) -> (f64, f64, f64) {
    let num = numeric.as_slice();
    let refv = reference.as_slice();
    let mut inf = 0.0f64;
    let mut sumsq = 0.0f64;
    for &(c, f) in pairs {
        let delta = num[c] - refv[f];
        inf = inf.max(delta.abs());
        sumsq += delta * delta;
    }
    let d = numeric.spec().dimension() as i32;
    let l2 = (numeric.spec().dx().powi(d) * sumsq).sqrt();
    let rms = (sumsq / pairs.len() as f64).sqrt();
    (inf, l2, rms)
}

struct Reference {
    mode: RefMode,
    field: Option<ScalarField>, // self-reference final state
    /// Interface width the reference solves with (to reject eps_ratio
    /// ladders whose levels change the equation).
    eps_interface: Option<f64>,
    describe: String,
}

fn build_reference(cfg: &RunConfig) -> Result<Reference, CliError> {
    let mode = cfg.reference.unwrap_or(match cfg.problem {
        ProblemKind::TravelingWave => RefMode::Exact,
        _ => RefMode::SelfRef,
    });
    match mode {
        RefMode::Exact => {
            if cfg.problem != ProblemKind::TravelingWave {
                return Err(CliError::Config(format!(
                    "problem {} has no closed form; use reference = self with ref_n and ref_dt",
                    cfg.problem.tag()
                )));
            }
            Ok(Reference {
                mode,
                field: None,
                eps_interface: None,
                describe: "exact".into(),
            })
        }
        RefMode::SelfRef => {
            let (ref_n, ref_dt) = match (cfg.ref_n, cfg.ref_dt) {
                (Some(n), Some(dt)) => (n, dt),
                _ => {
                    return Err(CliError::Config(
                        "reference = self needs ref_n and ref_dt".into(),
                    ))
                }
            };
            let mut rcfg = cfg.clone();
            rcfg.n = ref_n;
            rcfg.dt = ref_dt;
            rcfg.energy_every = usize::MAX;
            rcfg.snapshot_times = Vec::new();
            let resolved = rcfg.resolve()?;
            let t_ref = resolved.steps as f64 * ref_dt;
            if (t_ref - cfg.t_end).abs() > 1e-9 * cfg.t_end.max(1.0) {
                return Err(CliError::Config(format!(
                    "ref_dt = {ref_dt} does not divide t_end = {} (reference stops at {t_ref})",
                    cfg.t_end
                )));
            }
            let eps_interface = resolved.problem.eps_interface();
            let out = run_simulation(&rcfg, &resolved)?;
            Ok(Reference {
                mode,
                field: Some(out.final_phi),
                eps_interface,
                describe: format!("self (n = {ref_n}, dt = {ref_dt})"),
            })
        }
    }
}

pub fn run_converge(cfg: &RunConfig, count: Option<usize>) -> Result<ConvergeTable, CliError> {
    let levels_n = ladder(cfg, count)?;
    let reference = build_reference(cfg)?;

    let mut rows: Vec<ConvergeLevel> = Vec::with_capacity(levels_n.len());
    for &nk in &levels_n {
        let mut lcfg = cfg.clone();
        lcfg.n = nk;
        lcfg.dt = level_dt(cfg, cfg.n, nk);
        lcfg.energy_every = usize::MAX;
        lcfg.snapshot_times = Vec::new();
        let resolved = lcfg.resolve()?;
        let t_level = resolved.steps as f64 * lcfg.dt;

        let out = run_simulation(&lcfg, &resolved)?;

        let (err_inf, err_l2, err_rms) = match (&reference.mode, &reference.field) {
            (RefMode::Exact, _) => {
                let Problem::TravelingWave { eps_interface } = resolved.problem else {
                    unreachable!("exact mode is gated to the traveling wave");
                };
                let exact = ScalarField::from_fn(resolved.spec, |x| {
                    problems::traveling_wave_exact(x[0], t_level, eps_interface)
                });
                let pairs: Vec<(usize, usize)> =
                    (0..resolved.spec.node_count()).map(|i| (i, i)).collect();
                paired_norms(&out.final_phi, &exact, &pairs)
            }
            (RefMode::SelfRef, Some(ref_field)) => {
                if (t_level - cfg.t_end).abs() > 1e-9 * cfg.t_end.max(1.0) {
                    return Err(CliError::Config(format!(
                        "level n = {nk} stops at t = {t_level}, not t_end = {}; adjust dt",
                        cfg.t_end
                    )));
                }
                if let (Some(a), Some(b)) =
                    (reference.eps_interface, resolved.problem.eps_interface())
                {
                    if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
                        return Err(CliError::Config(format!(
                            "levels solve different equations: interface width {b} vs reference {a}; \
                             with eps_ratio, keep dt proportional to dx^2"
                        )));
                    }
                }
                let pairs = coincident_nodes(&resolved.spec, ref_field.spec())?;
                paired_norms(&out.final_phi, ref_field, &pairs)
            }
            (RefMode::SelfRef, None) => unreachable!(),
        };

        rows.push(ConvergeLevel {
            n: nk,
            dx: resolved.spec.dx(),
            dt: lcfg.dt,
            steps: resolved.steps,
            err_inf,
            err_l2,
            err_rms,
            cr_inf: None,
            cr_l2: None,
            cr_rms: None,
        });
    }

    attach_rates(&mut rows)?;
    Ok(ConvergeTable {
        levels: rows,
        reference: reference.describe,
    })
}

fn attach_rates(rows: &mut [ConvergeLevel]) -> Result<(), CliError> {
    let map_err = |e: ac_core::diagnostics::DiagnosticsError| CliError::Config(e.to_string());
    let inf_l2: Vec<ErrorReport> = rows
        .iter()
        .map(|r| ErrorReport::new(r.dx, r.err_inf, r.err_l2))
        .collect();
    let with_rates = convergence_rates_general(&inf_l2).map_err(map_err)?;
    let inf_rms: Vec<ErrorReport> = rows
        .iter()
        .map(|r| ErrorReport::new(r.dx, r.err_inf, r.err_rms))
        .collect();
    let rms_rates = convergence_rates_general(&inf_rms).map_err(map_err)?;
    for ((row, a), b) in rows.iter_mut().zip(&with_rates).zip(&rms_rates) {
        row.cr_inf = a.cr_inf;
        row.cr_l2 = a.cr_l2;
        row.cr_rms = b.cr_l2;
    }
    Ok(())
}

/// Run the study and write `converge.csv` into the output directory.
pub fn run_and_write(cfg: &RunConfig, count: Option<usize>) -> Result<ConvergeTable, CliError> {
    let table = run_converge(cfg, count)?;
    crate::output::write_atomic(
        &cfg.output_dir,
        "converge.csv",
        crate::output::converge_csv(&table.levels).as_bytes(),
    )?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_str;

    #[test]
    fn coincident_maps_cover_the_expected_nodes() {
        let mk = |n, bc| GridSpec::new(1, n, 2.0, [0.0; 3], bc).unwrap();

        let p = coincident_nodes(
            &mk(4, BoundaryCondition::Periodic),
            &mk(8, BoundaryCondition::Periodic),
        )
        .unwrap();
        assert_eq!(p, vec![(0, 0), (1, 2), (2, 4), (3, 6), (4, 8)]);

        let d = coincident_nodes(
            &mk(4, BoundaryCondition::HomogeneousDirichlet),
            &mk(8, BoundaryCondition::HomogeneousDirichlet),
        )
        .unwrap();
        assert_eq!(d, vec![(0, 1), (1, 3), (2, 5)]);

        // odd ratio 3: coarse cell centers (i - 1/2) dx match fine 3i - 1
        let h = coincident_nodes(
            &mk(4, BoundaryCondition::HomogeneousNeumann),
            &mk(12, BoundaryCondition::HomogeneousNeumann),
        )
        .unwrap();
        assert_eq!(h, vec![(1, 2), (2, 5), (3, 8), (4, 11)]);

        let even = coincident_nodes(
            &mk(4, BoundaryCondition::HomogeneousNeumann),
            &mk(8, BoundaryCondition::HomogeneousNeumann),
        );
        assert!(even.is_err());

        let indivisible = coincident_nodes(
            &mk(4, BoundaryCondition::Periodic),
            &mk(6, BoundaryCondition::Periodic),
        );
        assert!(indivisible.is_err());
    }

    #[test]
    fn coincident_nodes_agree_on_physical_coordinates() {
        for bc in [
            BoundaryCondition::Periodic,
            BoundaryCondition::HomogeneousDirichlet,
            BoundaryCondition::HomogeneousNeumann,
        ] {
            let r = if bc == BoundaryCondition::HomogeneousNeumann { 3 } else { 2 };
            let coarse = GridSpec::new(2, 4, 1.5, [0.25, -0.5, 0.0], bc).unwrap();
            let fine = GridSpec::new(2, 4 * r, 1.5, [0.25, -0.5, 0.0], bc).unwrap();
            for (c, f) in coincident_nodes(&coarse, &fine).unwrap() {
                let ci = coarse.multi_index(c);
                let fi = fine.multi_index(f);
                for axis in 0..2 {
                    let xc = coarse.axis_coordinate(axis, ci[axis]);
                    let xf = fine.axis_coordinate(axis, fi[axis]);
                    assert!(
                        (xc - xf).abs() < 1e-12,
                        "{bc:?} axis {axis}: {xc} vs {xf}"
                    );
                }
            }
        }
    }

    #[test]
    fn traveling_wave_ladder_shows_second_order() {
        // Interface thin enough that both tails are flat to rounding at the
        // Neumann faces; otherwise the boundary mismatch floors the error.
        let eps = (0.9f64).tanh() / (16.0 * std::f64::consts::SQRT_2);
        let text = format!(
            "problem = traveling_wave\nn = 96\ndt = 0.0048828125\nt_end = 1\n\
             eps_interface = {eps}\n"
        );
        let cfg = parse_str(&text).unwrap();
        let table = run_converge(&cfg, Some(3)).unwrap();
        assert_eq!(table.reference, "exact");
        assert_eq!(table.levels.len(), 3);
        let last = table.levels.last().unwrap();
        let cr = last.cr_inf.unwrap();
        assert!((1.7..2.3).contains(&cr), "cr_inf = {cr}");
        let cr2 = last.cr_rms.unwrap();
        assert!((1.7..2.3).contains(&cr2), "cr_rms = {cr2}");
        // dt quarters when dx halves
        assert!((table.levels[1].dt - cfg.dt / 4.0).abs() < 1e-18);
    }

    #[test]
    fn self_reference_needs_resolution_and_commensurate_steps() {
        let base = "problem = periodic_sine_2d\nn = 8\ndt = 0.05\nt_end = 0.2\n\
                    eps_interface = 0.4\n";
        let cfg = parse_str(base).unwrap();
        let err = run_converge(&cfg, Some(2)).unwrap_err();
        assert!(err.to_string().contains("ref_n"));

        let with_ref = format!("{base}reference = self\nref_n = 32\nref_dt = 0.003125\n");
        let cfg = parse_str(&with_ref).unwrap();
        let table = run_converge(&cfg, Some(2)).unwrap();
        assert_eq!(table.levels.len(), 2);
        assert!(table.levels[1].err_inf < table.levels[0].err_inf);
        let cr = table.levels[1].cr_inf.unwrap();
        assert!((1.5..2.5).contains(&cr), "cr_inf = {cr}");

        let bad_dt = format!("{base}reference = self\nref_n = 32\nref_dt = 0.003\n");
        let cfg = parse_str(&bad_dt).unwrap();
        let err = run_converge(&cfg, Some(2)).unwrap_err();
        assert!(err.to_string().contains("does not divide"));
    }
}
