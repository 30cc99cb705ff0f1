//! Artifact writers. All writes go through a temp file + rename so a crashed
//! run never leaves a truncated artifact, and identical runs produce
//! byte-identical files.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ac_core::grid::{BoundaryCondition, ScalarField};

use crate::CliError;

/// Write `bytes` to `dir/name` atomically (temp file in `dir`, then rename).
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    let dest = dir.join(name);
    std::fs::rename(&tmp, &dest)?;
    Ok(dest)
}

/// `energy.csv`: one row per recorded step, 17 significant digits so the
/// dissipation record round-trips exactly.
pub fn energy_csv(records: &[ac_core::diagnostics::EnergyRecord], steps: &[usize]) -> String {
    debug_assert_eq!(records.len(), steps.len());
    let mut s = String::from("step,t,energy,max_abs\n");
    for (r, &step) in records.iter().zip(steps) {
        let _ = writeln!(s, "{},{:.16e},{:.16e},{:.16e}", step, r.t, r.energy, r.max_abs);
    }
    s
}

/// Snapshot file name for a given step.
pub fn snapshot_name(step: usize, format: super::config::SnapshotFormat) -> String {
    match format {
        super::config::SnapshotFormat::Csv => format!("snapshot_step{step:08}.csv"),
        super::config::SnapshotFormat::Binary => format!("snapshot_step{step:08}.bin"),
    }
}

/// CSV snapshot: index columns, coordinate columns, `phi`.
pub fn snapshot_csv(field: &ScalarField) -> String {
    let spec = field.spec();
    let d = spec.dimension();
    let mut s = String::new();
    s.push_str(match d {
        1 => "i,x,phi\n",
        2 => "i,j,x,y,phi\n",
        _ => "i,j,k,x,y,z,phi\n",
    });
    for (flat, &phi) in field.as_slice().iter().enumerate() {
        let idx = spec.multi_index(flat);
        for axis in 0..d {
            let _ = write!(s, "{},", idx[axis]);
        }
        for axis in 0..d {
            let _ = write!(s, "{:.16e},", spec.axis_coordinate(axis, idx[axis]));
        }
        let _ = writeln!(s, "{phi:.16e}");
    }
    s
}

/// Binary snapshot (3D): 16-byte header — magic `ACEF`, `u32` dimension,
/// `u32` nodes per axis, `u32` reserved (0) — then the node values as
/// little-endian `f64` in row-major order.
pub fn snapshot_binary(field: &ScalarField) -> Vec<u8> {
    let spec = field.spec();
    let m = spec.nodes_per_axis() as u32;
    let mut out = Vec::with_capacity(16 + 8 * field.len());
    out.extend_from_slice(b"ACEF");
    out.extend_from_slice(&(spec.dimension() as u32).to_le_bytes());
    out.extend_from_slice(&m.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for &v in field.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// `summary.txt`: flat `key = value`, same grammar as the input config.
pub struct Summary {
    rows: Vec<(String, String)>,
}

impl Summary {
    pub fn new() -> Self {
        Summary { rows: Vec::new() }
    }

    pub fn push_str(&mut self, key: &str, value: impl Into<String>) {
        self.rows.push((key.to_string(), value.into()));
    }

    pub fn push_f64(&mut self, key: &str, value: f64) {
        self.rows.push((key.to_string(), format!("{value:.16e}")));
    }

    pub fn push_usize(&mut self, key: &str, value: usize) {
        self.rows.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.rows {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.rows.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

impl Default for Summary {
    fn default() -> Self {
        Self::new()
    }
}

fn opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.16e}"),
        None => "-".into(),
    }
}

/// `converge.csv`: one row per refinement level.
pub fn converge_csv(levels: &[crate::converge::ConvergeLevel]) -> String {
    let mut s = String::from("n,dx,dt,steps,err_inf,err_l2,err_rms,cr_inf,cr_l2,cr_rms\n");
    for l in levels {
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{},{},{}",
            l.n,
            l.dx,
            l.dt,
            l.steps,
            l.err_inf,
            l.err_l2,
            l.err_rms,
            opt(l.cr_inf),
            opt(l.cr_l2),
            opt(l.cr_rms),
        );
    }
    s
}

/// `compare.csv`: one row per configuration, aligned columns for the shared
/// problem.
pub fn compare_csv(rows: &[crate::compare::CompareRow]) -> String {
    let mut s = String::from(
        "scheme,dt,steps,err_inf,err_rms,max_abs_peak,max_abs_final,energy_final,energy_monotone\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:.16e},{},{},{},{:.16e},{:.16e},{:.16e},{}",
            r.scheme,
            r.dt,
            r.steps,
            opt(r.err_inf),
            opt(r.err_rms),
            r.max_abs_peak,
            r.max_abs_final,
            r.energy_final,
            if r.monotone { "yes" } else { "no" },
        );
    }
    s
}

/// Grid facts worth echoing into every summary.
pub fn describe_grid(summary: &mut Summary, spec: &ac_core::grid::GridSpec) {
    summary.push_usize("grid_dimension", spec.dimension());
    summary.push_usize("grid_cells_per_axis", spec.cells_per_axis());
    summary.push_usize("grid_nodes_per_axis", spec.nodes_per_axis());
    summary.push_f64("grid_dx", spec.dx());
    summary.push_str(
        "grid_boundary",
        match spec.boundary_condition() {
            BoundaryCondition::HomogeneousNeumann => "neumann",
            BoundaryCondition::HomogeneousDirichlet => "dirichlet",
            BoundaryCondition::Periodic => "periodic",
        },
    );
}
