//! Run configuration: a flat `key = value` text format (UTF-8, `#` starts a
//! comment, blank lines ignored) and its resolution into grid, problem, and
//! scheme parameters.
//!
//! # Keys
//!
//! | key               | required | value                                              |
//! |-------------------|----------|----------------------------------------------------|
//! | `problem`         | yes      | `traveling_wave`, `random_hd`, `periodic_sine_2d`, `circle_2d`, `sphere_3d` |
//! | `scheme`          | no       | `rlb_mie_fd` (default), `fex_fd`, `cn`, `kinetic`  |
//! | `n`               | yes      | cells per axis (integer)                           |
//! | `dt`              | yes      | time step                                          |
//! | `t_end`           | yes      | end time; the run takes `round(t_end/dt)` steps    |
//! | `eps_interface`   | (*)      | interface width; the PDE carries its square        |
//! | `eps_ratio`       | (*)      | stencil weight override; implies `eps_interface = sqrt(eps_ratio dx^2/dt)` |
//! | `omega1`          | no       | lattice weight (default 1/3, 1/5, 1/6 by dimension)|
//! | `seed`            | no       | RNG seed for `random_hd` (default 0)               |
//! | `r0`              | no       | initial radius for `circle_2d`/`sphere_3d` (default 0.7) |
//! | `snapshot_times`  | no       | comma-separated times in `[0, t_end]`, each a multiple of `dt` |
//! | `snapshot_format` | no       | `csv` (default) or `binary` (3D only)              |
//! | `output_dir`      | no       | artifact directory (default `ac-out`)              |
//! | `allow_unsafe`    | no       | `true`/`false`: run outside the validity window, monitors record instead of abort |
//! | `energy_every`    | no       | record energy every k steps (default 1 = per step) |
//! | `levels_n`        | no       | comma-separated cell counts for `converge` (else mesh halving from `n`) |
//! | `dt_rule`         | no       | `fixed_ratio_dx2` (default): `dt` scales with `dx^2`; `fixed`: same `dt` per level |
//! | `reference`       | no       | `exact` or `self` (default: `exact` when the problem has a closed form) |
//! | `ref_n`, `ref_dt` | no       | self-reference resolution (default `2 x` finest level, `dt` by rule) |
//!
//! (*) exactly one of `eps_interface` / `eps_ratio` must be present.
//!
//! Unknown and duplicate keys are errors: silent typos must not change an
//! experiment.

use std::path::{Path, PathBuf};

use ac_core::grid::GridSpec;
use ac_core::problems::Problem;
use ac_core::scheme::{
    self, default_omega1, derive_params, derive_params_unchecked, params_from_eps_ratio,
    params_from_eps_ratio_unchecked, SchemeParams,
};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeKind {
    RlbMieFd,
    FexFd,
    Cn,
    Kinetic,
}

impl SchemeKind {
    pub fn tag(&self) -> &'static str {
        match self {
            SchemeKind::RlbMieFd => "rlb_mie_fd",
            SchemeKind::FexFd => "fex_fd",
            SchemeKind::Cn => "cn",
            SchemeKind::Kinetic => "kinetic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    TravelingWave,
    RandomHd,
    PeriodicSine2D,
    Circle2D,
    Sphere3D,
}

impl ProblemKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ProblemKind::TravelingWave => "traveling_wave",
            ProblemKind::RandomHd => "random_hd",
            ProblemKind::PeriodicSine2D => "periodic_sine_2d",
            ProblemKind::Circle2D => "circle_2d",
            ProblemKind::Sphere3D => "sphere_3d",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsSetting {
    /// `eps_interface` given directly.
    Interface(f64),
    /// `eps_ratio` override; the interface width follows from grid and step.
    Ratio(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DtRule {
    FixedRatioDx2,
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapshotFormat {
    Csv,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefMode {
    Exact,
    SelfRef,
}

/// Parsed (but not yet resolved) run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub scheme: SchemeKind,
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub eps: EpsSetting,
    pub omega1: Option<f64>,
    pub seed: u64,
    pub r0: f64,
    pub snapshot_times: Vec<f64>,
    pub snapshot_format: SnapshotFormat,
    pub output_dir: PathBuf,
    pub allow_unsafe: bool,
    pub energy_every: usize,
    pub levels_n: Option<Vec<usize>>,
    pub dt_rule: DtRule,
    pub reference: Option<RefMode>,
    pub ref_n: Option<usize>,
    pub ref_dt: Option<f64>,
}

/// Everything a run needs, derived from a [`RunConfig`].
#[derive(Clone, Debug)]
pub struct Resolved {
    pub problem: Problem,
    pub spec: GridSpec,
    pub params: SchemeParams,
    /// Whether the parameters passed the scheme's validity window.
    pub window_ok: bool,
    /// Human-readable description of the violated condition, if any.
    pub window_note: Option<String>,
    pub steps: usize,
    /// Ascending, de-duplicated step indices at which to snapshot.
    pub snapshot_steps: Vec<usize>,
}

pub fn parse_file(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Io(std::io::Error::new(
            e.kind(),
            format!("cannot read {}: {e}", path.display()),
        ))
    })?;
    parse_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Parse the flat `key = value` grammar. Returns a plain message (the caller
/// prefixes the file name).
pub fn parse_str(text: &str) -> Result<RunConfig, String> {
    let mut seen: Vec<(String, String, usize)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`, got `{line}`", lineno + 1))?;
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        if key.is_empty() || value.is_empty() {
            return Err(format!("line {}: empty key or value", lineno + 1));
        }
        if let Some((_, _, first)) = seen.iter().find(|(k, _, _)| *k == key) {
            return Err(format!(
                "line {}: duplicate key `{key}` (first on line {})",
                lineno + 1,
                first + 1
            ));
        }
        seen.push((key, value, lineno));
    }

    let mut get = |k: &str| -> Option<String> {
        seen.iter()
            .position(|(key, _, _)| key == k)
            .map(|i| seen.remove(i).1)
    };

    let problem = match get("problem") {
        Some(v) => match v.as_str() {
            "traveling_wave" => ProblemKind::TravelingWave,
            "random_hd" => ProblemKind::RandomHd,
            "periodic_sine_2d" => ProblemKind::PeriodicSine2D,
            "circle_2d" => ProblemKind::Circle2D,
            "sphere_3d" => ProblemKind::Sphere3D,
            other => return Err(format!("unknown problem `{other}`")),
        },
        None => return Err("missing required key `problem`".into()),
    };
    let scheme = match get("scheme").as_deref() {
        None | Some("rlb_mie_fd") => SchemeKind::RlbMieFd,
        Some("fex_fd") => SchemeKind::FexFd,
        Some("cn") => SchemeKind::Cn,
        Some("kinetic") => SchemeKind::Kinetic,
        Some(other) => return Err(format!("unknown scheme `{other}`")),
    };

    let n = parse_num::<usize>("n", get("n").ok_or("missing required key `n`")?)?;
    let dt = parse_num::<f64>("dt", get("dt").ok_or("missing required key `dt`")?)?;
    let t_end = parse_num::<f64>("t_end", get("t_end").ok_or("missing required key `t_end`")?)?;

    let eps = match (get("eps_interface"), get("eps_ratio")) {
        (Some(v), None) => EpsSetting::Interface(parse_num("eps_interface", v)?),
        (None, Some(v)) => EpsSetting::Ratio(parse_num("eps_ratio", v)?),
        (Some(_), Some(_)) => {
            return Err("give either `eps_interface` or `eps_ratio`, not both".into())
        }
        (None, None) => return Err("missing `eps_interface` (or `eps_ratio`)".into()),
    };

    let omega1 = get("omega1").map(|v| parse_num("omega1", v)).transpose()?;
    let seed = get("seed").map(|v| parse_num("seed", v)).transpose()?.unwrap_or(0);
    let r0 = get("r0").map(|v| parse_num("r0", v)).transpose()?.unwrap_or(0.7);

    let snapshot_times = match get("snapshot_times") {
        Some(v) => parse_list::<f64>("snapshot_times", &v)?,
        None => Vec::new(),
    };
    let snapshot_format = match get("snapshot_format").as_deref() {
        None | Some("csv") => SnapshotFormat::Csv,
        Some("binary") => SnapshotFormat::Binary,
        Some(other) => return Err(format!("unknown snapshot_format `{other}`")),
    };
    let output_dir = PathBuf::from(get("output_dir").unwrap_or_else(|| "ac-out".into()));
    let allow_unsafe = match get("allow_unsafe").as_deref() {
        None | Some("false") => false,
        Some("true") => true,
        Some(other) => return Err(format!("allow_unsafe must be true or false, got `{other}`")),
    };
    let energy_every = get("energy_every")
        .map(|v| parse_num("energy_every", v))
        .transpose()?
        .unwrap_or(1);
    let levels_n = get("levels_n")
        .map(|v| parse_list::<usize>("levels_n", &v))
        .transpose()?;
    let dt_rule = match get("dt_rule").as_deref() {
        None | Some("fixed_ratio_dx2") => DtRule::FixedRatioDx2,
        Some("fixed") => DtRule::Fixed,
        Some(other) => return Err(format!("unknown dt_rule `{other}`")),
    };
    let reference = match get("reference").as_deref() {
        None => None,
        Some("exact") => Some(RefMode::Exact),
        Some("self") => Some(RefMode::SelfRef),
        Some(other) => return Err(format!("unknown reference `{other}`")),
    };
    let ref_n = get("ref_n").map(|v| parse_num("ref_n", v)).transpose()?;
    let ref_dt = get("ref_dt").map(|v| parse_num("ref_dt", v)).transpose()?;

    if let Some((key, _, lineno)) = seen.first() {
        return Err(format!("line {}: unknown key `{key}`", lineno + 1));
    }

    Ok(RunConfig {
        problem,
        scheme,
        n,
        dt,
        t_end,
        eps,
        omega1,
        seed,
        r0,
        snapshot_times,
        snapshot_format,
        output_dir,
        allow_unsafe,
        energy_every,
        levels_n,
        dt_rule,
        reference,
        ref_n,
        ref_dt,
    })
}

fn parse_num<T: std::str::FromStr>(key: &str, v: String) -> Result<T, String> {
    v.parse::<T>()
        .map_err(|_| format!("key `{key}`: cannot parse `{v}`"))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>, String> {
    v.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<T>()
                .map_err(|_| format!("key `{key}`: cannot parse element `{s}`"))
        })
        .collect()
}

impl RunConfig {
    /// Build the problem, grid, and scheme parameters; check the validity
    /// window (hard error without `allow_unsafe`); fix the step count and
    /// snapshot schedule.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let bad = |m: String| CliError::Config(m);

        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(bad(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.energy_every == 0 {
            return Err(bad("energy_every must be >= 1".into()));
        }

        // problem shell (eps_interface patched below once params exist)
        let kind = self.problem;
        let d = problem_dimension(kind);
        let omega1 = self.omega1.unwrap_or_else(|| default_omega1(d));

        let shell = build_problem(kind, self.seed, self.r0, 1.0);
        let spec = shell.grid(self.n).map_err(|e| bad(e.to_string()))?;
        let dx = spec.dx();

        let (params, window_ok, window_note) = resolve_params(d, omega1, self.eps, dx, self.dt, self.allow_unsafe)?;

        let problem = build_problem(kind, self.seed, self.r0, params.eps_interface);

        let steps_f = self.t_end / self.dt;
        let steps = steps_f.round() as usize;
        if steps == 0 {
            return Err(bad(format!(
                "t_end = {} is less than half a step (dt = {})",
                self.t_end, self.dt
            )));
        }

        let mut snapshot_steps = Vec::new();
        for &t in &self.snapshot_times {
            if !(0.0..=self.t_end + 1e-9 * self.t_end).contains(&t) {
                return Err(bad(format!("snapshot time {t} outside [0, t_end]")));
            }
            let s = t / self.dt;
            let rounded = s.round();
            if (s - rounded).abs() > 1e-9 * s.max(1.0) {
                return Err(bad(format!("snapshot time {t} is not a multiple of dt = {}", self.dt)));
            }
            snapshot_steps.push(rounded as usize);
        }
        snapshot_steps.sort_unstable();
        snapshot_steps.dedup();
        if snapshot_steps.last().is_some_and(|&s| s > steps) {
            return Err(bad("snapshot time beyond the last step".into()));
        }

        if self.snapshot_format == SnapshotFormat::Binary && d != 3 {
            return Err(bad("snapshot_format = binary is defined for 3D runs only".into()));
        }

        Ok(Resolved {
            problem,
            spec,
            params,
            window_ok,
            window_note,
            steps,
            snapshot_steps,
        })
    }
}

fn problem_dimension(kind: ProblemKind) -> usize {
    match kind {
        ProblemKind::TravelingWave | ProblemKind::RandomHd => 1,
        ProblemKind::PeriodicSine2D | ProblemKind::Circle2D => 2,
        ProblemKind::Sphere3D => 3,
    }
}

fn build_problem(kind: ProblemKind, seed: u64, r0: f64, eps_interface: f64) -> Problem {
    match kind {
        ProblemKind::TravelingWave => Problem::TravelingWave { eps_interface },
        ProblemKind::RandomHd => Problem::RandomHd { seed },
        ProblemKind::PeriodicSine2D => Problem::PeriodicSine2D,
        ProblemKind::Circle2D => Problem::Circle2D { r0, eps_interface },
        ProblemKind::Sphere3D => Problem::Sphere3D { r0, eps_interface },
    }
}

fn resolve_params(
    d: usize,
    omega1: f64,
    eps: EpsSetting,
    dx: f64,
    dt: f64,
    allow_unsafe: bool,
) -> Result<(SchemeParams, bool, Option<String>), CliError> {
    let checked = match eps {
        EpsSetting::Interface(e) => derive_params(d, omega1, e, dx, dt),
        EpsSetting::Ratio(r) => params_from_eps_ratio(d, omega1, r, dx, dt),
    };
    match checked {
        Ok(p) => Ok((p, true, None)),
        Err(window @ (scheme::SchemeError::Omega1OutOfRange { .. }
        | scheme::SchemeError::RelaxationTooSmall { .. }
        | scheme::SchemeError::TimeStepOutOfRange { .. })) => {
            if !allow_unsafe {
                return Err(CliError::Config(format!(
                    "{window} (pass --allow-unsafe to run outside the validity window)"
                )));
            }
            let p = match eps {
                EpsSetting::Interface(e) => derive_params_unchecked(d, omega1, e, dx, dt),
                EpsSetting::Ratio(r) => params_from_eps_ratio_unchecked(d, omega1, r, dx, dt),
            }
            .map_err(|e| CliError::Config(e.to_string()))?;
            Ok((p, false, Some(window.to_string())))
        }
        Err(hard) => Err(CliError::Config(hard.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "problem = traveling_wave\nn = 96\ndt = 0.1\nt_end = 1\neps_interface = 0.0468\n";

    #[test]
    fn parses_a_minimal_config() {
        let c = parse_str(BASE).unwrap();
        assert_eq!(c.problem, ProblemKind::TravelingWave);
        assert_eq!(c.scheme, SchemeKind::RlbMieFd);
        assert_eq!(c.n, 96);
        assert_eq!(c.seed, 0);
        assert_eq!(c.energy_every, 1);
        assert_eq!(c.snapshot_format, SnapshotFormat::Csv);
        assert!(!c.allow_unsafe);
    }

    #[test]
    fn comments_and_spacing_are_tolerated() {
        let text = "# experiment\n problem=traveling_wave # inline\n\nn   =  8\ndt=0.1\nt_end = 1\neps_interface = 0.1\n";
        let c = parse_str(text).unwrap();
        assert_eq!(c.n, 8);
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed_keys() {
        assert!(parse_str(&format!("{BASE}banana = 1\n"))
            .unwrap_err()
            .contains("unknown key `banana`"));
        assert!(parse_str(&format!("{BASE}n = 10\n"))
            .unwrap_err()
            .contains("duplicate key `n`"));
        assert!(parse_str("problem traveling_wave\n").unwrap_err().contains("key = value"));
        assert!(parse_str(&format!("{BASE}eps_ratio = 0.2\n"))
            .unwrap_err()
            .contains("not both"));
        let missing = parse_str("problem = traveling_wave\nn = 8\ndt = 0.1\nt_end = 1\n");
        assert!(missing.unwrap_err().contains("eps_interface"));
    }

    #[test]
    fn resolve_derives_params_and_steps() {
        let c = parse_str(BASE).unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.steps, 10);
        assert!(r.window_ok);
        assert_eq!(r.spec.cells_per_axis(), 96);
        assert!((r.params.eps_interface - 0.0468).abs() < 1e-15);
        // the problem carries the resolved interface width
        assert_eq!(r.problem.eps_interface(), Some(0.0468));
    }

    #[test]
    fn eps_ratio_override_back_derives_the_interface_width() {
        let text = "problem = traveling_wave\nn = 96\ndt = 0.2\nt_end = 2\neps_ratio = 0.45\nallow_unsafe = true\n";
        let c = parse_str(text).unwrap();
        let r = c.resolve().unwrap();
        // eps = sqrt(eps_ratio dx^2 / dt), dx = 3/96 = 1/32
        let want = (0.45 / (32.0f64 * 32.0) / 0.2).sqrt();
        assert!((r.params.eps_interface - want).abs() < 1e-15);
        assert!((r.params.eps_interface - 3.0 / 64.0).abs() < 1e-12);
        // s = omega1/0.45 < 1: outside the window, allowed but flagged
        assert!(!r.window_ok);
        assert!(r.window_note.as_deref().unwrap().contains("relaxation"));
    }

    #[test]
    fn window_violation_without_allow_unsafe_is_a_config_error() {
        let text = "problem = traveling_wave\nn = 96\ndt = 0.2\nt_end = 2\neps_ratio = 0.45\n";
        let c = parse_str(text).unwrap();
        let e = c.resolve().unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("--allow-unsafe"));
    }

    #[test]
    fn snapshot_schedule_must_align_with_dt() {
        let ok = parse_str(&format!("{BASE}snapshot_times = 0, 0.4, 1\n")).unwrap();
        let r = ok.resolve().unwrap();
        assert_eq!(r.snapshot_steps, vec![0, 4, 10]);

        let bad = parse_str(&format!("{BASE}snapshot_times = 0.31\n")).unwrap();
        let e = bad.resolve().unwrap_err();
        assert!(e.to_string().contains("multiple of dt"));

        let out = parse_str(&format!("{BASE}snapshot_times = 2.4\n")).unwrap();
        assert!(out.resolve().is_err());
    }

    #[test]
    fn binary_snapshots_are_3d_only() {
        let text = format!("{BASE}snapshot_format = binary\n");
        let e = parse_str(&text).unwrap().resolve().unwrap_err();
        assert!(e.to_string().contains("3D"));
    }
}
