//! End-to-end tests of the `ac` binary: exit codes, file artifacts, and the
//! documented output formats, all driven through a real subprocess.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ac"))
        .args(args)
        .output()
        .expect("spawn ac")
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).expect("write config");
    path
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("read {}: {e}", dir.join(name).display()))
}

/// A small valid traveling-wave run: 10 steps, snapshots at both ends.
fn tiny_wave_cfg(out_dir: &Path) -> String {
    format!(
        "problem = traveling_wave\n\
         n = 48\n\
         dt = 0.1\n\
         t_end = 1\n\
         eps_interface = 0.05\n\
         snapshot_times = 0, 0.5, 1\n\
         output_dir = {}\n",
        out_dir.display()
    )
}

#[test]
fn validate_reports_derived_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_cfg(tmp.path(), "ok.cfg", &tiny_wave_cfg(&out));
    let res = ac(&["validate", cfg.to_str().unwrap()]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("configuration ok"));
    assert!(stdout.contains("eps_ratio"));
    assert!(stdout.contains("validity window = ok"));
    // validate must not create the output directory
    assert!(!out.exists());
}

#[test]
fn unknown_key_and_malformed_value_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "bad.cfg",
        "problem = traveling_wave\nn = 48\ndt = 0.1\nt_end = 1\neps_interface = 0.05\nbogus = 1\n",
    );
    let res = ac(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("bogus"));

    let cfg = write_cfg(
        tmp.path(),
        "bad2.cfg",
        "problem = traveling_wave\nn = forty\ndt = 0.1\nt_end = 1\neps_interface = 0.05\n",
    );
    let res = ac(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn missing_config_file_exits_1() {
    let res = ac(&["validate", "/nonexistent/nowhere.cfg"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn run_writes_energy_snapshots_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_cfg(tmp.path(), "run.cfg", &tiny_wave_cfg(&out));
    let res = ac(&["run", cfg.to_str().unwrap()]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));

    let energy = read(&out, "energy.csv");
    let lines: Vec<&str> = energy.lines().collect();
    assert_eq!(lines[0], "step,t,energy,max_abs");
    assert_eq!(lines.len(), 1 + 11, "header + one record per step 0..=10");
    // 17 significant digits survive a parse round-trip
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first[0], "0");
    let e0: f64 = first[2].parse().unwrap();
    assert!(e0.is_finite() && e0 > 0.0);

    for step in ["00000000", "00000005", "00000010"] {
        let snap = read(&out, &format!("snapshot_step{step}.csv"));
        let mut it = snap.lines();
        assert_eq!(it.next().unwrap(), "i,x,phi");
        assert_eq!(it.count(), 50, "HN grid stores n + 2 nodes per axis");
    }

    let summary = read(&out, "summary.txt");
    for key in [
        "scheme = rlb_mie_fd",
        "problem = traveling_wave",
        "window_ok = yes",
        "max_principle_ok = yes",
        "energy_monotone = pass",
    ] {
        assert!(summary.contains(key), "summary.txt missing `{key}`:\n{summary}");
    }
}

#[test]
fn reruns_are_byte_identical_and_seeds_matter() {
    let tmp = tempfile::tempdir().unwrap();
    let body = |dir: &Path| {
        format!(
            "problem = random_hd\n\
             n = 64\n\
             dt = 0.05\n\
             t_end = 0.5\n\
             eps_interface = 0.01\n\
             seed = 7\n\
             snapshot_times = 0.5\n\
             output_dir = {}\n",
            dir.display()
        )
    };
    let out1 = tmp.path().join("a");
    let out2 = tmp.path().join("b");
    let cfg1 = write_cfg(tmp.path(), "a.cfg", &body(&out1));
    let cfg2 = write_cfg(tmp.path(), "b.cfg", &body(&out2));
    assert!(ac(&["run", cfg1.to_str().unwrap()]).status.success());
    assert!(ac(&["run", cfg2.to_str().unwrap()]).status.success());
    for name in ["energy.csv", "snapshot_step00000010.csv"] {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} must be byte-identical across reruns");
    }

    // same config, different seed: the random initial data must change
    let out3 = tmp.path().join("c");
    let cfg3 = write_cfg(tmp.path(), "c.cfg", &body(&out3));
    assert!(ac(&["run", cfg3.to_str().unwrap(), "--seed", "8"]).status.success());
    let a = std::fs::read(out1.join("energy.csv")).unwrap();
    let c = std::fs::read(out3.join("energy.csv")).unwrap();
    assert_ne!(a, c, "a different seed must produce different random data");
}

/// Parameters with a stencil weight far outside the validity window
/// (`eps_ratio ~= 0.82` at `dt = 1/5`).
fn hot_wave_cfg(out_dir: &Path, scheme: &str, allow: bool) -> String {
    format!(
        "problem = traveling_wave\n\
         scheme = {scheme}\n\
         n = 96\n\
         dt = 0.2\n\
         t_end = 6\n\
         eps_interface = 0.06331238517090144\n\
         allow_unsafe = {}\n\
         output_dir = {}\n",
        allow,
        out_dir.display()
    )
}

#[test]
fn window_violation_needs_allow_unsafe() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_cfg(tmp.path(), "hot.cfg", &hot_wave_cfg(&out, "rlb_mie_fd", false));

    let res = ac(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("--allow-unsafe"));

    // the same config passes with the override flag, and the run completes
    // with the violations recorded rather than fatal
    let res = ac(&["run", cfg.to_str().unwrap(), "--allow-unsafe"]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let summary = read(&out, "summary.txt");
    assert!(summary.contains("window_ok = no"));
    assert!(summary.contains("max_principle_ok = no"));
    assert!(summary.contains("energy_monotone = fail"));
}

#[test]
fn numeric_blowup_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let mut body = hot_wave_cfg(&out, "fex_fd", true);
    body = body.replace("t_end = 6", "t_end = 20");
    let cfg = write_cfg(tmp.path(), "blow.cfg", &body);
    let res = ac(&["run", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&res.stderr).contains("numeric"));
}

#[test]
fn converge_writes_rate_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_cfg(
        tmp.path(),
        "conv.cfg",
        &format!(
            "problem = traveling_wave\n\
             n = 96\n\
             dt = 0.0048828125\n\
             t_end = 1\n\
             eps_interface = 0.03165619258545072\n\
             reference = exact\n\
             output_dir = {}\n",
            out.display()
        ),
    );
    let res = ac(&["converge", cfg.to_str().unwrap(), "--levels", "2"]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));

    let csv = read(&out, "converge.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,dx,dt,steps,err_inf,err_l2,err_rms,cr_inf,cr_l2,cr_rms");
    assert_eq!(lines.len(), 3, "header + 2 levels");
    let fine: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(fine[0], "192");
    let cr_inf: f64 = fine[7].parse().unwrap();
    assert!((1.7..2.3).contains(&cr_inf), "cr_inf = {cr_inf}");
    // dt follows the dx^2 rule: quartered when the mesh is halved
    let dt_fine: f64 = fine[2].parse().unwrap();
    assert!((dt_fine - 0.0048828125 / 4.0).abs() < 1e-15);
}

#[test]
fn compare_writes_one_row_per_scheme() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let body = |scheme: &str| {
        format!(
            "problem = traveling_wave\n\
             scheme = {scheme}\n\
             n = 48\n\
             dt = 0.05\n\
             t_end = 0.25\n\
             eps_interface = 0.1\n\
             output_dir = {}\n",
            out.display()
        )
    };
    let a = write_cfg(tmp.path(), "rlb.cfg", &body("rlb_mie_fd"));
    let b = write_cfg(tmp.path(), "cn.cfg", &body("cn"));
    let res = ac(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));

    let csv = read(&out, "compare.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "scheme,dt,steps,err_inf,err_rms,max_abs_peak,max_abs_final,energy_final,energy_monotone"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("rlb_mie_fd,"));
    assert!(lines[2].starts_with("cn,"));
    for row in &lines[1..] {
        assert!(row.ends_with(",yes"), "both schemes dissipate here: {row}");
    }
}

#[test]
fn binary_snapshot_has_the_documented_header() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_cfg(
        tmp.path(),
        "sphere.cfg",
        &format!(
            "problem = sphere_3d\n\
             n = 8\n\
             dt = 0.1\n\
             t_end = 0.2\n\
             eps_interface = 0.1\n\
             r0 = 0.7\n\
             snapshot_times = 0.2\n\
             snapshot_format = binary\n\
             output_dir = {}\n",
            out.display()
        ),
    );
    let res = ac(&["run", cfg.to_str().unwrap()]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));

    let bytes = std::fs::read(out.join("snapshot_step00000002.bin")).unwrap();
    assert_eq!(&bytes[0..4], b"ACEF");
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    assert_eq!(u32_at(4), 3, "dimension");
    assert_eq!(u32_at(8), 10, "nodes per axis (n + 2 for Neumann)");
    assert_eq!(u32_at(12), 0, "reserved");
    assert_eq!(bytes.len(), 16 + 10 * 10 * 10 * 8);
    for chunk in bytes[16..].chunks_exact(8) {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        assert!(v.is_finite() && v.abs() <= 1.0 + 1e-13);
    }
}

#[test]
fn binary_snapshots_are_3d_only() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let mut body = tiny_wave_cfg(&out);
    body.push_str("snapshot_format = binary\n");
    let cfg = write_cfg(tmp.path(), "bad_fmt.cfg", &body);
    let res = ac(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn snapshot_time_off_the_step_grid_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let body = tiny_wave_cfg(&out).replace("snapshot_times = 0, 0.5, 1", "snapshot_times = 0.05");
    let cfg = write_cfg(tmp.path(), "offgrid.cfg", &body);
    let res = ac(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("snapshot"));
}
