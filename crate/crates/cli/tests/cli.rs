use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use headwave::run::{forward_grid, RunConfig};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn headwave(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_headwave"));
    cmd.args(args).env_remove("HEADWAVE_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Value of a `key=value` summary line.
fn value(out: &str, key: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in\n{out}"))
        .parse()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn forward_to(cfg: &Path, out: &Path, envs: &[(&str, &str)]) -> Output {
    headwave(&["forward", "--config", s(cfg), "--out", s(out)], envs)
}

/// A copy of a shipped config with one line replaced.
fn edited(dir: &Path, name: &str, from: &str, to: &str) -> PathBuf {
    let text = std::fs::read_to_string(config(name)).unwrap();
    let line = text.lines().find(|l| l.starts_with(from)).unwrap_or_else(|| panic!("no line starting {from}"));
    let p = dir.join(format!("edited_{name}"));
    std::fs::write(&p, text.replacen(line, to, 1)).unwrap();
    p
}

#[test]
fn forward_is_bit_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert_eq!(code(&forward_to(&config("flat2d.cfg"), &a, &[])), 0);
    assert_eq!(code(&forward_to(&config("flat2d.cfg"), &b, &[("HEADWAVE_THREADS", "1")])), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn cli_output_equals_library_output() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["flat2d.cfg", "hyperplane.cfg", "curve.cfg"] {
        let p = dir.path().join("out.csv");
        assert_eq!(code(&forward_to(&config(name), &p, &[])), 0);
        let cfg = RunConfig::load(&config(name)).unwrap();
        let lib = forward_grid(&cfg).unwrap().to_csv();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), lib, "{name}");
    }
}

#[test]
fn round_trip_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let recon = dir.path().join("recon.csv");
    assert_eq!(code(&forward_to(&config("flat2d.cfg"), &data, &[])), 0);
    let o = headwave(&["invert", "--config", s(&config("flat2d.cfg")), "--data", s(&data), "--out", s(&recon)], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(value(&stdout(&o), "thm21.max_abs_err") <= 1e-4);
    let text = std::fs::read_to_string(&recon).unwrap();
    assert!(text.contains("x,f_recon,f_true,abs_err"));
}

#[test]
fn constant_scene_runs_all_three_formulas() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    assert_eq!(code(&forward_to(&config("flat_constant.cfg"), &data, &[])), 0);
    let o = headwave(&["invert", "--config", s(&config("flat_constant.cfg")), "--data", s(&data)], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    for tag in ["rmk22-1", "rmk22-2", "rmk22-3"] {
        assert!(value(&out, &format!("{tag}.max_abs_err")) <= 1e-4);
    }
    assert_eq!(out.lines().filter(|l| l.starts_with("pairwise_max_diff[")).count(), 3);
}

#[test]
fn hash_mismatch_needs_override() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    assert_eq!(code(&forward_to(&config("flat_constant.cfg"), &data, &[])), 0);
    let cfg = config("flat2d.cfg");
    let args = ["invert", "--config", s(&cfg), "--data", s(&data)];
    let o = headwave(&args, &[]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("hash mismatch"));
    let mut forced = args.to_vec();
    forced.push("--override-hash");
    let o = headwave(&forced, &[]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("WARNING"));
}

#[test]
fn v1_above_one_is_an_assumption_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), "flat2d.cfg", "v1 =", "v1 = \"1.2\"");
    let o = forward_to(&cfg, &dir.path().join("x.csv"), &[]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("(A1) 0 < v1 < 1"));
    assert_eq!(code(&headwave(&["check", "--config", s(&cfg)], &[])), 3);
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let empty = edited(dir.path(), "flat2d.cfg", "x =", "x = -3, 3, 0");
    let o = headwave(&["verify", "--config", s(&empty)], &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("grid.x"));
    let unknown = edited(dir.path(), "gauge_const.cfg", "recover", "recovery = true");
    let o = headwave(&["gauge", "--config", s(&unknown)], &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("gauge.recovery"));
}

#[test]
fn variable_formula_on_constant_fields_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    assert_eq!(code(&forward_to(&config("flat_constant.cfg"), &data, &[])), 0);
    let cfg = edited(dir.path(), "flat_constant.cfg", "method", "method = thm21");
    let o = headwave(&["invert", "--config", s(&cfg), "--data", s(&data), "--override-hash"], &[]);
    assert_eq!(code(&o), 6, "{}", stderr(&o));
    assert!(stderr(&o).contains("denominator"));
}

#[test]
fn verify_passes_on_clean_data_and_fails_on_a_perturbed_value() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    assert_eq!(code(&forward_to(&config("flat2d.cfg"), &data, &[])), 0);
    let o = headwave(&["verify", "--config", s(&config("flat2d.cfg")), "--data", s(&data)], &[]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));

    let text = std::fs::read_to_string(&data).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let k = lines.iter().position(|l| l.starts_with("x,")).unwrap() + 1 + 300 * 51 + 25;
    let mut cols: Vec<String> = lines[k].split(',').map(String::from).collect();
    cols[2] = format!("{:.16e}", cols[2].parse::<f64>().unwrap() + 1e-3);
    lines[k] = cols.join(",");
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let o = headwave(&["verify", "--config", s(&config("flat2d.cfg")), "--data", s(&bad)], &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("derivative_identities_data"));
}

#[test]
fn shipped_configs_verify() {
    for name in ["flat_constant.cfg", "hyperplane.cfg", "curve.cfg"] {
        let o = headwave(&["verify", "--config", s(&config(name))], &[]);
        assert_eq!(code(&o), 0, "{name}\n{}{}", stdout(&o), stderr(&o));
    }
}

#[test]
fn gauge_configs_pass() {
    let o = headwave(&["gauge", "--config", s(&config("gauge_const.cfg"))], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(value(&stdout(&o), "max_forward_residual") <= 1e-8);
    let o = headwave(&["gauge", "--config", s(&config("depth_null.cfg"))], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(value(&stdout(&o), "max_forward_residual") <= 1e-7);
}

#[test]
fn gauge_rejects_potential_that_does_not_vanish_on_the_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), "gauge_const.cfg", "phi", "phi = \"exp(-x^2 - y^2)\"");
    let o = headwave(&["gauge", "--config", s(&cfg)], &[]);
    assert_eq!(code(&o), 7);
    assert!(stderr(&o).contains("does not vanish"));
}

#[test]
fn violating_depth_profile_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), "depth_null.cfg", "h =", "h = \"s*exp(-s^2)\"");
    assert_eq!(code(&headwave(&["gauge", "--config", s(&cfg)], &[])), 7);
}
