//! End-to-end checks of the command-line front end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn csl_modes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csl-modes"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const MILD: &str = r#"
[cosmology]
delta_n = 4.0

[csl]
gamma = { value = 1.5e-46, unit = "planck" }
r_c = { value = 1e3, unit = "planck" }

[numerics]
n_traj = 128

[mode]
n_outputs = 6
radiation_efolds = 1.0

[spectrum]
k_max_over_kref = 2.0
n_k = 3
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&csl_modes(&["--help"])), 0);
    assert_eq!(code(&csl_modes(&["--version"])), 0);
    assert_eq!(code(&csl_modes(&["spectrum", "--help"])), 0);
}

#[test]
fn usage_and_config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&csl_modes(&["no-such-command"])), 1);
    assert_eq!(code(&csl_modes(&["spectrum", "--format", "xml"])), 1);
    assert_eq!(code(&csl_modes(&["spectrum", "--config", "/nonexistent/run.toml"])), 1);

    let bad_key = write_config(dir.path(), "[csl]\ngama = 1.0\n");
    let o = csl_modes(&["mode-evolve", "--config", &bad_key]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("gama"));

    // the CSL section is required for mode evolution
    let out = dir.path().join("o");
    assert_eq!(code(&csl_modes(&["mode-evolve", "--out", out.to_str().unwrap()])), 1);

    let cfg = write_config(dir.path(), MILD);
    let o = csl_modes(&[
        "spectrum",
        "--config",
        &cfg,
        "--set",
        "spectrum.n_k=1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 2"));
    assert_eq!(code(&csl_modes(&["ensemble", "--config", &cfg, "--threads", "0"])), 1);
}

#[test]
fn mixed_regime_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    // H r_c = e^3 with ΔN = 4: k_ref crosses r_c during inflation, 10 k_ref
    // (one e-fold closer to the horizon at the end) in the radiation era
    let rc = 3f64.exp() / 1e-5;
    let cfg = write_config(dir.path(), &MILD.replace("value = 1e3", &format!("value = {rc}")));
    let out = dir.path().join("o");
    let o = csl_modes(&[
        "spectrum",
        "--config",
        &cfg,
        "--set",
        "spectrum.k_max_over_kref=10",
        "--set",
        "spectrum.n_k=6",
        "--set",
        "spectrum.evaluate_at=\"end-of-inflation\"",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mixes"));
}

#[test]
fn numerical_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // deep in the strong-collapse regime the width equation turns stiff
    let cfg = write_config(
        dir.path(),
        "[csl]\ngamma = { value = 1e-40, unit = \"planck\" }\nr_c = { value = 1e3, unit = \"planck\" }\n",
    );
    let out = dir.path().join("o");
    let o = csl_modes(&["mode-evolve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("integration failed"));
}

#[test]
fn mode_evolve_writes_tables_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MILD);
    let csv_dir = dir.path().join("csv");
    let o = csl_modes(&["mode-evolve", "--config", &cfg, "--out", csv_dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("correction_rel") && stdout.contains("R = "));
    let moments = fs::read_to_string(csv_dir.join("moments.csv")).unwrap();
    assert!(moments.starts_with("eta,era,ratio,p_vv,"));
    assert!(!moments.contains('\r'));
    assert_eq!(moments.lines().count(), 1 + 6);
    assert!(csv_dir.join("omega.csv").exists());

    let json_dir = dir.path().join("json");
    let o = csl_modes(&[
        "mode-evolve",
        "--config",
        &cfg,
        "--format",
        "json",
        "--out",
        json_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let rows: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(json_dir.join("moments.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 6);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(json_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "mode-evolve");
    assert_eq!(manifest["config"]["output"]["format"], "json");
}

#[test]
fn seeded_ensemble_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MILD);
    let run = |name: &str, seed: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = csl_modes(&[
            "ensemble",
            "--config",
            &cfg,
            "--seed",
            seed,
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out.join("ensemble.csv")).unwrap()
    };
    let a = run("a", "5", "1");
    assert_eq!(a, run("b", "5", "4"));
    assert_ne!(a, run("c", "6", "2"));

    // replay from the manifest
    let replay = dir.path().join("replay");
    let manifest = dir.path().join("a").join("manifest.json");
    let o = csl_modes(&[
        "ensemble",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        replay.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(a, fs::read(replay.join("ensemble.csv")).unwrap());

    // a manifest only replays the command that wrote it
    let o = csl_modes(&["spectrum", "--config", manifest.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn small_exclusion_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = csl_modes(&[
        "exclusion",
        "--set",
        "exclusion.n_rc=2",
        "--set",
        "exclusion.n_lambda=2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let map = fs::read_to_string(out.join("map.csv")).unwrap();
    let lines: Vec<&str> = map.lines().collect();
    assert_eq!(lines[0], "log10_rc,log10_lambda,status");
    assert_eq!(lines.len(), 5);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("exclusion.json")).unwrap()).unwrap();
    // without laboratory data the comparison cannot be made
    assert_eq!(summary["verdict"], "no-lab-data");
    assert_eq!(summary["boundary"].as_array().unwrap().len(), 2);
}

#[test]
fn sample_overlay_rules_out_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let overlay = concat!(env!("CARGO_MANIFEST_DIR"), "/data/lab_overlay_sample.csv");
    let cfg = write_config(
        dir.path(),
        &format!("[exclusion]\noverlay = \"{overlay}\"\nn_rc = 60\nn_lambda = 60\n"),
    );
    let o = csl_modes(&["exclusion", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("exclusion.json")).unwrap()).unwrap();
    assert_eq!(summary["verdict"], "incompatible");
    assert_eq!(summary["jointly_allowed_cells"], 0);

    let broken = dir.path().join("broken.csv");
    fs::write(
        &broken,
        "polygon_id,vertex_index,log10_rc_m,log10_lambda_s\na,0,0,0\na,1,1,0\n",
    )
    .unwrap();
    let o = csl_modes(&[
        "exclusion",
        "--set",
        &format!("exclusion.overlay=\"{}\"", broken.display()),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn custom_constants_file_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let consts = dir.path().join("constants.toml");
    fs::write(&consts, "speed_of_light = 1.0\n").unwrap();
    let o = csl_modes(&["exclusion", "--constants", consts.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}
