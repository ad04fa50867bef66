//! End-to-end CLI checks against the compiled binary: config resolution,
//! file emission, determinism, exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn bellstab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellstab"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Small, fast parameter set: n̄ = 1, d = 32, 0.2 µs.
const TINY: &[&str] = &["--nbar", "1", "--t-final-us", "0.2"];

#[test]
fn validate_reports_ratio_and_regime() {
    let dir = tempfile::tempdir().unwrap();
    let out = bellstab(&["validate"], dir.path());
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("0.021053"), "missing ratio: {text}");
    assert!(text.contains("PASS"));
    assert!(!text.contains("WARN"), "reference point should pass all checks: {text}");
}

#[test]
fn validate_warns_in_marginal_regime() {
    let dir = tempfile::tempdir().unwrap();
    // χ_B far from χ_A pushes the dephasing ratio above 0.1
    let out = bellstab(&["validate", "--chi-b-mhz", "3", "--ncav", "16"], dir.path());
    assert!(out.status.success());
    assert!(stdout(&out).contains("WARN"));
}

#[test]
fn simulate_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--out", "run1"];
    args.extend_from_slice(TINY);
    let out = bellstab(&args, dir.path());
    assert!(out.status.success(), "stderr: {}", stderr(&out));

    let csv = std::fs::read_to_string(dir.path().join("run1/time_series.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t_us,fidelity,chsh,photon_number,p_gg,p_ee,p_odd");
    // 0.2 µs at dt = 0.2 ns is 1000 steps; stride 500 → floor(1000/500)+1 rows
    assert_eq!(lines.count(), 3);

    let summary = std::fs::read_to_string(dir.path().join("run1/summary.txt")).unwrap();
    for key in ["steady_fidelity:", "steady_chsh:", "chi_a_mhz: 10", "nbar: 1"] {
        assert!(summary.contains(key), "summary missing {key}:\n{summary}");
    }
}

#[test]
fn simulate_is_bit_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let mut args = vec!["simulate", "--out", name];
        args.extend_from_slice(TINY);
        let out = bellstab(&args, dir.path());
        assert!(out.status.success(), "stderr: {}", stderr(&out));
    }
    let a = std::fs::read(dir.path().join("a/time_series.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/time_series.csv")).unwrap();
    assert_eq!(a, b, "identical configs must produce bit-identical CSV");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "nbar = 1.0\nt_final_us = 0.2\nkappa_mhz = 2.0\nout_dir = \"from_file\"\n",
    )
    .unwrap();
    let out = bellstab(
        &["simulate", "--config", "run.toml", "--out", "from_flag"],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(dir.path().join("from_flag/summary.txt").exists(), "flag must override file");
}

#[test]
fn shipped_reference_config_is_the_default() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/reference.toml");
    let settings = bellstab::config::Settings::from_file(&path).unwrap();
    let cfg = bellstab::config::parse_config(
        bellstab::config::Mode::Simulate,
        Some(&path),
        Default::default(),
    )
    .unwrap();
    assert_eq!(cfg.params, bellstab::system::SystemParams::default());
    assert_eq!(cfg.evolution, bellstab::lindblad::EvolutionConfig::default());
    assert_eq!(settings.n_cav, Some(16));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "chi_a_mzh = 10.0\n").unwrap();
    let out = bellstab(&["simulate", "--config", "bad.toml"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("chi_a_mzh"), "stderr: {}", stderr(&out));
}

#[test]
fn unphysical_t2_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = bellstab(&["simulate", "--t2-a-us", "200", "--t1-a-us", "50"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("T2 ≤ 2·T1"), "stderr: {}", stderr(&out));
}

#[test]
fn oracles_mode_reports_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = bellstab(&["oracles", "--out", "o"], dir.path());
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let report = std::fs::read_to_string(dir.path().join("o/oracles.txt")).unwrap();
    for name in ["t1_decay", "rabi", "cavity_decay", "lindblad_trace", "chsh_identity"] {
        assert!(report.contains(name), "report missing {name}");
    }
    assert!(!report.contains("FAIL"));
}

#[test]
fn sweep_and_truncation_emit_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = bellstab(
        &[
            "sweep",
            "--nbar-values",
            "1",
            "--omega-ratios",
            "0.5,1.0",
            "--t-final-us",
            "0.1",
            "--out",
            "s",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    assert!(csv.starts_with("nbar,omega_nbar_over_kappa,fidelity,chsh"));
    assert_eq!(csv.lines().count(), 3);

    let out = bellstab(
        &[
            "truncation",
            "--nbar",
            "1",
            "--n-values",
            "2,8",
            "--t-final-us",
            "0.1",
            "--out",
            "t",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("t/truncation.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n_cav,steady_fidelity,valid");
    assert!(lines[1].starts_with("2,nan,false"));
    assert!(lines[2].starts_with("8,") && lines[2].ends_with("true"));
}

#[test]
fn plots_are_emitted_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--out", "p", "--emit-plots"];
    args.extend_from_slice(TINY);
    let out = bellstab(&args, dir.path());
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let svg = std::fs::read_to_string(dir.path().join("p/time_series.svg")).unwrap();
    assert!(svg.contains("<svg"));
}
