use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stochbif(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochbif"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("STOCHBIF_OUT_DIR")
        .output()
        .unwrap()
}

/// CSV rows without the `#` header.
fn body(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn deterministic_orbit_follows_ode() {
    let dir = tempfile::tempdir().unwrap();
    let out = stochbif(
        &[
            "orbit",
            "--system",
            "transcritical",
            "--r",
            "0",
            "--x0",
            "0.5",
            "--mode",
            "deterministic",
            "--t-final",
            "4",
            "--cells",
            "6000",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = body(&dir.path().join("orbit.csv"));
    let means: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(means.windows(2).all(|w| w[1] < w[0]));
    for r in &rows {
        let t: f64 = r[2].parse().unwrap();
        let m: f64 = r[3].parse().unwrap();
        let exact = 0.5 / (1.0 + 0.5 * t);
        assert!((m - exact).abs() < 0.01 * exact, "t={t}: {m} vs {exact}");
    }
}

#[test]
fn bad_settings_exit_2_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &[
            "sweep",
            "--system",
            "pitchfork",
            "--r-min",
            "-1",
            "--r-max",
            "1",
            "--r-steps",
            "1",
        ][..],
        &["scan", "--system", "hopf", "--r", "1"],
        &[
            "orbit",
            "--system",
            "pitchfork",
            "--r",
            "1",
            "--x0",
            "5.999",
        ],
        &["orbit", "--system", "pitchfork", "--r", "1"],
        &[
            "orbit",
            "--system",
            "pitchfork",
            "--r",
            "1",
            "--x0",
            "0",
            "--dt",
            "-1",
        ],
        &[
            "orbit",
            "--system",
            "pitchfork",
            "--r",
            "1",
            "--x0",
            "0",
            "--boundary",
            "sticky",
        ],
        &["orbit", "--bogus"],
    ] {
        let out = stochbif(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0, "{args:?}");
    }
}

#[test]
fn unwritable_output_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("taken");
    fs::write(&file, "").unwrap();
    let out = stochbif(
        &[
            "orbit",
            "--system",
            "pitchfork",
            "--r",
            "1",
            "--x0",
            "0.5",
            "--t-final",
            "0.1",
        ],
        &file,
    );
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "scan",
        "--system",
        "pitchfork",
        "--r",
        "1",
        "--t-final",
        "20",
        "--dt",
        "0.01",
        "--cells",
        "400",
        "--x-min",
        "-4",
        "--x-max",
        "4",
    ];
    assert!(stochbif(&args, a.path()).status.success());
    assert!(stochbif(&args, b.path()).status.success());
    let x = fs::read(a.path().join("scan.csv")).unwrap();
    let y = fs::read(b.path().join("scan.csv")).unwrap();
    assert_eq!(x, y);

    let args = [
        "oracle",
        "--system",
        "pitchfork",
        "--r",
        "1",
        "--x0",
        "0.5",
        "--t-final",
        "0.5",
        "--n-paths",
        "500",
        "--seed",
        "9",
    ];
    assert!(stochbif(&args, a.path()).status.success());
    assert!(stochbif(&args, b.path()).status.success());
    assert_eq!(
        fs::read(a.path().join("oracle.csv")).unwrap(),
        fs::read(b.path().join("oracle.csv")).unwrap()
    );
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "system = \"pitchfork\"\nr = 0.5\nx0 = [0.5]\nt_final = 0.5\ndt = 0.01\nstride = 10\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = stochbif(
        &["orbit", "--config", cfg.to_str().unwrap(), "--r", "1"],
        &out_dir,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(out_dir.join("orbit.csv")).unwrap();
    assert!(text.contains("# r = 1.0\n"));
    assert!(text.contains("# t_final = 0.5\n"));
    assert!(body(&out_dir.join("orbit.csv")).iter().all(|r| r[0] == "1"));

    fs::write(&cfg, "system = \"pitchfork\"\nspeed = 3\n").unwrap();
    let out = stochbif(&["orbit", "--config", cfg.to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_stochbif"))
        .args([
            "orbit",
            "--system",
            "saddle-node",
            "--r",
            "-1",
            "--x0",
            "-1",
            "--t-final",
            "0.2",
        ])
        .env("STOCHBIF_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("orbit.csv").exists());
}

#[test]
fn density_dump_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = stochbif(
        &[
            "orbit",
            "--system",
            "pitchfork",
            "--r",
            "1",
            "--x0",
            "0.5",
            "--t-final",
            "0.2",
            "--stride",
            "100",
            "--cells",
            "100",
            "--dump-density",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("density.csv")).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some("t,x,p"));
    // three snapshots of 100 cells
    assert_eq!(lines.count(), 300);
}

#[test]
fn oracle_has_stderr_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = stochbif(
        &[
            "oracle",
            "--system",
            "transcritical",
            "--r",
            "0.5",
            "--x0",
            "1",
            "--t-final",
            "1",
            "--n-paths",
            "20000",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("oracle.csv")).unwrap();
    assert!(text.lines().any(|l| l == "r,x0,t,mean,mass,stderr"));
    let cmp = body(&dir.path().join("oracle_compare.csv"));
    assert_eq!(cmp.len(), 11);
    assert!(cmp.iter().all(|r| r[8] == "true"), "{cmp:?}");
}

#[test]
fn deterministic_pitchfork_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = stochbif(
        &[
            "sweep",
            "--system",
            "pitchfork",
            "--mode",
            "deterministic",
            "--r-min",
            "-1",
            "--r-max",
            "1",
            "--r-steps",
            "21",
            "--x-min",
            "-3",
            "--x-max",
            "3",
            "--dt",
            "0.05",
            "--t-final",
            "200",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = body(&dir.path().join("diagram.csv"));
    let at_one: Vec<f64> = rows
        .iter()
        .filter(|r| r[0] == "1")
        .map(|r| r[1].parse().unwrap())
        .collect();
    assert_eq!(at_one.len(), 3, "{at_one:?}");
    for (got, want) in at_one.iter().zip([-1.0, 0.0, 1.0]) {
        assert!((got - want).abs() < 0.02, "{at_one:?}");
    }
    let summary = body(&dir.path().join("bifurcations.csv"));
    assert!(summary.iter().any(|b| {
        let (lo, hi): (f64, f64) = (b[0].parse().unwrap(), b[1].parse().unwrap());
        lo <= 0.0 && 0.0 <= hi
    }));
}
