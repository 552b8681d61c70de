use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rgpe(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rgpe"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RGPE_OUT")
        .output()
        .unwrap()
}

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn lists_every_scheme() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["list-schemes"][..], &["--list-schemes"]] {
        let o = rgpe(args, dir.path());
        assert!(o.status.success());
        let out = text(&o);
        for name in ["strang", "rkn74", "rkn116", "cf2", "cf4af", "cf6af", "bbk+rkn116"] {
            assert!(out.contains(name), "{name} missing from\n{out}");
        }
        assert!(out.contains("bbk+rkn116     order 6  transform pairs per step 22"));
    }
}

#[test]
fn converge_writes_one_group_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("study");
    let o = rgpe(
        &[
            "converge",
            &config("testequation-2d.cfg"),
            "--methods",
            "cf2+strang,cf6af+rkn116",
            "--steps",
            "8,16",
            "--out",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", text(&o));
    let csv = fs::read_to_string(out.join("convergence.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,h,n_steps,l2_error,transform_pairs,wall_ms");
    let methods: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["cf2+strang", "cf2+strang", "cf6af+rkn116", "cf6af+rkn116"]);
    assert!(lines[3].contains(",0.5,8,"), "{}", lines[3]);
    let echoed = fs::read_to_string(out.join("effective.cfg")).unwrap();
    assert!(echoed.contains("methods = [\"cf2+strang\", \"cf6af+rkn116\"]"), "{echoed}");
}

#[test]
fn self_converge_reports_orders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(&cfg, "sizes = [16, 16]\nhalf_widths = [8.0, 8.0]\nt_end = 1.0\n").unwrap();
    let o = rgpe(
        &["self-converge", "--config", cfg.to_str().unwrap(), "--methods", "bbk+strang", "--steps", "4,8,16,32", "--out", "sc"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("bbk+strang     nominal order 2  observed 2.0"), "{}", text(&o));
    assert_eq!(fs::read_to_string(dir.path().join("sc/self_convergence.csv")).unwrap().lines().count(), 5);
}

#[test]
fn simulate_writes_snapshots_to_env_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_rgpe"))
        .args(["simulate", "--steps", "8", "--snapshot-times", "0,4", "--theta", "5"])
        .current_dir(dir.path())
        .env("RGPE_OUT", dir.path().join("env-out"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", text(&o));
    let out = dir.path().join("env-out");
    for f in ["effective.cfg", "snapshot_t0000.000.rgpe", "snapshot_t0004.000.rgpe", "snapshot_t0004.000.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(fs::read_to_string(out.join("effective.cfg")).unwrap().contains("theta = 5.0"));
}

#[test]
fn gradient_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = rgpe(&["gradient-check", "--samples", "200"], dir.path());
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("max relative deviation"));
}

#[test]
fn oracle_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = rgpe(&["oracle-check"], dir.path());
    assert!(o.status.success(), "{}", text(&o));
    assert_eq!(text(&o).matches("PASS").count(), 7);
}

#[test]
fn validation_failures_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "thetta = 1.0\n").unwrap();
    let two_d = config("testequation-2d.cfg");
    let cases: Vec<Vec<&str>> = vec![
        vec!["converge", bad.to_str().unwrap()],
        vec!["converge", "--methods", "cf9+strang"],
        vec!["simulate", "--dim", "3", "--config", &two_d],
        vec!["simulate", "--steps", "3,4"],
        vec![],
    ];
    for args in cases {
        let o = rgpe(&args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", text(&o));
    }
    assert!(text(&rgpe(&["converge", bad.to_str().unwrap()], dir.path())).contains("thetta"));
}

#[test]
fn missing_config_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = rgpe(&["simulate", "nowhere.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", text(&o));
}

#[test]
fn divergence_exits_with_code_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("blowup.cfg");
    fs::write(&cfg, "sizes = [16, 16]\ngamma = [1e160, 1.0]\n").unwrap();
    let o = rgpe(&["simulate", cfg.to_str().unwrap(), "--steps", "2"], dir.path());
    assert_eq!(o.status.code(), Some(4), "{}", text(&o));
}
