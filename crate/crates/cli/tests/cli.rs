use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rpf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpf")).args(args).env_remove("RPF_OUTPUT_ROOT").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn stationary_smoke_writes_traces_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = rpf(&[
        "stationary",
        "--n-particles",
        "300",
        "--ratio",
        "0.25",
        "--policy",
        "always",
        "--schedule",
        "rule-of-thumb",
        "--steps",
        "40",
        "--replicates",
        "2",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["manifest.txt", "overlay.csv", "rpf/summary.csv", "rpf/rep-0/trace.csv", "rpf/rep-1/trace.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let trace = fs::read_to_string(out.join("rpf/rep-0/trace.csv")).unwrap();
    assert!(trace.starts_with("step,resampled,ess_norm,alpha,rmse,log_marginal,mu_1,sigma_trace\n"));
    assert_eq!(trace.lines().count(), 41);
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("command = stationary\n"));
    assert!(manifest.contains("seed = 7\n"));
    assert!(manifest.contains(&format!("version = {}\n", env!("CARGO_PKG_VERSION"))));
}

#[test]
fn rerunning_from_the_manifest_reproduces_every_file() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let o = rpf(&[
        "ess-spacing",
        "--n-particles",
        "200",
        "--steps",
        "300",
        "--replicates",
        "2",
        "--seed",
        "11",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest = a.join("manifest.txt");
    let o = rpf(&["ess-spacing", "--config", manifest.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (fa, fb) = (files(&a), files(&b));
    assert!(fa.len() >= 5);
    assert_eq!(fa, fb);
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.conf");
    fs::write(&config, "# small run\nsteps = 12\nseed = 4\nreplicates = 1\nn-particles = 100\n").unwrap();
    let out = tmp.path().join("out");
    let o = rpf(&["filter", "--config", config.to_str().unwrap(), "--seed", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 5\n"));
    assert!(manifest.contains("steps = 12\n"));
    let summary = fs::read_to_string(out.join("rpf/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 13);
}

#[test]
fn lnas_writes_the_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("lnas");
    let o = rpf(&[
        "lnas",
        "--weather",
        "synthetic",
        "--replicates",
        "2",
        "--seed",
        "3",
        "--n-particles",
        "200",
        "--steps",
        "30",
        "--table-step",
        "30",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = fs::read_to_string(out.join("table.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("method,parameter,statistic,value,std"));
    assert_eq!(lines.count(), 4 * 3 * 2);
    assert!(out.join("weather.csv").is_file());

    // the written weather file drives the same run
    let again = tmp.path().join("again");
    let weather = out.join("weather.csv");
    let o = rpf(&[
        "lnas",
        "--config",
        out.join("manifest.txt").to_str().unwrap(),
        "--weather",
        weather.to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(out.join("table.csv")).unwrap(), fs::read(again.join("table.csv")).unwrap());
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_rpf"))
        .args(["filter", "--steps", "5", "--n-particles", "50", "--seed", "9"])
        .env("RPF_OUTPUT_ROOT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(tmp.path().join("filter-seed9/manifest.txt").is_file());
}

#[test]
fn configuration_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let out = out.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["stationary", "--unknown-flag", "3"],
        vec!["stationary", "--policy", "ess:1.5", "--out", out],
        vec!["stationary", "--policy", "sometimes", "--out", out],
        vec!["stationary", "--steps", "0", "--out", out],
        vec!["stationary", "--quench", "5", "--out", out],
        vec!["lnas", "--weather", "/definitely/not/here.csv", "--out", out],
        vec!["filter", "--model", "lorenz", "--out", out],
        vec!["stationary", "--config", "/no/such/config", "--out", out],
        vec![],
    ];
    for args in cases {
        let o = rpf(&args);
        assert_eq!(code(&o), 1, "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }

    let config = tmp.path().join("bad.conf");
    fs::write(&config, "steps = 10\nparticles = 5\n").unwrap();
    let o = rpf(&["stationary", "--config", config.to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unknown config key `particles`"), "{}", stderr(&o));
}

#[test]
fn weather_shorter_than_the_horizon_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let weather = tmp.path().join("w.csv");
    fs::write(&weather, "day,temp_c,rad_mj\n1,10,12\n2,11,13\n").unwrap();
    let o = rpf(&[
        "lnas",
        "--weather",
        weather.to_str().unwrap(),
        "--steps",
        "5",
        "--table-step",
        "5",
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("weather series has 2 days"), "{}", stderr(&o));
}

#[test]
fn degeneracy_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    // a subnormal noise variance leaves every particle with zero likelihood
    let o = rpf(&["filter", "--ratio", "1e-320", "--steps", "5", "--out", tmp.path().join("d").to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("degeneracy"));
}

#[test]
fn oracle_check_passes_and_help_succeeds() {
    let o = rpf(&["oracle-check"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().count() >= 9);
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")), "{stdout}");
    assert_eq!(code(&rpf(&["--help"])), 0);
    assert_eq!(code(&rpf(&["lnas", "--help"])), 0);
    assert_eq!(code(&rpf(&["--version"])), 0);
}
