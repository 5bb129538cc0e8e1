use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_regml")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(bin()).args(args).arg("--config").arg(config).arg("--out").arg(out).output().unwrap()
}

fn summary(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn shipped_configs_validate() {
    for entry in fs::read_dir(configs()).unwrap() {
        let p = entry.unwrap().path();
        let out = Command::new(bin()).arg("validate").arg("--config").arg(&p).output().unwrap();
        assert!(out.status.success(), "{}: {}", p.display(), String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let zero = fs::read_to_string(configs().join("zero.toml")).unwrap();

    let coarse = write_config(dir.path(), "coarse.toml", &zero.replace("dx = 0.02", "dx = 0.05"));
    let out = Command::new(bin()).arg("validate").arg("--config").arg(&coarse).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("regops:") && err.contains("nu"), "{err}");

    let typo = write_config(dir.path(), "typo.toml", &zero.replace("b0 = 5.0", "bo = 5.0"));
    assert_eq!(Command::new(bin()).arg("validate").arg("--config").arg(&typo).status().unwrap().code(), Some(2));
    assert_eq!(Command::new(bin()).arg("solve").status().unwrap().code(), Some(2));

    // A subcommand whose experiment block is missing.
    let out = run(&["sweep"], &configs().join("zero.toml"), &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[sweep]"));
}

#[test]
fn zero_data_solves_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("zero");
    assert!(run(&["solve"], &configs().join("zero.toml"), &out).status.success());
    let mut rdr = fs::read_to_string(out.join("solution.csv")).unwrap();
    rdr = rdr.split_off(rdr.find('\n').unwrap() + 1);
    for line in rdr.lines() {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(&v[2..], &[0.0, 0.0, 0.0]);
    }
    let s = summary(&out);
    assert_eq!(s["outcome"]["status"], "completed");
    assert_eq!(fs::read_to_string(out.join("config.toml")).unwrap(), fs::read_to_string(configs().join("zero.toml")).unwrap());
}

#[test]
fn contamination_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("zero.toml"))
        .unwrap()
        .replace("kind = \"zero\"", "kind = \"gaussian\"\nsigma_amp = 1.0\nwidth = 2.0");
    let cfg = write_config(dir.path(), "wide.toml", &text);
    let out = run(&["solve"], &cfg, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(summary(&dir.path().join("o"))["boundary_contaminated"], true);
}

#[test]
fn picard_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("smooth_picard.toml")).unwrap().replace("picard_tol = 1e-10", "picard_tol = 1e-10\npicard_max_iter = 2");
    let cfg = write_config(dir.path(), "p.toml", &text);
    let out = run(&["solve"], &cfg, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Picard"));
}

#[test]
fn smooth_run_reports_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    assert!(run(&["solve"], &configs().join("smooth.toml"), &out).status.success());
    let s = summary(&out);
    assert!(s["charge"]["relative_drift"].as_f64().unwrap() <= 1e-6);
    assert!(s["transport_residual"]["value"].as_f64().unwrap() <= 1e-3);
    assert!(s["sup_norm"].as_f64().unwrap() < s["a_priori_bound"].as_f64().unwrap());
}

#[test]
fn left_kernel_support_and_world_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sup");
    assert!(run(&["check-support"], &configs().join("delta_left.toml"), &out).status.success());
    assert_eq!(summary(&out)["pass"], true);

    let tr = dir.path().join("tr");
    assert!(run(&["trajectories"], &configs().join("delta_left.toml"), &tr).status.success());
    let s = summary(&tr);
    for t in s["trajectories"].as_array().unwrap() {
        assert!(t["max_speed"].as_f64().unwrap() < 1.0);
    }
    let text = fs::read_to_string(tr.join("trajectory_002.csv")).unwrap();
    for line in text.lines().skip(1) {
        let w: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(w, 0.05);
    }
}

#[test]
fn obstruction_sweep_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sw");
    let o = Command::new(bin())
        .args(["sweep", "--workers", "2", "--config"])
        .arg(configs().join("obstruction.toml"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    let q = &s["result"]["observables"][0];
    assert_eq!(q["verdict"]["verdict"], "diverging");
    assert_eq!(q["verdict"]["reason"], "support obstruction");
    assert!(fs::read_to_string(out.join("sweep.csv")).unwrap().starts_with("observable,eps,pairing,increment,target\n"));
}

#[test]
fn sweep_output_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let go = |w: &str| {
        let out = dir.path().join(format!("w{w}"));
        let st = Command::new(bin())
            .args(["sweep", "--workers", w, "--config"])
            .arg(configs().join("obstruction.toml"))
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(st.success());
        fs::read(out.join("sweep.csv")).unwrap()
    };
    assert_eq!(go("1"), go("4"));
}

#[test]
fn blowup_and_linearized_tables() {
    let dir = tempfile::tempdir().unwrap();
    let bu = dir.path().join("bu");
    assert!(run(&["probe-blowup"], &configs().join("blowup.toml"), &bu).status.success());
    assert!(summary(&bu)["report"]["exponent"].as_f64().unwrap() > 0.0);

    let cl = dir.path().join("cl");
    assert!(run(&["compare-lin"], &configs().join("linearized.toml"), &cl).status.success());
    let s = summary(&cl);
    let charges = s["charges"].as_array().unwrap();
    assert_eq!(charges.len(), 4);
    let rel = |k: usize| charges[k]["rel_err_e"].as_f64().unwrap();
    assert!(rel(0) <= rel(1) * (1.0 + 1e-6));
    assert!(rel(3) > rel(0));
}

#[test]
fn scaling_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cs");
    assert!(run(&["check-scaling"], &configs().join("scaling.toml"), &out).status.success());
    let s = summary(&out);
    for r in s["reports"].as_array().unwrap() {
        let loglog = r["scaling"]["kind"] == "log_log";
        assert_eq!(r["satisfied"].as_bool().unwrap(), loglog, "{r}");
    }
}

#[test]
fn seed_changes_run_id_not_data() {
    let dir = tempfile::tempdir().unwrap();
    let go = |seed: &str| {
        let out = dir.path().join(seed);
        let st = Command::new(bin())
            .args(["solve", "--seed", seed, "--config"])
            .arg(configs().join("zero.toml"))
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(st.success());
        (fs::read(out.join("solution.csv")).unwrap(), summary(&out)["run_id"].clone())
    };
    let (a, ida) = go("1");
    let (b, idb) = go("2");
    assert_eq!(a, b);
    assert_ne!(ida, idb);
}
