use std::path::Path;
use std::process::{Command, Output};

fn excd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_excd"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("run excd")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_then_discover_and_bivariate() {
    let dir = tempfile::tempdir().unwrap();
    let sim = excd(&["simulate", "--envs", "4000", "--seed", "3", "--out", "xy.csv"], dir.path());
    assert!(sim.status.success(), "{}", stderr(&sim));
    assert!(dir.path().join("xy.json").exists());

    let biv = excd(&["bivariate", "xy.csv"], dir.path());
    assert!(biv.status.success(), "{}", stderr(&biv));
    assert_eq!(stdout(&biv).trim(), "X->Y");

    let disc = excd(&["discover", "xy.csv", "--out", "result.json"], dir.path());
    assert!(disc.status.success(), "{}", stderr(&disc));
    let res: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("result.json")).unwrap()).unwrap();
    assert_eq!(res["graph"]["edges"], serde_json::json!([[0, 1]]));
    assert_eq!(res["seed"], 3);
}

#[test]
fn single_sample_environments_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let sim = excd(
        &["simulate", "--envs", "50", "--samples-per-env", "1", "--out", "one.csv"],
        dir.path(),
    );
    assert!(sim.status.success());
    let disc = excd(&["discover", "one.csv"], dir.path());
    assert!(!disc.status.success());
    assert!(stderr(&disc).contains("at least 2 samples"), "{}", stderr(&disc));
}

#[test]
fn no_sink_exits_nonzero_unless_forced() {
    // both variables track a shared per-environment coin: no variable is a sink
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("env,sample,X1,X2\n");
    let mut s: u64 = 12345;
    let mut bit = |p: f64| {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (((s >> 11) as f64 / (1u64 << 53) as f64) < p) as u32
    };
    for e in 0..3000 {
        let coin = bit(0.5);
        for n in 0..2 {
            let x = coin ^ bit(0.1);
            let y = coin ^ bit(0.1);
            csv.push_str(&format!("{e},{n},{x},{y}\n"));
        }
    }
    std::fs::write(dir.path().join("conf.csv"), csv).unwrap();
    let disc = excd(&["discover", "conf.csv"], dir.path());
    assert_eq!(disc.status.code(), Some(2), "{}", stderr(&disc));
    assert!(stderr(&disc).contains("no sink found"));
    let forced = excd(&["discover", "conf.csv", "--force"], dir.path());
    assert!(forced.status.success(), "{}", stderr(&forced));
}

#[test]
fn sweep_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("b.conf"), "envs = 200,400\nrepeats = 2\nseed = 1\n").unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["sweep-bivariate", "--config", "b.conf", "--out", "out"];
        args.extend_from_slice(extra);
        let o = excd(&args, dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read_to_string(dir.path().join("out/bivariate_sweep.json")).unwrap()
    };
    let first = run(&["--repeats", "3"]);
    let manifest: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(manifest["config"]["repeats"], 3);
    assert_eq!(manifest["config"]["envs"], serde_json::json!([200, 400]));
    assert_eq!(run(&["--repeats", "3"]), first);

    // a manifest is itself a valid config
    let again = excd(
        &["sweep-bivariate", "--config", "out/bivariate_sweep.json", "--out", "again"],
        dir.path(),
    );
    assert!(again.status.success(), "{}", stderr(&again));
    assert_eq!(std::fs::read_to_string(dir.path().join("again/bivariate_sweep.json")).unwrap(), first);
}

#[test]
fn identifiability_and_oracle_verify() {
    let dir = tempfile::tempdir().unwrap();
    let id = excd(&["identifiability", "--out", "o"], dir.path());
    assert!(id.status.success());
    assert!(stdout(&id).contains("3,25,25,11,6,300"));
    let ov = excd(&["oracle-verify", "--max-nodes", "2", "--repeats", "3", "--out", "o"], dir.path());
    assert!(ov.status.success(), "{}", stderr(&ov));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/oracle_sweep.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
}

#[test]
fn bad_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "env,sample,X1\n0,0,1\n0,x,0\n").unwrap();
    let o = excd(&["discover", "bad.csv"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
    let o = excd(&["sweep-bivariate", "--alpha", "2", "--out", "o"], dir.path());
    assert!(!o.status.success());
}
