use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fairdispatch"));
    c.args(["--jobs", "1"]);
    c
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn rows(csv_text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(csv_text.as_bytes())
        .records()
        .map(Result::unwrap)
        .collect()
}

fn column(csv_text: &str, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let i = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[i].to_string()).collect()
}

fn generate(dir: &Path, tasks: &str) {
    ok(bin()
        .args(["generate", "--tasks", tasks, "--workers", "20", "--seed", "3", "--out"])
        .arg(dir)
        .output()
        .unwrap());
}

#[test]
fn generate_then_run_on_files() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "200");
    let trips = fs::read_to_string(dir.path().join("trips.csv")).unwrap();
    assert_eq!(trips.lines().count(), 201);
    let out = ok(bin()
        .arg("run")
        .arg("--trips")
        .arg(dir.path().join("trips.csv"))
        .arg("--checkins")
        .arg(dir.path().join("checkins.csv"))
        .args(["--seed", "1", "--seed", "2"])
        .output()
        .unwrap());
    let recs = rows(&out);
    assert_eq!(recs.len(), 2);
    assert_eq!(column(&out, "tasks"), vec!["200", "200"]);
    assert_eq!(column(&out, "seed"), vec!["1", "2"]);
}

#[test]
fn generate_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    generate(a.path(), "50");
    generate(b.path(), "50");
    for f in ["trips.csv", "checkins.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn unicast_report_identities() {
    for algo in ["f_aware", "random", "laf", "nearest", "mcf"] {
        let out = ok(bin()
            .args(["run", "--tasks", "150", "--workers", "15", "--mode", "unicast", "--algo", algo])
            .args(["--seed", "0", "--seed", "1"])
            .output()
            .unwrap());
        assert!(column(&out, "ar").iter().all(|v| v.parse::<f64>().unwrap() == 1.0), "{algo}");
        assert!(column(&out, "unfairness").iter().all(|v| v.parse::<f64>().unwrap() == 0.0), "{algo}");
    }
}

#[test]
fn rho_zero_objective_is_tar() {
    let out = ok(bin()
        .args(["run", "--tasks", "150", "--workers", "15", "--rho", "0", "--seed", "4"])
        .output()
        .unwrap());
    assert_eq!(column(&out, "objective"), column(&out, "tar"));
}

#[test]
fn json_output() {
    let out = ok(bin()
        .args(["run", "--tasks", "100", "--workers", "10", "--seed", "0", "--format", "json"])
        .output()
        .unwrap());
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let first = &v.as_array().unwrap()[0];
    assert_eq!(first["report"]["tasks"], 100);
}

#[test]
fn online_window_flag() {
    let out = ok(bin()
        .args(["run", "--tasks", "120", "--workers", "12", "--window-min", "15", "--seed", "0"])
        .output()
        .unwrap());
    assert_eq!(column(&out, "mode"), vec!["online"]);
    assert_eq!(column(&out, "window_min"), vec!["15"]);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    fs::write(
        &path,
        "algorithm = \"laf\"\nseeds = [5]\nrho = 0.5\n[synth]\ntasks = 80\nworkers = 8\n",
    )
    .unwrap();
    let out = ok(bin()
        .args(["run", "--config"])
        .arg(&path)
        .args(["--algo", "nearest"])
        .output()
        .unwrap());
    assert_eq!(column(&out, "algo"), vec!["nearest"]);
    assert_eq!(column(&out, "rho"), vec!["0.5"]);
    assert_eq!(column(&out, "tasks"), vec!["80"]);
}

#[test]
fn bad_inputs_fail_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "seeds = []\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));

    let out = bin()
        .args(["run", "--trips", "/nonexistent/trips.csv", "--checkins", "/nonexistent/c.csv"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());

    fs::write(&path, "no_such_key = 1\n").unwrap();
    assert!(!bin().args(["run", "--config"]).arg(&path).output().unwrap().status.success());
}

#[test]
fn bad_rows_abort_unless_skipped() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "30");
    let trips = dir.path().join("trips.csv");
    let mut text = fs::read_to_string(&trips).unwrap();
    text.push_str("garbage,1,2,3,4,5,6\n");
    fs::write(&trips, text).unwrap();
    let args = |skip: bool| {
        let mut c = bin();
        c.arg("run")
            .arg("--trips")
            .arg(&trips)
            .arg("--checkins")
            .arg(dir.path().join("checkins.csv"))
            .args(["--seed", "0"]);
        if skip {
            c.arg("--skip-bad-rows");
        }
        c.output().unwrap()
    };
    let failed = args(false);
    assert!(!failed.status.success());
    assert!(String::from_utf8_lossy(&failed.stderr).contains("line 32"));
    let out = ok(args(true));
    assert_eq!(column(&out, "tasks"), vec!["30"]);
}

#[test]
fn mcf_size_guard_refuses_with_hint() {
    let out = bin()
        .args(["run", "--tasks", "300", "--workers", "10", "--algo", "mcf", "--mcf-max-tasks", "100"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("mcf_max_tasks"), "{err}");
}

#[test]
fn sweep_rows_and_reproducible_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let summary = dir.path().join(format!("summary-{name}"));
        ok(bin()
            .args(["sweep", "--tasks", "150", "--workers", "15", "--axis", "theta", "--values", "0.2,0.4"])
            .args(["--algos", "f_aware,laf", "--seed", "0", "--seed", "1", "--out"])
            .arg(&out)
            .arg("--summary")
            .arg(&summary)
            .output()
            .unwrap());
        (fs::read_to_string(out).unwrap(), fs::read_to_string(summary).unwrap())
    };
    let (a, summary) = run("a.csv");
    let (b, _) = run("b.csv");
    assert_eq!(a, b);
    // one row per (value, allocator, seed)
    assert_eq!(rows(&a).len(), 2 * 2 * 2);
    assert_eq!(rows(&summary).len(), 2 * 2);
    for algo in ["f_aware", "laf"] {
        let mut r = csv::Reader::from_reader(summary.as_bytes());
        let h = r.headers().unwrap().clone();
        let at = |n: &str| h.iter().position(|x| x == n).unwrap();
        let ks: Vec<f64> = r
            .records()
            .map(Result::unwrap)
            .filter(|rec| &rec[at("algo")] == algo)
            .map(|rec| rec[at("avg_k_mean")].parse().unwrap())
            .collect();
        assert!(ks[1] <= ks[0], "{algo}: {ks:?}");
    }
}

#[test]
fn trace_dumps_sessions() {
    let out = ok(bin()
        .args(["trace", "--tasks", "60", "--workers", "8", "--seed", "2"])
        .output()
        .unwrap());
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["sessions"].as_array().is_some_and(|s| !s.is_empty()));
}
