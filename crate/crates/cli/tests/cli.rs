use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn covqec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covqec")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn export(dir: &Path, name: &str) -> String {
    let o = covqec(&["export", name, "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    dir.join(format!("{name}.code")).to_string_lossy().into_owned()
}

/// Non-comment lines of an RFC-4180 file with no quoted fields.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn passing_demo_exits_zero_and_writes_echoed_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = covqec(&["demo", "gyroscope", "--seed", "11", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("summary:"));
    assert!(stderr(&o).contains("timings:"));
    for name in ["demo-gyroscope.txt", "demo-gyroscope.csv"] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.starts_with("# version: covqec 0.1.0\n# command: demo gyroscope\n"), "{name}");
        assert!(text.contains("# seed: 11\n"));
        assert!(!text.contains("timings"), "timings are not written to files");
    }
    let rows = csv_rows(&fs::read_to_string(dir.path().join("demo-gyroscope.csv")).unwrap());
    assert_eq!(rows[0], ["name", "residual", "relation", "tolerance", "pass", "seed"]);
    assert!(rows.iter().all(|r| r.len() == 6));
    assert!(rows[1..].iter().filter(|r| !r[4].is_empty()).all(|r| r[4] == "true"));
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let code = export(dir.path(), "qutrit-base");
    assert_eq!(covqec(&["verify", &code]).status.code(), Some(0));
    let o = covqec(&["verify", &code, "--tol", "kl=0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL kl[mode 0]"));
    assert!(stdout(&o).contains("# tol.kl: 0.0000000000000000e0"));
}

#[test]
fn bad_configuration_exits_two() {
    for args in [
        vec!["demo", "nope"],
        vec!["demo", "random", "--group", "q7"],
        vec!["demo", "random", "--tol", "nope=1"],
        vec!["demo", "random", "--tol", "kl"],
        vec!["concentration", "--n", "13"],
        vec!["concentration", "--n", "2"],
        vec!["concentration", "--samples", "0"],
        vec!["nogo", "--restarts", "0"],
        vec!["verify", "/nonexistent/code"],
        vec!["export", "nope"],
    ] {
        let o = covqec(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr(&o).starts_with("error: "), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn large_budgets_warn_but_run() {
    let o = covqec(&["demo", "random", "--n", "3", "--budget", "20000"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning: budget 20000"));
    assert!(stdout(&o).contains("# budget: 20000\n"));
}

#[test]
fn encode_writes_an_echoed_state() {
    let dir = tempfile::tempdir().unwrap();
    let code = export(dir.path(), "qutrit-base");
    let state = dir.path().join("plus.state");
    fs::write(&state, "# a comment\ndims: 3\n0.5 0\n0.5 0\n0.7071067811865476 0\n").unwrap();
    let out = dir.path().join("enc");
    let o = covqec(&["encode", &code, state.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("encoded.state")).unwrap();
    assert!(text.starts_with("# version: covqec 0.1.0\n# command: encode\n"));
    assert!(text.contains("dims: 3 3 3\n"));
    assert_eq!(text, stdout(&o));

    // a state of the wrong shape is rejected
    fs::write(&state, "dims: 2\n1 0\n0 0\n").unwrap();
    assert_eq!(covqec(&["encode", &code, state.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn concentration_and_nogo_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = covqec(&["concentration", "--samples", "6", "--n", "4", "--out", d]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let records = fs::read_to_string(dir.path().join("concentration.csv")).unwrap();
    assert!(records.starts_with("# version: covqec 0.1.0\n# command: concentration\n"));
    let rows = csv_rows(&records);
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| r.len() == rows[0].len()));
    assert!(dir.path().join("concentration-summary.csv").is_file());

    let o = covqec(&["nogo", "--restarts", "3", "--out", d]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let rows = csv_rows(&fs::read_to_string(dir.path().join("nogo-restarts.csv")).unwrap());
    assert_eq!(rows[0], ["case", "restart", "best_kl"]);
    assert_eq!(rows.len(), 1 + 2 * 3);
}

#[test]
fn exported_codes_verify() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["gyroscope", "random"] {
        let code = export(dir.path(), name);
        let o = covqec(&["verify", &code]);
        let text = stdout(&o);
        assert!(text.contains("PASS trace_preservation"), "{name}: {text}");
        assert!(text.contains("covariance"), "{name}: {text}");
        if name == "gyroscope" {
            assert_eq!(o.status.code(), Some(0), "{text}");
        }
    }
}
