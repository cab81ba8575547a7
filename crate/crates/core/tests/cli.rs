use std::path::Path;
use std::process::{Command, Output};

fn ramcheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ramcheck"))
        .args(args)
        .env_remove("RAMCHECK_EPS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const AVAIL: &str = "(R{\"availability\"}=?[C<=129600])/129600";

#[test]
fn check_prints_value_and_tolerance() {
    let o = ramcheck(&["check", "satellite", "-q", "P=?[F<=129600 s=5]"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "P=?[F<=129600 s=5]: 0.0770482  (tolerance 1e-10)\n");
}

#[test]
fn check_reads_model_and_property_files() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("updown.ctmc");
    let props = dir.path().join("updown.props");
    std::fs::write(
        &model,
        "ctmc\nconst double l = 1;\nmodule u\n  up : [0..1] init 1;\n  [] up=1 -> l : (up'=0);\n  [] up=0 -> 3 : (up'=1);\nendmodule\n",
    )
    .unwrap();
    std::fs::write(&props, "const double T;\nS=?[up=1]\nP=?[F<=T up=0]\n").unwrap();
    let csv = dir.path().join("out.csv");
    let o = ramcheck(&[
        "check",
        model.to_str().unwrap(),
        props.to_str().unwrap(),
        "-c",
        "T=1",
        "-c",
        "l=2",
        "--full-precision",
        "-o",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("S=?[up=1]: 0.59999999999999"), "{out}");
    assert_eq!(lines.len(), 2);
    let written = std::fs::read_to_string(&csv).unwrap();
    assert!(written.starts_with("query,value,tolerance,seconds\n"));
    assert_eq!(written.lines().count(), 3);
}

#[test]
fn errors_name_the_file_and_set_exit_codes() {
    let o = ramcheck(&["check", "missing.ctmc", "-q", "S=?[true]"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.ctmc"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ctmc");
    std::fs::write(&bad, "ctmc\nmodule m\n  x : [0..1] init 0;\n  [] x=0 -> : (x'=1);\nendmodule\n").unwrap();
    let o = ramcheck(&["check", bad.to_str().unwrap(), "-q", "S=?[true]"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.ctmc") && err.contains("4:"), "{err}");

    assert_eq!(ramcheck(&["check"]).status.code(), Some(1));
    assert_eq!(ramcheck(&["check", "satellite", "-q", "S=?[s=0]", "--eps", "2"]).status.code(), Some(2));
    let capped = ramcheck(&["check", "satellite", "-c", "r=0.5", "-q", "S=?[s=0]", "--max-states", "3"]);
    assert_eq!(capped.status.code(), Some(3));
}

#[test]
fn sweep_writes_twenty_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.csv");
    let o = ramcheck(&[
        "sweep",
        "constellation",
        "-q",
        AVAIL,
        "--sweep",
        "r=0.01:0.99:0.05",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 21);
    assert_eq!(lines[0], "r,query,value");
    assert!(lines[1].starts_with("0.01,"));
    assert!(lines[20].starts_with("0.96,"));
    assert!(!csv.contains('\r'));

    let parallel = ramcheck(&["sweep", "constellation", "-q", AVAIL, "--sweep", "r=0.01:0.99:0.05", "--jobs", "3"]);
    assert_eq!(stdout(&parallel), csv);
}

#[test]
fn eps_flag_beats_environment() {
    let q = ["check", "constellation", "-q", "P=?[F<=129600 s=4]", "--full-precision"];
    let with_env = |eps: &str, extra: &[&str]| {
        let mut args: Vec<&str> = q.to_vec();
        args.extend(extra);
        Command::new(env!("CARGO_BIN_EXE_ramcheck"))
            .args(&args)
            .env("RAMCHECK_EPS", eps)
            .output()
            .unwrap()
    };
    assert!(stdout(&with_env("1e-4", &[])).contains("tolerance 0.0001"));
    assert!(stdout(&with_env("1e-4", &["--eps", "1e-9"])).contains("tolerance 1e-09"));
    assert_eq!(with_env("abc", &[]).status.code(), Some(2));
}

#[test]
fn simulate_is_reproducible() {
    let args = [
        "simulate",
        "satellite",
        "-q",
        "P=?[F<=129600 s=5]",
        "--replications",
        "20000",
        "--seed",
        "7",
    ];
    let (a, b) = (ramcheck(&args), ramcheck(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let out = stdout(&a);
    assert!(out.starts_with("query,estimate,ci_low,ci_high,replications,seed\n"));
    assert!(out.trim_end().ends_with(",20000,7"));
}

#[test]
fn export_dot_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("sat.dot");
    assert!(ramcheck(&["export", "satellite", "-o", dot.to_str().unwrap()]).status.success());
    let text = std::fs::read_to_string(&dot).unwrap();
    assert_eq!(text.matches(" -> ").count(), 13);
    let csv = stdout(&ramcheck(&["export", "satellite", "--format", "csv"]));
    assert_eq!(csv.lines().count(), 14);
    assert!(csv.contains(",g\n") && csv.contains(",e\n"));
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn ram_matches_check_and_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = ramcheck(&["ram", "constellation-maintainability", "-o", d.path().to_str().unwrap(), "--full-precision"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let files = read_dir_sorted(a.path());
    assert_eq!(files, read_dir_sorted(b.path()));
    let names: Vec<&str> = files.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(
        names,
        [
            "constellation-maintainability-below-22-vs-mttr.csv",
            "constellation-maintainability-check.csv",
            "constellation-maintainability-repairs-vs-r.csv",
        ]
    );
    let manifest_value = files[1].1.lines().nth(1).unwrap().rsplit(',').next().unwrap().to_string();
    let direct = stdout(&ramcheck(&["check", "constellation", "-q", "R{\"num_repair\"}=?[C<=129600]", "--full-precision"]));
    assert!(direct.contains(&format!(": {manifest_value} ")), "{direct} vs {manifest_value}");
}

#[test]
fn ram_lists_and_rejects_unknown() {
    let list = stdout(&ramcheck(&["ram", "--list"]));
    assert_eq!(list.lines().count(), 6);
    assert_eq!(ramcheck(&["ram", "no-such-experiment"]).status.code(), Some(2));
}
