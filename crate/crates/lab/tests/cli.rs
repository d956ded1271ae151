//! The `tacsyn` binary: exit codes, printed output and reproducible files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tacsyn::formats::{parse_calibration, read_samples};
use tacsyn_core::fixtures::calibration_samples;

fn tacsyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tacsyn")).args(args).output().expect("binary runs")
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Small enough to run in a few seconds.
fn tiny(condition: &str, task: &str) -> String {
    format!("condition = \"{condition}\"\ntask = \"{task}\"\nn_trials = 2\nmax_rollouts = 2\n[learning]\noptimizer_iterations = 3\nparticles = 10\n")
}

fn read_all(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn committed_fixture_matches_the_built_in_samples() {
    let file = fs::File::open(repo("fixtures/calibration.csv")).unwrap();
    assert_eq!(read_samples(file).unwrap(), calibration_samples());
}

#[test]
fn calibrate_prints_thresholds_and_writes_a_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cal.toml");
    let fixture = repo("fixtures/calibration.csv");
    let o = tacsyn(&["calibrate", fixture.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim(), "thresholds (0.30, 0.70), α_des=0.25");
    let cal = parse_calibration(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!((cal.firm_threshold, cal.slip_threshold, cal.alpha_des), (0.3, 0.7, 0.25));

    let again = tmp.path().join("cal2.toml");
    tacsyn(&["calibrate", fixture.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn calibrate_rejects_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = write(tmp.path(), "empty.csv", "");
    assert_eq!(tacsyn(&["calibrate", empty.to_str().unwrap()]).status.code(), Some(2));
    let header_only = write(tmp.path(), "h.csv", "f1,f2,f3,label\n");
    assert_eq!(tacsyn(&["calibrate", header_only.to_str().unwrap()]).status.code(), Some(2));
    // Classes that overlap cannot be separated.
    let overlap = write(
        tmp.path(),
        "o.csv",
        "f1,f2,f3,label\n1,1,1,firmly_held\n1,1,1,firmly_held\n1,1,1,not_firmly_held\n0.5,0.5,0.5,not_firmly_held\n0,0,0,slipped\n0,0,0.1,slipped\n",
    );
    let o = tacsyn(&["calibrate", overlap.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    let missing = tmp.path().join("nope.csv");
    assert_ne!(tacsyn(&["calibrate", missing.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn version_and_usage_errors() {
    let o = tacsyn(&["version"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("tacsyn "));
    assert_eq!(tacsyn(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(tacsyn(&[]).status.code(), Some(2));
}

#[test]
fn run_rejects_invalid_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.toml", "condition = \"telepathy\"\n");
    assert_eq!(tacsyn(&["run", bad.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]).status.code(), Some(2));
    let neg = write(tmp.path(), "neg.toml", "tolerance_deg = -3.0\n");
    assert_eq!(tacsyn(&["run", neg.to_str().unwrap(), "--out", tmp.path().join("o2").to_str().unwrap()]).status.code(), Some(2));
    let missing = tmp.path().join("absent.toml");
    assert_ne!(tacsyn(&["run", missing.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn run_is_reproducible_and_refuses_to_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "vo.toml", &tiny("visual_only", "cup"));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let oa = tacsyn(&["run", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(oa.status.code(), Some(0), "{}", String::from_utf8_lossy(&oa.stderr));
    let line = stdout(&oa).lines().next().unwrap().to_owned();
    assert!(line.starts_with("visual_only success="), "{line}");
    assert!(line.contains("/2 slip="), "{line}");
    let ob = tacsyn(&["run", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(stdout(&oa).lines().next(), stdout(&ob).lines().next());
    for name in ["manifest.json", "config.toml", "cost_matrix.csv", "rollouts.csv", "interventions.csv", "summary.txt"] {
        assert!(a.join(name).is_file(), "{name}");
    }
    let fa: Vec<_> = read_all(&a).into_iter().filter(|(p, _)| p != Path::new("manifest.json")).collect();
    let fb: Vec<_> = read_all(&b).into_iter().filter(|(p, _)| p != Path::new("manifest.json")).collect();
    assert_eq!(fa, fb);

    // Another seed: same file layout and headers.
    let c = tmp.path().join("c");
    assert_eq!(tacsyn(&["run", cfg.to_str().unwrap(), "--out", c.to_str().unwrap(), "--seed", "4"]).status.code(), Some(0));
    let header = |d: &Path| fs::read_to_string(d.join("cost_matrix.csv")).unwrap().lines().next().unwrap().to_owned();
    assert_eq!(header(&a), header(&c));
    assert_ne!(fs::read(a.join("cost_matrix.csv")).unwrap(), fs::read(c.join("cost_matrix.csv")).unwrap());

    assert_eq!(tacsyn(&["run", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn compare_tabulates_and_checks_its_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let vo = write(tmp.path(), "vo.toml", &tiny("visual_only", "cup"));
    let vt = write(tmp.path(), "vt.toml", &tiny("visuo_tactile", "cup"));
    let bottle = write(tmp.path(), "b.toml", &tiny("visuo_tactile", "bottle"));

    let single = tacsyn(&["compare", vo.to_str().unwrap(), "--out", tmp.path().join("s").to_str().unwrap()]);
    assert_eq!(single.status.code(), Some(2));
    let mixed = tacsyn(&["compare", vo.to_str().unwrap(), bottle.to_str().unwrap(), "--out", tmp.path().join("m").to_str().unwrap()]);
    assert_eq!(mixed.status.code(), Some(2));

    let runs: Vec<PathBuf> = ["x", "y"].iter().map(|n| tmp.path().join(n)).collect();
    for dir in &runs {
        let o = tacsyn(&["compare", vo.to_str().unwrap(), vt.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--no-traces"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let table = stdout(&o);
        assert!(table.starts_with("condition"), "{table}");
        assert!(table.contains("visual_only") && table.contains("visuo_tactile"));
    }
    let csv = fs::read_to_string(runs[0].join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("condition,trials,success_rate,slip_rate"));
    assert_eq!(csv.lines().count(), 3);
    assert_eq!(fs::read(runs[0].join("comparison.csv")).unwrap(), fs::read(runs[1].join("comparison.csv")).unwrap());
    assert!(runs[0].join("visual_only/cost_matrix.csv").is_file());
}
