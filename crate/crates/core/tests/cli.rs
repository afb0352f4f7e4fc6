use std::fs;
use std::path::Path;
use std::process::Command;

fn apda(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_apda"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "apda {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn small_config(dir: &Path) -> String {
    let text = apda(&["config", "--algorithm", "AL2,AL5", "--runs", "2", "--seed", "17"])
        .replace("duration = 20.0", "duration = 1.5")
        .replace("r_init = 10000", "r_init = 2000")
        .replace("r_track = 1000", "r_track = 300")
        .replace("r_u = 1000", "r_u = 300");
    assert!(text.contains("duration = 1.5") && text.contains("r_init = 2000"), "{text}");
    let path = dir.join("small.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

/// Estimate columns of a trace file, in the column order of the
/// estimates file.
fn strip_truth(traces: &str) -> String {
    traces
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let mut keep: Vec<&str> = f[..3].to_vec();
            keep.extend(&f[5..9]);
            keep.extend(&f[10..]);
            keep.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn track_on_simulated_scans_reproduces_bench() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let d = |s: &str| dir.path().join(s).to_string_lossy().into_owned();

    apda(&["simulate", "--config", &cfg, "--out", &d("sim")]);
    let scans = fs::read_to_string(d("sim/scans.jsonl")).unwrap();
    assert_eq!(scans.lines().count(), 2 * 30 * 3);
    let truth = fs::read_to_string(d("sim/truth.csv")).unwrap();
    assert_eq!(truth.lines().next().unwrap(), "run,n,t,x,y,vx,vy");
    assert_eq!(truth.lines().count(), 1 + 2 * 30);

    apda(&["track", "--config", &cfg, "--scans", &d("sim/scans.jsonl"), "--out", &d("track")]);
    let summary = apda(&["bench", "--config", &cfg, "--out", &d("bench")]);
    assert!(summary.contains("AL2") && summary.contains("AL5"));

    for alg in ["AL2", "AL5"] {
        let est = fs::read_to_string(d(&format!("track/estimates_{alg}.csv"))).unwrap();
        let traces = fs::read_to_string(d(&format!("bench/traces_{alg}.csv"))).unwrap();
        assert_eq!(est.trim_end(), strip_truth(&traces), "{alg}");
    }
}

#[test]
fn manifest_reruns_the_bench() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let d = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    apda(&["bench", "--config", &cfg, "--out", &d("a")]);
    apda(&["bench", "--config", &d("a/manifest.toml"), "--out", &d("b"), "--workers", "1"]);
    for name in ["rmse_vs_time.csv", "rmse_cdf.csv", "summary.csv", "traces_AL5.csv"] {
        assert_eq!(fs::read(d(&format!("a/{name}"))).unwrap(), fs::read(d(&format!("b/{name}"))).unwrap(), "{name}");
    }
}

#[test]
fn bad_input_fails_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_apda"))
        .args(["bench", "--algorithm", "AL9"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("AL9"));
}
