use std::path::{Path, PathBuf};
use std::process::Command;

fn case9() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../acopf/data/case9.m")
}

fn run(args: &[&str], out: &Path) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_batchopt"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    (
        o.status.code().unwrap(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn read_json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// CSV text with the timing columns dropped.
fn without_timing(path: PathBuf) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let keep: Vec<usize> = (0..header.len())
        .filter(|&i| header[i] != "time" && !header[i].starts_with("batch_time"))
        .collect();
    text.lines()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            keep.iter().map(|&i| f[i]).collect::<Vec<_>>().join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn bench_hundred_hs45() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(
        &[
            "--mode",
            "bench",
            "--n",
            "8",
            "--batch",
            "100",
            "--workers",
            "3",
        ],
        dir.path(),
    );
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 100);
    for (i, row) in rows.iter().enumerate() {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[0], i.to_string());
        assert_eq!(f[1], "converged");
        assert_eq!(f[3].parse::<f64>().unwrap(), 120.0 - 40320.0);
    }
    let s = read_json(dir.path().join("bench_summary.json"));
    assert_eq!(s["failures"], 0);
    assert_eq!(s["converged"], 100);
    assert!(s["throughput"].as_f64().unwrap() > 0.0);
}

#[test]
fn bench_empty_batch() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(&["--mode", "bench", "--batch", "0"], dir.path());
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn bench_over_capacity() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(&["--mode", "bench", "--n", "65"], dir.path());
    assert_eq!(code, 2);
    assert!(err.contains("--n"), "{err}");
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--mode", "nonsense"], dir.path()).0, 2);
    assert_eq!(run(&["--mode", "bench", "--workers", "0"], dir.path()).0, 2);
    assert_eq!(run(&["--mode", "admm"], dir.path()).0, 2);
    assert_eq!(run(&["--mode", "bench", "--n", "x"], dir.path()).0, 2);
}

#[test]
fn admm_case9_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let case = case9();
    let (code, err) = run(
        &[
            "--mode",
            "admm",
            "--case",
            case.to_str().unwrap(),
            "--workers",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(code, 0, "{err}");
    let s = read_json(dir.path().join("admm_summary.json"));
    assert_eq!(s["status"], "converged");
    let obj = s["objective"].as_f64().unwrap();
    assert!((obj - 5296.6862039914).abs() / 5296.6862039914 < 0.01);
    assert!(s["primal_residual"].as_f64().unwrap() <= 1e-4);
    assert!(s["dual_residual"].as_f64().unwrap() <= 1e-3);
    assert!(
        s["imbalance"]["nu_max"].as_f64().unwrap() >= s["imbalance"]["nu_min"].as_f64().unwrap()
    );
    let text = std::fs::read_to_string(dir.path().join("admm_iterations.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "iter,primal,dual,objective,batch_time_p0,batch_time_p1"
    );
    assert_eq!(
        text.lines().count() - 1,
        s["iterations"].as_u64().unwrap() as usize
    );
}

#[test]
fn admm_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(
        &["--mode", "admm", "--case", "/nonexistent/case.m"],
        dir.path(),
    );
    assert_eq!(code, 2);
}

#[test]
fn admm_unparsable_file() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.m");
    std::fs::write(&bad, "mpc.baseMVA = 100;\n").unwrap();
    let (code, err) = run(
        &["--mode", "admm", "--case", bad.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(code, 2);
    assert!(err.contains("mpc.bus"), "{err}");
}

#[test]
fn admm_forced_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let case = case9();
    let (code, _) = run(
        &[
            "--mode",
            "admm",
            "--case",
            case.to_str().unwrap(),
            "--max-iter",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(code, 1);
    let text = std::fs::read_to_string(dir.path().join("admm_iterations.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    let s = read_json(dir.path().join("admm_summary.json"));
    assert_eq!(s["status"], "iter_limit");
}

#[test]
fn outputs_are_reproducible() {
    let case = case9();
    let args = [
        "--mode",
        "admm",
        "--case",
        case.to_str().unwrap(),
        "--max-iter",
        "200",
        "--seed",
        "7",
    ];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run(&args, a.path()).0, 1);
    assert_eq!(run(&args, b.path()).0, 1);
    assert_eq!(
        without_timing(a.path().join("admm_iterations.csv")),
        without_timing(b.path().join("admm_iterations.csv"))
    );
    let strip = |mut v: serde_json::Value| {
        v.as_object_mut().unwrap().remove("wall_time");
        v
    };
    assert_eq!(
        strip(read_json(a.path().join("admm_summary.json"))),
        strip(read_json(b.path().join("admm_summary.json")))
    );

    let args = [
        "--mode",
        "bench",
        "--n",
        "12",
        "--batch",
        "50",
        "--workers",
        "4",
    ];
    assert_eq!(run(&args, a.path()).0, 0);
    assert_eq!(run(&args[..6], b.path()).0, 0);
    assert_eq!(
        without_timing(a.path().join("bench.csv")),
        without_timing(b.path().join("bench.csv"))
    );
}
