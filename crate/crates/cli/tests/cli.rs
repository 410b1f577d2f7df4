use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kfs_core::bounds::{lhd_u, quasi_orth_bound, BoundParams};
use kfs_core::fewshot::{DeltaPolicy, FewShotModel, ThetaPolicy};
use kfs_core::{Kernel, SupportSample};
use tempfile::TempDir;

fn kfs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kfs"))
        .args(args)
        .output()
        .expect("kfs binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = kfs(args);
    assert!(
        out.status.success(),
        "kfs {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    fs::read_to_string(path).unwrap().trim_end().to_string()
}

fn header(csv: &str) -> &str {
    csv.lines().next().unwrap()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let idx = header(csv).split(',').position(|c| c == name).unwrap();
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').nth(idx).unwrap().to_string())
        .collect()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn run_experiment(dir: &Path, file: &str, args: &[&str]) -> String {
    let out = dir.join(file);
    let mut all: Vec<&str> = vec!["experiment"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", path_str(&out)]);
    ok(&all);
    fs::read_to_string(out).unwrap()
}

fn dir_is_empty(dir: &Path) -> bool {
    fs::read_dir(dir).unwrap().next().is_none()
}

#[test]
fn experiment_schemas_match_golden_headers() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let cases = [
        (
            "quasi_orth.csv",
            vec!["quasi-orth", "--n", "3", "--trials", "50", "--seed", "1"],
        ),
        (
            "separability.csv",
            vec![
                "separability",
                "--n",
                "3",
                "--set-size",
                "5",
                "--trials",
                "50",
                "--seed",
                "1",
            ],
        ),
        (
            "verify.csv",
            vec!["verify-lhd", "--n", "20", "--trials", "50", "--seed", "1"],
        ),
        (
            "beta.csv",
            vec![
                "estimate-beta",
                "--n",
                "3",
                "--samples",
                "5000",
                "--bootstrap",
                "10",
                "--seed",
                "1",
            ],
        ),
    ];
    for (name, args) in cases {
        let csv = run_experiment(d, name, &args);
        assert_eq!(header(&csv), golden(name), "{name}");
        assert!(d.join(name).with_extension("manifest.json").exists());
    }
    let csv = run_experiment(
        d,
        "fewshot.csv",
        &[
            "verify-fewshot",
            "--n",
            "50",
            "--trials",
            "3",
            "--eval-draws",
            "20",
            "--seed",
            "1",
        ],
    );
    assert_eq!(header(&csv), golden("verify.csv"));
    assert_eq!(column(&csv, "event"), ["p_n", "p_e"]);
    let csv = run_experiment(
        d,
        "vqo.csv",
        &[
            "verify-quasi-orth",
            "--n",
            "20",
            "--trials",
            "50",
            "--seed",
            "1",
        ],
    );
    assert_eq!(column(&csv, "event"), ["A1", "A1_and_A2"]);
}

#[test]
fn manifest_records_run() {
    let dir = TempDir::new().unwrap();
    run_experiment(
        dir.path(),
        "qo.csv",
        &[
            "quasi-orth",
            "--n",
            "2,3",
            "--trials",
            "20",
            "--seed",
            "42",
            "--workers",
            "2",
        ],
    );
    let text = fs::read_to_string(dir.path().join("qo.manifest.json")).unwrap();
    let m: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(m["experiment"], "quasi-orth");
    assert_eq!(m["seed"], 42);
    assert_eq!(m["workers"], 2);
    assert_eq!(m["rows"], 2);
    assert_eq!(m["config"]["n"], "2,3");
    assert!(m["wall_time_secs"].as_f64().unwrap() >= 0.0);
    assert!(m["versions"]["kfs-core"].is_string());
}

#[test]
fn rerun_is_byte_identical_across_worker_counts() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    for exp in [
        vec![
            "quasi-orth",
            "--kernel",
            "linear,gauss:1",
            "--n",
            "2,10",
            "--trials",
            "300",
        ],
        vec![
            "separability",
            "--n",
            "5",
            "--set-size",
            "20",
            "--trials",
            "200",
        ],
        vec![
            "verify-fewshot",
            "--n",
            "50",
            "--trials",
            "8",
            "--eval-draws",
            "50",
        ],
    ] {
        let mut a = exp.clone();
        a.extend(["--seed", "9", "--workers", "1"]);
        let mut b = exp.clone();
        b.extend(["--seed", "9", "--workers", "3"]);
        let first = run_experiment(d, "a.csv", &a);
        let second = run_experiment(d, "b.csv", &b);
        assert_eq!(first, second, "{exp:?}");
    }
    let x = run_experiment(
        d,
        "x.csv",
        &["quasi-orth", "--n", "3", "--trials", "500", "--seed", "1"],
    );
    let y = run_experiment(
        d,
        "y.csv",
        &["quasi-orth", "--n", "3", "--trials", "500", "--seed", "2"],
    );
    assert_ne!(x, y);
}

#[test]
fn invalid_configs_leave_no_files() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let out = d.join("r.csv");
    let cases: [&[&str]; 4] = [
        &[
            "experiment",
            "quasi-orth",
            "--n",
            "3",
            "--trials",
            "0",
            "--seed",
            "1",
        ],
        &["experiment", "quasi-orth", "--n", "3"],
        &[
            "experiment",
            "verify-lhd",
            "--n",
            "3",
            "--delta",
            "1",
            "--seed",
            "1",
        ],
        &[
            "experiment",
            "verify-lhd",
            "--n",
            "3",
            "--kernel",
            "gauss:1",
            "--seed",
            "1",
        ],
    ];
    for args in cases {
        let mut all = args.to_vec();
        all.extend(["--out", path_str(&out)]);
        let res = kfs(&all);
        assert_eq!(res.status.code(), Some(1), "{args:?}");
        assert!(!res.stderr.is_empty());
        assert!(dir_is_empty(d), "{args:?} left output behind");
    }
    let res = kfs(&[
        "experiment",
        "quasi-orth",
        "--n",
        "3",
        "--trials",
        "0",
        "--seed",
        "1",
        "--out",
        path_str(&out),
    ]);
    assert!(String::from_utf8_lossy(&res.stderr).contains("trials"));
}

#[test]
fn infeasible_scenario_fails_with_diagnostic() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fs.csv");
    // With the new class centred at the origin the mean is too short for delta = 0.9.
    let res = kfs(&[
        "experiment",
        "verify-fewshot",
        "--n",
        "20",
        "--c-y",
        "0",
        "--delta",
        "0.9",
        "--trials",
        "5",
        "--eval-draws",
        "5",
        "--seed",
        "3",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("infeasible"));
    assert!(dir_is_empty(dir.path()));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 5\nn = [2, 3]\ndelta = 0.1\ntrials = 40\n").unwrap();
    let out = dir.path().join("qo.csv");
    ok(&[
        "experiment",
        "quasi-orth",
        "--config",
        path_str(&cfg),
        "--delta",
        "0.3",
        "--out",
        path_str(&out),
    ]);
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(column(&csv, "delta"), ["0.3", "0.3"]);
    assert_eq!(column(&csv, "n"), ["2", "3"]);
    assert_eq!(column(&csv, "trials"), ["40", "40"]);

    fs::write(&cfg, "seed = 5\nn = 2\ncolour = \"red\"\n").unwrap();
    let res = kfs(&[
        "experiment",
        "quasi-orth",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("colour"));
}

#[test]
fn bounds_grid_has_one_row_per_point() {
    let out = ok(&[
        "bounds",
        "--kernel",
        "linear,gauss:1,poly:2",
        "--n",
        "2,10,50,100",
    ]);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(header(&csv), golden("bounds.csv"));
    assert_eq!(csv.lines().count(), 1 + 12);
}

#[test]
fn bounds_single_point_echoes_library() {
    let out = ok(&[
        "bounds",
        "--n",
        "100",
        "--k",
        "5",
        "--delta",
        "0.5",
        "--epsilon",
        "0.1",
    ]);
    let csv = String::from_utf8(out.stdout).unwrap();
    let p = BoundParams::identity_ball(100, 1.0, 5, 0.5, 0.1).unwrap();
    let q: f64 = column(&csv, "quasi_orth")[0].parse().unwrap();
    assert_eq!(q, quasi_orth_bound(&p, 100).unwrap().raw);
    let u: f64 = column(&csv, "lhd_u")[0].parse().unwrap();
    assert_eq!(u, lhd_u(&p));
    assert_eq!(column(&csv, "theta"), [""]);
}

#[test]
fn bounds_delta_sweep_is_monotone() {
    let out = ok(&["bounds", "--n", "30", "--delta", "0.1,0.3,0.5,0.7,0.9"]);
    let csv = String::from_utf8(out.stdout).unwrap();
    let q: Vec<f64> = column(&csv, "quasi_orth")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(q.windows(2).all(|w| w[0] <= w[1]), "{q:?}");
}

#[test]
fn bounds_threshold_columns_with_observed_d() {
    let out = ok(&["bounds", "--n", "200", "--delta", "0.2", "--d", "3.1"]);
    let csv = String::from_utf8(out.stdout).unwrap();
    let cap: f64 = column(&csv, "delta_cap")[0].parse().unwrap();
    let theta: f64 = column(&csv, "theta")[0].parse().unwrap();
    assert!(cap > 0.0 && theta >= (cap - 1.0).max(0.0) && theta <= cap);
    let p_e: f64 = column(&csv, "p_e")[0].parse().unwrap();
    assert!(p_e <= 1.0);
}

fn write_vectors(path: &Path, rows: &[Vec<f64>]) {
    let text: String = rows
        .iter()
        .map(|r| {
            let cells: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
            cells.join(",") + "\n"
        })
        .collect();
    fs::write(path, text).unwrap();
}

fn support_points() -> Vec<Vec<f64>> {
    vec![
        vec![0.1, 0.2, -0.1],
        vec![0.15, 0.1, 0.0],
        vec![0.05, 0.25, -0.05],
        vec![0.12, 0.18, -0.2],
    ]
}

fn fit_model(dir: &Path, extra: &[&str]) -> PathBuf {
    let support = dir.join("support.txt");
    write_vectors(&support, &support_points());
    let model = dir.join("model.json");
    let mut args = vec![
        "fit",
        "--support",
        path_str(&support),
        "--kernel",
        "gauss:1",
        "--r-y",
        "1",
        "--delta",
        "0.1",
        "--label",
        "fresh",
        "--out",
        path_str(&model),
    ];
    args.extend_from_slice(extra);
    ok(&args);
    model
}

#[test]
fn fit_then_classify_support_points_as_new() {
    let dir = TempDir::new().unwrap();
    let model = fit_model(dir.path(), &[]);
    let m = FewShotModel::from_json(&fs::read_to_string(&model).unwrap()).unwrap();
    assert!(m.theta() < 1.0);

    let input = dir.path().join("input.txt");
    let mut rows = support_points();
    rows.push(vec![40.0, -40.0, 40.0]);
    write_vectors(&input, &rows);
    let out = ok(&[
        "classify",
        "--model",
        path_str(&model),
        "--input",
        path_str(&input),
        "--base-label",
        "old",
    ]);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(header(&csv), "x0,x1,x2,label");
    assert_eq!(
        column(&csv, "label"),
        ["fresh", "fresh", "fresh", "fresh", "old"]
    );
}

#[test]
fn classify_rejects_mismatched_dimension() {
    let dir = TempDir::new().unwrap();
    let model = fit_model(dir.path(), &[]);
    let input = dir.path().join("input.txt");
    write_vectors(&input, &[vec![0.1, 0.2]]);
    let labels = dir.path().join("labels.csv");
    let res = kfs(&[
        "classify",
        "--model",
        path_str(&model),
        "--input",
        path_str(&input),
        "--out",
        path_str(&labels),
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("expects 3"));
    assert!(!labels.exists());
}

#[test]
fn model_file_preserves_margin() {
    let dir = TempDir::new().unwrap();
    let model = fit_model(dir.path(), &["--theta", "opt", "--grid", "64"]);
    let loaded = FewShotModel::from_json(&fs::read_to_string(&model).unwrap()).unwrap();
    let sample =
        SupportSample::new(Kernel::gaussian(1.0).unwrap(), support_points(), "fresh").unwrap();
    let theta = ThetaPolicy::Fixed(loaded.theta());
    let fresh = FewShotModel::fit(sample, 1.0, &DeltaPolicy::Fixed(0.1), &theta).unwrap();
    for x in [[0.0, 0.0, 0.0], [0.3, -0.2, 0.9], [2.0, 1.0, -1.0]] {
        let a = loaded.margin(&x).unwrap();
        let b = fresh.margin(&x).unwrap();
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
}

#[test]
fn fit_reports_infeasible_support() {
    let dir = TempDir::new().unwrap();
    let support = dir.path().join("support.txt");
    write_vectors(&support, &[vec![1.0, 0.0], vec![-1.0, 0.0]]);
    let res = kfs(&[
        "fit",
        "--support",
        path_str(&support),
        "--r-y",
        "1",
        "--delta",
        "0.5",
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("infeasible"));
}
