use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use conelift::io::{
    parse_real, ChartFile, ConePointsFile, CorrespondenceFile, MatrixFile, MetricFile, SelfMapFile,
    SpherePairsFile,
};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_conelift"));
    cmd.env_remove("CONELIFT_TOL");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn conelift")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn gen(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["gen", name, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let r = run(&args);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn matrix(v: &Value) -> Vec<Vec<f64>> {
    serde_json::from_value(v.clone()).unwrap()
}

fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn circle_charts_verify_and_wrong_metric_fails() {
    let tmp = TempDir::new().unwrap();
    let dir = gen(tmp.path(), "circle-n2", &[]);
    assert_eq!(code(&run(&["verify", p(&dir.join("phi1.json"))])), 0);
    assert_eq!(code(&run(&["verify", p(&dir.join("phi2.json"))])), 0);

    let mut wrong: MetricFile =
        serde_json::from_str(&fs::read_to_string(dir.join("metric.json")).unwrap()).unwrap();
    wrong.metric.iter_mut().for_each(|g| g[0] = 1.0);
    let wrong_path = tmp.path().join("wrong.json");
    fs::write(&wrong_path, serde_json::to_string(&wrong).unwrap()).unwrap();
    let out = run(&["verify", p(&dir.join("phi1.json")), p(&wrong_path)]);
    assert_eq!(code(&out), 2);
    let dev = parse_real(json(&out)["immersion"]["max_deviation"].as_str().unwrap()).unwrap();
    assert!((dev - 3.0).abs() < 1e-3, "{dev}");
}

#[test]
fn io_errors_exit_one_and_name_the_field() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["verify", p(&tmp.path().join("missing.json"))]);
    assert_eq!(code(&out), 1);

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"m":1,"n":2,"target":"cone","k":0}"#).unwrap();
    let out = run(&["verify", p(&bad)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("shape"));

    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["--tol", "-1", "gen", "circle-n2"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn circle_pair_is_inconsistent() {
    let tmp = TempDir::new().unwrap();
    let small = gen(tmp.path(), "circle-n2", &["--nodes", "16"]);
    let out = run(&["recover", p(&small.join("pairs.json"))]);
    assert_eq!(code(&out), 3);
    let report = json(&out);
    assert_eq!(report["status"], "inconsistent");
    assert!(report["tau"].is_null());
    assert!(parse_real(report["max_point_residual"].as_str().unwrap()).unwrap() > 0.3);

    // both immersions pass at N = 512, recovery still fails
    let dir = gen(tmp.path(), "circle-n2", &[]);
    let out = run(&[
        "recover",
        p(&dir.join("phi1.json")),
        p(&dir.join("phi2.json")),
        p(&dir.join("metric.json")),
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn tau_pair_recovers_the_oracle() {
    let tmp = TempDir::new().unwrap();
    let dir = gen(tmp.path(), "tau-pair", &["--seed", "7", "--n", "4"]);
    let oracle: MatrixFile =
        serde_json::from_str(&fs::read_to_string(dir.join("tau.json")).unwrap()).unwrap();

    let out = run(&["recover", p(&dir.join("pairs.json"))]);
    assert_eq!(code(&out), 0);
    let report = json(&out);
    assert_eq!(report["status"], "unique");
    assert!(max_diff(&matrix(&report["tau"]), &oracle.entries) <= 1e-8);

    let out = run(&[
        "recover",
        p(&dir.join("chart1.json")),
        p(&dir.join("chart2.json")),
        p(&dir.join("metric.json")),
    ]);
    assert_eq!(code(&out), 0);
    assert!(max_diff(&matrix(&json(&out)["tau"]), &oracle.entries) <= 1e-8);
}

#[test]
fn embedded_tau_pair_reports_both_matrices() {
    let tmp = TempDir::new().unwrap();
    let dir = gen(
        tmp.path(),
        "tau-pair",
        &["--seed", "3", "--n", "3", "--k", "-1"],
    );
    let out = run(&["recover", p(&dir.join("pairs.json"))]);
    assert_eq!(code(&out), 0);
    let report = json(&out);
    assert_eq!(matrix(&report["tau"]).len(), 4);
    assert_eq!(matrix(&report["tau_embedded"]).len(), 5);
}

#[test]
fn single_ray_is_underdetermined() {
    let tmp = TempDir::new().unwrap();
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (1..6)
        .map(|t| {
            let t = t as f64;
            (vec![t, 0.0, t, 0.0], vec![t, 0.0, t, 0.0])
        })
        .collect();
    let file = CorrespondenceFile { k: 0, n: 3, pairs };
    let path = tmp.path().join("ray.json");
    fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
    let out = run(&["recover", p(&path)]);
    assert_eq!(code(&out), 4);
    assert_eq!(json(&out)["span_rank"], 1);
}

#[test]
fn off_cone_correspondences_fail_validation() {
    let tmp = TempDir::new().unwrap();
    let file = CorrespondenceFile {
        k: 0,
        n: 2,
        pairs: vec![(vec![1.0, 2.0, 0.0], vec![1.0, 1.0, 0.0])],
    };
    let path = tmp.path().join("off.json");
    fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
    assert_eq!(code(&run(&["recover", p(&path)])), 2);
}

#[test]
fn nonconformal_sphere_pairs_are_inconsistent() {
    let tmp = TempDir::new().unwrap();
    let dir = gen(
        tmp.path(),
        "nonconformal-pair",
        &["--n", "4", "--seed", "2"],
    );
    let out = run(&["recover", p(&dir.join("pairs.json"))]);
    assert_eq!(code(&out), 3);
}

#[test]
fn extend_selfmaps() {
    let tmp = TempDir::new().unwrap();
    let dir = gen(
        tmp.path(),
        "cone-selfmap",
        &["--seed", "5", "--n", "4", "--k", "1"],
    );
    let oracle: MatrixFile =
        serde_json::from_str(&fs::read_to_string(dir.join("tau.json")).unwrap()).unwrap();
    let out = run(&["extend", p(&dir.join("selfmap.json"))]);
    assert_eq!(code(&out), 0);
    let report = json(&out);
    assert!(max_diff(&matrix(&report["recovery"]["tau"]), &oracle.entries) <= 1e-8);

    let ident = tmp.path().join("ident");
    let r = run(&[
        "gen",
        "cone-selfmap",
        "--steps",
        "0",
        "--n",
        "3",
        "--out",
        p(&ident),
    ]);
    assert_eq!(code(&r), 0);
    let out = run(&["extend", p(&ident.join("selfmap.json"))]);
    assert_eq!(code(&out), 0);
    let eye: Vec<Vec<f64>> = (0..4)
        .map(|i| (0..4).map(|j| f64::from(i == j)).collect())
        .collect();
    assert!(max_diff(&matrix(&json(&out)["recovery"]["tau"]), &eye) <= 1e-12);

    let bad = tmp.path().join("bad");
    assert_eq!(
        code(&run(&[
            "gen",
            "cone-selfmap",
            "--corrupt",
            "--out",
            p(&bad)
        ])),
        0
    );
    let out = run(&["extend", p(&bad.join("selfmap.json"))]);
    assert_eq!(code(&out), 3);
    assert_eq!(json(&out)["rejection"], "TimeDependent");
}

#[test]
fn embed_converts_round_trips_and_rejects_off_cone_points() {
    let tmp = TempDir::new().unwrap();
    let pts = ConePointsFile {
        k: 0,
        n: 2,
        points: vec![
            vec![1.0, 0.6, 0.8],
            vec![2.5, -1.5, 2.0],
            vec![0.1, 0.1, 0.0],
        ],
        residuals: None,
    };
    let src = tmp.path().join("pts.json");
    fs::write(&src, serde_json::to_string(&pts).unwrap()).unwrap();

    let ds = tmp.path().join("ds.json");
    assert_eq!(
        code(&run(&["embed", p(&src), "--to", "1", "--out", p(&ds)])),
        0
    );
    let converted: ConePointsFile =
        serde_json::from_str(&fs::read_to_string(&ds).unwrap()).unwrap();
    assert_eq!(converted.points[0], vec![1.0, 0.6, 0.8, 1.0]);
    assert_eq!(converted.residuals.as_ref().unwrap().len(), 3);

    let back = tmp.path().join("back.json");
    assert_eq!(
        code(&run(&["embed", p(&ds), "--to", "0", "--out", p(&back)])),
        0
    );
    let back: ConePointsFile = serde_json::from_str(&fs::read_to_string(&back).unwrap()).unwrap();
    assert_eq!(back.points, pts.points);

    let ads = run(&["embed", p(&src), "--k", "-1"]);
    assert_eq!(code(&ads), 0);
    assert_eq!(json(&ads)["points"][0][0], 1.0);

    let mut off = pts.clone();
    off.points.push(vec![1.0, 2.0, 0.0]);
    let off_path = tmp.path().join("off.json");
    fs::write(&off_path, serde_json::to_string(&off).unwrap()).unwrap();
    let out = run(&["embed", p(&off_path), "--to", "1"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("[3]"));
}

#[test]
fn project_and_lift_round_trip() {
    let tmp = TempDir::new().unwrap();
    let dir = gen(
        tmp.path(),
        "sphere-identity",
        &["--n", "3", "--nodes", "65"],
    );
    assert_eq!(code(&run(&["verify", p(&dir.join("chart.json"))])), 0);

    let out = run(&["project", p(&dir.join("chart.json"))]);
    assert_eq!(code(&out), 0);
    let projected: ChartFile = serde_json::from_value(json(&out)).unwrap();
    assert_eq!(projected.target, "sphere");

    let lifted = tmp.path().join("lifted.json");
    let r = run(&[
        "lift",
        p(&dir.join("sphere.json")),
        p(&dir.join("metric.json")),
        "--k",
        "-1",
        "--out",
        p(&lifted),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let chart: ChartFile = serde_json::from_str(&fs::read_to_string(&lifted).unwrap()).unwrap();
    assert_eq!((chart.target.as_str(), chart.k), ("cone", -1));
    assert_eq!(code(&run(&["verify", p(&lifted)])), 0);

    let pts = ConePointsFile {
        k: 1,
        n: 2,
        points: vec![vec![2.0, 0.0, 2.0, 1.0]],
        residuals: None,
    };
    let src = tmp.path().join("pts.json");
    fs::write(&src, serde_json::to_string(&pts).unwrap()).unwrap();
    let out = run(&["project", p(&src)]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["points"][0], serde_json::json!([0.0, 1.0]));
}

#[test]
fn outputs_are_deterministic_and_parse_back() {
    let tmp = TempDir::new().unwrap();
    let a = gen(
        tmp.path(),
        "tau-pair",
        &["--seed", "11", "--n", "3", "--nodes", "9"],
    );
    let b = tmp.path().join("again");
    assert_eq!(
        code(&run(&[
            "gen",
            "tau-pair",
            "--seed",
            "11",
            "--n",
            "3",
            "--nodes",
            "9",
            "--out",
            p(&b)
        ])),
        0
    );
    for name in [
        "chart1.json",
        "chart2.json",
        "metric.json",
        "pairs.json",
        "tau.json",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let r1 = run(&["recover", p(&a.join("pairs.json"))]);
    let r2 = run(&["recover", p(&b.join("pairs.json"))]);
    assert_eq!(r1.stdout, r2.stdout);

    let read = |path: PathBuf| fs::read_to_string(path).unwrap();
    let chart: ChartFile = serde_json::from_str(&read(a.join("chart1.json"))).unwrap();
    chart.to_chart().unwrap();
    chart.to_metric().unwrap().unwrap();
    let metric: MetricFile = serde_json::from_str(&read(a.join("metric.json"))).unwrap();
    metric.to_metric().unwrap();
    let pairs: CorrespondenceFile = serde_json::from_str(&read(a.join("pairs.json"))).unwrap();
    pairs.to_set().unwrap();
    let tau: MatrixFile = serde_json::from_str(&read(a.join("tau.json"))).unwrap();
    tau.to_matrix().unwrap();

    let sm = gen(tmp.path(), "cone-selfmap", &["--nodes", "9"]);
    let map: SelfMapFile = serde_json::from_str(&read(sm.join("selfmap.json"))).unwrap();
    map.to_selfmap().unwrap();
    let nc = gen(tmp.path(), "nonconformal-pair", &[]);
    let sp: SpherePairsFile = serde_json::from_str(&read(nc.join("pairs.json"))).unwrap();
    sp.to_pairs().unwrap();
}

#[test]
fn tolerance_env_var_sets_default_and_flag_wins() {
    let tmp = TempDir::new().unwrap();
    let dir = gen(
        tmp.path(),
        "tau-pair",
        &["--seed", "7", "--n", "4", "--nodes", "9"],
    );
    let pairs = dir.join("pairs.json");
    let strict = bin()
        .env("CONELIFT_TOL", "1e-30")
        .args(["recover", p(&pairs)])
        .output()
        .unwrap();
    assert_eq!(code(&strict), 3);
    let flag = bin()
        .env("CONELIFT_TOL", "1e-30")
        .args(["recover", "--tol", "1e-9", p(&pairs)])
        .output()
        .unwrap();
    assert_eq!(code(&flag), 0);
}
