use std::fs;
use std::path::Path;
use std::process::Command;

use funcsel::cli::{io, metrics_csv, run, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};
use funcsel::simulate::{
    generate, metrics, Example, ReplicationOutcome, ReplicationReport, ScenarioSpec, StudyReport,
};
use funcsel::tuning::{prepare_sample, run_pipeline, PipelineConfig};
use funcsel::{BasisTemplate, Execution, FamilyKind, Interval};
use tempfile::TempDir;

fn fourier(p: usize) -> Vec<BasisTemplate> {
    vec![BasisTemplate::new(FamilyKind::Fourier, Interval::unit()); p]
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_owned()
}

fn funcsel(args: &[&str]) -> i32 {
    run(std::iter::once("funcsel").chain(args.iter().copied()))
}

/// Export one Ex2 sample and a config pointing at it.
fn exported(dir: &Path, seed: u64, n: usize) {
    let data = generate(&ScenarioSpec::new(Example::Ex2, n, 0.1, seed).unwrap()).unwrap();
    io::write_dataset(&data.dataset, dir).unwrap();
    let curves: Vec<String> = (1..=6).map(|l| format!("\"x{l}.csv\"")).collect();
    fs::write(
        dir.join("run.toml"),
        format!(
            "seed = {seed}\n\n[data]\ncurves = [{}]\nresponses = \"y.csv\"\n",
            curves.join(", ")
        ),
    )
    .unwrap();
}

#[test]
fn exported_data_round_trips_exactly() {
    let tmp = TempDir::new().unwrap();
    let data = generate(&ScenarioSpec::new(Example::Ex3, 20, 0.25, 3).unwrap())
        .unwrap()
        .dataset;
    let (curves, y) = io::write_dataset(&data, tmp.path()).unwrap();
    let back = io::read_dataset(&curves, &y).unwrap();
    assert_eq!(back, data);
    let t = fourier(8);
    let a = prepare_sample(&data, &t, 15, Some(0.5), Execution::Sequential).unwrap();
    let b = prepare_sample(&back, &t, 15, Some(0.5), Execution::Sequential).unwrap();
    assert_eq!(a.design.vectors(), b.design.vectors());
    assert_eq!(a.design.responses(), b.design.responses());
}

#[test]
fn select_matches_the_library() {
    let tmp = TempDir::new().unwrap();
    exported(tmp.path(), 7, 100);
    let out = tmp.path().join("out");
    let code = funcsel(&[
        "select",
        "--config",
        &s(&tmp.path().join("run.toml")),
        "--out",
        &s(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("selection.json")).unwrap()).unwrap();

    let data = generate(&ScenarioSpec::new(Example::Ex2, 100, 0.1, 7).unwrap())
        .unwrap()
        .dataset;
    let mut config = PipelineConfig::new(fourier(6));
    config.seed = 7;
    let lib = run_pipeline(&data, &config).unwrap();
    let selected: Vec<usize> = report["selected"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap() as usize)
        .collect();
    assert_eq!(selected, lib.result.selected.one_based());
    assert_eq!(report["alpha"].as_f64().unwrap(), lib.alpha);
    assert_eq!(report["beta"].as_f64().unwrap(), lib.beta);
    assert_eq!(report["ranking"].as_array().unwrap().len(), 6);
    let rows = fs::read_to_string(out.join("cv_surface.csv")).unwrap();
    assert_eq!(rows.lines().count(), 82);
}

#[test]
fn malformed_csv_names_the_line() {
    let tmp = TempDir::new().unwrap();
    exported(tmp.path(), 1, 20);
    let x3 = tmp.path().join("x3.csv");
    let mut lines: Vec<String> = fs::read_to_string(&x3)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    lines[4] = lines[4].replacen(',', ",abc", 1);
    fs::write(&x3, lines.join("\n")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_funcsel"))
        .args([
            "select",
            "--config",
            &s(&tmp.path().join("run.toml")),
            "--out",
            &s(&tmp.path().join("o")),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("x3.csv") && err.contains("line 5"), "{err}");
}

#[test]
fn predictor_count_mismatch_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    exported(tmp.path(), 1, 20);
    let cfg = tmp.path().join("run.toml");
    let text = fs::read_to_string(&cfg).unwrap() + "predictors = 5\n";
    fs::write(&cfg, text).unwrap();
    assert_eq!(funcsel(&["select", "--config", &s(&cfg)]), EXIT_USAGE);

    let bad = tmp.path().join("bases.toml");
    let text = fs::read_to_string(tmp.path().join("run.toml"))
        .unwrap()
        .replace("predictors = 5\n", "");
    fs::write(&bad, format!("bases = [\"fourier\", \"bspline\"]\n{text}")).unwrap();
    assert_eq!(funcsel(&["tune", "--config", &s(&bad)]), EXIT_USAGE);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(funcsel(&["select", "--basis", "wavelet"]), EXIT_USAGE);
    assert_eq!(funcsel(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(funcsel(&["select", "--seed", "minus-one"]), EXIT_USAGE);
    // select without data
    assert_eq!(funcsel(&["select"]), EXIT_USAGE);
    let status = Command::new(env!("CARGO_BIN_EXE_funcsel"))
        .arg("--folds")
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(EXIT_USAGE));
}

#[test]
fn numerical_failure_exits_with_three() {
    // Identically zero curves give a covariance that no jitter can rescue.
    let tmp = TempDir::new().unwrap();
    let grid: Vec<String> = (0..41).map(|i| format!("{:?}", i as f64 / 40.0)).collect();
    let zero = vec!["0.0"; 41].join(",");
    for l in 1..=2 {
        let rows: Vec<String> = std::iter::once(grid.join(","))
            .chain((0..40).map(|_| zero.clone()))
            .collect();
        fs::write(tmp.path().join(format!("x{l}.csv")), rows.join("\n")).unwrap();
    }
    fs::write(tmp.path().join("y.csv"), vec!["0.0"; 40].join("\n")).unwrap();
    fs::write(
        tmp.path().join("run.toml"),
        "dimension_budget = 0\n[data]\ncurves = [\"x1.csv\", \"x2.csv\"]\nresponses = \"y.csv\"\n",
    )
    .unwrap();
    let code = funcsel(&[
        "tune",
        "--config",
        &s(&tmp.path().join("run.toml")),
        "--out",
        &s(&tmp.path().join("o")),
    ]);
    assert_eq!(code, EXIT_NUMERICAL);
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for run_dir in ["a", "b"] {
        let out = tmp.path().join(run_dir);
        let code = funcsel(&[
            "simulate",
            "--example",
            "3",
            "--n",
            "30",
            "--replications",
            "3",
            "--seed",
            "11",
            "--out",
            &s(&out),
        ]);
        assert_eq!(code, EXIT_OK);
        let files: Vec<Vec<u8>> = ["metrics.csv", "msep.csv", "study.json"]
            .iter()
            .map(|f| fs::read(out.join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn simulate_smoke_run_writes_tables() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let export = tmp.path().join("data");
    let code = funcsel(&[
        "simulate",
        "--example",
        "1",
        "--n",
        "30",
        "--replications",
        "1",
        "--seed",
        "4",
        "--export",
        &s(&export),
        "--out",
        &s(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next().unwrap(), "n,sigma,basis,CVP,FDR,MSIZE");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..3], &["30", "0.10", "fourier"]);
    assert!(row[3..]
        .iter()
        .all(|v| v.split('.').nth(1).map(str::len) == Some(2)));
    let msep = fs::read_to_string(out.join("msep.csv")).unwrap();
    assert_eq!(msep.lines().count(), 2);
    assert!(export.join("x10.csv").exists() && export.join("y.csv").exists());
}

#[test]
fn all_correct_metrics_format_as_one() {
    let truth = Example::Ex2.true_set();
    let rep = ReplicationReport::new(truth.clone(), truth, 0.5);
    let report = StudyReport {
        scenario: ScenarioSpec::new(Example::Ex2, 50, 0.25, 0).unwrap(),
        basis: FamilyKind::BSpline,
        metrics: Some(metrics(std::slice::from_ref(&rep)).unwrap()),
        replications: vec![ReplicationOutcome {
            index: 0,
            report: Some(rep),
            error: None,
        }],
        failures: 0,
    };
    assert_eq!(
        metrics_csv(&report),
        "n,sigma,basis,CVP,FDR,MSIZE\n50,0.25,bspline,1.00,0.00,3.00\n"
    );
}

type Row = (f64, f64, f64);

fn tune_rows(dir: &Path) -> (Vec<Row>, Row) {
    let parse = |l: &str| {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        (v[0], v[1], v[2])
    };
    let surface = fs::read_to_string(dir.join("cv_surface.csv")).unwrap();
    let argmin = fs::read_to_string(dir.join("cv_argmin.csv")).unwrap();
    (
        surface.lines().skip(1).map(parse).collect(),
        parse(argmin.lines().nth(1).unwrap()),
    )
}

#[test]
fn tune_writes_the_full_grid_and_its_minimum() {
    let tmp = TempDir::new().unwrap();
    exported(tmp.path(), 5, 60);
    let out = tmp.path().join("o");
    assert_eq!(
        funcsel(&[
            "tune",
            "--config",
            &s(&tmp.path().join("run.toml")),
            "--out",
            &s(&out)
        ]),
        EXIT_OK
    );
    let (rows, best) = tune_rows(&out);
    assert_eq!(rows.len(), 81);
    let min = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    assert!(rows.contains(&best));
    // Within the tie tolerance of the column minimum, and the first such row.
    let y = io::read_responses(&tmp.path().join("y.csv")).unwrap();
    let tol = 1e-10 * y.norm_squared() / 60.0;
    assert!(best.2 <= min + tol);
    let first = rows.iter().find(|r| r.2 <= min + tol).unwrap();
    assert_eq!(*first, best);
}

#[test]
fn tune_on_a_single_point_grid() {
    let tmp = TempDir::new().unwrap();
    exported(tmp.path(), 5, 40);
    let cfg = tmp.path().join("run.toml");
    let text = fs::read_to_string(&cfg).unwrap();
    fs::write(
        &cfg,
        format!("[grid]\nalphas = [0.3]\nbetas = [0.15]\n\n{text}").replacen("seed = 5\n", "", 1),
    )
    .unwrap();
    let out = tmp.path().join("o");
    assert_eq!(
        funcsel(&[
            "tune",
            "--config",
            &s(&cfg),
            "--seed",
            "5",
            "--out",
            &s(&out)
        ]),
        EXIT_OK
    );
    let (rows, best) = tune_rows(&out);
    assert_eq!(rows, vec![best]);
    assert_eq!((best.0, best.1), (0.3, 0.15));
}
