use std::path::{Path, PathBuf};
use std::process::Command as Process;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use himdiag_cli::{read_csv, CliConfig, CliError, Command, OutputFormat, ResponseColumn, EXIT_CONFIG, EXIT_DATA};

fn bin() -> Process {
    Process::new(env!("CARGO_BIN_EXE_himdiag"))
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn random_table(rng: &mut ChaCha8Rng, n: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..cols).map(|_| rng.sample::<f64, _>(StandardNormal) * 10f64.powi(rng.random_range(-8..8))).collect())
        .collect()
}

fn to_csv(header: Option<&[&str]>, rows: &[Vec<f64>]) -> String {
    let mut s = String::new();
    if let Some(h) = header {
        s.push_str(&h.join(","));
        s.push('\n');
    }
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

#[test]
fn csv_round_trip_keeps_every_bit() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let rows = random_table(&mut rng, 50, 10);
    let path = write(dir.path(), "m.csv", &to_csv(None, &rows));
    let data = read_csv(&path, &ResponseColumn::Index(0)).unwrap();
    assert_eq!((data.n(), data.p()), (50, 9));
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(data.y()[i].to_bits(), row[0].to_bits());
        for j in 0..9 {
            assert_eq!(data.get(i, j).to_bits(), row[j + 1].to_bits());
        }
    }
}

#[test]
fn minimal_file_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "small.csv", "y,x1\n1.5,2\n0.5,3\n2.5,7\n");
    let data = read_csv(&path, &ResponseColumn::Name("y".into())).unwrap();
    assert_eq!((data.n(), data.p()), (3, 1));
}

#[test]
fn nan_cell_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "nan.csv", "y,a,b\n1,2,3\n2,4,nan\n3,1,1\n4,0,2\n");
    let err = read_csv(&path, &ResponseColumn::Name("y".into())).unwrap_err();
    assert!(matches!(err, CliError::ParseCell { line: 3, column: 3, .. }), "{err}");
    assert!(err.to_string().contains("line 3, column 3"));
}

fn diagnose_file(dir: &Path) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut rows: Vec<Vec<f64>> =
        (0..30).map(|_| (0..41).map(|_| rng.sample(StandardNormal)).collect()).collect();
    rows[4][0] = 40.0;
    let names: Vec<String> = std::iter::once("y".to_owned()).chain((1..41).map(|j| format!("x{j}"))).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    write(dir, "d.csv", &to_csv(Some(&names), &rows))
}

#[test]
fn diagnose_writes_the_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let input = diagnose_file(dir.path());
    let out = dir.path().join("report.json");
    let status = bin()
        .args(["diagnose", "--input"])
        .arg(&input)
        .args(["--response", "y", "--output"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    let obj = report.as_object().unwrap();
    let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["flagged", "meta", "params", "pvalues", "scores", "statistics"]);
    assert_eq!(report["scores"].as_array().unwrap().len(), 30);
    assert_eq!(report["pvalues"].as_array().unwrap().len(), 30);
    assert_eq!(report["params"]["alpha"], "0.05");
    assert!(report["flagged"].as_array().unwrap().iter().any(|v| v == 4));
}

#[test]
fn diagnose_is_deterministic_and_csv_is_available() {
    let dir = tempfile::tempdir().unwrap();
    let input = diagnose_file(dir.path());
    let run = || {
        let mut c = CliConfig::new(Command::Diagnose);
        c.input_path = Some(input.clone());
        c.response_column = Some(ResponseColumn::Name("y".into()));
        c.format = OutputFormat::Csv;
        himdiag_cli::diagnose_report(&c).unwrap().render(OutputFormat::Csv)
    };
    let a = run();
    assert_eq!(a, run());
    assert!(a.starts_with("row,score,statistic,pvalue,flagged\n"));
    assert_eq!(a.lines().count(), 31);
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let wide = diagnose_file(dir.path());

    // Cook's distance needs more rows than coefficients.
    let out = bin().args(["cook", "--input"]).arg(&wide).args(["--response", "y"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_DATA));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n > p + 1"));

    let out = bin().args(["diagnose", "--input"]).arg(&wide).args(["--response", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));

    let missing = dir.path().join("absent.csv");
    let out = bin().args(["diagnose", "--input"]).arg(&missing).args(["--response", "y"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));

    let bad = write(dir.path(), "bad.csv", "y,a\n1,2\n2,x\n3,4\n");
    let out = bin().args(["diagnose", "--input"]).arg(&bad).args(["--response", "y"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_DATA));

    let out = bin().args(["diagnose", "--input"]).arg(&wide).args(["--response", "y", "--alpha", "1.5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn cook_and_glm_commands_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|i| {
            let x1: f64 = rng.sample(StandardNormal);
            let x2: f64 = rng.sample(StandardNormal);
            let prob = 1.0 / (1.0 + (-(0.5 + 1.5 * x1)).exp());
            let label = if i == 0 || rng.random::<f64>() < prob { 1.0 } else { 0.0 };
            vec![label, x1, x2]
        })
        .collect();
    let input = write(dir.path(), "g.csv", &to_csv(Some(&["y", "x1", "x2"]), &rows));

    let out = bin().args(["cook", "--input"]).arg(&input).args(["--response", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["scores"].as_array().unwrap().len(), 40);

    let out = bin()
        .args(["glm-diagnose", "--input"])
        .arg(&input)
        .args(["--response", "y", "--m", "5", "--format", "csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let flagged = text.lines().skip(1).filter(|l| l.ends_with(",1")).count();
    assert_eq!(flagged, 5);
}

#[test]
fn simulate_prints_an_aligned_table_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("sim.csv");
    let out = bin()
        .args([
            "simulate", "--model", "m2", "--s-set", "s2", "--n", "30", "--p", "150", "--n-infl", "3", "--reps", "2",
            "--kappa", "0,1.2", "--pipelines", "HIM,SIS", "--seed", "5", "--output",
        ])
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().next().unwrap().trim_start().starts_with("model"));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("model,kappa,s_set,pipeline,metric,mean,mc_se,n_reps,n_failures"));
    // HIM: fdr and n_flagged at 0, plus power at 1.2; SIS: cp at both.
    assert_eq!(lines.count(), 2 + 3 + 2);
    assert!(csv.contains("m2,1.2,s2,HIM,power,"));
}
