use std::path::Path;
use std::process::{Command, Output};

use muon_ns::cli::csv::CsvTable;
use muon_ns::linalg::{parse_matrix, polar_factor, Matrix, RankTolerance};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_muon-ns")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["train", "--help"])), 0);
    assert_eq!(code(&run(&["train", "--no-such-flag"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["train", "--eta", "0.1", "--auto-tune"])), 2);
    assert_eq!(code(&run(&["sweep-q"])), 2);
    assert_eq!(code(&run(&["ortho", "--input", "/definitely/not/here.txt"])), 3);
}

#[test]
fn ortho_writes_matrix_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("m.txt");
    std::fs::write(&input, "3 2\n3 1\n-1 2\n0.5 0\n").unwrap();
    let out = dir.path().join("o.txt");
    let res = run(&["ortho", "--input", path(&input), "--out", path(&out), "--q", "8", "--kappa", "2"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));

    let o = parse_matrix(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let m = Matrix::from_rows(&[[3.0, 1.0], [-1.0, 2.0], [0.5, 0.0]]).unwrap();
    assert!(o.max_abs_diff(&polar_factor(&m, RankTolerance::default()).unwrap()) <= 1e-9);

    let trace = CsvTable::parse(&std::fs::read_to_string(format!("{}.trace.csv", path(&out))).unwrap()).unwrap();
    let delta = trace.column("delta_j").unwrap();
    let bound = trace.column("bound_delta0_pow").unwrap();
    assert_eq!(delta.len(), 9);
    for (d, b) in delta.iter().zip(&bound) {
        assert!(d.unwrap() <= b.unwrap() + 1e-12);
    }
}

#[test]
fn verify_is_byte_identical() {
    let a = run(&["verify", "--seed", "7"]);
    let b = run(&["verify", "--seed", "7"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn sweep_csv_is_complete() {
    let res = run(&[
        "sweep-q", "--values", "1,2,3", "--seeds", "0,1", "--T", "15", "--shape", "4,6", "--threads", "2",
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let table = CsvTable::parse(&stdout(&res)).unwrap();
    assert_eq!(table.rows.len(), 3 * 2 * 15);
    assert!(table.rows.iter().flatten().all(|c| !c.is_empty()));
    let single = run(&[
        "sweep-q", "--values", "1,2,3", "--seeds", "0,1", "--T", "15", "--shape", "4,6", "--threads", "1",
    ]);
    let drop_wall = |t: &CsvTable| {
        let j = t.column_index("cumulative_wall_ns").unwrap();
        t.rows.iter().map(|r| [&r[..j], &r[j + 1..]].concat()).collect::<Vec<_>>()
    };
    assert_eq!(drop_wall(&table), drop_wall(&CsvTable::parse(&stdout(&single)).unwrap()));
}

#[test]
fn diverged_training_keeps_its_partial_log() {
    let res = run(&["train", "--optimizer", "sgdm", "--eta", "10", "--beta", "0", "--T", "100", "--shape", "3,4"]);
    assert_eq!(code(&res), 4);
    let table = CsvTable::parse(&stdout(&res)).unwrap();
    assert!(!table.rows.is_empty() && table.rows.len() < 100);
}

#[test]
fn config_files_are_strict_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"kapa": 2}"#).unwrap();
    assert_eq!(code(&run(&["bounds", "--config", path(&bad)])), 2);

    let good = dir.path().join("good.json");
    std::fs::write(&good, r#"{"delta0": 0.5, "q": 1, "kappa": 1}"#).unwrap();
    let value = |args: &[&str], name: &str| {
        let t = CsvTable::parse(&stdout(&run(args))).unwrap();
        let row = t.rows.iter().find(|r| r[0] == name).unwrap();
        row[1].parse::<f64>().unwrap()
    };
    let from_file = value(&["bounds", "--config", path(&good)], "delta_q_bound");
    assert_eq!(from_file, 0.25);
    let overridden = value(&["bounds", "--config", path(&good), "--q", "2"], "delta_q_bound");
    assert_eq!(overridden, 0.0625);
}
