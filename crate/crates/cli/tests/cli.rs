use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &[&str] = &["--terms", "12", "--weaken-count", "4", "--samples", "128"];

fn trotsens(args: &[&str], extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trotsens"))
        .args(args)
        .args(extra)
        .env_remove("TROTSENS_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

#[test]
fn run_writes_a_valid_report() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r");
    let o = trotsens(&["run", "--qubits", "3", "--seed", "7", "--out", out.to_str().unwrap()], SMALL);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["report.json", "config.toml", "indices.csv", "errors.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert_eq!(data_lines(&out.join("errors.csv")).len(), 1 + 4);
    assert_eq!(data_lines(&out.join("indices.csv")).len(), 1 + 12);

    let v = trotsens(&["validate", out.to_str().unwrap()], &[]);
    assert_eq!(code(&v), 0, "{}", stderr(&v));
}

#[test]
fn single_term_has_no_splitting_error() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r");
    let o = trotsens(
        &["run", "--qubits", "2", "--terms", "1", "--weaken-count", "0", "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = data_lines(&out.join("errors.csv"));
    assert_eq!(rows.len(), 1 + 4);
    for row in &rows[1..] {
        let eps: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
        assert!(eps <= 1e-10 * 4.0, "{row}");
    }
}

#[test]
fn non_power_of_two_samples_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let o = trotsens(&["run", "--samples", "1000", "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("power of two"), "{}", stderr(&o));
}

#[test]
fn invalid_flags_and_configs_exit_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&trotsens(&["run", "--orders", "3", "--out", out], &[])), 2);
    assert_eq!(code(&trotsens(&["run", "--qubits", "40", "--out", out], &[])), 2);
    assert_eq!(code(&trotsens(&["run", "--weaken-count", "200", "--out", out], &[])), 2);

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "qubits = 3\nunknown_field = 1\n").unwrap();
    let o = trotsens(&["run", "--config", cfg.to_str().unwrap(), "--out", out], &[]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));

    let missing = dir.path().join("absent.toml");
    assert_eq!(code(&trotsens(&["run", "--config", missing.to_str().unwrap(), "--out", out], &[])), 2);

    let table = dir.path().join("dirs.txt");
    fs::write(&table, "header\n2 1 0 7\n").unwrap();
    let o = trotsens(&["run", "--directions", table.to_str().unwrap(), "--out", out], SMALL);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "qubits = 3\nn_terms = 10\nweaken_count = 3\nsamples = 64\nseed = 5\n").unwrap();
    let out = dir.path().join("r");
    let o = trotsens(
        &["run", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let effective = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(effective.contains("n_terms = 10"), "{effective}");
    assert!(effective.contains("seed = 9"), "{effective}");
}

#[test]
fn out_directory_defaults_from_environment() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_trotsens"))
        .args(["indices", "--qubits", "3"])
        .args(SMALL)
        .env("TROTSENS_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("indices.csv").is_file());
    assert!(dir.path().join("config.toml").is_file());
}

#[test]
fn rerunning_an_emitted_config_reproduces_the_csvs() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("a");
    let o = trotsens(
        &["run", "--qubits", "3", "--time", "0.1,0.5", "--seed", "3", "--out", first.to_str().unwrap()],
        SMALL,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let second = dir.path().join("b");
    let cfg = first.join("config.toml");
    let o = trotsens(&["run", "--config", cfg.to_str().unwrap(), "--out", second.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["indices.csv", "errors.csv", "config.toml"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn sweep_row_counts() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s");
    let o = trotsens(&["sweep", "--qubits", "2,3,4", "--density", "1.0", "--out", out.to_str().unwrap()], SMALL);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = data_lines(&out.join("sweep.csv"));
    assert_eq!(rows[0], "qubits,order,variant,epsilon,gates,time");
    assert_eq!(rows.len(), 1 + 12);
    for q in ["q2", "q3", "q4"] {
        assert!(out.join(q).join("report.json").is_file());
    }

    let single = dir.path().join("one");
    let o = trotsens(&["sweep", "--qubits", "3", "--out", single.to_str().unwrap()], SMALL);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(data_lines(&single.join("sweep.csv")).len(), 1 + 4);
}

#[test]
fn sweep_rejects_an_invalid_point_before_running() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s");
    let o = trotsens(&["sweep", "--qubits", "3,40", "--out", out.to_str().unwrap()], SMALL);
    assert_eq!(code(&o), 2);
    assert!(!out.join("q3").exists());
}

#[test]
fn sweep_continues_past_a_failing_point() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s");
    // A plain file where the q3 report directory should go.
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join("q3"), b"").unwrap();
    let o = trotsens(&["sweep", "--qubits", "2,3,4", "--out", out.to_str().unwrap()], SMALL);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("partial failure: 1 of 3"), "{}", stderr(&o));
    let rows = data_lines(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 1 + 8);
    assert!(rows[1..].iter().all(|r| !r.starts_with("3,")));
}

#[test]
fn validate_flags_a_hand_edited_gate_count() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r");
    let o = trotsens(&["run", "--qubits", "3", "--out", out.to_str().unwrap()], SMALL);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let errors = out.join("errors.csv");
    let text = fs::read_to_string(&errors).unwrap();
    let edited: Vec<String> = text
        .lines()
        .map(|l| match l.strip_suffix(",12") {
            Some(head) if l.contains(",full,") => format!("{head},11"),
            _ => l.to_owned(),
        })
        .collect();
    assert_ne!(edited.join("\n") + "\n", text, "edit must change the file");
    fs::write(&errors, edited.join("\n") + "\n").unwrap();

    let v = trotsens(&["validate", out.to_str().unwrap()], &[]);
    assert_eq!(code(&v), 1);
    assert!(stderr(&v).contains("gate-count"), "{}", stderr(&v));
}

#[test]
fn validate_missing_files_is_exit_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&trotsens(&["validate", dir.path().to_str().unwrap()], &[])), 2);

    let out = dir.path().join("r");
    assert_eq!(code(&trotsens(&["run", "--qubits", "3", "--out", out.to_str().unwrap()], SMALL)), 0);
    fs::remove_file(out.join("indices.csv")).unwrap();
    assert_eq!(code(&trotsens(&["validate", out.to_str().unwrap()], &[])), 2);
}
