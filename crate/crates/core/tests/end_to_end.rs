use proptest::prelude::*;
use tempfile::TempDir;
use trotsens_core::pipeline::{read_report_dir, validate_report_dir, write_report_dir};
use trotsens_core::{
    build_term_set, gate_count, gram_matrix, run_experiment, DirectionNumbers, ExperimentConfig, Order, TermSet,
    Variant,
};

fn small(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        qubits: 4,
        n_terms: 16,
        weaken_count: 5,
        samples: 256,
        time_grid: vec![0.05, 0.2],
        seed,
        ..ExperimentConfig::default()
    }
}

#[test]
fn saved_term_set_reloads_identically() {
    let dir = TempDir::new().unwrap();
    let ts = build_term_set(&small(3).term_set_config()).unwrap();
    let path = dir.path().join("terms.tset");
    ts.save(&path).unwrap();
    let back = TermSet::load(&path).unwrap();
    assert_eq!(back.weakened(), ts.weakened());
    assert_eq!(gram_matrix(&back), gram_matrix(&ts));
}

#[test]
fn table_prefix_file_reproduces_bundled_results() {
    let dir = TempDir::new().unwrap();
    let full = include_str!("../data/joe-kuo-1024.txt");
    // A and B come from one 32-dimensional sequence: the header line stands
    // in for the implicit first dimension, then 31 rows.
    let prefix: String = full.lines().take(32).map(|l| format!("{l}\n")).collect();
    let path = dir.path().join("dirs.txt");
    std::fs::write(&path, prefix).unwrap();
    let table = DirectionNumbers::from_path(&path).unwrap();

    let cfg = small(4);
    let a = trotsens_core::pipeline::run_experiment_with(&cfg, &table).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.sensitivity, b.sensitivity);
    assert_eq!(a.removed, b.removed);

    let short: String = full.lines().take(31).map(|l| format!("{l}\n")).collect();
    let table = DirectionNumbers::parse(&short).unwrap();
    let err = trotsens_core::pipeline::run_experiment_with(&cfg, &table).unwrap_err();
    assert!(err.is_config(), "{err}");
}

#[test]
fn report_directory_round_trips_and_validates() {
    let dir = TempDir::new().unwrap();
    let r = run_experiment(&small(5)).unwrap();
    write_report_dir(&r, dir.path()).unwrap();
    assert_eq!(read_report_dir(dir.path()).unwrap(), r);
    assert_eq!(validate_report_dir(dir.path()).unwrap(), vec![]);
}

/// Dropping terms perturbs each product by at most `t Σ ‖H_k‖_F` over the
/// dropped terms, since `‖exp(−iHt) − I‖_F ≤ t ‖H‖_F` and the remaining
/// factors are unitary.
#[test]
fn truncation_error_is_bounded_by_removed_weight() {
    for seed in 0..4 {
        let r = run_experiment(&small(seed)).unwrap();
        let weight: f64 = r.removed.iter().map(|&k| r.term_norms[k]).sum();
        for &t in &r.config.time_grid {
            for order in [Order::First, Order::Second] {
                let full = r.epsilon(order, t, Variant::Full).unwrap();
                let reduced = r.epsilon(order, t, Variant::Reduced).unwrap();
                assert!(
                    (full - reduced).abs() <= t * weight + 1e-12,
                    "seed {seed} order {order} t {t}: {full} vs {reduced}, bound {}",
                    t * weight
                );
            }
        }
    }
}

proptest! {
    #[test]
    fn gate_counts_are_consistent(n in 1usize..500, steps in 1usize..50, removed in 0usize..500) {
        let first = gate_count(n, Order::First, steps);
        let second = gate_count(n, Order::Second, steps);
        prop_assert_eq!(second, 2 * first - steps);
        let kept = n.saturating_sub(removed);
        prop_assert!(gate_count(kept, Order::First, steps) <= first);
        prop_assert!(gate_count(kept, Order::Second, steps) <= second);
    }
}
