//! Shared fixtures for the benchmarks in `benches/`.

use trotsens_core::{build_term_set, ExperimentConfig, TermSet};

/// Default dense ensemble at `qubits`, fixed seed.
pub fn ensemble(qubits: u32) -> TermSet {
    let cfg = ExperimentConfig {
        qubits,
        ..ExperimentConfig::default()
    };
    build_term_set(&cfg.term_set_config()).expect("default config is valid")
}
