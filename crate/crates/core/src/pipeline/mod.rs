//! End-to-end experiment: ensemble → Gram matrix → Saltelli design → indices
//! → threshold truncation → product-formula errors for the full and the
//! truncated term sets.
//!
//! The truncated ("reduced") product is always compared against the exact
//! evolution under the *full* Hamiltonian, and the same removed set is used
//! for both product-formula orders.

mod output;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Stage};
use crate::hamiltonian::{build_term_set, combination_norm, gram_matrix, TermSet, TermSetConfig, MAX_QUBITS};
use crate::sampling::{DirectionNumbers, SaltelliDesign};
use crate::sensitivity::{evaluate_design, first_order_indices, select_below_mean_threshold, SensitivityReport};
use crate::trotter::{gate_count, Order, TrotterConfig, TrotterEngine};

pub use output::{
    csv_preamble, read_report_dir, validate_report_dir, write_indices_csv, write_report_dir, ReportFiles, Violation,
    CONFIG_TOML, ERRORS_CSV, INDICES_CSV, REPORT_JSON,
};

pub const REPORT_SCHEMA: &str = "trotsens-report/1";

/// Default mean-relative threshold ratios for dense and sparse ensembles.
pub const DENSE_THRESHOLD_RATIO: f64 = 1000.0;
pub const SPARSE_THRESHOLD_RATIO: f64 = 5000.0;

/// Remaining term counts after truncation reported in the original dense and
/// sparse studies at 5, 7 and 9 qubits. Reference annotations only.
pub const REFERENCE_DENSE: [(u32, usize); 3] = [(5, 95), (7, 76), (9, 75)];
pub const REFERENCE_SPARSE: [(u32, usize); 3] = [(5, 104), (7, 95), (9, 77)];

/// Residual bound on `‖U†U − I‖_F / dim` checked for every reported product.
pub const UNITARITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub qubits: u32,
    pub n_terms: usize,
    /// 1.0 for dense terms, below one for the Bernoulli-sparse ensemble.
    pub density: f64,
    pub weaken_count: usize,
    pub weaken_factor: f64,
    /// Base Saltelli sample count `N`; a power of two.
    pub samples: usize,
    /// `None` resolves to 1000 for dense and 5000 for sparse ensembles.
    pub threshold_ratio: Option<f64>,
    pub time_grid: Vec<f64>,
    pub steps: usize,
    pub orders: Vec<Order>,
    pub seed: u64,
    /// Also estimate indices at `2N` and report how much they move.
    pub convergence_check: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            qubits: 5,
            n_terms: 105,
            density: 1.0,
            weaken_count: 30,
            weaken_factor: 0.02,
            samples: 1024,
            threshold_ratio: None,
            time_grid: vec![0.1],
            steps: 1,
            orders: vec![Order::First, Order::Second],
            seed: 0,
            convergence_check: false,
        }
    }
}

impl ExperimentConfig {
    pub fn is_dense(&self) -> bool {
        self.density >= 1.0
    }

    pub fn effective_threshold_ratio(&self) -> f64 {
        self.threshold_ratio.unwrap_or(if self.is_dense() {
            DENSE_THRESHOLD_RATIO
        } else {
            SPARSE_THRESHOLD_RATIO
        })
    }

    /// Copy with every defaulted choice made explicit.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.threshold_ratio = Some(self.effective_threshold_ratio());
        c.orders.sort();
        c.orders.dedup();
        c
    }

    pub fn term_set_config(&self) -> TermSetConfig {
        TermSetConfig {
            qubits: self.qubits,
            n_terms: self.n_terms,
            density: self.density,
            weaken_count: self.weaken_count,
            weaken_factor: self.weaken_factor,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        if self.qubits < 2 || self.qubits > MAX_QUBITS {
            return bad(format!("qubits must be in 2..={MAX_QUBITS}, got {}", self.qubits));
        }
        if !self.samples.is_power_of_two() || self.samples < 2 {
            return bad(format!(
                "samples must be a power of two (at least 2), got {}",
                self.samples
            ));
        }
        let ratio = self.effective_threshold_ratio();
        if !(ratio >= 1.0) {
            return bad(format!("threshold ratio must be at least 1, got {ratio}"));
        }
        if self.time_grid.is_empty() || self.time_grid.iter().any(|t| !t.is_finite()) {
            return bad("time grid must be a non-empty list of finite times".into());
        }
        if self.steps == 0 {
            return bad("steps must be positive".into());
        }
        if self.orders.is_empty() {
            return bad("at least one product-formula order is required".into());
        }
        self.term_set_config().validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Full,
    Reduced,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Reduced => "reduced",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(Variant::Full),
            "reduced" => Ok(Variant::Reduced),
            other => Err(format!("unknown variant {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateCountEntry {
    pub order: Order,
    pub variant: Variant,
    pub term_count: usize,
    pub steps: usize,
    pub gates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub order: Order,
    pub time: f64,
    pub steps: usize,
    pub variant: Variant,
    pub epsilon: f64,
    pub gate_count: usize,
    pub unitarity_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactUnitarity {
    pub time: f64,
    pub residual: f64,
}

/// Index stability under doubling the sample count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCheck {
    pub samples: usize,
    pub max_abs_change: f64,
    pub removed: Vec<usize>,
    pub removed_unchanged: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub ensemble: f64,
    pub gram: f64,
    pub sampling: f64,
    pub evaluation: f64,
    pub indices: f64,
    pub trotter: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub config: ExperimentConfig,
    pub dim: usize,
    pub term_norms: Vec<f64>,
    pub weakened: Vec<usize>,
    pub sensitivity: SensitivityReport,
    /// `mean(S) / ratio`.
    pub threshold: f64,
    pub removed: Vec<usize>,
    pub removed_is_subset_of_weakened: bool,
    pub gate_counts: Vec<GateCountEntry>,
    pub errors: Vec<ErrorEntry>,
    pub exact_unitarity: Vec<ExactUnitarity>,
    pub convergence: Option<ConvergenceCheck>,
    /// Remaining term count reported for this qubit count and ensemble type
    /// in the original study, when one exists.
    pub reference_remaining_gates: Option<usize>,
    pub wall_times: StageTimes,
}

impl ExperimentReport {
    pub fn reduced_term_count(&self) -> usize {
        self.config.n_terms - self.removed.len()
    }

    pub fn kept_terms(&self) -> Vec<usize> {
        (0..self.config.n_terms)
            .filter(|k| self.removed.binary_search(k).is_err())
            .collect()
    }

    pub fn gates(&self, order: Order, variant: Variant) -> Option<usize> {
        self.gate_counts
            .iter()
            .find(|g| g.order == order && g.variant == variant)
            .map(|g| g.gates)
    }

    pub fn epsilon(&self, order: Order, time: f64, variant: Variant) -> Option<f64> {
        self.errors
            .iter()
            .find(|e| e.order == order && e.time == time && e.variant == variant)
            .map(|e| e.epsilon)
    }
}

/// Output of the sensitivity stages alone.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub terms: TermSet,
    pub sensitivity: SensitivityReport,
    pub threshold: f64,
    pub removed: Vec<usize>,
    pub convergence: Option<ConvergenceCheck>,
    pub times: StageTimes,
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot += start.elapsed().as_secs_f64();
    out
}

fn estimate_indices(
    terms_gram: &crate::hamiltonian::GramMatrix,
    d: usize,
    samples: usize,
    table: &DirectionNumbers,
    times: &mut StageTimes,
) -> Result<SensitivityReport> {
    let design = timed(&mut times.sampling, || SaltelliDesign::with_directions(d, samples, table))
        .map_err(|e| e.at(Stage::Sampling))?;
    let evals = timed(&mut times.evaluation, || {
        evaluate_design(&design, |beta| combination_norm(terms_gram, beta))
    })
    .map_err(|e| e.at(Stage::Evaluation))?;
    timed(&mut times.indices, || first_order_indices(&evals)).map_err(|e| e.at(Stage::Indices))
}

/// Builds the ensemble and runs the sensitivity analysis and truncation rule.
pub fn analyze(cfg: &ExperimentConfig, table: &DirectionNumbers) -> Result<Analysis> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    let mut times = StageTimes::default();

    let terms = timed(&mut times.ensemble, || build_term_set(&cfg.term_set_config()))
        .map_err(|e| e.at(Stage::Ensemble))?;
    let gram = timed(&mut times.gram, || gram_matrix(&terms));

    let sensitivity = estimate_indices(&gram, terms.len(), cfg.samples, table, &mut times)?;
    let ratio = cfg.effective_threshold_ratio();
    let threshold = sensitivity.mean_index() / ratio;
    let removed = select_below_mean_threshold(&sensitivity, ratio);

    let convergence = if cfg.convergence_check {
        let doubled = estimate_indices(&gram, terms.len(), 2 * cfg.samples, table, &mut times)?;
        let max_abs_change = doubled
            .s_index
            .iter()
            .zip(&sensitivity.s_index)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let removed2 = select_below_mean_threshold(&doubled, ratio);
        Some(ConvergenceCheck {
            samples: 2 * cfg.samples,
            max_abs_change,
            removed_unchanged: removed2 == removed,
            removed: removed2,
        })
    } else {
        None
    };

    Ok(Analysis {
        terms,
        sensitivity,
        threshold,
        removed,
        convergence,
        times,
    })
}

fn reference_for(cfg: &ExperimentConfig) -> Option<usize> {
    let table = if cfg.is_dense() {
        &REFERENCE_DENSE
    } else {
        &REFERENCE_SPARSE
    };
    if cfg.n_terms != 105 {
        return None;
    }
    table.iter().find(|(q, _)| *q == cfg.qubits).map(|&(_, g)| g)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with(cfg, DirectionNumbers::bundled())
}

pub fn run_experiment_with(cfg: &ExperimentConfig, table: &DirectionNumbers) -> Result<ExperimentReport> {
    let analysis = analyze(cfg, table)?;
    let cfg = cfg.resolved();
    let Analysis {
        terms,
        sensitivity,
        threshold,
        removed,
        convergence,
        mut times,
    } = analysis;

    let kept: Vec<usize> = (0..terms.len())
        .filter(|k| removed.binary_search(k).is_err())
        .collect();
    let all: Vec<usize> = (0..terms.len()).collect();

    let mut gate_counts = Vec::new();
    for &order in &cfg.orders {
        for (variant, subset) in [(Variant::Full, &all), (Variant::Reduced, &kept)] {
            gate_counts.push(GateCountEntry {
                order,
                variant,
                term_count: subset.len(),
                steps: cfg.steps,
                gates: gate_count(subset.len(), order, cfg.steps),
            });
        }
    }

    let trotter_start = Instant::now();
    let engine = TrotterEngine::new(&terms).map_err(|e| e.at(Stage::Trotter))?;
    let mut errors = Vec::new();
    let mut exact_unitarity = Vec::new();
    for &t in &cfg.time_grid {
        exact_unitarity.push(ExactUnitarity {
            time: t,
            residual: crate::linalg::unitarity_residual(&engine.exact_evolution(t)),
        });
        for &order in &cfg.orders {
            let tc = TrotterConfig::new(order, t, cfg.steps);
            for (variant, subset) in [(Variant::Full, &all), (Variant::Reduced, &kept)] {
                // Nothing removed: the reduced product is the full one.
                let r = if variant == Variant::Reduced && removed.is_empty() {
                    let full: &ErrorEntry = errors.last().expect("full entry precedes reduced");
                    ErrorEntry {
                        variant,
                        ..full.clone()
                    }
                } else {
                    let r = engine.error_over(&tc, subset).map_err(|e| e.at(Stage::Trotter))?;
                    ErrorEntry {
                        order,
                        time: t,
                        steps: cfg.steps,
                        variant,
                        epsilon: r.epsilon,
                        gate_count: r.gate_count,
                        unitarity_residual: r.unitarity_residual,
                    }
                };
                errors.push(r);
            }
        }
    }
    times.trotter = trotter_start.elapsed().as_secs_f64();

    let weakened = terms.weakened().to_vec();
    let removed_is_subset_of_weakened = removed.iter().all(|k| terms.is_weakened(*k));
    Ok(ExperimentReport {
        schema: REPORT_SCHEMA.to_string(),
        reference_remaining_gates: reference_for(&cfg),
        config: cfg,
        dim: terms.dim(),
        term_norms: terms.term_norms(),
        weakened,
        sensitivity,
        threshold,
        removed,
        removed_is_subset_of_weakened,
        gate_counts,
        errors,
        exact_unitarity,
        convergence,
        wall_times: times,
    })
}

/// A removed term that was not one of the weakened ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Offender {
    pub index: usize,
    pub s_index: f64,
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemovedValidity {
    pub valid: bool,
    pub offenders: Vec<Offender>,
}

/// Checks that every removed term is a weakened one.
pub fn removed_validity(report: &ExperimentReport) -> RemovedValidity {
    let offenders: Vec<Offender> = report
        .removed
        .iter()
        .filter(|k| report.weakened.binary_search(k).is_err())
        .map(|&index| Offender {
            index,
            s_index: report.sensitivity.s_index[index],
            norm: report.term_norms[index],
        })
        .collect();
    RemovedValidity {
        valid: offenders.is_empty(),
        offenders,
    }
}

/// Caps the worker threads used by the dense linear algebra; `0` means all
/// available cores.
pub fn set_threads(threads: usize) {
    let par = match threads {
        1 => faer::Par::Seq,
        n => faer::Par::rayon(n),
    };
    faer::set_global_parallelism(par);
}
