//! Sensitivity-guided truncation of Trotter-Suzuki product formulas.
//!
//! The crate estimates first-order Sobol indices of the Frobenius norm of
//! randomly weighted sums of Hamiltonian terms, drops terms whose index falls
//! far below the mean, and measures what the truncation costs in product
//! formula accuracy and saves in term exponentials.
//!
//! Stages, bottom up:
//!
//! * [`linalg`]: dense complex matrices, Hermitian exponentials.
//! * [`sampling`]: Sobol sequence and Saltelli design.
//! * [`sensitivity`]: first-order index estimation and threshold selection.
//! * [`hamiltonian`]: random term ensembles, Gram matrix, norm model.
//! * [`trotter`]: product formulas, errors, gate counts.
//! * [`pipeline`]: the end-to-end experiment and its report files.

pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod pipeline;
pub mod sampling;
pub mod sensitivity;
pub mod trotter;

pub use error::{Error, Result, Stage};
pub use hamiltonian::{build_term_set, combination_norm, gram_matrix, GramMatrix, TermSet, TermSetConfig};
pub use linalg::{c64, hermitian_expm, ComplexMatrix, HermitianEigen, HermitianMatrix};
pub use pipeline::{removed_validity, run_experiment, ExperimentConfig, ExperimentReport, Variant};
pub use sampling::{saltelli_design, sobol_points, DirectionNumbers, SaltelliDesign, SampleMatrix};
pub use sensitivity::{
    evaluate_design, first_order_indices, select_below_mean_threshold, ModelEvaluations, SensitivityReport,
};
pub use trotter::{gate_count, Order, TrotterConfig, TrotterEngine, TrotterErrorReport};
