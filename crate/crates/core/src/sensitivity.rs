//! First-order variance-based sensitivity indices estimated from a Saltelli
//! design.
//!
//! For each input `i` the partial variance is estimated as
//!
//! ```text
//! V_i ≈ (1/N) Σ_n (f(B)_n − f0) · (f(A_i(B))_n − f(A)_n)
//! ```
//!
//! where `f0` is the mean of the pooled `f(A) ∪ f(B)` sample. Centering on
//! `f0` leaves the expectation unchanged and makes the estimate invariant to
//! constant shifts of the model output. The total variance is the unbiased
//! sample variance of the same pooled `2N` values and `S_i = V_i / Var(y)`.

use std::fmt::Display;

use serde::{Deserialize, Serialize};

use crate::error::{DesignBlock, Error, Result};
use crate::sampling::SaltelliDesign;

/// Relative threshold below which the total variance is considered zero.
pub const DEGENERATE_VARIANCE: f64 = 1e-14;

/// Model outputs on the rows of a Saltelli design.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelEvaluations {
    f_a: Vec<f64>,
    f_b: Vec<f64>,
    f_ab: Vec<Vec<f64>>,
}

impl ModelEvaluations {
    pub fn new(f_a: Vec<f64>, f_b: Vec<f64>, f_ab: Vec<Vec<f64>>) -> Result<Self> {
        let n = f_a.len();
        if f_b.len() != n || f_ab.iter().any(|v| v.len() != n) {
            return Err(Error::Shape(format!(
                "inconsistent evaluation lengths (f(A) has {n})"
            )));
        }
        if f_ab.is_empty() {
            return Err(Error::Shape("no A_i(B) evaluations".into()));
        }
        let all = f_a.iter().chain(&f_b).chain(f_ab.iter().flatten());
        if all.into_iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite("model evaluation".into()));
        }
        Ok(Self { f_a, f_b, f_ab })
    }

    pub fn base_samples(&self) -> usize {
        self.f_a.len()
    }

    pub fn dim(&self) -> usize {
        self.f_ab.len()
    }

    pub fn f_a(&self) -> &[f64] {
        &self.f_a
    }

    pub fn f_b(&self) -> &[f64] {
        &self.f_b
    }

    pub fn f_ab(&self, i: usize) -> &[f64] {
        &self.f_ab[i]
    }
}

/// Applies `model` to every row of `A`, `B` and each `A_i(B)`, in that order.
pub fn evaluate_design<F, E>(design: &SaltelliDesign, mut model: F) -> Result<ModelEvaluations>
where
    F: FnMut(&[f64]) -> std::result::Result<f64, E>,
    E: Display,
{
    let n = design.base_samples();
    let d = design.dim();
    let mut call = |block: DesignBlock, row: usize, x: &[f64]| -> Result<f64> {
        match model(x) {
            Ok(y) if y.is_finite() => Ok(y),
            Ok(y) => Err(Error::Model {
                block,
                row,
                message: format!("non-finite output {y}"),
            }),
            Err(e) => Err(Error::Model {
                block,
                row,
                message: e.to_string(),
            }),
        }
    };

    let f_a = (0..n)
        .map(|r| call(DesignBlock::A, r, design.a().row(r)))
        .collect::<Result<Vec<_>>>()?;
    let f_b = (0..n)
        .map(|r| call(DesignBlock::B, r, design.b().row(r)))
        .collect::<Result<Vec<_>>>()?;
    let mut row = vec![0.0; d];
    let mut f_ab = Vec::with_capacity(d);
    for i in 0..d {
        let mut col = Vec::with_capacity(n);
        for r in 0..n {
            design.ab_row_into(i, r, &mut row);
            col.push(call(DesignBlock::AB(i), r, &row)?);
        }
        f_ab.push(col);
    }
    ModelEvaluations::new(f_a, f_b, f_ab)
}

/// First-order index estimates with the moments they were derived from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    /// Mean of the pooled `f(A) ∪ f(B)` sample.
    pub f0: f64,
    pub total_variance: f64,
    pub partial_variance: Vec<f64>,
    /// `S_i`; small negative values are estimator noise and are kept.
    pub s_index: Vec<f64>,
    pub n: usize,
    pub d: usize,
}

impl SensitivityReport {
    pub fn sum(&self) -> f64 {
        self.s_index.iter().sum()
    }

    pub fn mean_index(&self) -> f64 {
        self.sum() / self.d as f64
    }
}

pub fn first_order_indices(ev: &ModelEvaluations) -> Result<SensitivityReport> {
    let n = ev.base_samples();
    let d = ev.dim();
    if n < 2 {
        return Err(Error::ConfigInvalid(format!(
            "at least 2 base samples are required, got {n}"
        )));
    }
    let pooled = || ev.f_a.iter().chain(&ev.f_b);
    let f0 = pooled().sum::<f64>() / (2 * n) as f64;
    let total_variance = pooled().map(|y| (y - f0) * (y - f0)).sum::<f64>() / (2 * n - 1) as f64;
    if total_variance <= DEGENERATE_VARIANCE * f0.powi(2).max(1.0) {
        return Err(Error::DegenerateVariance {
            variance: total_variance,
        });
    }

    let partial_variance: Vec<f64> = ev
        .f_ab
        .iter()
        .map(|f_abi| {
            let acc: f64 = ev
                .f_b
                .iter()
                .zip(f_abi)
                .zip(&ev.f_a)
                .map(|((b, abi), a)| (b - f0) * (abi - a))
                .sum();
            acc / n as f64
        })
        .collect();
    let s_index = partial_variance.iter().map(|v| v / total_variance).collect();

    Ok(SensitivityReport {
        f0,
        total_variance,
        partial_variance,
        s_index,
        n,
        d,
    })
}

/// Indices `i` with `S_i < mean(S) / ratio` (strict), in ascending order.
///
/// The mean runs over all `d` indices including negative ones; negative
/// estimates therefore always fall below any non-negative threshold.
pub fn select_below_mean_threshold(report: &SensitivityReport, ratio: f64) -> Vec<usize> {
    let threshold = report.mean_index() / ratio;
    report
        .s_index
        .iter()
        .enumerate()
        .filter(|(_, &s)| s < threshold)
        .map(|(i, _)| i)
        .collect()
}
