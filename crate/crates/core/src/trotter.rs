//! First- and second-order product formulas for `exp(−i H̃ t)`, `H̃ = Σ H̃_n`.
//!
//! With `τ = t / steps`, one first-order step is
//! `E_1(τ) E_2(τ) ⋯ E_N(τ)` and one second-order (Strang) step is
//! `E_1(τ/2) ⋯ E_N(τ/2) · E_N(τ/2) ⋯ E_1(τ/2)`, where `E_n(θ) = exp(−i θ H̃_n)`.
//! Terms are applied in ascending index order. A "gate" is one
//! term-exponential factor; in the second-order step the two adjacent
//! `E_N(τ/2)` factors merge into one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::TermSet;
use crate::linalg::{unitarity_residual, ComplexMatrix, HermitianEigen};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Order {
    First,
    Second,
}

impl Order {
    pub fn as_u8(self) -> u8 {
        match self {
            Order::First => 1,
            Order::Second => 2,
        }
    }
}

impl TryFrom<u8> for Order {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            other => Err(format!("product-formula order must be 1 or 2, got {other}")),
        }
    }
}

impl From<Order> for u8 {
    fn from(o: Order) -> u8 {
        o.as_u8()
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrotterConfig {
    pub order: Order,
    pub time: f64,
    pub steps: usize,
}

impl TrotterConfig {
    pub fn new(order: Order, time: f64, steps: usize) -> Self {
        Self { order, time, steps }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::ConfigInvalid("Trotter step count must be positive".into()));
        }
        if !self.time.is_finite() {
            return Err(Error::ConfigInvalid(format!("evolution time {} is not finite", self.time)));
        }
        Ok(())
    }
}

/// Number of term exponentials in the product formula.
pub fn gate_count(term_count: usize, order: Order, steps: usize) -> usize {
    if term_count == 0 {
        return 0;
    }
    match order {
        Order::First => term_count * steps,
        Order::Second => (2 * term_count - 1) * steps,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrotterErrorReport {
    /// `‖exp(−i H̃ t) − U_product‖_F`.
    pub epsilon: f64,
    pub gate_count: usize,
    pub order: Order,
    pub time: f64,
    pub steps: usize,
    pub term_count: usize,
    /// `‖U†U − I‖_F` of the product.
    pub unitarity_residual: f64,
}

/// Cached spectral decompositions of every term and of their sum, so that
/// any number of `(t, steps, order)` evaluations only re-phase eigenvalues.
pub struct TrotterEngine<'a> {
    terms: &'a TermSet,
    spectra: Vec<HermitianEigen>,
    full: HermitianEigen,
}

impl<'a> TrotterEngine<'a> {
    pub fn new(terms: &'a TermSet) -> Result<Self> {
        let spectra = terms
            .terms()
            .iter()
            .map(HermitianEigen::new)
            .collect::<Result<Vec<_>>>()?;
        let full = HermitianEigen::new(&terms.hamiltonian())?;
        Ok(Self {
            terms,
            spectra,
            full,
        })
    }

    pub fn term_set(&self) -> &TermSet {
        self.terms
    }

    pub fn dim(&self) -> usize {
        self.terms.dim()
    }

    /// `exp(−i H̃ t)` for the full Hamiltonian.
    pub fn exact_evolution(&self, t: f64) -> ComplexMatrix {
        self.full.expm(t)
    }

    /// Product formula over all terms.
    pub fn product(&self, cfg: &TrotterConfig) -> Result<ComplexMatrix> {
        let all: Vec<usize> = (0..self.terms.len()).collect();
        self.product_over(cfg, &all)
    }

    /// Product formula restricted to `subset` (ascending term indices).
    pub fn product_over(&self, cfg: &TrotterConfig, subset: &[usize]) -> Result<ComplexMatrix> {
        cfg.validate()?;
        if let Some(&bad) = subset.iter().find(|&&k| k >= self.spectra.len()) {
            return Err(Error::Shape(format!("term index {bad} out of range")));
        }
        let dim = self.dim();
        if subset.is_empty() {
            return Ok(ComplexMatrix::identity(dim));
        }
        let tau = cfg.time / cfg.steps as f64;
        let step = match cfg.order {
            Order::First => {
                let mut acc: Option<ComplexMatrix> = None;
                for &k in subset {
                    let e = self.spectra[k].expm(tau);
                    acc = Some(match acc {
                        None => e,
                        Some(u) => u.matmul(&e),
                    });
                }
                acc.expect("subset is non-empty")
            }
            Order::Second => {
                let mut forward: Option<ComplexMatrix> = None;
                let mut backward: Option<ComplexMatrix> = None;
                for &k in subset {
                    let e = self.spectra[k].expm(0.5 * tau);
                    (forward, backward) = match (forward, backward) {
                        (Some(f), Some(b)) => (Some(f.matmul(&e)), Some(e.matmul(&b))),
                        _ => (Some(e.clone()), Some(e)),
                    };
                }
                forward.unwrap().matmul(&backward.unwrap())
            }
        };
        let mut u = step.clone();
        for _ in 1..cfg.steps {
            u = u.matmul(&step);
        }
        Ok(u)
    }

    /// Error of the product over `subset` against the full exact evolution.
    pub fn error_over(&self, cfg: &TrotterConfig, subset: &[usize]) -> Result<TrotterErrorReport> {
        let product = self.product_over(cfg, subset)?;
        let exact = self.exact_evolution(cfg.time);
        Ok(TrotterErrorReport {
            epsilon: exact.sub(&product).frobenius_norm(),
            gate_count: gate_count(subset.len(), cfg.order, cfg.steps),
            order: cfg.order,
            time: cfg.time,
            steps: cfg.steps,
            term_count: subset.len(),
            unitarity_residual: unitarity_residual(&product),
        })
    }

    pub fn error(&self, cfg: &TrotterConfig) -> Result<TrotterErrorReport> {
        let all: Vec<usize> = (0..self.terms.len()).collect();
        self.error_over(cfg, &all)
    }
}

pub fn exact_evolution(ts: &TermSet, t: f64) -> Result<ComplexMatrix> {
    crate::linalg::hermitian_expm(&ts.hamiltonian(), t)
}

pub fn trotter_product(ts: &TermSet, cfg: &TrotterConfig) -> Result<ComplexMatrix> {
    TrotterEngine::new(ts)?.product(cfg)
}

pub fn trotter_error(ts: &TermSet, cfg: &TrotterConfig) -> Result<TrotterErrorReport> {
    TrotterEngine::new(ts)?.error(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_term_set, TermSetConfig};
    use crate::linalg::{c64, hermitian_expm, HermitianMatrix};

    fn pauli_x() -> HermitianMatrix {
        let z0 = c64::new(0.0, 0.0);
        let one = c64::new(1.0, 0.0);
        HermitianMatrix::new(ComplexMatrix::from_row_major(2, &[z0, one, one, z0]).unwrap()).unwrap()
    }

    fn pauli_z() -> HermitianMatrix {
        HermitianMatrix::from_real_diagonal(&[1.0, -1.0])
    }

    fn dense(qubits: u32, n_terms: usize, seed: u64) -> TermSet {
        build_term_set(&TermSetConfig {
            qubits,
            n_terms,
            density: 1.0,
            weaken_count: 0,
            weaken_factor: 1.0,
            seed,
        })
        .unwrap()
    }

    fn diagonal_terms(count: usize, dim: usize, seed: u64) -> TermSet {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let terms = (0..count)
            .map(|_| {
                let d: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                HermitianMatrix::from_real_diagonal(&d)
            })
            .collect();
        TermSet::from_terms(terms).unwrap()
    }

    #[test]
    fn gate_counts() {
        assert_eq!(gate_count(105, Order::Second, 1), 209);
        assert_eq!(gate_count(105, Order::First, 1), 105);
        assert_eq!(gate_count(75, Order::First, 1), 75);
        assert_eq!(gate_count(10, Order::Second, 3), 57);
        assert_eq!(gate_count(0, Order::Second, 3), 0);
    }

    #[test]
    fn order_parses_from_integers() {
        assert_eq!(Order::try_from(2).unwrap(), Order::Second);
        assert!(Order::try_from(3).is_err());
        assert_eq!(serde_json::to_string(&Order::First).unwrap(), "1");
    }

    #[test]
    fn config_validation() {
        let ts = dense(1, 2, 0);
        assert!(trotter_product(&ts, &TrotterConfig::new(Order::First, 0.1, 0)).is_err());
        assert!(trotter_product(&ts, &TrotterConfig::new(Order::First, f64::INFINITY, 1)).is_err());
    }

    #[test]
    fn exact_at_zero_time_is_identity() {
        let ts = dense(2, 3, 1);
        let u = exact_evolution(&ts, 0.0).unwrap();
        assert!(u.sub(&ComplexMatrix::identity(4)).frobenius_norm() < 1e-14);
    }

    #[test]
    fn single_term_exact_matches_expm() {
        let ts = dense(3, 1, 2);
        let a = exact_evolution(&ts, 0.7).unwrap();
        let b = hermitian_expm(ts.term(0), 0.7).unwrap();
        assert!(a.sub(&b).frobenius_norm() < 1e-12);
        for order in [Order::First, Order::Second] {
            let r = trotter_error(&ts, &TrotterConfig::new(order, 0.7, 2)).unwrap();
            assert!(r.epsilon <= 1e-10 * 8.0);
        }
    }

    #[test]
    fn commuting_terms_are_exact() {
        let ts = diagonal_terms(4, 8, 3);
        let engine = TrotterEngine::new(&ts).unwrap();
        let mut manual = ComplexMatrix::identity(8);
        for t in ts.terms() {
            manual = manual.matmul(&hermitian_expm(t, 1.3).unwrap());
        }
        assert!(engine.exact_evolution(1.3).sub(&manual).frobenius_norm() < 1e-12);
        for order in [Order::First, Order::Second] {
            for steps in [1, 3] {
                let r = engine.error(&TrotterConfig::new(order, 1.3, steps)).unwrap();
                assert!(r.epsilon <= 1e-10 * 8.0, "{r:?}");
            }
        }
    }

    #[test]
    fn pauli_commutator_leading_order() {
        // [X, Z] = −2iY, ‖[X, Z]‖_F = 2√2.
        let ts = TermSet::from_terms(vec![pauli_x(), pauli_z()]).unwrap();
        let t = 1e-2;
        let r = trotter_error(&ts, &TrotterConfig::new(Order::First, t, 1)).unwrap();
        let predicted = 0.5 * t * t * 2.0 * 2f64.sqrt();
        assert!((r.epsilon / predicted - 1.0).abs() <= 0.1, "{} vs {predicted}", r.epsilon);
    }

    #[test]
    fn second_order_time_symmetry() {
        let ts = dense(3, 4, 5);
        let engine = TrotterEngine::new(&ts).unwrap();
        let fwd = engine.product(&TrotterConfig::new(Order::Second, 0.4, 1)).unwrap();
        let bwd = engine.product(&TrotterConfig::new(Order::Second, -0.4, 1)).unwrap();
        let residual = fwd.matmul(&bwd).sub(&ComplexMatrix::identity(8)).frobenius_norm();
        assert!(residual <= 1e-10 * 8.0);
    }

    #[test]
    fn error_scaling_orders() {
        let ts = dense(4, 5, 2024);
        let engine = TrotterEngine::new(&ts).unwrap();
        let t = 1e-2;
        let eps = |order, time| engine.error(&TrotterConfig::new(order, time, 1)).unwrap().epsilon;
        let r1 = eps(Order::First, t / 2.0) / eps(Order::First, t);
        let r2 = eps(Order::Second, t / 2.0) / eps(Order::Second, t);
        assert!((0.225..=0.275).contains(&r1), "first-order ratio {r1}");
        assert!((0.10..=0.15).contains(&r2), "second-order ratio {r2}");
    }

    #[test]
    fn second_order_beats_first_at_small_time() {
        let ts = dense(3, 6, 9);
        let engine = TrotterEngine::new(&ts).unwrap();
        let t = 0.1 / ts.hamiltonian().frobenius_norm();
        let e1 = engine.error(&TrotterConfig::new(Order::First, t, 1)).unwrap().epsilon;
        let e2 = engine.error(&TrotterConfig::new(Order::Second, t, 1)).unwrap().epsilon;
        assert!(e2 <= e1);
    }

    #[test]
    fn step_refinement() {
        let ts = dense(3, 5, 31);
        let engine = TrotterEngine::new(&ts).unwrap();
        for order in [Order::First, Order::Second] {
            let mut prev = f64::INFINITY;
            for steps in [1, 2, 4, 8] {
                let r = engine.error(&TrotterConfig::new(order, 0.05, steps)).unwrap();
                assert!(r.epsilon <= prev + 1e-9);
                assert_eq!(r.gate_count, gate_count(5, order, steps));
                assert!(r.unitarity_residual <= 1e-9 * 8.0);
                prev = r.epsilon;
            }
        }
    }

    #[test]
    fn subset_products() {
        let ts = dense(2, 4, 3);
        let engine = TrotterEngine::new(&ts).unwrap();
        let cfg = TrotterConfig::new(Order::First, 0.2, 1);
        let empty = engine.product_over(&cfg, &[]).unwrap();
        assert_eq!(empty, ComplexMatrix::identity(4));
        let r = engine.error_over(&cfg, &[0, 2]).unwrap();
        assert_eq!(r.term_count, 2);
        assert_eq!(r.gate_count, 2);
        let manual = hermitian_expm(ts.term(0), 0.2)
            .unwrap()
            .matmul(&hermitian_expm(ts.term(2), 0.2).unwrap());
        let diff = engine.product_over(&cfg, &[0, 2]).unwrap().sub(&manual).frobenius_norm();
        assert!(diff < 1e-12);
        assert!(engine.product_over(&cfg, &[4]).is_err());
    }

    #[test]
    fn epsilon_bounded_by_unitary_distance() {
        let ts = dense(3, 5, 8);
        let r = trotter_error(&ts, &TrotterConfig::new(Order::First, 5.0, 1)).unwrap();
        assert!(r.epsilon <= 2.0 * 8f64.sqrt() + 1e-9);
    }
}
