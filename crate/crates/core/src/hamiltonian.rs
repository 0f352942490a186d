//! Random Hermitian term ensembles and the weighted-combination norm model.
//!
//! # Random streams
//!
//! All randomness comes from ChaCha20 (`rand_chacha` 0.9). The key is
//! `ChaCha20Rng::seed_from_u64(seed)`; term `k` is drawn from stream `k`, and
//! the choice of weakened terms from stream [`WEAKEN_STREAM`]. Gaussian
//! variates use `rand_distr::StandardNormal`. Terms are therefore independent
//! of each other and of the weakening choice: changing `weaken_count` never
//! changes the unweakened matrices.
//!
//! # Term-set container
//!
//! Little-endian binary layout, version 1:
//!
//! ```text
//! magic        4 bytes   "TSET"
//! version      u32       1
//! qubits       u32
//! n_terms      u32
//! density      f64
//! weaken_factor f64
//! seed         u64
//! n_weakened   u32
//! weakened     n_weakened × u32, ascending
//! entries      n_terms × dim² × (re f64, im f64), each term row-major
//! ```

use std::io::{Read, Write};
use std::path::Path;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, ComplexMatrix, HermitianMatrix};

/// Stream id used to choose the weakened terms.
pub const WEAKEN_STREAM: u64 = u64::MAX;

/// Largest qubit count accepted when generating ensembles.
pub const MAX_QUBITS: u32 = 12;

const MAGIC: &[u8; 4] = b"TSET";
const CONTAINER_VERSION: u32 = 1;

/// Complex Gaussian with `E|z|² = 1`.
fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> c64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Random Hermitian `(G + G†)/2` with unit-variance complex Gaussian `G`.
///
/// For `density < 1` each upper-triangle position `(i, j)`, `i ≤ j`, is kept
/// with probability `density` (one uniform draw per position, row-major) and
/// mirrored by conjugation; the rest are exactly zero. `density = 1` skips the
/// Bernoulli draws.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, density: f64, rng: &mut R) -> HermitianMatrix {
    let mut m = Mat::<c64>::zeros(dim, dim);
    let dense = density >= 1.0;
    for i in 0..dim {
        for j in i..dim {
            if !dense && rng.random::<f64>() >= density {
                continue;
            }
            if i == j {
                m[(i, i)] = c64::new(complex_normal(rng).re, 0.0);
            } else {
                let gij = complex_normal(rng);
                let gji = complex_normal(rng);
                let z = (gij + gji.conj()) * 0.5;
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
    }
    // Exactly Hermitian by construction; no tolerance check needed.
    HermitianMatrix::symmetrize(&ComplexMatrix::from_faer(m))
}

/// Parameters of a synthetic term ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermSetConfig {
    pub qubits: u32,
    pub n_terms: usize,
    pub density: f64,
    pub weaken_count: usize,
    pub weaken_factor: f64,
    pub seed: u64,
}

impl TermSetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        if self.qubits == 0 || self.qubits > MAX_QUBITS {
            return bad(format!("qubits must be in 1..={MAX_QUBITS}, got {}", self.qubits));
        }
        if self.n_terms == 0 {
            return bad("at least one term is required".into());
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad(format!("density must be in (0, 1], got {}", self.density));
        }
        if self.weaken_count > self.n_terms {
            return bad(format!(
                "cannot weaken {} of {} terms",
                self.weaken_count, self.n_terms
            ));
        }
        if !(self.weaken_factor.is_finite() && self.weaken_factor > 0.0) {
            return bad(format!("weaken factor must be positive, got {}", self.weaken_factor));
        }
        Ok(())
    }
}

/// Ordered Hamiltonian terms `H̃_n`, with the record of which were weakened.
#[derive(Clone, Debug, PartialEq)]
pub struct TermSet {
    qubits: u32,
    terms: Vec<HermitianMatrix>,
    weakened: Vec<usize>,
    weaken_factor: f64,
    density: f64,
    seed: u64,
}

impl TermSet {
    /// Wraps explicit terms (dimension must be `2^q`); nothing is weakened.
    pub fn from_terms(terms: Vec<HermitianMatrix>) -> Result<Self> {
        let dim = terms
            .first()
            .ok_or_else(|| Error::ConfigInvalid("term set is empty".into()))?
            .dim();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::Shape(format!("term dimension {dim} is not 2^q")));
        }
        if terms.iter().any(|t| t.dim() != dim) {
            return Err(Error::Shape("terms differ in dimension".into()));
        }
        Ok(Self {
            qubits: dim.trailing_zeros(),
            terms,
            weakened: Vec::new(),
            weaken_factor: 1.0,
            density: 1.0,
            seed: 0,
        })
    }

    pub fn qubits(&self) -> u32 {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[HermitianMatrix] {
        &self.terms
    }

    pub fn term(&self, k: usize) -> &HermitianMatrix {
        &self.terms[k]
    }

    /// Ascending indices of weakened terms.
    pub fn weakened(&self) -> &[usize] {
        &self.weakened
    }

    pub fn is_weakened(&self, k: usize) -> bool {
        self.weakened.binary_search(&k).is_ok()
    }

    pub fn weaken_factor(&self) -> f64 {
        self.weaken_factor
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `H̃ = Σ_n H̃_n`.
    pub fn hamiltonian(&self) -> HermitianMatrix {
        HermitianMatrix::sum(&self.terms).expect("term set is non-empty and uniform")
    }

    pub fn term_norms(&self) -> Vec<f64> {
        self.terms.iter().map(HermitianMatrix::frobenius_norm).collect()
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&CONTAINER_VERSION.to_le_bytes())?;
        w.write_all(&self.qubits.to_le_bytes())?;
        w.write_all(&(self.terms.len() as u32).to_le_bytes())?;
        w.write_all(&self.density.to_le_bytes())?;
        w.write_all(&self.weaken_factor.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.weakened.len() as u32).to_le_bytes())?;
        for &k in &self.weakened {
            w.write_all(&(k as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.dim() * self.dim() * 16);
        for t in &self.terms {
            buf.clear();
            for z in t.matrix().to_row_major() {
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
            let mut b = [0u8; N];
            r.read_exact(&mut b)
                .map_err(|e| Error::Container(format!("truncated input: {e}")))?;
            Ok(b)
        }
        let u32_ = |r: &mut dyn Read| -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)
                .map_err(|e| Error::Container(format!("truncated input: {e}")))?;
            Ok(u32::from_le_bytes(b))
        };

        if &take::<4>(&mut r)? != MAGIC {
            return Err(Error::Container("bad magic".into()));
        }
        let version = u32_(&mut r)?;
        if version != CONTAINER_VERSION {
            return Err(Error::Container(format!("unsupported version {version}")));
        }
        let qubits = u32_(&mut r)?;
        if qubits == 0 || qubits > MAX_QUBITS {
            return Err(Error::Container(format!("qubit count {qubits} out of range")));
        }
        let n_terms = u32_(&mut r)? as usize;
        let density = f64::from_le_bytes(take::<8>(&mut r)?);
        let weaken_factor = f64::from_le_bytes(take::<8>(&mut r)?);
        let seed = u64::from_le_bytes(take::<8>(&mut r)?);
        let n_weak = u32_(&mut r)? as usize;
        if n_weak > n_terms || n_terms == 0 {
            return Err(Error::Container(format!("{n_weak} weakened of {n_terms} terms")));
        }
        let mut weakened = Vec::with_capacity(n_weak);
        for _ in 0..n_weak {
            weakened.push(u32_(&mut r)? as usize);
        }
        if weakened.windows(2).any(|w| w[0] >= w[1]) || weakened.iter().any(|&k| k >= n_terms) {
            return Err(Error::Container("weakened indices not ascending and in range".into()));
        }
        let dim = 1usize << qubits;
        let mut raw = vec![0u8; dim * dim * 16];
        let mut terms = Vec::with_capacity(n_terms);
        for k in 0..n_terms {
            r.read_exact(&mut raw)
                .map_err(|e| Error::Container(format!("term {k}: {e}")))?;
            let entries: Vec<c64> = raw
                .chunks_exact(16)
                .map(|c| {
                    c64::new(
                        f64::from_le_bytes(c[..8].try_into().unwrap()),
                        f64::from_le_bytes(c[8..].try_into().unwrap()),
                    )
                })
                .collect();
            let m = ComplexMatrix::from_row_major(dim, &entries)
                .map_err(|e| Error::Container(format!("term {k}: {e}")))?;
            let h = HermitianMatrix::new(m).map_err(|e| Error::Container(format!("term {k}: {e}")))?;
            terms.push(h);
        }
        Ok(Self {
            qubits,
            terms,
            weakened,
            weaken_factor,
            density,
            seed,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

/// Generates `n_terms` random terms of dimension `2^qubits` and weakens
/// exactly `weaken_count` of them, chosen uniformly without replacement.
pub fn build_term_set(cfg: &TermSetConfig) -> Result<TermSet> {
    cfg.validate()?;
    let dim = 1usize << cfg.qubits;
    let mut terms: Vec<HermitianMatrix> = (0..cfg.n_terms)
        .map(|k| {
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k as u64);
            random_hermitian(dim, cfg.density, &mut rng)
        })
        .collect();

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(WEAKEN_STREAM);
    let mut weakened = rand::seq::index::sample(&mut rng, cfg.n_terms, cfg.weaken_count).into_vec();
    weakened.sort_unstable();
    for &k in &weakened {
        terms[k] = terms[k].scaled(cfg.weaken_factor);
    }

    Ok(TermSet {
        qubits: cfg.qubits,
        terms,
        weakened,
        weaken_factor: cfg.weaken_factor,
        density: cfg.density,
        seed: cfg.seed,
    })
}

/// Real inner products `g[m][n] = Re tr(H_m† H_n)` of the terms.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    d: usize,
    g: Vec<f64>,
}

impl GramMatrix {
    /// Row-major `d × d` entries; must be symmetric.
    pub fn from_row_major(d: usize, g: Vec<f64>) -> Result<Self> {
        if g.len() != d * d || d == 0 {
            return Err(Error::Shape(format!("{} entries for a {d}x{d} Gram matrix", g.len())));
        }
        Ok(Self { d, g })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.g[m * self.d + n]
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.g[m * self.d..(m + 1) * self.d]
    }

    pub fn trace(&self) -> f64 {
        (0..self.d).map(|k| self.get(k, k)).sum()
    }
}

pub fn gram_matrix(ts: &TermSet) -> GramMatrix {
    let d = ts.len();
    let dim = ts.dim();
    // Columns of `y` are the vectorized terms; G = Re(Y† Y).
    let y = Mat::<c64>::from_fn(dim * dim, d, |k, n| ts.term(n).matrix().get(k % dim, k / dim));
    let prod = y.adjoint() * &y;
    let mut g = vec![0.0; d * d];
    for m in 0..d {
        for n in 0..d {
            g[m * d + n] = 0.5 * (prod[(m, n)].re + prod[(n, m)].re);
        }
    }
    GramMatrix { d, g }
}

/// Relative tolerance for clamping slightly negative quadratic forms.
pub const NEGATIVE_FORM_TOL: f64 = 1e-10;

/// `‖Σ_n β_n H_n‖_F = sqrt(βᵀ G β)`.
pub fn combination_norm(g: &GramMatrix, beta: &[f64]) -> Result<f64> {
    if beta.len() != g.d {
        return Err(Error::Shape(format!(
            "weight vector of length {} for {} terms",
            beta.len(),
            g.d
        )));
    }
    let mut form = 0.0;
    let mut scale = 0.0;
    for (m, &bm) in beta.iter().enumerate() {
        let row = g.row(m);
        let inner: f64 = row.iter().zip(beta).map(|(gmn, bn)| gmn * bn).sum();
        form += bm * inner;
        scale += row[m] * bm * bm;
    }
    if form >= 0.0 {
        Ok(form.sqrt())
    } else if form >= -NEGATIVE_FORM_TOL * scale {
        Ok(0.0)
    } else {
        Err(Error::NegativeForm { value: form, scale })
    }
}
