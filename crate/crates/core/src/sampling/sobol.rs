//! Sobol sequence generation from Joe–Kuo style direction numbers.
//!
//! Direction-number table format (plain text, whitespace separated):
//!
//! ```text
//! d       s       a       m_i
//! 2 1 0 1
//! 3 2 1 1 3
//! ...
//! ```
//!
//! The first line is a header and is ignored. Each following line describes
//! dimension `d` (numbered from 2; dimension 1 is the van der Corput sequence
//! and is implicit) by the degree `s` of its primitive polynomial, the
//! polynomial's interior coefficients packed into the integer `a`, and the
//! `s` initial odd direction integers `m_1..m_s` with `m_k < 2^k`.
//! The bundled table covers 1024 dimensions.

use std::path::Path;
use std::sync::OnceLock;

use super::SampleMatrix;
use crate::error::{Error, Result};

const BITS: usize = 32;
const SCALE: f64 = 1.0 / 4_294_967_296.0;

/// Largest supported `skip + n`.
pub const MAX_POINTS: u64 = 1 << 31;

static BUNDLED_TABLE: &str = include_str!("../../data/joe-kuo-1024.txt");

#[derive(Clone, Debug, PartialEq, Eq)]
struct DirectionEntry {
    degree: u32,
    coeffs: u32,
    initial: Vec<u32>,
}

/// Parsed direction-number table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectionNumbers {
    entries: Vec<DirectionEntry>,
}

impl DirectionNumbers {
    /// The table shipped with the crate.
    pub fn bundled() -> &'static DirectionNumbers {
        static TABLE: OnceLock<DirectionNumbers> = OnceLock::new();
        TABLE.get_or_init(|| {
            DirectionNumbers::parse(BUNDLED_TABLE).expect("bundled direction table is well formed")
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            let line_err = |reason: String| Error::DirectionTable {
                line: lineno + 1,
                reason,
            };
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<u64> = line
                .split_whitespace()
                .map(|f| f.parse::<u64>().map_err(|e| line_err(format!("{f:?}: {e}"))))
                .collect::<Result<_>>()?;
            if fields.len() < 4 {
                return Err(line_err("expected at least 4 fields".into()));
            }
            let (d, s, a) = (fields[0], fields[1], fields[2]);
            let expected = entries.len() as u64 + 2;
            if d != expected {
                return Err(line_err(format!("dimension {d} out of sequence, expected {expected}")));
            }
            if s == 0 || s as usize >= BITS {
                return Err(line_err(format!("degree {s} out of range")));
            }
            if a >= 1 << (s - 1) {
                return Err(line_err(format!("coefficients {a} do not fit degree {s}")));
            }
            let initial = &fields[3..];
            if initial.len() != s as usize {
                return Err(line_err(format!(
                    "expected {s} initial direction integers, found {}",
                    initial.len()
                )));
            }
            for (k, &m) in initial.iter().enumerate() {
                if m % 2 == 0 || m >= 1 << (k + 1) {
                    return Err(line_err(format!("m_{} = {m} must be odd and below 2^{}", k + 1, k + 1)));
                }
            }
            entries.push(DirectionEntry {
                degree: s as u32,
                coeffs: a as u32,
                initial: initial.iter().map(|&m| m as u32).collect(),
            });
        }
        Ok(Self { entries })
    }

    /// Number of dimensions the table supports.
    pub fn capacity(&self) -> usize {
        self.entries.len() + 1
    }

    /// Direction integers `v_1..v_32` for dimension `dim` (0-based).
    fn direction_integers(&self, dim: usize) -> [u32; BITS] {
        let mut v = [0u32; BITS];
        if dim == 0 {
            for (k, vk) in v.iter_mut().enumerate() {
                *vk = 1 << (BITS - 1 - k);
            }
            return v;
        }
        let e = &self.entries[dim - 1];
        let s = e.degree as usize;
        for k in 0..s {
            v[k] = e.initial[k] << (BITS - 1 - k);
        }
        for k in s..BITS {
            let mut x = v[k - s] ^ (v[k - s] >> s);
            for j in 1..s {
                if (e.coeffs >> (s - 1 - j)) & 1 == 1 {
                    x ^= v[k - j];
                }
            }
            v[k] = x;
        }
        v
    }
}

/// Sobol point generator in Gray-code order.
///
/// Point `k` is the XOR of the direction integers selected by the bits of
/// `k ^ (k >> 1)`, so any index can be computed independently and the
/// ordering within every power-of-two block is a permutation of the natural
/// ordering.
#[derive(Clone, Debug)]
pub struct SobolGenerator {
    dim: usize,
    directions: Vec<[u32; BITS]>,
}

impl SobolGenerator {
    pub fn new(dim: usize, table: &DirectionNumbers) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ConfigInvalid("Sobol dimension must be positive".into()));
        }
        if dim > table.capacity() {
            return Err(Error::DimensionExceeded {
                requested: dim,
                capacity: table.capacity(),
            });
        }
        let directions = (0..dim).map(|j| table.direction_integers(j)).collect();
        Ok(Self { dim, directions })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn integer_point(&self, index: u64, out: &mut [u32]) {
        let gray = index ^ (index >> 1);
        for (o, v) in out.iter_mut().zip(&self.directions) {
            let mut x = 0u32;
            let mut bits = gray;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                x ^= v[b];
                bits &= bits - 1;
            }
            *o = x;
        }
    }

    /// Writes point `index` into `out` (length `dim`).
    pub fn point(&self, index: u64, out: &mut [f64]) {
        assert_eq!(out.len(), self.dim, "output length must equal the dimension");
        let mut ints = vec![0u32; self.dim];
        self.integer_point(index, &mut ints);
        for (o, x) in out.iter_mut().zip(ints) {
            *o = x as f64 * SCALE;
        }
    }

    /// Points `skip .. skip + n`, one per row.
    pub fn points(&self, n: usize, skip: u64) -> Result<SampleMatrix> {
        if n == 0 {
            return Err(Error::ConfigInvalid("point count must be positive".into()));
        }
        if skip.saturating_add(n as u64) > MAX_POINTS {
            return Err(Error::ConfigInvalid(format!(
                "points {skip}..{} exceed the 2^31 index range",
                skip.saturating_add(n as u64)
            )));
        }
        let mut out = SampleMatrix::zeros(n, self.dim);
        let mut state = vec![0u32; self.dim];
        self.integer_point(skip, &mut state);
        for row in 0..n {
            for (o, &x) in out.row_mut(row).iter_mut().zip(&state) {
                *o = x as f64 * SCALE;
            }
            let bit = (skip + row as u64).trailing_ones() as usize;
            if bit < BITS {
                for (x, v) in state.iter_mut().zip(&self.directions) {
                    *x ^= v[bit];
                }
            }
        }
        Ok(out)
    }
}

/// Points `skip .. skip + n` of the `dim`-dimensional Sobol sequence from the
/// bundled direction table.
pub fn sobol_points(dim: usize, n: usize, skip: u64) -> Result<SampleMatrix> {
    SobolGenerator::new(dim, DirectionNumbers::bundled())?.points(n, skip)
}
