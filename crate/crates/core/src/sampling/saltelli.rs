use super::{DirectionNumbers, SampleMatrix, SobolGenerator};
use crate::error::{Error, Result};

/// Saltelli cross-sampling design for first-order indices.
///
/// `N` points of a `2d`-dimensional Sobol sequence (starting at index 1, so
/// the all-zeros origin is never used) are split into `A` (first `d`
/// columns) and `B` (last `d` columns). `AB[i]` is `A` with column `i`
/// replaced by column `i` of `B`. The `AB` blocks are derived on demand
/// rather than stored, since at `d = 105` they would hold `d²N` entries.
#[derive(Clone, Debug)]
pub struct SaltelliDesign {
    a: SampleMatrix,
    b: SampleMatrix,
}

impl SaltelliDesign {
    pub fn with_directions(d: usize, n: usize, table: &DirectionNumbers) -> Result<Self> {
        if d == 0 {
            return Err(Error::ConfigInvalid("design dimension must be positive".into()));
        }
        if !n.is_power_of_two() {
            return Err(Error::ConfigInvalid(format!(
                "base sample count must be a power of two, got {n}"
            )));
        }
        let gen = SobolGenerator::new(2 * d, table)?;
        let raw = gen.points(n, 1)?;
        let mut a = SampleMatrix::zeros(n, d);
        let mut b = SampleMatrix::zeros(n, d);
        for (r, row) in raw.iter_rows().enumerate() {
            a.row_mut(r).copy_from_slice(&row[..d]);
            b.row_mut(r).copy_from_slice(&row[d..]);
        }
        Ok(Self { a, b })
    }

    /// Number of input variables `d`.
    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    /// Base sample count `N`.
    pub fn base_samples(&self) -> usize {
        self.a.rows()
    }

    /// Total model evaluations the design requires, `N(d + 2)`.
    pub fn evaluation_count(&self) -> usize {
        self.base_samples() * (self.dim() + 2)
    }

    pub fn a(&self) -> &SampleMatrix {
        &self.a
    }

    pub fn b(&self) -> &SampleMatrix {
        &self.b
    }

    /// Writes row `row` of `AB[i]` into `out`.
    pub fn ab_row_into(&self, i: usize, row: usize, out: &mut [f64]) {
        out.copy_from_slice(self.a.row(row));
        out[i] = self.b.get(row, i);
    }

    /// Materializes `AB[i]`.
    pub fn ab(&self, i: usize) -> SampleMatrix {
        assert!(i < self.dim(), "column {i} out of range");
        let mut m = self.a.clone();
        for r in 0..m.rows() {
            m.row_mut(r)[i] = self.b.get(r, i);
        }
        m
    }
}

/// Saltelli design over the bundled direction table.
pub fn saltelli_design(d: usize, n: usize) -> Result<SaltelliDesign> {
    SaltelliDesign::with_directions(d, n, DirectionNumbers::bundled())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_dimension_ab_is_b() {
        let s = saltelli_design(1, 4).unwrap();
        assert_eq!(&s.ab(0), s.b());
    }

    #[test]
    fn column_swap_definition() {
        let s = saltelli_design(3, 8).unwrap();
        let ab1 = s.ab(1);
        for r in 0..8 {
            assert_eq!(ab1.get(r, 0), s.a().get(r, 0));
            assert_eq!(ab1.get(r, 2), s.a().get(r, 2));
            assert_eq!(ab1.get(r, 1), s.b().get(r, 1));
        }
        assert_ne!(ab1, *s.a());
    }

    #[test]
    fn row_access_matches_materialized_block() {
        let s = saltelli_design(6, 16).unwrap();
        let mut buf = vec![0.0; 6];
        for i in 0..6 {
            let m = s.ab(i);
            for r in 0..16 {
                s.ab_row_into(i, r, &mut buf);
                assert_eq!(buf.as_slice(), m.row(r));
            }
        }
    }

    #[test]
    fn evaluation_budget() {
        let s = saltelli_design(105, 1024).unwrap();
        assert_eq!(s.evaluation_count(), 109_568);
    }

    #[test]
    fn no_origin_and_unit_interval() {
        let s = saltelli_design(5, 64).unwrap();
        for r in 0..64 {
            let mut full: Vec<f64> = s.a().row(r).to_vec();
            full.extend_from_slice(s.b().row(r));
            assert!(full.iter().any(|&x| x != 0.0));
            assert!(full.iter().all(|&x| (0.0..1.0).contains(&x)));
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(saltelli_design(3, 1000), Err(Error::ConfigInvalid(_))));
        assert!(matches!(
            saltelli_design(513, 8),
            Err(Error::DimensionExceeded { requested: 1026, .. })
        ));
    }
}
