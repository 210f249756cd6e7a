use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// How signs are laid out inside each block of the loading matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlockSigns {
    /// First m/2 rows of every block load `+a`, the rest `-a`. Odd m is rejected.
    #[default]
    Strict,
    /// Like `Strict` for even m. For odd m the block carries one surplus sign,
    /// `+a` on even-numbered blocks and `-a` on odd-numbered ones, so the
    /// design stays balanced overall when the number of blocks is even.
    Alternating,
}

/// Block loading matrix `A` (p x q) of the linear confounding model together
/// with the diagonal standardization `S`.
#[derive(Debug, Clone)]
pub struct ConfoundingDesign {
    pub p: usize,
    pub q: usize,
    pub a: f64,
    pub block_size: usize,
    pub standardize: bool,
    /// Unit sign pattern; `loadings = a * pattern`.
    pub pattern: DMatrix<f64>,
    pub loadings: DMatrix<f64>,
    /// Diagonal of `S`: `(1 + ||A_j||^2)^{-1/2}` when standardizing, else 1.
    pub scale: DVector<f64>,
}

impl ConfoundingDesign {
    /// `Some(scale)` under the standardized convention.
    pub fn scale_opt(&self) -> Option<&DVector<f64>> {
        self.standardize.then_some(&self.scale)
    }

    /// Quadratic form `v' Var(x) v` for the features as generated
    /// (`Var(x) = S (I + AA') S` or `I + AA'`).
    pub fn var_x_quadratic(&self, v: &DVector<f64>) -> f64 {
        let sv = match self.scale_opt() {
            Some(s) => v.component_mul(s),
            None => v.clone(),
        };
        let at = self.loadings.tr_mul(&sv);
        sv.norm_squared() + at.norm_squared()
    }

    /// Diagonal of `Var(x)`.
    pub fn var_x_diagonal(&self) -> DVector<f64> {
        DVector::from_fn(self.p, |j, _| {
            let row = self.loadings.row(j).norm_squared();
            let s = self.scale[j];
            s * s * (1.0 + row)
        })
    }

    /// Same structure at a different loading magnitude.
    pub fn with_magnitude(&self, a: f64) -> Result<ConfoundingDesign> {
        from_pattern(self.pattern.clone(), a, self.standardize, self.block_size)
    }
}

/// Balanced-sign block design with `q` disjoint blocks of `m = p / q` rows.
pub fn build_design(p: usize, q: usize, a: f64, standardize: bool) -> Result<ConfoundingDesign> {
    build_design_with(p, q, a, standardize, BlockSigns::Strict)
}

pub fn build_design_with(
    p: usize,
    q: usize,
    a: f64,
    standardize: bool,
    signs: BlockSigns,
) -> Result<ConfoundingDesign> {
    if p == 0 || q == 0 {
        return Err(Error::Dimension("p and q must be positive".into()));
    }
    if p % q != 0 {
        return Err(Error::Dimension(format!("q = {q} does not divide p = {p}")));
    }
    let m = p / q;
    if m % 2 == 1 && (signs == BlockSigns::Strict || m == 1) {
        return Err(Error::Dimension(format!(
            "block size p/q = {m} is odd; balanced signs need an even block size"
        )));
    }
    let mut pattern = DMatrix::zeros(p, q);
    for c in 0..q {
        let positives = if m % 2 == 0 {
            m / 2
        } else if c % 2 == 0 {
            m / 2 + 1
        } else {
            m / 2
        };
        for i in 0..m {
            pattern[(c * m + i, c)] = if i < positives { 1.0 } else { -1.0 };
        }
    }
    from_pattern(pattern, a, standardize, m)
}

/// Design with an arbitrary sign pattern scaled by `a`.
pub fn from_pattern(pattern: DMatrix<f64>, a: f64, standardize: bool, block_size: usize) -> Result<ConfoundingDesign> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("loading magnitude must be finite and >= 0, got {a}")));
    }
    let (p, q) = pattern.shape();
    let loadings = &pattern * a;
    let scale = DVector::from_fn(p, |j, _| {
        if standardize {
            (1.0 + loadings.row(j).norm_squared()).sqrt().recip()
        } else {
            1.0
        }
    });
    Ok(ConfoundingDesign {
        p,
        q,
        a,
        block_size,
        standardize,
        pattern,
        loadings,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_by_two_example() {
        let d = build_design(4, 2, 1.0, false).unwrap();
        let expected = DMatrix::from_row_slice(2, 4, &[1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0, -1.0]);
        assert_eq!(d.loadings.transpose(), expected);
        assert!(d.scale.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn eight_by_two_example() {
        let a = 0.7;
        let d = build_design(8, 2, a, true).unwrap();
        let expected = DMatrix::from_row_slice(
            2,
            8,
            &[a, a, -a, -a, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, a, a, -a, -a],
        );
        assert_eq!(d.loadings.transpose(), expected);
        let s = (1.0 + a * a).sqrt().recip();
        assert!(d.scale.iter().all(|&v| (v - s).abs() < 1e-15));
    }

    #[test]
    fn zero_loading() {
        let d = build_design(4, 2, 0.0, true).unwrap();
        assert_eq!(d.loadings.amax(), 0.0);
        assert!(d.scale.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn block_invariants() {
        let d = build_design(60, 5, 0.3, true).unwrap();
        for c in 0..5 {
            let col = d.loadings.column(c);
            assert_eq!(col.iter().filter(|v| **v == 0.3).count(), 6);
            assert_eq!(col.iter().filter(|v| **v == -0.3).count(), 6);
        }
        for j in 0..60 {
            assert_eq!(d.loadings.row(j).iter().filter(|v| **v != 0.0).count(), 1);
        }
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(build_design(10, 3, 1.0, true), Err(Error::Dimension(_))));
        assert!(matches!(build_design(10, 2, 1.0, true), Err(Error::Dimension(_))));
        assert!(matches!(build_design(8, 2, -1.0, true), Err(Error::Domain(_))));
    }

    #[test]
    fn alternating_layout_for_odd_blocks() {
        let d = build_design_with(10, 2, 1.0, false, BlockSigns::Alternating).unwrap();
        let col_sums: Vec<f64> = (0..2).map(|c| d.loadings.column(c).sum()).collect();
        assert_eq!(col_sums, vec![1.0, -1.0]);
        // even blocks are unaffected by the layout choice
        let a = build_design_with(8, 2, 1.0, false, BlockSigns::Alternating).unwrap();
        let b = build_design(8, 2, 1.0, false).unwrap();
        assert_eq!(a.loadings, b.loadings);
    }
}
