//! Small dense helpers shared by the model and the solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Column means and root mean squares after centering.
#[derive(Debug, Clone)]
pub struct ColumnScaling {
    pub means: DVector<f64>,
    pub scales: DVector<f64>,
}

/// Center every column to mean 0 and rescale to mean square 1
/// (`sum_i x_ij = 0`, `sum_i x_ij^2 / n = 1`).
pub fn standardize_columns(x: &DMatrix<f64>, names: Option<&[String]>) -> Result<(DMatrix<f64>, ColumnScaling)> {
    let (n, p) = x.shape();
    if n < 2 {
        return Err(Error::Dimension(format!("need at least 2 rows to standardize, got {n}")));
    }
    let mut out = x.clone();
    let mut means = DVector::zeros(p);
    let mut scales = DVector::zeros(p);
    for j in 0..p {
        let mut col = out.column_mut(j);
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        let ms = col.norm_squared() / n as f64;
        let scale = ms.sqrt();
        let max_abs = x.column(j).amax().max(mean.abs());
        if !(scale > 1e-12 * max_abs.max(1e-300)) {
            let name = names
                .and_then(|nm| nm.get(j).cloned())
                .unwrap_or_else(|| format!("x{}", j + 1));
            return Err(Error::ConstantColumn(name));
        }
        col /= scale;
        means[j] = mean;
        scales[j] = scale;
    }
    Ok((out, ColumnScaling { means, scales }))
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted descending.
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(m.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Largest absolute asymmetry `|m_ij - m_ji|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Symmetric PSD square root. Rejects matrices that are not symmetric PSD
/// within `tol` (relative to the largest entry).
pub fn psd_sqrt(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    let scale = m.amax().max(1.0);
    if asymmetry(m) > tol * scale {
        return Err(Error::Domain("covariance is not symmetric".into()));
    }
    let sym = (m + m.transpose()) * 0.5;
    let (vals, vecs) = sorted_symmetric_eigen(&sym);
    if vals.iter().any(|&v| v < -tol * scale) {
        return Err(Error::Domain("covariance is not positive semidefinite".into()));
    }
    let roots = vals.map(|v| v.max(0.0).sqrt());
    Ok(&vecs * DMatrix::from_diagonal(&roots) * vecs.transpose())
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population standard deviation (divisor n).
pub fn population_sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Rows of `x` at `idx`, in order.
pub fn select_rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)])
}

pub fn select_entries(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

pub fn ensure_finite_matrix(x: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn ensure_finite_vector(x: &DVector<f64>, what: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardized_columns_have_unit_mean_square() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 10.0, 2.0, 20.0, 3.0, 35.0, 6.0, 5.0]);
        let (z, sc) = standardize_columns(&x, None).unwrap();
        for j in 0..2 {
            let c = z.column(j);
            assert!(c.sum().abs() < 1e-12);
            assert!((c.norm_squared() / 4.0 - 1.0).abs() < 1e-12);
        }
        assert!((sc.means[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_column_is_named() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 4.0, 2.0, 4.0, 3.0, 4.0]);
        let names = vec!["a".to_string(), "b".to_string()];
        match standardize_columns(&x, Some(&names)) {
            Err(Error::ConstantColumn(c)) => assert_eq!(c, "b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = psd_sqrt(&m, 1e-8).unwrap();
        assert!((&r * &r - &m).amax() < 1e-12);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(psd_sqrt(&bad, 1e-8).is_err());
    }
}
