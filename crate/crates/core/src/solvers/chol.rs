//! Cholesky factor of a Gram submatrix, updated one column at a time.

use nalgebra::DVector;
#[cfg(test)]
use nalgebra::DMatrix;

pub(crate) enum Append {
    Added,
    /// The column is (numerically) in the span of the factored ones; holds
    /// `v` with `x_new = X_cols v`.
    Dependent(DVector<f64>),
}

#[derive(Debug, Clone, Default)]
pub(crate) struct GramCholesky {
    /// Feature index of each factored column, in factor order.
    pub cols: Vec<usize>,
    /// Row-major lower triangle; row i has i + 1 entries.
    rows: Vec<Vec<f64>>,
}

impl GramCholesky {
    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn position(&self, j: usize) -> Option<usize> {
        self.cols.iter().position(|&c| c == j)
    }

    /// `g` holds G(cols, j) in factor order, `gjj` the diagonal entry.
    pub fn append(&mut self, j: usize, g: &[f64], gjj: f64, rel_tol: f64) -> Append {
        let l = self.forward(g);
        let d2 = gjj - l.iter().map(|v| v * v).sum::<f64>();
        if !(d2 > rel_tol * gjj) {
            return Append::Dependent(self.backward(l));
        }
        let mut row = l;
        row.push(d2.sqrt());
        self.rows.push(row);
        self.cols.push(j);
        Append::Added
    }

    /// Drop the column at factor position `pos`, restoring triangularity
    /// with Givens rotations.
    pub fn remove(&mut self, pos: usize) {
        self.rows.remove(pos);
        self.cols.remove(pos);
        let k = self.rows.len();
        // rows pos.. now have one entry too many beyond the diagonal
        for c in pos..k {
            let (a, b) = (self.rows[c][c], self.rows[c][c + 1]);
            let r = a.hypot(b);
            let (cs, sn) = if r == 0.0 { (1.0, 0.0) } else { (a / r, b / r) };
            for row in self.rows[c..].iter_mut() {
                let (u, v) = (row[c], row[c + 1]);
                row[c] = cs * u + sn * v;
                row[c + 1] = -sn * u + cs * v;
            }
            self.rows[c][c] = r;
            self.rows[c].truncate(c + 1);
        }
    }

    /// Solve L z = b.
    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(b.len() + 1);
        for (i, row) in self.rows.iter().enumerate() {
            let s: f64 = row[..i].iter().zip(&z).map(|(a, b)| a * b).sum();
            z.push((b[i] - s) / row[i]);
        }
        z
    }

    /// Solve L^T x = z.
    fn backward(&self, mut z: Vec<f64>) -> DVector<f64> {
        let k = self.rows.len();
        for i in (0..k).rev() {
            z[i] /= self.rows[i][i];
            let zi = z[i];
            for (m, zm) in z.iter_mut().enumerate().take(i) {
                *zm -= self.rows[i][m] * zi;
            }
        }
        DVector::from_vec(z)
    }

    pub fn solve(&self, b: &[f64]) -> DVector<f64> {
        self.backward(self.forward(b))
    }

    #[cfg(test)]
    fn dense(&self) -> DMatrix<f64> {
        let k = self.len();
        let mut l = DMatrix::zeros(k, k);
        for (i, row) in self.rows.iter().enumerate() {
            for (m, v) in row.iter().enumerate() {
                l[(i, m)] = *v;
            }
        }
        &l * l.transpose()
    }
}
