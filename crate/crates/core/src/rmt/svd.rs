use nalgebra::linalg::SVD;

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Thin singular value decomposition `A = sum_i s_i u_i v_i^T`.
///
/// Values are non-increasing. Columns of `left` (m x k) and `right` (n x k)
/// are orthonormal, with `k = min(m, n)`. Each left vector is signed so that
/// its largest-magnitude entry is positive; the paired right vector is
/// flipped with it.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub singular_values: Vec<f64>,
    pub left: DenseMatrix,
    pub right: DenseMatrix,
}

impl SvdFactors {
    pub fn rank_capacity(&self) -> usize {
        self.singular_values.len()
    }

    pub fn left_vector(&self, i: usize) -> Vec<f64> {
        self.left.column(i)
    }

    pub fn right_vector(&self, i: usize) -> Vec<f64> {
        self.right.column(i)
    }

    /// `sum_i coeffs[i] * u_i v_i^T`; indices past `coeffs.len()` contribute
    /// nothing.
    pub fn reconstruct_with(&self, coeffs: &[f64]) -> DenseMatrix {
        let m = self.left.rows();
        let n = self.right.rows();
        let mut out = vec![0.0; m * n];
        for (i, &c) in coeffs.iter().enumerate().take(self.rank_capacity()) {
            if c == 0.0 {
                continue;
            }
            let v = self.right.column(i);
            for r in 0..m {
                let a = c * self.left.get(r, i);
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out[r * n..(r + 1) * n].iter_mut().zip(&v) {
                    *o += a * b;
                }
            }
        }
        DenseMatrix::from_parts(m, n, out)
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.reconstruct_with(&self.singular_values)
    }
}

fn max_iterations(rows: usize, cols: usize) -> usize {
    200 * rows.min(cols).max(1) + 1000
}

/// Full thin SVD with sorted values and the sign convention above.
pub fn svd(matrix: &DenseMatrix) -> Result<SvdFactors> {
    let (rows, cols) = matrix.shape();
    let decomposition = SVD::try_new(
        matrix.to_nalgebra(),
        true,
        true,
        f64::EPSILON,
        max_iterations(rows, cols),
    )
    .ok_or(Error::SvdNoConvergence { rows, cols })?;

    let u = decomposition.u.ok_or(Error::SvdNoConvergence { rows, cols })?;
    let v_t = decomposition.v_t.ok_or(Error::SvdNoConvergence { rows, cols })?;
    let values = decomposition.singular_values;
    let k = values.len();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let mut left = vec![0.0; rows * k];
    let mut right = vec![0.0; cols * k];
    let mut singular_values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        singular_values.push(values[src].max(0.0));
        let pivot = (0..rows)
            .max_by(|&a, &b| u[(a, src)].abs().total_cmp(&u[(b, src)].abs()))
            .unwrap_or(0);
        let sign = if u[(pivot, src)] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..rows {
            left[r * k + dst] = sign * u[(r, src)];
        }
        for c in 0..cols {
            right[c * k + dst] = sign * v_t[(src, c)];
        }
    }

    if singular_values.iter().any(|s| !s.is_finite())
        || left.iter().chain(&right).any(|x| !x.is_finite())
    {
        return Err(Error::SvdNoConvergence { rows, cols });
    }

    Ok(SvdFactors {
        singular_values,
        left: DenseMatrix::from_parts(rows, k, left),
        right: DenseMatrix::from_parts(cols, k, right),
    })
}

/// Singular values only, non-increasing. Cheaper than [`svd`].
pub fn singular_values(matrix: &DenseMatrix) -> Result<Vec<f64>> {
    let (rows, cols) = matrix.shape();
    let decomposition =
        SVD::try_new(matrix.to_nalgebra(), false, false, f64::EPSILON, max_iterations(rows, cols))
            .ok_or(Error::SvdNoConvergence { rows, cols })?;
    let mut values: Vec<f64> = decomposition.singular_values.iter().map(|s| s.max(0.0)).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    if values.iter().any(|s| !s.is_finite()) {
        return Err(Error::SvdNoConvergence { rows, cols });
    }
    Ok(values)
}
