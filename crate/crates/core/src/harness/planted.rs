use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::rmt::{DenseMatrix, NoiseSpec};

/// `signal = sum_i spikes[i] u_i v_i^T` and `noisy = signal + N(0, sigma^2)`.
#[derive(Clone, Debug)]
pub struct PlantedMatrix {
    pub signal: DenseMatrix,
    pub noisy: DenseMatrix,
    /// Planted left vectors as columns (`m x r`); `None` when `r = 0`.
    pub left: Option<DenseMatrix>,
    pub right: Option<DenseMatrix>,
}

/// `k` orthonormal columns in `R^dim` (Gaussian draws, twice-orthogonalised
/// Gram-Schmidt), returned as a `dim x k` matrix.
pub fn random_orthonormal<R: Rng + ?Sized>(dim: usize, k: usize, rng: &mut R) -> Result<DenseMatrix> {
    if k == 0 || k > dim {
        return Err(Error::invalid("rank", format!("need 1 <= k <= {dim}, got {k}")));
    }
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k);
    while columns.len() < k {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        for _ in 0..2 {
            for q in &columns {
                let dot: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= dot * y;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            columns.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    Ok(DenseMatrix::from_parts(dim, k, (0..dim).flat_map(|r| columns.iter().map(move |c| c[r])).collect()))
}

pub fn make_planted_matrix<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    spikes: &[f64],
    noise: NoiseSpec,
    rng: &mut R,
) -> Result<PlantedMatrix> {
    let r = spikes.len();
    if m == 0 || n == 0 {
        return Err(Error::EmptyMatrix { rows: m, cols: n });
    }
    if r > m.min(n) {
        return Err(Error::invalid("rank", format!("rank {r} exceeds min({m}, {n})")));
    }
    if spikes.iter().any(|&s| !(s > 0.0 && s.is_finite())) || spikes.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::invalid("spikes", "must be positive, finite and strictly decreasing"));
    }

    let (signal, left, right) = if r == 0 {
        (DenseMatrix::zeros(m, n), None, None)
    } else {
        let u = random_orthonormal(m, r, rng)?;
        let v = random_orthonormal(n, r, rng)?;
        let mut data = vec![0.0; m * n];
        for (i, &s) in spikes.iter().enumerate() {
            for row in 0..m {
                let a = s * u.get(row, i);
                for col in 0..n {
                    data[row * n + col] += a * v.get(col, i);
                }
            }
        }
        (DenseMatrix::from_parts(m, n, data), Some(u), Some(v))
    };

    let normal = Normal::new(0.0, noise.sigma()).map_err(|e| Error::invalid("sigma", e.to_string()))?;
    let noisy: Vec<f64> = signal.as_slice().iter().map(|x| x + normal.sample(rng)).collect();
    Ok(PlantedMatrix { noisy: DenseMatrix::from_parts(m, n, noisy), signal, left, right })
}
