//! Dense symmetric linear algebra for small kernel systems.
//!
//! Neighborhood Gram matrices are a few dozen rows at most, so everything is
//! dense row-major `f64` with a plain Cholesky factorization.

use crate::error::{Error, Result};

/// A dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds a matrix from `f(i, j)` evaluated on the upper triangle and
    /// mirrored, so the result is symmetric bit for bit.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                if !v.is_finite() {
                    return Err(Error::NonFinite("matrix entry"));
                }
                data[i * dim + j] = v;
                data[j * dim + i] = v;
            }
        }
        Ok(SymMatrix { dim, data })
    }

    /// Builds from explicit rows; rejects anything not exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
        }
        for i in 0..dim {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::invalid(format!(
                        "matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Self::from_fn(dim, |i, j| rows[i][j])
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    /// `self * x`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok((0..self.dim).map(|i| dot(self.row(i), x)).collect())
    }

    /// `xᵀ · self · x`.
    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        Ok(dot(x, &self.mul_vec(x)?))
    }

    /// The principal submatrix on `indices` (in the given order).
    pub fn principal_submatrix(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.dim) {
            return Err(Error::invalid(format!(
                "index {bad} out of range for dimension {}",
                self.dim
            )));
        }
        Self::from_fn(indices.len(), |a, b| self.get(indices[a], indices[b]))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Square-root-free Cholesky factorization `K + shift·I = L D Lᵀ` with unit
/// lower-triangular `L` and positive diagonal `D`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    /// Strict lower triangle of `L`, row-major `dim × dim`.
    lower: Vec<f64>,
    diag: Vec<f64>,
}

impl Cholesky {
    pub fn factor(k: &SymMatrix, shift: f64) -> Result<Self> {
        let n = k.dim;
        let mut l = vec![0.0; n * n];
        let mut d = vec![0.0; n];
        // scratch: row j of L scaled by D
        let mut ld = vec![0.0; n];
        for j in 0..n {
            for p in 0..j {
                ld[p] = l[j * n + p] * d[p];
            }
            let mut dj = k.get(j, j) + shift;
            for p in 0..j {
                dj -= l[j * n + p] * ld[p];
            }
            if !(dj > 0.0) {
                return Err(Error::NotPositiveDefinite {
                    pivot: j,
                    value: dj,
                });
            }
            d[j] = dj;
            for i in (j + 1)..n {
                let mut v = k.get(i, j);
                for p in 0..j {
                    v -= l[i * n + p] * ld[p];
                }
                l[i * n + j] = v / dj;
            }
        }
        Ok(Cholesky {
            dim: n,
            lower: l,
            diag: d,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves `(K + shift·I) x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim;
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let l = &self.lower;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut sum = x[i];
            for j in 0..i {
                sum -= l[i * n + j] * x[j];
            }
            x[i] = sum;
        }
        for (xi, di) in x.iter_mut().zip(&self.diag) {
            *xi /= di;
        }
        for i in (0..n).rev() {
            let mut sum = x[i];
            for j in (i + 1)..n {
                sum -= l[j * n + i] * x[j];
            }
            x[i] = sum;
        }
        Ok(x)
    }
}

/// Computes `(K + λI)⁻¹ b`.
pub fn ridge_solve(k: &SymMatrix, lambda: f64, b: &[f64]) -> Result<Vec<f64>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "regularization must be positive, got {lambda}"
        )));
    }
    if b.len() != k.dim {
        return Err(Error::DimensionMismatch {
            expected: k.dim,
            found: b.len(),
        });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("right-hand side"));
    }
    let x = Cholesky::factor(k, lambda)?.solve(b)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ridge solution"));
    }
    Ok(x)
}

/// A lower bound (up to rounding) on the smallest eigenvalue of `k`, from
/// cyclic Jacobi rotations run to convergence.
pub fn min_eigenvalue_lower_bound(k: &SymMatrix) -> f64 {
    symmetric_eigenvalues(k)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// All eigenvalues of a symmetric matrix via the cyclic Jacobi method.
pub(crate) fn symmetric_eigenvalues(k: &SymMatrix) -> Vec<f64> {
    let n = k.dim;
    let mut a = k.data.clone();
    let scale: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    a[r * n + p] = c * arp - s * arq;
                    a[r * n + q] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[p * n + r];
                    let aqr = a[q * n + r];
                    a[p * n + r] = c * apr - s * aqr;
                    a[q * n + r] = s * apr + c * aqr;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussian_gram(xs: &[f64]) -> SymMatrix {
        SymMatrix::from_fn(xs.len(), |i, j| (-(xs[i] - xs[j]).powi(2)).exp()).unwrap()
    }

    fn residual_inf(k: &SymMatrix, lambda: f64, x: &[f64], b: &[f64]) -> f64 {
        let kx = k.mul_vec(x).unwrap();
        kx.iter()
            .zip(x)
            .zip(b)
            .map(|((kx, x), b)| (kx + lambda * x - b).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn scalar_ridge() {
        let k = SymMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert_eq!(ridge_solve(&k, 1.0, &[2.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn diagonal_ridge() {
        let k = SymMatrix::identity(3).unwrap();
        let x = ridge_solve(&k, 0.5, &[3.0, 3.0, 3.0]).unwrap();
        for v in x {
            assert!((v - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_gram_residual() {
        let xs = [-0.9, -0.3, 0.1, 0.45, 0.8];
        let k = gaussian_gram(&xs);
        let b = [0.3, -1.2, 2.0, 0.7, -0.4];
        let x = ridge_solve(&k, 0.01, &b).unwrap();
        assert!(residual_inf(&k, 0.01, &x, &b) <= 1e-8 * (1.0 + 2.0));
    }

    #[test]
    fn ridge_errors() {
        let k = SymMatrix::identity(2).unwrap();
        assert!(matches!(
            ridge_solve(&k, 1.0, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(ridge_solve(&k, 0.0, &[1.0, 1.0]).is_err());
        let neg = SymMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -3.0]]).unwrap();
        match ridge_solve(&neg, 1.0, &[1.0, 1.0]) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("expected factorization failure, got {other:?}"),
        }
    }

    #[test]
    fn from_rows_rejects_asymmetry() {
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.5, 1.0]]).is_err());
        assert!(SymMatrix::from_rows(&[]).is_err());
    }

    #[test]
    fn eigen_bound_examples() {
        let i2 = SymMatrix::identity(2).unwrap();
        let m = min_eigenvalue_lower_bound(&i2);
        assert!((0.999..=1.0 + 1e-12).contains(&m));

        let ones = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(min_eigenvalue_lower_bound(&ones).abs() <= 1e-9);
    }

    /// Smallest eigenvalue by bisection on the inertia of `K − μI`: the number
    /// of negative pivots in an unpivoted LDLᵀ equals the number of
    /// eigenvalues below μ.
    fn min_eig_by_inertia(k: &SymMatrix) -> f64 {
        let n = k.dim();
        let count_below = |mu: f64| {
            let mut a: Vec<Vec<f64>> = k.to_rows();
            for (i, row) in a.iter_mut().enumerate() {
                row[i] -= mu;
            }
            let mut neg = 0;
            for p in 0..n {
                let mut piv = a[p][p];
                if piv == 0.0 {
                    piv = -1e-300;
                }
                if piv < 0.0 {
                    neg += 1;
                }
                for i in (p + 1)..n {
                    let f = a[i][p] / piv;
                    for j in (p + 1)..n {
                        a[i][j] -= f * a[p][j];
                    }
                }
            }
            neg
        };
        let bound: f64 = (0..n)
            .map(|i| k.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let (mut lo, mut hi) = (-bound - 1.0, bound + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count_below(mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn eigen_bound_matches_inertia_oracle() {
        let k = gaussian_gram(&[-0.8, -0.1, 0.35, 0.9]);
        let oracle = min_eig_by_inertia(&k);
        let bound = min_eigenvalue_lower_bound(&k);
        assert!(bound >= -1e-9);
        assert!(bound <= oracle + 1e-9);
        assert!((bound - oracle).abs() < 1e-10, "{bound} vs {oracle}");
    }

    fn gram_strategy() -> impl Strategy<Value = (Vec<f64>, f64, Vec<f64>)> {
        (1usize..=20).prop_flat_map(|n| {
            (
                proptest::collection::vec(-2.0f64..2.0, n),
                1e-3f64..10.0,
                proptest::collection::vec(-5.0f64..5.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn ridge_residual_bound((xs, lambda, b) in gram_strategy()) {
            let k = gaussian_gram(&xs);
            let x = ridge_solve(&k, lambda, &b).unwrap();
            let binf = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!(residual_inf(&k, lambda, &x, &b) <= 1e-8 * (1.0 + binf));
        }

        #[test]
        fn ridge_is_linear((xs, lambda, b) in gram_strategy(), a in -3.0f64..3.0) {
            let k = gaussian_gram(&xs);
            let x = ridge_solve(&k, lambda, &b).unwrap();
            let ab: Vec<f64> = b.iter().map(|v| a * v).collect();
            let xa = ridge_solve(&k, lambda, &ab).unwrap();
            let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())) * a.abs();
            for (u, v) in xa.iter().zip(&x) {
                prop_assert!((u - a * v).abs() <= 1e-10 * scale.max(1e-300));
            }
            let zero = ridge_solve(&k, lambda, &vec![0.0; xs.len()]).unwrap();
            prop_assert!(zero.iter().all(|&v| v == 0.0));
        }
    }
}
