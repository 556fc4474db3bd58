//! Test oracles that share no code with the library's solvers.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sensornet::{KernelSpec, Point};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let p = a[col][col];
        assert!(p.abs() > 1e-300, "singular system in oracle");
        for row in (col + 1)..n {
            let f = a[row][col] / p;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

/// Kernel value written out from the textbook formulas.
pub fn kernel(spec: &KernelSpec, a: &[f64], b: &[f64]) -> f64 {
    let ip: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
    match *spec {
        KernelSpec::Linear => ip,
        KernelSpec::Affine { bias } => ip + bias,
        KernelSpec::Gaussian { bandwidth } => {
            let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
            (-d2 / (bandwidth * bandwidth)).exp()
        }
    }
}

pub fn gram(spec: &KernelSpec, pts: &[Point]) -> Vec<Vec<f64>> {
    pts.iter()
        .map(|a| {
            pts.iter()
                .map(|b| kernel(spec, a.coords(), b.coords()))
                .collect()
        })
        .collect()
}

/// Explicit feature map for the finite-dimensional kernels.
pub fn features(spec: &KernelSpec, x: &[f64]) -> Option<Vec<f64>> {
    match *spec {
        KernelSpec::Linear => Some(x.to_vec()),
        KernelSpec::Affine { bias } => {
            let mut v = x.to_vec();
            v.push(bias.sqrt());
            Some(v)
        }
        KernelSpec::Gaussian { .. } => None,
    }
}

pub fn random_points<R: Rng>(rng: &mut R, count: usize, dim: usize, half_width: f64) -> Vec<Point> {
    (0..count)
        .map(|_| {
            Point::new(
                (0..dim)
                    .map(|_| rng.random_range(-half_width..half_width))
                    .collect(),
            )
            .unwrap()
        })
        .collect()
}

/// Centralized ridge fit by elimination on `(K + λI)`.
pub fn ridge_oracle(spec: &KernelSpec, pts: &[Point], y: &[f64], lambda: f64) -> Vec<f64> {
    let mut a = gram(spec, pts);
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += lambda;
    }
    gauss_solve(a, y.to_vec())
}

pub fn expansion(spec: &KernelSpec, centers: &[Point], coeffs: &[f64], x: &[f64]) -> f64 {
    centers
        .iter()
        .zip(coeffs)
        .map(|(c, w)| w * kernel(spec, c.coords(), x))
        .sum()
}
