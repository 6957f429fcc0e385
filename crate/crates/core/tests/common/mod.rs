#![allow(dead_code)]

use kt_core::rng::seeded_rng;
use kt_core::theory::gaussian_matrix;
use kt_core::{DataMatrix, LabeledDataset};
use nalgebra::DMatrix;

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    gaussian_matrix(rows, cols, &mut seeded_rng(seed))
}

pub fn data(rows: usize, cols: usize, seed: u64) -> DataMatrix {
    DataMatrix::new(gaussian(rows, cols, seed)).unwrap()
}

pub fn labeled(d: usize, c: usize, n: usize, seed: u64) -> LabeledDataset {
    LabeledDataset::new(data(d, n, seed), data(c, n, seed ^ 0x5eed)).unwrap()
}

pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Column-pivoted Gaussian elimination, independent of the library solvers.
pub fn gauss_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut x = b.clone();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[(i, k)].abs().total_cmp(&m[(j, k)].abs()))
            .unwrap();
        m.swap_rows(k, p);
        x.swap_rows(k, p);
        for i in k + 1..n {
            let f = m[(i, k)] / m[(k, k)];
            for j in k..n {
                m[(i, j)] -= f * m[(k, j)];
            }
            for j in 0..x.ncols() {
                x[(i, j)] -= f * x[(k, j)];
            }
        }
    }
    for k in (0..n).rev() {
        for j in 0..x.ncols() {
            let mut s = x[(k, j)];
            for i in k + 1..n {
                s -= m[(k, i)] * x[(i, j)];
            }
            x[(k, j)] = s / m[(k, k)];
        }
    }
    x
}
