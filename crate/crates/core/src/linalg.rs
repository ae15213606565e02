//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

/// Eigenvalues of a symmetric matrix in descending order, with matching
/// eigenvectors as columns.
pub fn sorted_symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub fn symmetric_extremes(m: DMatrix<f64>) -> (f64, f64) {
    let values = m.symmetric_eigenvalues();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Ratio of largest to smallest singular value; infinite for rank-deficient input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

/// `cols` orthonormal columns in dimension `dim` (Haar-distributed for a
/// square result): QR of a Gaussian matrix with the sign of R's diagonal
/// folded back into Q.
pub fn random_orthonormal<R: Rng + ?Sized>(dim: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    assert!(cols <= dim);
    let qr = gaussian_matrix(dim, cols, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Normalised Sylvester-Hadamard matrix; `dim` must be a power of two.
pub fn hadamard(dim: usize) -> DMatrix<f64> {
    assert!(dim.is_power_of_two());
    let scale = 1.0 / (dim as f64).sqrt();
    DMatrix::from_fn(
        dim,
        dim,
        |i, j| {
            if (i & j).count_ones() % 2 == 0 {
                scale
            } else {
                -scale
            }
        },
    )
}

/// `min_{z = ±1} ||z a - b||_2`.
pub fn signed_distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let plus = (a - b).norm();
    let minus = (a + b).norm();
    plus.min(minus)
}
