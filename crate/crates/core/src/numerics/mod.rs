//! Dense linear algebra and optimization primitives.

mod adam;
mod matrix;
pub mod rng;
mod svd;

pub use adam::{adam_step, AdamState, DEFAULT_LEARNING_RATE};
pub use matrix::{cosine, dot, gemm, norm, Matrix, Op};
pub use rng::{derive_seed, derive_seed_str, SeedRng};
pub use svd::{svd, Svd, JACOBI_TOLERANCE, MAX_SWEEPS};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
}

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn finite_diff_grad<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let plus = f(&probe);
            probe[i] = x[i] - h;
            let minus = f(&probe);
            probe[i] = x[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// A random orthogonal `rows×cols` factor: `U·Vᵀ` from the SVD of a Gaussian matrix.
///
/// The result has orthonormal rows when `rows <= cols` and orthonormal columns otherwise.
pub fn random_orthogonal(rows: usize, cols: usize, rng: &mut SeedRng) -> Matrix {
    let g = rng.normal_matrix(rows, cols, 1.0);
    let f = svd(&g).expect("gaussian matrix is finite and non-empty");
    f.u.matmul_t(&f.v).expect("svd factors have consistent shapes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_difference_of_quadratic() {
        let g = finite_diff_grad(|x| x.iter().map(|v| v * v).sum(), &[1.0, 2.0], 1e-5);
        assert!((g[0] - 2.0).abs() < 1e-6);
        assert!((g[1] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn finite_difference_of_bilinear_form() {
        let g = finite_diff_grad(|x| x[0] * x[1], &[3.0, 5.0], 1e-5);
        assert!((g[0] - 5.0).abs() < 1e-6);
        assert!((g[1] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn random_orthogonal_rows() {
        let mut rng = SeedRng::new(1);
        let q = random_orthogonal(4, 16, &mut rng);
        let qqt = q.matmul_t(&q).unwrap();
        assert!(qqt.max_abs_diff(&Matrix::identity(4)) < 1e-10);
        let q = random_orthogonal(6, 6, &mut rng);
        assert!(q.t_matmul(&q).unwrap().max_abs_diff(&Matrix::identity(6)) < 1e-10);
    }
}
