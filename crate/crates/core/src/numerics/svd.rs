//! Thin singular value decomposition by one-sided Jacobi rotations.
//!
//! The input's columns are orthogonalized in place by plane rotations until
//! every pair is orthogonal to working precision; the column norms are then
//! the singular values and the accumulated rotations form `V`.

use super::{Matrix, NumericsError};

/// Off-diagonal Gram entries below this fraction of the column norms count as zero.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 60;

/// `m = U · diag(S) · Vᵀ` with `U: rows×k`, `V: cols×k`, `k = min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
    pub sweeps: usize,
    pub converged: bool,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for r in 0..us.rows() {
            for (c, s) in self.s.iter().enumerate() {
                let v = us.get(r, c) * s;
                us.set(r, c, v);
            }
        }
        us.matmul_t(&self.v).expect("svd factors have consistent shapes")
    }
}

pub fn svd(m: &Matrix) -> Result<Svd, NumericsError> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(NumericsError::Shape(format!(
            "svd of an empty {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(NumericsError::NonFinite("svd input".into()));
    }
    if m.rows() < m.cols() {
        let t = svd_tall(&m.transpose());
        return Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
            sweeps: t.sweeps,
            converged: t.converged,
        });
    }
    Ok(svd_tall(m))
}

/// Requires `rows >= cols`.
fn svd_tall(m: &Matrix) -> Svd {
    let rows = m.rows();
    let n = m.cols();
    // Column j of the working matrix is stored contiguously as row j.
    let mut cols = m.transpose().into_vec();
    let mut v = Matrix::identity(n).into_vec();

    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let cp = &cols[p * rows..(p + 1) * rows];
                    let cq = &cols[q * rows..(q + 1) * rows];
                    let mut a = 0.0;
                    let mut b = 0.0;
                    let mut g = 0.0;
                    for (x, y) in cp.iter().zip(cq) {
                        a += x * x;
                        b += y * y;
                        g += x * y;
                    }
                    (a, b, g)
                };
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= JACOBI_TOLERANCE * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, rows, p, q, c, s);
                rotate(&mut v, n, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }

    let mut order: Vec<(usize, f64)> = (0..n)
        .map(|j| (j, super::norm(&cols[j * rows..(j + 1) * rows])))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let s_max = order[0].1;
    let null_cutoff = s_max * (rows.max(n) as f64) * f64::EPSILON;

    let mut u = Matrix::zeros(rows, n);
    let mut vm = Matrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut null_columns = Vec::new();
    for (dst, &(src, sv)) in order.iter().enumerate() {
        s.push(sv);
        for r in 0..n {
            vm.set(r, dst, v[src * n + r]);
        }
        if sv > null_cutoff && sv > 0.0 {
            let col: Vec<f64> = cols[src * rows..(src + 1) * rows]
                .iter()
                .map(|x| x / sv)
                .collect();
            basis.push(col);
        } else {
            basis.push(Vec::new());
            null_columns.push(dst);
        }
    }
    complete_basis(&mut basis, &null_columns, rows);
    for (c, col) in basis.iter().enumerate() {
        for (r, x) in col.iter().enumerate() {
            u.set(r, c, *x);
        }
    }

    Svd {
        u,
        s,
        v: vm,
        sweeps,
        converged,
    }
}

/// Applies the rotation to vectors `p` and `q` of a row-stored set of length-`len` vectors.
fn rotate(buf: &mut [f64], len: usize, p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = buf.split_at_mut(q * len);
    let vp = &mut head[p * len..(p + 1) * len];
    let vq = &mut tail[..len];
    for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
        let a = *x;
        let b = *y;
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Fills the empty slots of `basis` with unit vectors orthogonal to every other slot.
fn complete_basis(basis: &mut [Vec<f64>], empty: &[usize], len: usize) {
    let mut candidate = 0;
    for &slot in empty {
        loop {
            assert!(candidate < len, "ran out of basis candidates");
            let mut v = vec![0.0; len];
            v[candidate] = 1.0;
            candidate += 1;
            // Two Gram-Schmidt passes keep the result orthogonal to working precision.
            for _ in 0..2 {
                for other in basis.iter().filter(|b| !b.is_empty()) {
                    let d = super::dot(&v, other);
                    v.iter_mut().zip(other).for_each(|(x, o)| *x -= d * o);
                }
            }
            let nv = super::norm(&v);
            if nv > 1e-6 {
                v.iter_mut().for_each(|x| *x /= nv);
                basis[slot] = v;
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::SeedRng;

    fn orthogonality_error(m: &Matrix) -> f64 {
        m.t_matmul(m)
            .unwrap()
            .max_abs_diff(&Matrix::identity(m.cols()))
    }

    fn relative_error(a: &Matrix, svd: &Svd) -> f64 {
        svd.reconstruct().sub(a).unwrap().frobenius_norm() / a.frobenius_norm()
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let out = svd(&Matrix::identity(3)).unwrap();
        assert_eq!(out.s, vec![1.0, 1.0, 1.0]);
        assert!(out.u.max_abs_diff(&Matrix::identity(3)) < 1e-15);
        assert!(out.v.max_abs_diff(&Matrix::identity(3)) < 1e-15);
    }

    #[test]
    fn diagonal_singular_values_sorted() {
        let out = svd(&Matrix::from_diag(&[1.0, 3.0, 2.0])).unwrap();
        assert_eq!(out.s, vec![3.0, 2.0, 1.0]);
        let out = svd(&Matrix::from_diag(&[3.0, 2.0, 1.0])).unwrap();
        assert_eq!(out.s, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn random_5x4_reconstructs() {
        let mut rng = SeedRng::new(11);
        let a = rng.normal_matrix(5, 4, 1.0);
        let out = svd(&a).unwrap();
        assert!(relative_error(&a, &out) < 1e-8);
        assert!(orthogonality_error(&out.u) < 1e-8);
        assert!(orthogonality_error(&out.v) < 1e-8);
        assert!(out.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn wide_matrices_go_through_the_transpose() {
        let mut rng = SeedRng::new(3);
        let a = rng.normal_matrix(3, 7, 1.0);
        let out = svd(&a).unwrap();
        assert_eq!(out.u.shape(), (3, 3));
        assert_eq!(out.v.shape(), (7, 3));
        assert!(relative_error(&a, &out) < 1e-8);
        assert!(orthogonality_error(&out.v) < 1e-8);
    }

    #[test]
    fn rank_deficient_still_has_orthonormal_factors() {
        let a = Matrix::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let out = svd(&a).unwrap();
        assert!(orthogonality_error(&out.u) < 1e-8);
        assert!(orthogonality_error(&out.v) < 1e-8);
        assert!(relative_error(&a, &out) < 1e-8);
        assert!(out.s[1] < 1e-12 && out.s[2] < 1e-12);

        let zero = svd(&Matrix::zeros(3, 2)).unwrap();
        assert!(orthogonality_error(&zero.u) < 1e-12);
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        let mut a = Matrix::identity(2);
        a.set(0, 1, f64::NAN);
        assert!(matches!(svd(&a), Err(NumericsError::NonFinite(_))));
        assert!(svd(&Matrix::zeros(0, 3)).is_err());
    }
}
