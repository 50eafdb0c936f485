//! Small complex linear-algebra helpers shared by the precoder builders.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// Relative tolerance for numerical rank decisions in the orthogonal
/// factorizations below; scaled by the Frobenius norm of the input.
pub const RANK_REL_TOL: f64 = 1e-12;

/// Invert a lower-triangular matrix by forward substitution.
/// Returns `None` if a diagonal entry is zero.
fn invert_lower_triangular(l: &CMatrix) -> Option<CMatrix> {
    let k = l.nrows();
    debug_assert_eq!(k, l.ncols());
    let mut inv = CMatrix::zeros(k, k);
    for col in 0..k {
        // Solve L x = e_col.
        for row in col..k {
            let mut s = if row == col {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            for m in col..row {
                s -= l[(row, m)] * inv[(m, col)];
            }
            let d = l[(row, row)];
            if d.norm() == 0.0 {
                return None;
            }
            inv[(row, col)] = s / d;
        }
    }
    Some(inv)
}

/// Right pseudo-inverse of a wide, full-row-rank matrix `a` (K x L, K <= L):
/// the minimum-norm `T` with `a T = I`. Built from a column-pivoted QR of
/// `a^H`, so rank decisions are deterministic given the tolerance.
///
/// Returns `None` when the numerical rank (diagonal of the triangular factor
/// against `RANK_REL_TOL * ||a||_F`) falls below K.
pub fn right_pseudo_inverse(a: &CMatrix) -> Option<CMatrix> {
    let k = a.nrows();
    let norm = a.norm();
    if k == 0 || norm == 0.0 || !norm.is_finite() {
        return None;
    }
    let tol = RANK_REL_TOL * norm;
    // a^H P = Q R  =>  a = P^T R^H Q^H  =>  a^+ = Q R^-H P^-1-on-columns.
    let (q, r, p) = a.adjoint().col_piv_qr().unpack();
    for i in 0..k {
        if r[(i, i)].norm() <= tol {
            return None;
        }
    }
    let r_h_inv = invert_lower_triangular(&r.adjoint())?;
    let mut t = q * r_h_inv;
    p.inv_permute_columns(&mut t);
    Some(t)
}

/// Triangularizing factorization behind the ZF-THP precoder. Rows of `a`
/// (K x L) are taken in the prescribed sequence; the returned `q` (L x K) has
/// orthonormal columns and `a q = r^H` is lower triangular, so row `i` of `a`
/// is orthogonal to columns `j > i` of `q`. Column `i`'s own gain is
/// `|r[(i,i)]|^2`.
///
/// Returns `None` when a diagonal entry of the triangular factor falls below
/// `RANK_REL_TOL * ||a||_F` (rank-deficient row sequence).
pub fn ordered_triangular_factor(a: &CMatrix) -> Option<(CMatrix, CMatrix)> {
    let k = a.nrows();
    let norm = a.norm();
    if k == 0 || norm == 0.0 || !norm.is_finite() {
        return None;
    }
    let tol = RANK_REL_TOL * norm;
    let (q, r) = a.adjoint().qr().unpack();
    for i in 0..k {
        if r[(i, i)].norm() <= tol {
            return None;
        }
    }
    Some((q, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::{rand_core::SeedableRng, ChaCha12Rng};

    pub fn random_cmatrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        CMatrix::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn lower_triangular_inverse() {
        let m = random_cmatrix(5, 5, 7).lower_triangle();
        let inv = invert_lower_triangular(&m).unwrap();
        let eye = &m * &inv;
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (eye[(i, j)] - Complex64::new(expect, 0.0)).norm() < 1e-12,
                    "L L^-1 not identity at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn right_pinv_is_right_inverse() {
        for seed in 0..8u64 {
            let a = random_cmatrix(3, 5, seed);
            let t = right_pseudo_inverse(&a).unwrap();
            let eye = &a * &t;
            for i in 0..3 {
                for j in 0..3 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (eye[(i, j)] - Complex64::new(expect, 0.0)).norm() < 1e-10,
                        "a a^+ not identity at ({i},{j}) for seed {seed}"
                    );
                }
            }
        }
    }

    #[test]
    fn right_pinv_rejects_rank_deficient() {
        let mut a = random_cmatrix(3, 5, 3);
        let row0 = a.row(0).into_owned();
        a.set_row(2, &row0);
        assert!(right_pseudo_inverse(&a).is_none());
    }

    #[test]
    fn ordered_factor_triangularizes() {
        let a = random_cmatrix(4, 6, 11);
        let (q, r) = ordered_triangular_factor(&a).unwrap();
        // Orthonormal columns.
        let qtq = q.adjoint() * &q;
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[(i, j)] - Complex64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
        // a q lower triangular and equal to r^H.
        let eff = &a * &q;
        for i in 0..4 {
            for j in 0..4 {
                if j > i {
                    assert!(eff[(i, j)].norm() < 1e-12 * a.norm());
                }
                assert!((eff[(i, j)] - r[(j, i)].conj()).norm() < 1e-10);
            }
        }
    }
}
