//! Dense complex linear algebra helpers shared across the crate.
//!
//! Everything here is a thin layer over nalgebra's SVD/LU on
//! `DMatrix<Complex64>`; sizes are desk-scale so no sparsity is attempted.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative singular-value cutoff used for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s != Complex64::ZERO {
                for p in 0..br {
                    for q in 0..bc {
                        out[(i * br + p, j * bc + q)] = s * b[(p, q)];
                    }
                }
            }
        }
    }
    out
}

/// Column-major vectorization.
pub fn vec_of(m: &CMatrix) -> CVector {
    CVector::from_iterator(m.nrows() * m.ncols(), m.iter().cloned())
}

/// Inverse of [`vec_of`]: reshape a column-major vector into an `r x c` matrix.
pub fn unvec(v: &CVector, r: usize, c: usize) -> CMatrix {
    assert_eq!(v.len(), r * c, "unvec shape mismatch");
    CMatrix::from_iterator(r, c, v.iter().cloned())
}

/// Matrix of `X -> A X - X B` acting on column-major `vec(X)`,
/// i.e. `I ⊗ A - Bᵀ ⊗ I`.
pub fn sylvester_lhs(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let m = b.nrows();
    let eye_m = CMatrix::identity(m, m);
    let eye_n = CMatrix::identity(n, n);
    kron(&eye_m, a) - kron(&b.transpose(), &eye_n)
}

/// Summary of an SVD-based solve.
#[derive(Debug, Clone)]
pub struct SvdInfo {
    pub rank: usize,
    pub nullity: usize,
    pub sigma_max: f64,
    pub sigma_min_nonzero: f64,
}

impl SvdInfo {
    pub fn condition(&self) -> f64 {
        if self.rank == 0 {
            0.0
        } else {
            self.sigma_max / self.sigma_min_nonzero
        }
    }
}

fn svd_of(a: &CMatrix) -> nalgebra::SVD<Complex64, nalgebra::Dyn, nalgebra::Dyn> {
    a.clone().svd(true, true)
}

fn rank_of(svals: &[f64], tol_rel: f64) -> usize {
    let smax = svals.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    svals.iter().filter(|&&s| s > tol_rel * smax).count()
}

/// Minimum-norm least-squares solution of `A x = b` through the SVD,
/// with tolerance-rank truncation.
pub fn lsq_min_norm(a: &CMatrix, b: &CVector) -> (CVector, SvdInfo) {
    let svd = svd_of(a);
    let svals = svd.singular_values.as_slice();
    let rank = rank_of(svals, RANK_TOL);
    let smax = svals.iter().cloned().fold(0.0_f64, f64::max);
    let smin = if rank == 0 { 0.0 } else { svals[rank - 1] };
    let u = svd.u.as_ref().expect("svd u");
    let vt = svd.v_t.as_ref().expect("svd v_t");
    let mut y = u.adjoint() * b;
    for i in 0..y.len() {
        if i < rank {
            y[i] /= Complex64::new(svals[i], 0.0);
        } else {
            y[i] = Complex64::ZERO;
        }
    }
    let x = vt.adjoint() * y;
    let info = SvdInfo {
        rank,
        nullity: a.ncols() - rank,
        sigma_max: smax,
        sigma_min_nonzero: smin,
    };
    (x, info)
}

/// Orthonormal basis of the null space of `A` (columns), with solve info.
pub fn nullspace(a: &CMatrix) -> (CMatrix, SvdInfo) {
    let svd = svd_of(a);
    let svals = svd.singular_values.as_slice();
    let rank = rank_of(svals, RANK_TOL);
    let smax = svals.iter().cloned().fold(0.0_f64, f64::max);
    let smin = if rank == 0 { 0.0 } else { svals[rank - 1] };
    let vt = svd.v_t.as_ref().expect("svd v_t");
    let v = vt.adjoint();
    let basis = v.columns(rank, v.ncols() - rank).into_owned();
    let info = SvdInfo {
        rank,
        nullity: a.ncols() - rank,
        sigma_max: smax,
        sigma_min_nonzero: smin,
    };
    (basis, info)
}

/// Orthonormal basis of the range of `A` (columns).
pub fn range_basis(a: &CMatrix) -> (CMatrix, SvdInfo) {
    let svd = svd_of(a);
    let svals = svd.singular_values.as_slice();
    let rank = rank_of(svals, RANK_TOL);
    let smax = svals.iter().cloned().fold(0.0_f64, f64::max);
    let smin = if rank == 0 { 0.0 } else { svals[rank - 1] };
    let u = svd.u.as_ref().expect("svd u");
    let basis = u.columns(0, rank).into_owned();
    let info = SvdInfo {
        rank,
        nullity: a.ncols() - rank,
        sigma_max: smax,
        sigma_min_nonzero: smin,
    };
    (basis, info)
}

/// Singular values of `A`, descending.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    a.clone().singular_values().as_slice().to_vec()
}

/// 2-norm condition number (via SVD; `inf` when numerically singular).
pub fn condition_number(a: &CMatrix) -> f64 {
    let sv = singular_values(a);
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin <= smax * 1e-300 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Inverse through LU; errors when the factorization finds the matrix singular.
pub fn try_inverse(a: &CMatrix, what: &str) -> Result<CMatrix> {
    a.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::NearSingular(format!("{what} is not invertible at this truncation")))
}

/// Least-squares slope of `y` against `x` (both already in the scale the
/// caller wants, typically log-log).
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        num += (xi - mx) * (yi - my);
        den += (xi - mx) * (xi - mx);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn kron_and_vec_are_consistent() {
        let a = CMatrix::from_row_slice(2, 2, &[cx(1.0, 0.0), cx(2.0, 1.0), cx(0.0, 0.0), cx(3.0, -1.0)]);
        let b = CMatrix::from_row_slice(2, 2, &[cx(0.5, 0.0), cx(0.0, 1.0), cx(1.0, 0.0), cx(2.0, 0.0)]);
        let x = CMatrix::from_row_slice(2, 2, &[cx(1.0, 1.0), cx(-1.0, 0.0), cx(0.0, 2.0), cx(4.0, 0.0)]);
        let lhs = sylvester_lhs(&a, &b);
        let direct = &a * &x - &x * &b;
        let err = (lhs * vec_of(&x) - vec_of(&direct)).norm();
        assert!(err < 1e-12, "vectorized sylvester mismatch: {err}");
    }

    #[test]
    fn min_norm_solution_is_orthogonal_to_nullspace() {
        // Rank-deficient 2x3 system.
        let a = CMatrix::from_row_slice(
            2,
            3,
            &[cx(1.0, 0.0), cx(0.0, 0.0), cx(1.0, 0.0), cx(0.0, 0.0), cx(1.0, 0.0), cx(1.0, 0.0)],
        );
        let b = CVector::from_vec(vec![cx(1.0, 0.0), cx(2.0, 0.0)]);
        let (x, info) = lsq_min_norm(&a, &b);
        assert_eq!(info.rank, 2);
        let (null, _) = nullspace(&a);
        let overlap = (null.adjoint() * &x).norm();
        assert!(overlap < 1e-12, "solution not minimum norm: {overlap}");
        let res = (&a * &x - &b).norm();
        assert!(res < 1e-12);
    }

    #[test]
    fn fit_slope_recovers_power_law() {
        let x: Vec<f64> = (1..6).map(|k| (k as f64).ln()).collect();
        let y: Vec<f64> = (1..6).map(|k| 0.5 * (k as f64).ln() + 3.0).collect();
        assert!((fit_slope(&x, &y) - 0.5).abs() < 1e-12);
    }
}
