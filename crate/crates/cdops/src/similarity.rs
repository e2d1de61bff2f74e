//! Similarity decision procedures and intertwiner constructors for block
//! operators: the zero/multiplicity test for multiplication families, the
//! `I + K` correction recursion, diagonal reduction of upper-triangular
//! witnesses, curvature-difference certificates, the `U + K` normal form,
//! the two-condition witness check, and weak homogeneity under the Möbius
//! group.
//!
//! Convention: a witness `X` for "`T` similar to `T~`" satisfies
//! `X T = T~ X`; every `Similar` verdict carries its witness residual on the
//! edge-mask interior and the witness condition number.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cfb::{CfbOperator, EdgeMask};
use crate::curvature::{curvature_rank1_at, dd_bar_log_at, sff_generalized, CurvatureMethod};
use crate::error::{Error, Result};
use crate::kernels::{DiagonalKernel, DiskPoint};
use crate::linalg::{condition_number, lsq_min_norm, sylvester_lhs, try_inverse, unvec, vec_of, CMatrix, CVector};
use crate::series;
use crate::shifts::section;
use crate::symbols::{
    composition_operator, multiplication_operator, symbol_operator, zeros_in_disk, AnalyticSymbol,
    MobiusMap, RatioBound, RootLocation,
};

/// Residual cap (relative) for accepting a witness.
const WITNESS_RESIDUAL_CAP: f64 = 1e-8;
/// Condition-number cap for accepting a witness.
const WITNESS_COND_CAP: f64 = 1e6;
/// Stencil residual cap for the curvature-difference checks.
const CURVATURE_RESIDUAL_CAP: f64 = 1e-5;
/// Pointwise cap for the second-fundamental-form ratio condition.
const SFF_RESIDUAL_CAP: f64 = 1e-6;
/// Residual cap for a Möbius intertwiner at truncation.
const MOBIUS_RESIDUAL_CAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimStatus {
    Similar,
    NotSimilar,
    Inconclusive,
}

/// An accepted intertwiner with its quality numbers.
#[derive(Debug, Clone)]
pub struct WitnessReport {
    pub x: CMatrix,
    pub condition: f64,
    /// `||X T - T~ X||` on the edge-mask interior, relative to
    /// `||X|| ||T||`.
    pub interior_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SimilarityVerdict {
    pub status: SimStatus,
    pub witness: Option<WitnessReport>,
    pub obstruction: Option<String>,
    pub notes: Vec<String>,
}

impl SimilarityVerdict {
    fn inconclusive(note: impl Into<String>) -> Self {
        SimilarityVerdict {
            status: SimStatus::Inconclusive,
            witness: None,
            obstruction: None,
            notes: vec![note.into()],
        }
    }
}

fn interior_residual(
    x: &CMatrix,
    t: &CMatrix,
    t_tilde: &CMatrix,
    edge: &EdgeMask,
    block_dim: usize,
) -> f64 {
    let r = x * t - t_tilde * x;
    edge.interior_frobenius(&r, block_dim) / (x.norm() * t.norm()).max(1e-300)
}

fn combined_mask(a: &EdgeMask, b: &EdgeMask) -> EdgeMask {
    EdgeMask {
        interior: a
            .interior
            .iter()
            .zip(&b.interior)
            .map(|(x, y)| *x.min(y))
            .collect(),
    }
}

/// Series of `phi_tilde / phi` with the common interior zeros cancelled:
/// both polynomials are deflated by their (matching) interior roots and the
/// remaining exterior-root polynomials are divided as power series, which
/// then converge geometrically on the closed disk.
fn bounded_ratio_series(
    phi: &AnalyticSymbol,
    phi_tilde: &AnalyticSymbol,
    n: usize,
) -> Result<Vec<Complex64>> {
    fn deflate(p: &AnalyticSymbol) -> Result<Vec<Complex64>> {
        let mut coeffs = p.coeffs().to_vec();
        for z in zeros_in_disk(p)? {
            if z.location == RootLocation::Interior {
                for _ in 0..z.multiplicity {
                    // Synthetic division by (z - root).
                    let mut q = vec![Complex64::ZERO; coeffs.len() - 1];
                    let mut carry = Complex64::ZERO;
                    for k in (0..coeffs.len() - 1).rev() {
                        let c = coeffs[k + 1] + carry;
                        q[k] = c;
                        carry = c * z.root;
                    }
                    coeffs = q;
                }
            }
        }
        Ok(coeffs)
    }
    let num = deflate(phi_tilde)?;
    let den = deflate(phi)?;
    series::div(&num, &den, n)
}

/// Similarity decision for two operators with equal kernel chains and
/// polynomial superdiagonal symbols: similar exactly when every
/// superdiagonal ratio is bounded both ways, in which case the block-diagonal
/// witness `X_i = M*_{sigma_i}`, `sigma_i = prod_{k >= i} phi~_k / phi_k`, is
/// built and verified (with an `I + K` correction when cofactors differ).
pub fn decide_multiplication_family(
    t: &CfbOperator,
    t_tilde: &CfbOperator,
) -> Result<SimilarityVerdict> {
    if !t.same_shape(t_tilde) {
        return Err(Error::Precondition(
            "operators must share kernels, block count and truncation".into(),
        ));
    }
    let n = t.block_count();
    let nn = t.block_dim();
    for i in 0..n.saturating_sub(1) {
        if !t.superdiagonal_symbol(i).is_polynomial()
            || !t_tilde.superdiagonal_symbol(i).is_polynomial()
        {
            return Err(Error::Unsupported(
                "multiplication-family decision needs polynomial superdiagonals".into(),
            ));
        }
    }

    // Ratio test per superdiagonal.
    for i in 0..n.saturating_sub(1) {
        match ratio_bounded_both_ways(t.superdiagonal_symbol(i), t_tilde.superdiagonal_symbol(i))? {
            RatioBound::Bounded => {}
            RatioBound::Unbounded { obstruction } => {
                return Ok(SimilarityVerdict {
                    status: SimStatus::NotSimilar,
                    witness: None,
                    obstruction: Some(format!("superdiagonal {i}: {obstruction}")),
                    notes: vec![],
                });
            }
            RatioBound::Inconclusive { reason } => {
                return Ok(SimilarityVerdict::inconclusive(format!(
                    "superdiagonal {i}: {reason}"
                )));
            }
        }
    }

    // Block-diagonal witness from the cancelled ratios.
    let mut sigma = vec![vec![Complex64::ONE]; n];
    for i in (0..n.saturating_sub(1)).rev() {
        let ratio = bounded_ratio_series(
            t.superdiagonal_symbol(i),
            t_tilde.superdiagonal_symbol(i),
            nn,
        )?;
        sigma[i] = series::mul(&sigma[i + 1], &ratio, nn);
    }
    let mut x = CMatrix::zeros(n * nn, n * nn);
    for (i, s) in sigma.iter().enumerate() {
        let sym = AnalyticSymbol::truncated_series(s.clone(), 0.0);
        let block = symbol_operator(&sym, t.kernel(i), t.kernel(i), nn)?;
        x.view_mut((i * nn, i * nn), (nn, nn)).copy_from(&block);
    }

    // Cofactor mismatch is absorbed by the I + K recursion on the conjugated
    // operator.
    let mask = combined_mask(t.edge_mask(), t_tilde.edge_mask());
    let same_cofactors = t.cofactors() == t_tilde.cofactors();
    let x_full = if same_cofactors && t.is_bidiagonal() == t_tilde.is_bidiagonal() {
        x
    } else {
        let x_inv = try_inverse(&x, "diagonal witness")?;
        let a = &x * t.matrix() * x_inv;
        let rec = j21_blocks(&a, t_tilde.matrix(), n, nn, &mask, 1e-6)?;
        rec.x * x
    };

    let residual = interior_residual(&x_full, t.matrix(), t_tilde.matrix(), &mask, nn);
    let cond = condition_number(&x_full);
    if residual <= WITNESS_RESIDUAL_CAP && cond <= WITNESS_COND_CAP {
        Ok(SimilarityVerdict {
            status: SimStatus::Similar,
            witness: Some(WitnessReport {
                x: x_full,
                condition: cond,
                interior_residual: residual,
            }),
            obstruction: None,
            notes: vec![],
        })
    } else {
        Ok(SimilarityVerdict::inconclusive(format!(
            "ratio test passed but witness verification failed: residual {residual:.3e}, condition {cond:.3e}"
        )))
    }
}

fn ratio_bounded_both_ways(a: &AnalyticSymbol, b: &AnalyticSymbol) -> Result<RatioBound> {
    crate::symbols::ratio_bounded_both_ways(a, b)
}

/// Result of the anti-diagonal correction recursion.
#[derive(Debug, Clone)]
pub struct J21Report {
    /// The strictly upper block correction.
    pub k: CMatrix,
    /// `I + K`.
    pub x: CMatrix,
    /// Least-squares residual per solved block, labeled `(block row, stage)`.
    pub stage_residuals: Vec<(usize, usize, f64)>,
    /// `||(I+K) T - T~ (I+K)||` on the edge-mask interior, relative.
    pub interior_residual: f64,
}

/// `I + K` intertwiner for two operators with equal diagonals and equal
/// superdiagonal blocks, solved anti-diagonal by anti-diagonal.
///
/// Every block of `K` is constrained to the kernel of the matching
/// Sylvester-type map (the gauge freedom of the recursion; the minimum-norm
/// choice keeps the construction deterministic) while the reduced equation of
/// the next anti-diagonal determines it.
pub fn j21_intertwiner(t: &CfbOperator, t_tilde: &CfbOperator) -> Result<J21Report> {
    if !t.same_shape(t_tilde) {
        return Err(Error::Precondition(
            "operators must share kernels, block count and truncation".into(),
        ));
    }
    for i in 0..t.block_count() - 1 {
        let a = t.superdiagonal_symbol(i);
        let b = t_tilde.superdiagonal_symbol(i);
        let scale = a
            .coeffs()
            .iter()
            .chain(b.coeffs())
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        let len = a.coeffs().len().max(b.coeffs().len());
        let equal = (0..len).all(|k| {
            let x = a.coeffs().get(k).copied().unwrap_or(Complex64::ZERO);
            let y = b.coeffs().get(k).copied().unwrap_or(Complex64::ZERO);
            (x - y).norm() <= 1e-12 * scale.max(1.0)
        });
        if !equal {
            return Err(Error::Precondition(format!(
                "superdiagonal symbols differ at index {i}; the recursion requires equal diagonals and superdiagonals"
            )));
        }
    }
    let mask = combined_mask(t.edge_mask(), t_tilde.edge_mask());
    j21_blocks(
        t.matrix(),
        t_tilde.matrix(),
        t.block_count(),
        t.block_dim(),
        &mask,
        1e-10,
    )
}

fn block_of(m: &CMatrix, i: usize, j: usize, nn: usize) -> CMatrix {
    m.view((i * nn, j * nn), (nn, nn)).into_owned()
}

/// The recursion on raw blocked matrices. `precheck_tol` bounds the allowed
/// mismatch of diagonals and superdiagonals (relative, on interiors).
fn j21_blocks(
    t: &CMatrix,
    t_tilde: &CMatrix,
    n: usize,
    nn: usize,
    mask: &EdgeMask,
    precheck_tol: f64,
) -> Result<J21Report> {
    let scale = t.norm().max(t_tilde.norm()).max(1.0);
    for i in 0..n {
        let d = mask.interior[i].min(nn);
        let delta = (block_of(t, i, i, nn) - block_of(t_tilde, i, i, nn))
            .view((0, 0), (d, d))
            .norm();
        if delta > precheck_tol * scale {
            return Err(Error::Precondition(format!(
                "diagonal block {i} differs by {delta:.3e}"
            )));
        }
        if i + 1 < n {
            let delta = (block_of(t, i, i + 1, nn) - block_of(t_tilde, i, i + 1, nn))
                .view((0, 0), (d, d))
                .norm();
            if delta > precheck_tol * scale {
                return Err(Error::Precondition(format!(
                    "superdiagonal block {i} differs by {delta:.3e}"
                )));
            }
        }
    }

    let mut k_blocks: Vec<Vec<Option<CMatrix>>> = vec![vec![None; n]; n];
    let mut stage_residuals = Vec::new();
    let zero = CMatrix::zeros(nn, nn);

    for s in 1..n {
        // Gauge block at the right edge of the anti-diagonal.
        k_blocks[n - 1 - s][n - 1] = Some(zero.clone());
        if s == n - 1 {
            break;
        }
        // Descend the anti-diagonal; the equation at (i, i+s+1) determines
        // K_{i, i+s}.
        for i in (0..n - 1 - s).rev() {
            let j = i + s + 1;
            // R = T~_{i,j} - T_{i,j} + T_{i,i+1} K_{i+1,j}
            //     + sum_{l=2}^{s} T~_{i,i+l} K_{i+l,j}
            //     - sum_{l=1}^{s-1} K_{i,i+l} T_{i+l,j}.
            let mut r = block_of(t_tilde, i, j, nn) - block_of(t, i, j, nn);
            let k_next = k_blocks[i + 1][j]
                .clone()
                .expect("anti-diagonal ordering: K_{i+1,j} solved before K_{i,i+s}");
            r += block_of(t, i, i + 1, nn) * k_next;
            for l in 2..=s {
                let kb = k_blocks[i + l][j]
                    .clone()
                    .expect("lower anti-diagonals already solved");
                r += block_of(t_tilde, i, i + l, nn) * kb;
            }
            for l in 1..s {
                let kb = k_blocks[i][i + l]
                    .clone()
                    .expect("lower anti-diagonals already solved");
                r -= kb * block_of(t, i + l, j, nn);
            }
            // Solve K B = R with A K = K D, stacked least squares.
            let b = block_of(t, i + s, j, nn);
            let a = block_of(t, i, i, nn);
            let d = block_of(t, i + s, i + s, nn);
            let eq1 = crate::linalg::kron(&b.transpose(), &CMatrix::identity(nn, nn));
            let eq2 = sylvester_lhs(&a, &d);
            let rows = eq1.nrows() + eq2.nrows();
            let mut stacked = CMatrix::zeros(rows, nn * nn);
            stacked.view_mut((0, 0), (eq1.nrows(), nn * nn)).copy_from(&eq1);
            stacked
                .view_mut((eq1.nrows(), 0), (eq2.nrows(), nn * nn))
                .copy_from(&eq2);
            let mut rhs = CVector::zeros(rows);
            rhs.rows_mut(0, eq1.nrows()).copy_from(&vec_of(&r));
            let (sol, _) = lsq_min_norm(&stacked, &rhs);
            let kb = unvec(&sol, nn, nn);
            let res = ((&kb * &b) - &r).norm() / scale;
            stage_residuals.push((i, s, res));
            k_blocks[i][i + s] = Some(kb);
        }
    }

    let mut k = CMatrix::zeros(n * nn, n * nn);
    for i in 0..n {
        for j in i + 1..n {
            if let Some(kb) = &k_blocks[i][j] {
                k.view_mut((i * nn, j * nn), (nn, nn)).copy_from(kb);
            }
        }
    }
    let x = CMatrix::identity(n * nn, n * nn) + &k;
    let interior = interior_residual(&x, t, t_tilde, mask, nn);
    Ok(J21Report {
        k,
        x,
        stage_residuals,
        interior_residual: interior,
    })
}

/// Diagonal blocks of an upper-triangular intertwiner together with their
/// intertwining residuals for the diagonal and superdiagonal blocks.
#[derive(Debug, Clone)]
pub struct DiagonalReduction {
    pub x_ii: CMatrix,
    pub condition: f64,
    pub diagonal_residual: f64,
    pub superdiagonal_residual: Option<f64>,
}

/// Extract the diagonal of a block upper-triangular witness `X` with
/// `X T = T~ X` and verify the reduced relations
/// `X_i T_{i,i} = T~_{i,i} X_i` and `X_i T_{i,i+1} = T~_{i,i+1} X_{i+1}`.
pub fn j3_diagonal_reduction(
    t: &CfbOperator,
    t_tilde: &CfbOperator,
    x: &CMatrix,
) -> Result<Vec<DiagonalReduction>> {
    if !t.same_shape(t_tilde) {
        return Err(Error::Precondition(
            "operators must share kernels, block count and truncation".into(),
        ));
    }
    let n = t.block_count();
    let nn = t.block_dim();
    if x.nrows() != n * nn || x.ncols() != n * nn {
        return Err(Error::Precondition(format!(
            "witness is {}x{}, operators are {}x{}",
            x.nrows(),
            x.ncols(),
            n * nn,
            n * nn
        )));
    }
    let mut below = 0.0_f64;
    for bi in 1..n {
        for bj in 0..bi {
            below += x.view((bi * nn, bj * nn), (nn, nn)).norm_squared();
        }
    }
    let below = below.sqrt();
    if below > 1e-10 * x.norm() {
        return Err(Error::StructureViolation(format!(
            "witness has below-diagonal block mass {below:.3e}; upper-triangularity is forced for these operators"
        )));
    }
    let mask = combined_mask(t.edge_mask(), t_tilde.edge_mask());
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let xi = x.view((i * nn, i * nn), (nn, nn)).into_owned();
        let d = mask.interior[i];
        let diag_res = {
            let r = &xi * block_of(t.matrix(), i, i, nn) - block_of(t_tilde.matrix(), i, i, nn) * &xi;
            r.view((0, 0), (d, d)).norm() / (xi.norm() * t.matrix().norm()).max(1e-300)
        };
        let super_res = if i + 1 < n {
            let xj = x.view(((i + 1) * nn, (i + 1) * nn), (nn, nn)).into_owned();
            let dj = mask.interior[i + 1].min(d);
            let r = &xi * block_of(t.matrix(), i, i + 1, nn)
                - block_of(t_tilde.matrix(), i, i + 1, nn) * &xj;
            Some(r.view((0, 0), (dj, dj)).norm() / (xi.norm() * t.matrix().norm()).max(1e-300))
        } else {
            None
        };
        out.push(DiagonalReduction {
            condition: condition_number(&xi),
            x_ii: xi,
            diagonal_residual: diag_res,
            superdiagonal_residual: super_res,
        });
    }
    Ok(out)
}

/// Witness kinds for the curvature-difference similarity criterion.
#[derive(Debug, Clone)]
pub enum CurvatureWitness {
    /// A bounded bundle map `Phi`; the comparison function is
    /// `||Phi t||^2 / ||t||^2 + 1`.
    BundleMap(CMatrix),
    /// An intertwiner candidate `X`; it is rescaled so `Y = cX` has
    /// `Y*Y >= I` and the comparison function is `||Y t||^2 / ||t||^2`.
    Intertwiner(CMatrix),
    /// Unitary-case witness: a holomorphic symbol with
    /// `Psi(w) = |phi(w)|^2`.
    UnitarySymbol(AnalyticSymbol),
}

/// Certificate of the curvature-difference check.
#[derive(Debug, Clone)]
pub struct CurvatureMatchCertificate {
    pub points: Vec<Complex64>,
    pub psi: Vec<f64>,
    pub residual: Vec<f64>,
    pub max_abs_residual: f64,
    /// Max deviation of the conjugated curvature from the target curvature,
    /// when the positive-square-root witness path applies.
    pub conjugated_curvature_residual: Option<f64>,
}

fn hermitian_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut d = CMatrix::zeros(n, n);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l < -1e-10 {
            return Err(Error::InvalidWitness(format!(
                "matrix square root of an indefinite matrix (eigenvalue {l:.3e})"
            )));
        }
        d[(i, i)] = Complex64::new(l.max(0.0).sqrt(), 0.0);
    }
    Ok(&eig.eigenvectors * d * eig.eigenvectors.adjoint())
}

/// Curvature-difference similarity check between two rank-1 kernels with a
/// supplied witness.
///
/// The verdict is witness-relative: `NotSimilar` means this witness does not
/// certify similarity, not that no witness exists.
pub fn curvature_similarity_check(
    k1: &DiagonalKernel,
    k2: &DiagonalKernel,
    witness: &CurvatureWitness,
    points: &[DiskPoint],
    n: usize,
) -> Result<(CurvatureMatchCertificate, SimilarityVerdict)> {
    let psi_fn: Box<dyn Fn(Complex64) -> Result<f64>> = match witness {
        CurvatureWitness::BundleMap(phi) => {
            let phi = phi.clone();
            let k1 = k1.clone();
            Box::new(move |w: Complex64| {
                let p = DiskPoint::new(w)?;
                let tvec = section(&k1, &p, phi.ncols())?;
                let img = &phi * tvec.coords();
                Ok(img.norm_squared() / tvec.norm_squared() + 1.0)
            })
        }
        CurvatureWitness::Intertwiner(x) => {
            let smin = crate::linalg::singular_values(x)
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            if !(smin > 0.0) {
                return Err(Error::InvalidWitness("intertwiner witness is singular".into()));
            }
            let y = x * Complex64::new(1.01 / smin, 0.0);
            let k1 = k1.clone();
            Box::new(move |w: Complex64| {
                let p = DiskPoint::new(w)?;
                let tvec = section(&k1, &p, y.ncols())?;
                let img = &y * tvec.coords();
                Ok(img.norm_squared() / tvec.norm_squared())
            })
        }
        CurvatureWitness::UnitarySymbol(phi) => {
            let phi = phi.clone();
            Box::new(move |w: Complex64| Ok(phi.eval(w).norm_sqr()))
        }
    };

    let mut psi_vals = Vec::with_capacity(points.len());
    let mut residual = Vec::with_capacity(points.len());
    let mut max_abs: f64 = 0.0;
    for p in points {
        let w = p.value();
        let kk1 = curvature_rank1_at(k1, w, CurvatureMethod::Auto)?;
        let kk2 = curvature_rank1_at(k2, w, CurvatureMethod::Auto)?;
        let dd = dd_bar_log_at(&psi_fn, w)?;
        let r = kk1 - kk2 - dd;
        psi_vals.push(psi_fn(w)?);
        residual.push(r);
        max_abs = max_abs.max(r.abs());
    }

    // Square-root conjugation check: kappa of Y T1 Y^{-1} must match kappa
    // of T2 (the sufficiency route of the criterion).
    let conj_res = match witness {
        CurvatureWitness::UnitarySymbol(_) => None,
        CurvatureWitness::BundleMap(phi) => {
            let y2 = CMatrix::identity(n, n) + phi.adjoint() * phi;
            Some(conjugated_curvature_residual(&hermitian_sqrt(&y2)?, k1, k2, points)?)
        }
        CurvatureWitness::Intertwiner(x) => {
            let smin = crate::linalg::singular_values(x)
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            let y = x * Complex64::new(1.01 / smin, 0.0);
            Some(conjugated_curvature_residual(&y, k1, k2, points)?)
        }
    };

    let pass = max_abs <= CURVATURE_RESIDUAL_CAP
        && conj_res.map(|r| r <= CURVATURE_RESIDUAL_CAP).unwrap_or(true);
    let verdict = if pass {
        SimilarityVerdict {
            status: SimStatus::Similar,
            witness: None,
            obstruction: None,
            notes: vec![format!(
                "curvature-difference certificate: max residual {max_abs:.3e}"
            )],
        }
    } else {
        SimilarityVerdict {
            status: SimStatus::NotSimilar,
            witness: None,
            obstruction: Some(format!(
                "curvature mismatch for this witness: max residual {max_abs:.3e}{}",
                conj_res
                    .map(|r| format!(", conjugated-curvature residual {r:.3e}"))
                    .unwrap_or_default()
            )),
            notes: vec!["verdict is witness-relative".into()],
        }
    };
    Ok((
        CurvatureMatchCertificate {
            points: points.iter().map(|p| p.value()).collect(),
            psi: psi_vals,
            residual,
            max_abs_residual: max_abs,
            conjugated_curvature_residual: conj_res,
        },
        verdict,
    ))
}

fn conjugated_curvature_residual(
    y: &CMatrix,
    k1: &DiagonalKernel,
    k2: &DiagonalKernel,
    points: &[DiskPoint],
) -> Result<f64> {
    let n = y.ncols();
    let g = |w: Complex64| -> Result<f64> {
        let p = DiskPoint::new(w)?;
        let tvec = section(k1, &p, n)?;
        Ok((y * tvec.coords()).norm_squared())
    };
    let mut max_res: f64 = 0.0;
    for p in points {
        let w = p.value();
        let conj_curv = -dd_bar_log_at(&g, w)?;
        let target = curvature_rank1_at(k2, w, CurvatureMethod::Auto)?;
        max_res = max_res.max((conj_curv - target).abs());
    }
    Ok(max_res)
}

/// `U + K` normal form data of an invertible truncation.
#[derive(Debug, Clone)]
pub struct UkDecomposition {
    pub alpha: f64,
    pub x: CMatrix,
    /// Eigenvalue shifts `sqrt(alpha + lambda_k) - sqrt(alpha)` of the
    /// compact part.
    pub k1_spectrum: Vec<f64>,
    /// `||X*X + (1 - alpha) I - Y*Y||`.
    pub residual: f64,
}

/// Decompose `Y*Y = X*X + (1 - alpha) I` with `alpha` in `(0, 1)` and
/// `X = (alpha I + G)^{1/2}` built in the eigenbasis of `G = Y*Y - I`.
pub fn uk_decompose(y: &CMatrix) -> Result<UkDecomposition> {
    let n = y.nrows();
    if y.ncols() != n {
        return Err(Error::Precondition("square matrix required".into()));
    }
    let smin = crate::linalg::singular_values(y)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if !(smin > 1e-12) {
        return Err(Error::Precondition("Y must be invertible at truncation".into()));
    }
    let yty = y.adjoint() * y;
    let g = &yty - CMatrix::identity(n, n);
    let eig = g.clone().symmetric_eigen();
    let lambda_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let alpha_min = (-lambda_min).max(0.0);
    if alpha_min >= 1.0 - 1e-12 {
        return Err(Error::NotFound(
            "no admissible alpha in (0,1): not U+K-decomposable at this truncation".into(),
        ));
    }
    let alpha = (alpha_min + 1.0) / 2.0;
    let mut d = CMatrix::zeros(n, n);
    let mut spectrum = Vec::with_capacity(n);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        let v = (alpha + l).max(0.0).sqrt();
        d[(i, i)] = Complex64::new(v, 0.0);
        spectrum.push(v - alpha.sqrt());
    }
    let x = &eig.eigenvectors * d * eig.eigenvectors.adjoint();
    let residual = (x.adjoint() * &x + CMatrix::identity(n, n) * Complex64::new(1.0 - alpha, 0.0)
        - &yty)
        .norm();
    spectrum.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap());
    Ok(UkDecomposition {
        alpha,
        x,
        k1_spectrum: spectrum,
        residual,
    })
}

/// Report of the two-condition witness check.
#[derive(Debug, Clone)]
pub struct Main1Report {
    pub status: SimStatus,
    /// Max stencil residual of the curvature condition, per block.
    pub curvature_residuals: Vec<f64>,
    /// Max pointwise relative residual of the form-ratio condition, per
    /// superdiagonal.
    pub sff_residuals: Vec<f64>,
    pub notes: Vec<String>,
}

/// Check the two similarity conditions for supplied bundle-map witnesses
/// `Phi_i`: the curvature differences must be `dd̄ log phi_i` with
/// `phi_i = ||Phi_i t_i||^2 / ||t_i||^2 + 1`, and the comparison-function
/// ratios must carry the generalized second fundamental forms into each
/// other.
///
/// This is a witness checker, never a searcher: a failing witness yields
/// `Inconclusive`, not `NotSimilar`.
pub fn main1_witness_check(
    t: &CfbOperator,
    t_tilde: &CfbOperator,
    phis: &[CMatrix],
    points: &[DiskPoint],
) -> Result<Main1Report> {
    let n = t.block_count();
    if t_tilde.block_count() != n || t.block_dim() != t_tilde.block_dim() {
        return Err(Error::Precondition("block structure mismatch".into()));
    }
    if phis.len() != n {
        return Err(Error::Precondition(format!(
            "need one witness per block: {} given, {n} blocks",
            phis.len()
        )));
    }
    let nn = t.block_dim();

    let phi_fn = |i: usize, w: Complex64| -> Result<f64> {
        let p = DiskPoint::new(w)?;
        let tvec = section(t.kernel(i), &p, nn)?;
        let img = &phis[i] * tvec.coords();
        Ok(img.norm_squared() / tvec.norm_squared() + 1.0)
    };

    // Condition (1): curvature differences.
    let mut curvature_residuals = Vec::with_capacity(n);
    for i in 0..n {
        let mut max_res: f64 = 0.0;
        for p in points {
            let w = p.value();
            let kk = curvature_rank1_at(t.kernel(i), w, CurvatureMethod::Auto)?;
            let kk_t = curvature_rank1_at(t_tilde.kernel(i), w, CurvatureMethod::Auto)?;
            let dd = dd_bar_log_at(|z| phi_fn(i, z), w)?;
            max_res = max_res.max((kk - kk_t - dd).abs());
        }
        curvature_residuals.push(max_res);
    }

    // Condition (2): form ratios.
    let mut sff_residuals = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n - 1 {
        let theta_t = sff_generalized(t, i, points)?;
        let theta_tt = sff_generalized(t_tilde, i, points)?;
        let mut max_res: f64 = 0.0;
        for (j, p) in points.iter().enumerate() {
            let w = p.value();
            let ratio = phi_fn(i, w)? / phi_fn(i + 1, w)?;
            let lhs = ratio * theta_t.values[j];
            let rhs = theta_tt.values[j];
            max_res = max_res.max((lhs - rhs).abs() / (1.0 + rhs.abs()));
        }
        sff_residuals.push(max_res);
    }

    let ok1 = curvature_residuals.iter().all(|&r| r <= CURVATURE_RESIDUAL_CAP);
    let ok2 = sff_residuals.iter().all(|&r| r <= SFF_RESIDUAL_CAP);
    let status = if ok1 && ok2 {
        SimStatus::Similar
    } else {
        SimStatus::Inconclusive
    };
    let mut notes = Vec::new();
    if !ok1 {
        notes.push("curvature condition fails for this witness family".into());
    }
    if !ok2 {
        notes.push("form-ratio condition fails for this witness family".into());
    }
    if status == SimStatus::Similar {
        notes.push(
            "constructive chain: diagonal conjugation, unitary matching of the forms, then the I+K correction"
                .into(),
        );
    }
    Ok(Main1Report {
        status,
        curvature_residuals,
        sff_residuals,
        notes,
    })
}

/// Weak-homogeneity verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WhStatus {
    WeaklyHomogeneous,
    NotWeaklyHomogeneous,
    Inconclusive,
}

/// One verified Möbius sample.
#[derive(Debug, Clone)]
pub struct MobiusCheck {
    pub center: Complex64,
    pub phase: f64,
    /// Relative interior residual of `X phi(T*) - T* X`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct WeakHomogeneityReport {
    pub status: WhStatus,
    pub obstruction: Option<String>,
    pub checks: Vec<MobiusCheck>,
}

/// Decide weak homogeneity of a block operator with power-family kernels and
/// polynomial superdiagonal symbols, and construct the explicit Möbius
/// intertwiners from composition and multiplication factors when the symbols
/// are zero-free on the closed disk.
///
/// The operator is weakly homogeneous exactly when no superdiagonal symbol
/// vanishes on the closed disk; an interior zero refutes it, a boundary-band
/// zero cannot be certified either way. For each sample map `phi` the witness
/// `X = diag(M_{g_i} C_{phi^{-1}})`,
/// `g_i = prod_{l >= i} (psi_l ∘ phi^{-1})(phi' ∘ phi^{-1}) / psi_l`,
/// intertwines `phi(T*)` with `T*` on the bidiagonal part; block counts of
/// three or more need the `I + K` correction on top, mirroring the reduction
/// that justifies dropping the higher blocks in the first place.
pub fn weak_homogeneity(
    t: &CfbOperator,
    samples: &[MobiusMap],
) -> Result<WeakHomogeneityReport> {
    let n = t.block_count();
    // Power-family chain hypothesis.
    let lambdas: Vec<f64> = t
        .kernels()
        .iter()
        .map(|k| {
            k.lambda().ok_or_else(|| {
                Error::OutOfScopeParameters("weak homogeneity needs power-family kernels".into())
            })
        })
        .collect::<Result<_>>()?;
    for i in 0..n {
        if lambdas[i] < 1.0 {
            return Err(Error::OutOfScopeParameters(format!(
                "lambda_{i} = {} below 1",
                lambdas[i]
            )));
        }
        if i + 1 < n && !(lambdas[i] <= lambdas[i + 1] && lambdas[i + 1] < lambdas[i] + 2.0) {
            return Err(Error::OutOfScopeParameters(format!(
                "lambda chain violates 1 <= l_i <= l_{{i+1}} < l_i + 2 at {i}"
            )));
        }
    }
    for i in 0..n.saturating_sub(1) {
        if !t.superdiagonal_symbol(i).is_polynomial() {
            return Err(Error::Unsupported(
                "weak homogeneity decision needs polynomial superdiagonals".into(),
            ));
        }
    }

    // Zero test over the closed disk.
    let mut boundary_reason = None;
    for i in 0..n.saturating_sub(1) {
        let zs = zeros_in_disk(t.superdiagonal_symbol(i))?;
        if let Some(z) = zs.iter().find(|z| z.location == RootLocation::Interior) {
            return Ok(WeakHomogeneityReport {
                status: WhStatus::NotWeaklyHomogeneous,
                obstruction: Some(format!(
                    "superdiagonal symbol {i} vanishes at {:.6}+{:.6}i inside the disk",
                    z.root.re, z.root.im
                )),
                checks: vec![],
            });
        }
        if let Some(z) = zs.iter().find(|z| z.location == RootLocation::Boundary) {
            boundary_reason = Some(format!(
                "superdiagonal symbol {i} has a boundary-band zero at {:.6}+{:.6}i",
                z.root.re, z.root.im
            ));
        }
    }
    if let Some(reason) = boundary_reason {
        return Ok(WeakHomogeneityReport {
            status: WhStatus::Inconclusive,
            obstruction: Some(reason),
            checks: vec![],
        });
    }

    // Construct and verify the intertwiner per sample on the bidiagonal
    // reduction.
    let t1 = if t.is_bidiagonal() {
        t.clone()
    } else {
        t.bidiagonal_part()?
    };
    let nn = t1.block_dim();
    let b = t1.matrix().adjoint();
    let mut checks = Vec::with_capacity(samples.len());
    for map in samples {
        let phi_b = crate::symbols::mobius_of_operator(map, &b)?;
        let inv_series = map.inverse().series(nn);
        // phi' ∘ phi^{-1} = 1 / (phi^{-1})'.
        let dphi_comp = series::div(&[Complex64::ONE], &series::derivative(&inv_series), nn)?;

        let mut g = vec![vec![Complex64::ONE]; n];
        for i in (0..n.saturating_sub(1)).rev() {
            let psi = t1.superdiagonal_symbol(i);
            let psi_comp = series::compose_poly(psi.coeffs(), &inv_series, nn);
            let inv_psi = series::div(&[Complex64::ONE], psi.coeffs(), nn)?;
            let mut factor = series::mul(&psi_comp, &dphi_comp, nn);
            factor = series::mul(&factor, &inv_psi, nn);
            g[i] = series::mul(&g[i + 1], &factor, nn);
        }

        let mut x = CMatrix::zeros(n * nn, n * nn);
        for i in 0..n {
            let comp = composition_operator(&map.inverse().as_symbol(nn), t1.kernel(i), nn)?;
            let mult = multiplication_operator(
                &AnalyticSymbol::truncated_series(g[i].clone(), 0.0),
                t1.kernel(i),
                t1.kernel(i),
                nn,
            )?;
            let block = mult * comp;
            x.view_mut((i * nn, i * nn), (nn, nn)).copy_from(&block);
        }

        let x_total = if n >= 3 {
            // A = X phi(B) X^{-1} shares diagonal and first subdiagonal with
            // B; transpose into the upper recursion and correct.
            let x_inv = try_inverse(&x, "diagonal Mobius witness")?;
            let a = &x * &phi_b * x_inv;
            let mask = EdgeMask {
                interior: vec![nn / 2; n],
            };
            let rec = j21_blocks(
                &b.transpose(),
                &a.transpose(),
                n,
                nn,
                &mask,
                1e-4,
            )?;
            rec.x.transpose() * &x
        } else {
            x
        };

        // Residual on the leading interior of every block.
        let d = nn / 2;
        let r = &x_total * &phi_b - &b * &x_total;
        let mut acc = 0.0;
        for bi in 0..n {
            for bj in 0..n {
                acc += r
                    .view((bi * nn, bj * nn), (d, d))
                    .norm_squared();
            }
        }
        let residual = acc.sqrt() / (x_total.norm() * phi_b.norm()).max(1e-300);
        checks.push(MobiusCheck {
            center: map.center(),
            phase: map.phase(),
            residual,
        });
    }

    let worst = checks.iter().map(|c| c.residual).fold(0.0_f64, f64::max);
    let status = if checks.is_empty() || worst <= MOBIUS_RESIDUAL_CAP {
        WhStatus::WeaklyHomogeneous
    } else {
        WhStatus::Inconclusive
    };
    Ok(WeakHomogeneityReport {
        status,
        obstruction: if status == WhStatus::Inconclusive {
            Some(format!("Mobius intertwiner residual {worst:.3e} above cap"))
        } else {
            None
        },
        checks,
    })
}
