//! Block upper-triangular operators built from kernel shifts and analytic
//! symbols.
//!
//! An operator here has `n` diagonal backward-shift blocks, symbol blocks on
//! the superdiagonal, and higher blocks of the form
//! `T_{i,j} = M*_{phi_{i,j}} T_{i,i+1} ... T_{j-1,j}` with `phi_{i,j}` in the
//! commutant of the `i`-th diagonal block. Higher blocks are assembled as
//! products of truncated factors; the edge mask records how many leading
//! rows/columns per block are exempt from truncation-edge effects, and all
//! residual checks are restricted there.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kernels::{DiagonalKernel, KernelTail};
use crate::linalg::CMatrix;
use crate::property_h::{check_lambda_gap, check_weight_product, Evidence, PhCriterion, PhStatus, PropertyHVerdict};
use crate::shifts::{TruncatedShift, WeightSequence};
use crate::symbols::{symbol_operator, AnalyticSymbol};

/// Interior tolerance for build-time identity checks.
const BUILD_TOL: f64 = 1e-12;

/// Per-block count of leading rows/columns on which infinite-dimensional
/// identities hold exactly at truncation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMask {
    pub interior: Vec<usize>,
}

impl EdgeMask {
    /// Frobenius norm of a blocked matrix restricted to the leading
    /// `interior[i] x interior[j]` corner of every block.
    pub fn interior_frobenius(&self, m: &CMatrix, block_dim: usize) -> f64 {
        let n = self.interior.len();
        assert_eq!(m.nrows(), n * block_dim, "blocked matrix shape mismatch");
        let mut acc = 0.0;
        for bi in 0..n {
            for bj in 0..n {
                let di = self.interior[bi];
                let dj = self.interior[bj];
                for i in 0..di {
                    for j in 0..dj {
                        acc += m[(bi * block_dim + i, bj * block_dim + j)].norm_sqr();
                    }
                }
            }
        }
        acc.sqrt()
    }

    pub fn min_interior(&self) -> usize {
        self.interior.iter().copied().min().unwrap_or(0)
    }
}

/// Build recipe for a block operator.
#[derive(Debug, Clone)]
pub struct CfbBuilder {
    kernels: Vec<DiagonalKernel>,
    superdiag: Vec<AnalyticSymbol>,
    cofactors: BTreeMap<(usize, usize), AnalyticSymbol>,
    block_dim: usize,
    verify: bool,
    supplied_evidence: Option<Vec<PropertyHVerdict>>,
}

impl CfbBuilder {
    pub fn new(kernels: Vec<DiagonalKernel>, superdiag: Vec<AnalyticSymbol>, block_dim: usize) -> Self {
        CfbBuilder {
            kernels,
            superdiag,
            cofactors: BTreeMap::new(),
            block_dim,
            verify: true,
            supplied_evidence: None,
        }
    }

    /// Attach the symbol of block `(i, j)`, `j - i >= 2`.
    pub fn cofactor(mut self, i: usize, j: usize, phi: AnalyticSymbol) -> Self {
        self.cofactors.insert((i, j), phi);
        self
    }

    /// Skip build-time identity verification (for deliberately broken
    /// experiments); the mask is still computed.
    pub fn unverified(mut self) -> Self {
        self.verify = false;
        self
    }

    /// Supply Property (H) evidence for the adjacent diagonal pairs instead
    /// of computing it.
    pub fn with_evidence(mut self, evidence: Vec<PropertyHVerdict>) -> Self {
        self.supplied_evidence = Some(evidence);
        self
    }

    pub fn build(self) -> Result<CfbOperator> {
        CfbOperator::build(self)
    }
}

/// A truncated block upper-triangular operator with kernel shifts on the
/// diagonal.
#[derive(Debug, Clone)]
pub struct CfbOperator {
    kernels: Vec<DiagonalKernel>,
    superdiag: Vec<AnalyticSymbol>,
    cofactors: BTreeMap<(usize, usize), AnalyticSymbol>,
    block_dim: usize,
    matrix: CMatrix,
    edge: EdgeMask,
    ph_evidence: Vec<PropertyHVerdict>,
}

/// Outcome of the strong-irreducibility test.
#[derive(Debug, Clone)]
pub struct SiReport {
    pub strongly_irreducible: bool,
    /// Index `k` of a vanishing superdiagonal block and the two diagonal
    /// block ranges into which the operator splits, when reducible.
    pub split: Option<SiSplit>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiSplit {
    pub zero_superdiagonal: usize,
    pub left_blocks: std::ops::Range<usize>,
    pub right_blocks: std::ops::Range<usize>,
}

impl CfbOperator {
    fn build(spec: CfbBuilder) -> Result<Self> {
        let n = spec.kernels.len();
        let nn = spec.block_dim;
        if n == 0 {
            return Err(Error::InvalidParameter("need at least one block".into()));
        }
        if spec.superdiag.len() + 1 != n {
            return Err(Error::InvalidParameter(format!(
                "{} superdiagonal symbols for {n} blocks",
                spec.superdiag.len()
            )));
        }
        for ((i, j), phi) in &spec.cofactors {
            if *j < i + 2 || *j >= n {
                return Err(Error::InvalidParameter(format!(
                    "cofactor index ({i}, {j}) outside the strict upper wedge"
                )));
            }
            if phi.degree() >= nn {
                return Err(Error::TruncationInsufficient(format!(
                    "cofactor ({i}, {j}) degree {} at truncation {nn}",
                    phi.degree()
                )));
            }
        }
        for (i, psi) in spec.superdiag.iter().enumerate() {
            if psi.degree() >= nn {
                return Err(Error::TruncationInsufficient(format!(
                    "superdiagonal symbol {i} degree {} at truncation {nn}",
                    psi.degree()
                )));
            }
        }

        // Diagonal shift blocks and superdiagonal symbol blocks.
        let mut diag = Vec::with_capacity(n);
        for k in &spec.kernels {
            diag.push(TruncatedShift::from_kernel(k, nn)?.matrix().clone());
        }
        let mut superdiag_blocks = Vec::with_capacity(n.saturating_sub(1));
        for (i, psi) in spec.superdiag.iter().enumerate() {
            superdiag_blocks.push(symbol_operator(psi, &spec.kernels[i + 1], &spec.kernels[i], nn)?);
        }

        // Edge mask: one shift step plus the symbol degree per superdiagonal
        // factor, accumulated rightward, plus the worst cofactor degree.
        let mut interior = Vec::with_capacity(n);
        for i in 0..n {
            let mut budget = 0usize;
            for psi in spec.superdiag.iter().skip(i) {
                budget += psi.degree() + 1;
            }
            let max_cof = spec
                .cofactors
                .iter()
                .filter(|((ci, _), _)| *ci == i)
                .map(|(_, phi)| phi.degree())
                .max()
                .unwrap_or(0);
            budget += max_cof;
            if budget >= nn {
                return Err(Error::ConstructionRejected {
                    block: i,
                    reason: format!("edge budget {budget} leaves no interior at truncation {nn}"),
                });
            }
            interior.push(nn - budget);
        }
        let edge = EdgeMask { interior };

        // Assemble.
        let mut matrix = CMatrix::zeros(n * nn, n * nn);
        for (i, d) in diag.iter().enumerate() {
            matrix.view_mut((i * nn, i * nn), (nn, nn)).copy_from(d);
        }
        for (i, s) in superdiag_blocks.iter().enumerate() {
            matrix.view_mut((i * nn, (i + 1) * nn), (nn, nn)).copy_from(s);
        }
        for ((i, j), phi) in &spec.cofactors {
            if phi.is_zero() {
                continue;
            }
            let mphi = symbol_operator(phi, &spec.kernels[*i], &spec.kernels[*i], nn)?;
            let mut chain = superdiag_blocks[*i].clone();
            for l in *i + 1..*j {
                chain *= &superdiag_blocks[l];
            }
            let block = mphi * chain;
            matrix.view_mut((i * nn, j * nn), (nn, nn)).copy_from(&block);
        }

        // Build-time identity checks on block interiors.
        if spec.verify {
            for i in 0..n.saturating_sub(1) {
                let lhs = &diag[i] * &superdiag_blocks[i];
                let rhs = &superdiag_blocks[i] * &diag[i + 1];
                let d = edge.interior[i].min(nn - 1);
                let mut err: f64 = 0.0;
                for r in 0..d {
                    for c in 0..d {
                        err = err.max((lhs[(r, c)] - rhs[(r, c)]).norm());
                    }
                }
                let scale = 1.0 + lhs.norm().max(rhs.norm());
                if err > BUILD_TOL * scale {
                    return Err(Error::ConstructionRejected {
                        block: i,
                        reason: format!("superdiagonal intertwining residual {err:.3e}"),
                    });
                }
            }
            for ((i, j), phi) in &spec.cofactors {
                if phi.is_zero() {
                    continue;
                }
                let mphi = symbol_operator(phi, &spec.kernels[*i], &spec.kernels[*i], nn)?;
                let lhs = &mphi * &diag[*i];
                let rhs = &diag[*i] * &mphi;
                let d = edge.interior[*i].min(nn.saturating_sub(phi.degree() + 1));
                let mut err: f64 = 0.0;
                for r in 0..d {
                    for c in 0..d {
                        err = err.max((lhs[(r, c)] - rhs[(r, c)]).norm());
                    }
                }
                if err > BUILD_TOL * (1.0 + lhs.norm().max(rhs.norm())) {
                    return Err(Error::ConstructionRejected {
                        block: *i,
                        reason: format!("cofactor ({i}, {j}) does not commute with the diagonal: {err:.3e}"),
                    });
                }
            }
        }

        // Property (H) evidence for adjacent diagonal pairs.
        let ph_evidence = match spec.supplied_evidence {
            Some(e) => e,
            None => {
                let mut out = Vec::new();
                for i in 0..n.saturating_sub(1) {
                    out.push(adjacent_pair_evidence(&spec.kernels[i], &spec.kernels[i + 1])?);
                }
                out
            }
        };

        Ok(CfbOperator {
            kernels: spec.kernels,
            superdiag: spec.superdiag,
            cofactors: spec.cofactors,
            block_dim: nn,
            matrix,
            edge,
            ph_evidence,
        })
    }

    pub fn block_count(&self) -> usize {
        self.kernels.len()
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn dim(&self) -> usize {
        self.block_dim * self.kernels.len()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn kernel(&self, i: usize) -> &DiagonalKernel {
        &self.kernels[i]
    }

    pub fn kernels(&self) -> &[DiagonalKernel] {
        &self.kernels
    }

    pub fn superdiagonal_symbol(&self, i: usize) -> &AnalyticSymbol {
        &self.superdiag[i]
    }

    pub fn superdiagonal_symbols(&self) -> &[AnalyticSymbol] {
        &self.superdiag
    }

    pub fn cofactor(&self, i: usize, j: usize) -> Option<&AnalyticSymbol> {
        self.cofactors.get(&(i, j))
    }

    pub fn cofactors(&self) -> &BTreeMap<(usize, usize), AnalyticSymbol> {
        &self.cofactors
    }

    pub fn edge_mask(&self) -> &EdgeMask {
        &self.edge
    }

    pub fn ph_evidence(&self) -> &[PropertyHVerdict] {
        &self.ph_evidence
    }

    /// Owned copy of block `(i, j)`.
    pub fn block(&self, i: usize, j: usize) -> CMatrix {
        self.matrix
            .view((i * self.block_dim, j * self.block_dim), (self.block_dim, self.block_dim))
            .into_owned()
    }

    /// Whether the operator carries no blocks beyond the superdiagonal.
    pub fn is_bidiagonal(&self) -> bool {
        self.cofactors.values().all(|phi| phi.is_zero())
    }

    /// The bidiagonal reduction: same kernels and superdiagonal, cofactors
    /// dropped.
    pub fn bidiagonal_part(&self) -> Result<CfbOperator> {
        CfbBuilder::new(self.kernels.clone(), self.superdiag.clone(), self.block_dim)
            .with_evidence(self.ph_evidence.clone())
            .build()
    }

    /// Same kernels, same truncation, same block count.
    pub fn same_shape(&self, other: &CfbOperator) -> bool {
        self.block_count() == other.block_count()
            && self.block_dim == other.block_dim
            && self
                .kernels
                .iter()
                .zip(&other.kernels)
                .all(|(a, b)| kernels_agree(a, b))
    }
}

fn kernels_agree(a: &DiagonalKernel, b: &DiagonalKernel) -> bool {
    match (a.tail(), b.tail()) {
        (KernelTail::LambdaPower(x), KernelTail::LambdaPower(y)) => (x - y).abs() < 1e-12,
        _ => {
            let n = a.stored_coeffs().len().min(b.stored_coeffs().len());
            a.stored_coeffs()[..n]
                .iter()
                .zip(&b.stored_coeffs()[..n])
                .all(|(x, y)| (x - y).abs() <= 1e-12 * x.max(*y))
        }
    }
}

fn adjacent_pair_evidence(k1: &DiagonalKernel, k2: &DiagonalKernel) -> Result<PropertyHVerdict> {
    if let (Some(l1), Some(l2)) = (k1.lambda(), k2.lambda()) {
        if l1 >= 1.0 && l2 >= 1.0 {
            return check_lambda_gap(l1, l2);
        }
    }
    let count = 128usize;
    let a = WeightSequence::from_kernel(k1, count);
    let b = WeightSequence::from_kernel(k2, count);
    match (a, b) {
        (Ok(a), Ok(b)) => check_weight_product(&a, &b, count),
        _ => Ok(PropertyHVerdict {
            status: PhStatus::Inconclusive,
            criterion: PhCriterion::WeightProduct,
            evidence: Evidence {
                samples: vec![],
                note: "kernels too short for the weight-product criterion".into(),
            },
        }),
    }
}

/// Strong irreducibility test: true exactly when every superdiagonal symbol
/// is nonzero; a zero block splits the operator into a block-diagonal sum.
pub fn strongly_irreducible(t: &CfbOperator) -> SiReport {
    for (i, psi) in t.superdiagonal_symbols().iter().enumerate() {
        if psi.is_zero() {
            return SiReport {
                strongly_irreducible: false,
                split: Some(SiSplit {
                    zero_superdiagonal: i,
                    left_blocks: 0..i + 1,
                    right_blocks: i + 1..t.block_count(),
                }),
            };
        }
    }
    SiReport {
        strongly_irreducible: true,
        split: None,
    }
}

/// Diagonal blocks as truncated shifts; verifies that the block-diagonal part
/// commutes with the operator on block interiors.
pub fn diag_part(t: &CfbOperator) -> Result<Vec<TruncatedShift>> {
    let n = t.block_count();
    let nn = t.block_dim();
    let mut shifts = Vec::with_capacity(n);
    for k in t.kernels() {
        shifts.push(TruncatedShift::from_kernel(k, nn)?);
    }
    // diag{T} commutes with T exactly when every block intertwines the
    // corresponding diagonal blocks; check on interiors.
    let mut diag = CMatrix::zeros(n * nn, n * nn);
    for (i, s) in shifts.iter().enumerate() {
        diag.view_mut((i * nn, i * nn), (nn, nn)).copy_from(s.matrix());
    }
    let commutator = &diag * t.matrix() - t.matrix() * &diag;
    let res = t.edge_mask().interior_frobenius(&commutator, nn);
    let scale = 1.0 + t.matrix().norm();
    if res > 1e-10 * scale {
        return Err(Error::StructureViolation(format!(
            "diagonal part does not commute on the interior: {res:.3e}"
        )));
    }
    Ok(shifts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::DiagonalKernel;
    use crate::symbols::AnalyticSymbol;
    use num_complex::Complex64;

    fn lam(l: f64) -> DiagonalKernel {
        DiagonalKernel::lambda_kernel(l, 256).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_block_is_a_plain_shift() {
        let t = CfbBuilder::new(vec![lam(1.0)], vec![], 8).build().unwrap();
        assert_eq!(t.block_count(), 1);
        let shift = TruncatedShift::from_kernel(&lam(1.0), 8).unwrap();
        assert!((t.matrix() - shift.matrix()).norm() < 1e-14);
        assert!(strongly_irreducible(&t).strongly_irreducible);
    }

    #[test]
    fn two_block_assembly_and_interior_check() {
        let t = CfbBuilder::new(vec![lam(1.0), lam(2.0)], vec![AnalyticSymbol::one()], 16)
            .build()
            .unwrap();
        assert_eq!(t.dim(), 32);
        // Build verified the intertwining; check the full identity is in fact
        // exact at this truncation (both sides kill the last column).
        let d1 = t.block(0, 0);
        let s = t.block(0, 1);
        let d2 = t.block(1, 1);
        assert!((d1 * &s - &s * d2).norm() < 1e-13);
        assert_eq!(t.ph_evidence().len(), 1);
        assert_eq!(t.ph_evidence()[0].status, PhStatus::Holds);
    }

    #[test]
    fn corollary_style_three_block_family() {
        let phi = AnalyticSymbol::power_of_linear(c(0.5, 0.0), 1);
        let t = CfbBuilder::new(
            vec![lam(1.0), lam(1.0), lam(1.0)],
            vec![phi.clone(), phi],
            16,
        )
        .cofactor(0, 2, AnalyticSymbol::constant(Complex64::ZERO))
        .build()
        .unwrap();
        assert_eq!(t.block_count(), 3);
        assert!(t.block(0, 2).norm() == 0.0);
        assert!(strongly_irreducible(&t).strongly_irreducible);
        // Edge mask: two superdiagonal factors of degree 1 cost (1+1) each.
        assert_eq!(t.edge_mask().interior, vec![12, 14, 16]);
    }

    #[test]
    fn cofactor_chain_block() {
        let t = CfbBuilder::new(
            vec![lam(1.0), lam(1.0), lam(1.0)],
            vec![AnalyticSymbol::one(), AnalyticSymbol::one()],
            12,
        )
        .cofactor(0, 2, AnalyticSymbol::z())
        .build()
        .unwrap();
        // T_{0,2} = M*_z * T_{0,1} T_{1,2} = M*_z on identical spaces.
        let expected = symbol_operator(&AnalyticSymbol::z(), &lam(1.0), &lam(1.0), 12).unwrap();
        assert!((t.block(0, 2) - expected).norm() < 1e-13);
    }

    #[test]
    fn assembly_is_linear_in_the_superdiagonal() {
        let phi = AnalyticSymbol::power_of_linear(c(0.5, 0.0), 2);
        let scaled = phi.scale(c(3.0, -1.0));
        let base = CfbBuilder::new(vec![lam(1.0), lam(2.0)], vec![phi], 16)
            .build()
            .unwrap();
        let big = CfbBuilder::new(vec![lam(1.0), lam(2.0)], vec![scaled], 16)
            .build()
            .unwrap();
        let expect = base.block(0, 1) * c(3.0, -1.0).conj();
        assert!(
            (big.block(0, 1) - expect).norm() < 1e-13,
            "superdiagonal block must scale with the symbol (conjugated by adjoint convention)"
        );
    }

    #[test]
    fn reducible_when_a_superdiagonal_vanishes() {
        let t = CfbBuilder::new(
            vec![lam(1.0), lam(1.0), lam(1.0)],
            vec![AnalyticSymbol::one(), AnalyticSymbol::constant(Complex64::ZERO)],
            8,
        )
        .build()
        .unwrap();
        let si = strongly_irreducible(&t);
        assert!(!si.strongly_irreducible);
        let split = si.split.unwrap();
        assert_eq!(split.zero_superdiagonal, 1);
        assert_eq!(split.left_blocks, 0..2);
        assert_eq!(split.right_blocks, 2..3);
    }

    #[test]
    fn diag_part_extracts_and_commutes() {
        let t = CfbBuilder::new(
            vec![lam(1.0), lam(2.0), lam(3.0)],
            vec![AnalyticSymbol::one(), AnalyticSymbol::z()],
            12,
        )
        .build()
        .unwrap();
        let shifts = diag_part(&t).unwrap();
        assert_eq!(shifts.len(), 3);
        for (i, s) in shifts.iter().enumerate() {
            assert!((s.matrix() - t.block(i, i)).norm() < 1e-14);
        }
    }

    #[test]
    fn si_decision_survives_blockwise_diagonal_similarity() {
        use rand::Rng;
        use rand::SeedableRng;
        let phi = AnalyticSymbol::power_of_linear(c(0.4, 0.1), 1);
        let t = CfbBuilder::new(vec![lam(1.0), lam(2.0)], vec![phi], 12)
            .build()
            .unwrap();
        let si = strongly_irreducible(&t);
        let nn = t.block_dim();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..4 {
            let x = loop {
                let r = CMatrix::from_fn(2 * nn, 2 * nn, |i, j| {
                    if i / nn == j / nn {
                        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                    } else {
                        Complex64::ZERO
                    }
                });
                let cand = CMatrix::identity(2 * nn, 2 * nn) + r * Complex64::new(0.2, 0.0);
                if crate::linalg::condition_number(&cand) <= 10.0 {
                    break cand;
                }
            };
            let conj = &x * t.matrix() * crate::linalg::try_inverse(&x, "x").unwrap();
            // Matrix-level reading of the data-level decision: the (0,1)
            // block stays away from zero exactly when the symbol is nonzero.
            let block_norm = conj.view((0, nn), (nn, nn)).norm();
            assert_eq!(si.strongly_irreducible, block_norm > 1e-8);
        }
    }

    #[test]
    fn rejects_zero_interior() {
        let phi = AnalyticSymbol::power_of_linear(c(0.5, 0.0), 3);
        let err = CfbBuilder::new(vec![lam(1.0), lam(1.0)], vec![phi], 4)
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::ConstructionRejected { block: 0, .. }));
    }
}
