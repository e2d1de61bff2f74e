//! Analytic symbols on the disk and their operator realizations.
//!
//! A symbol is a finite coefficient list, either an exact polynomial or a
//! truncated power series with a stored tail bound. Symbols act between
//! kernel spaces through the adjoint of multiplication, and disk
//! automorphisms act through composition operators; both are realized as
//! dense truncations in the orthonormal monomial bases `e_n = sqrt(a_n) z^n`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernels::DiagonalKernel;
use crate::linalg::{condition_number, try_inverse, CMatrix};
use crate::series;

/// Resolvent condition-number cap for Möbius functional calculus.
const MOBIUS_COND_CAP: f64 = 1e8;
/// Half-width of the annulus in which a numerical root is declared Boundary.
const BOUNDARY_BAND: f64 = 1e-6;
/// Cluster radius scale for multiple-root detection.
const CLUSTER_RADIUS: f64 = 1e-8;
/// Relative coefficient threshold below which trailing coefficients are
/// treated as zero.
const COEFF_EPS: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymbolKind {
    Polynomial,
    TruncatedSeries { tail_bound: f64 },
}

/// A finite-coefficient analytic symbol `phi(z) = sum c_j z^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSymbol {
    coeffs: Vec<Complex64>,
    kind: SymbolKind,
}

impl AnalyticSymbol {
    /// Exact polynomial; trailing zero coefficients are trimmed.
    pub fn polynomial(mut coeffs: Vec<Complex64>) -> Self {
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        while coeffs.len() > 1
            && coeffs.last().map(|c| c.norm() <= COEFF_EPS * scale).unwrap_or(false)
        {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Complex64::ZERO);
        }
        AnalyticSymbol {
            coeffs,
            kind: SymbolKind::Polynomial,
        }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::polynomial(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(Complex64::ONE)
    }

    /// Monomial `z`.
    pub fn z() -> Self {
        Self::polynomial(vec![Complex64::ZERO, Complex64::ONE])
    }

    /// `scale * prod (z - r_i)`.
    pub fn from_roots(roots: &[Complex64], scale: Complex64) -> Self {
        let mut coeffs = vec![scale];
        for &r in roots {
            let mut next = vec![Complex64::ZERO; coeffs.len() + 1];
            for (k, &c) in coeffs.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= c * r;
            }
            coeffs = next;
        }
        Self::polynomial(coeffs)
    }

    /// `(z - a)^m`.
    pub fn power_of_linear(a: Complex64, m: usize) -> Self {
        Self::from_roots(&vec![a; m], Complex64::ONE)
    }

    /// Truncated series with an explicit tail bound on the certification
    /// radius.
    pub fn truncated_series(coeffs: Vec<Complex64>, tail_bound: f64) -> Self {
        AnalyticSymbol {
            coeffs,
            kind: SymbolKind::TruncatedSeries { tail_bound },
        }
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(self.kind, SymbolKind::Polynomial)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.norm() == 0.0)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        series::eval(&self.coeffs, z)
    }

    /// Conjugate symbol `phi*(w) = conj(phi(conj(w)))`; its coefficients are
    /// the conjugates of `phi`'s, and it governs the action of the adjoint of
    /// multiplication on kernel sections.
    pub fn eval_conj(&self, w: Complex64) -> Complex64 {
        series::eval(&self.conj_coeffs(), w)
    }

    pub fn conj_coeffs(&self) -> Vec<Complex64> {
        self.coeffs.iter().map(|c| c.conj()).collect()
    }

    pub fn derivative(&self) -> AnalyticSymbol {
        AnalyticSymbol {
            coeffs: series::derivative(&self.coeffs),
            kind: self.kind,
        }
    }

    pub fn mul(&self, other: &AnalyticSymbol) -> AnalyticSymbol {
        let n = self.coeffs.len() + other.coeffs.len() - 1;
        match (self.kind, other.kind) {
            (SymbolKind::Polynomial, SymbolKind::Polynomial) => {
                Self::polynomial(series::mul(&self.coeffs, &other.coeffs, n))
            }
            _ => Self::truncated_series(series::mul(&self.coeffs, &other.coeffs, n), f64::NAN),
        }
    }

    pub fn scale(&self, c: Complex64) -> AnalyticSymbol {
        AnalyticSymbol {
            coeffs: self.coeffs.iter().map(|&x| x * c).collect(),
            kind: self.kind,
        }
    }
}

/// Side of the unit circle a root falls on, with a certification band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootLocation {
    Interior,
    Boundary,
    Exterior,
}

/// A root with its multiplicity and location.
#[derive(Debug, Clone, Copy)]
pub struct Zero {
    pub root: Complex64,
    pub multiplicity: usize,
    pub location: RootLocation,
}

fn classify(root: Complex64) -> RootLocation {
    let r = root.norm();
    if (r - 1.0).abs() <= BOUNDARY_BAND {
        RootLocation::Boundary
    } else if r < 1.0 {
        RootLocation::Interior
    } else {
        RootLocation::Exterior
    }
}

fn companion_eigenvalues(monic: &[Complex64]) -> Result<Vec<Complex64>> {
    // monic: c_0 .. c_{d-1} of z^d + sum c_k z^k.
    let d = monic.len();
    let mut comp = CMatrix::zeros(d, d);
    for i in 1..d {
        comp[(i, i - 1)] = Complex64::ONE;
    }
    for i in 0..d {
        comp[(i, d - 1)] = -monic[i];
    }
    let schur = comp
        .try_schur(1e-14, 20_000)
        .ok_or_else(|| Error::NotFound("companion Schur iteration did not converge".into()))?;
    let t = schur.unpack().1;
    Ok((0..d).map(|i| t[(i, i)]).collect())
}

fn newton_refine(p: &AnalyticSymbol, mult: usize, start: Complex64) -> Complex64 {
    // A root of multiplicity m is a simple root of the (m-1)-th derivative.
    let mut q = p.clone();
    for _ in 1..mult {
        q = q.derivative();
    }
    let dq = q.derivative();
    let mut x = start;
    for _ in 0..50 {
        let f = q.eval(x);
        let df = dq.eval(x);
        if df.norm() == 0.0 {
            break;
        }
        let step = f / df;
        x -= step;
        if step.norm() <= 1e-16 * (1.0 + x.norm()) {
            break;
        }
    }
    x
}

fn cluster(roots: &[Complex64], basin: f64) -> Vec<(Complex64, usize)> {
    let mut roots = roots.to_vec();
    roots.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for r in roots {
        let mut merged = false;
        for (c, m) in clusters.iter_mut() {
            if (r - *c).norm() <= basin * (1.0 + c.norm()) {
                *c = (*c * (*m as f64) + r) / (*m as f64 + 1.0);
                *m += 1;
                merged = true;
                break;
            }
        }
        if !merged {
            clusters.push((r, 1));
        }
    }
    clusters
}

fn reconstruction_error(p: &AnalyticSymbol, zeros: &[(Complex64, usize)]) -> f64 {
    let lead = *p.coeffs().last().unwrap();
    let mut roots = Vec::new();
    for &(r, m) in zeros {
        roots.extend(std::iter::repeat(r).take(m));
    }
    let rebuilt = AnalyticSymbol::from_roots(&roots, lead);
    let scale = p.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut err: f64 = 0.0;
    for k in 0..p.coeffs().len().max(rebuilt.coeffs().len()) {
        let a = p.coeffs().get(k).copied().unwrap_or(Complex64::ZERO);
        let b = rebuilt.coeffs().get(k).copied().unwrap_or(Complex64::ZERO);
        err = err.max((a - b).norm() / scale);
    }
    err
}

/// All roots of a polynomial symbol with multiplicities, classified against
/// the unit circle.
///
/// Companion-matrix eigenvalues seed the root list; nearby eigenvalues are
/// clustered, each cluster is refined by Newton iteration on the matching
/// derivative order, and the assignment is accepted only if it reproduces the
/// coefficients.
pub fn zeros_in_disk(phi: &AnalyticSymbol) -> Result<Vec<Zero>> {
    if !phi.is_polynomial() {
        return Err(Error::Unsupported(
            "root extraction requires a polynomial symbol".into(),
        ));
    }
    if phi.is_zero() {
        return Err(Error::DegenerateSymbol("zero polynomial has no root list".into()));
    }
    if phi.degree() == 0 {
        return Ok(vec![]);
    }
    let lead = *phi.coeffs().last().unwrap();
    let monic: Vec<Complex64> = phi.coeffs()[..phi.degree()]
        .iter()
        .map(|&c| c / lead)
        .collect();
    let eigs = companion_eigenvalues(&monic)?;

    // Candidate assignments at several catch basins: companion eigenvalues
    // of an m-fold root scatter like eps^(1/m), so a double root needs a
    // basin near 1e-8 while a quadruple root needs about 1e-4. Each
    // clustering is Newton-refined at its multiplicity, then judged by how
    // well it reproduces the coefficients.
    let basins = [CLUSTER_RADIUS, 1e-6, 3e-5, 3e-4];
    let mut candidates: Vec<Vec<(Complex64, usize)>> = basins
        .iter()
        .map(|&basin| {
            cluster(&eigs, basin)
                .into_iter()
                .map(|(c, m)| (newton_refine(phi, m, c), m))
                .collect()
        })
        .collect();
    // All-simple assignment, individually polished.
    candidates.push(eigs.iter().map(|&e| (newton_refine(phi, 1, e), 1)).collect());

    // Among assignments that reproduce the polynomial essentially exactly,
    // prefer the one with the fewest distinct roots (multiple roots are
    // structural); otherwise fall back to the smallest reconstruction error.
    let scored: Vec<(f64, usize)> = candidates
        .iter()
        .map(|c| (reconstruction_error(phi, c), c.len()))
        .collect();
    let exact_tol = 1e-11;
    let mut best = 0usize;
    for i in 1..candidates.len() {
        let (ei, ni) = scored[i];
        let (eb, nb) = scored[best];
        let better = if ei <= exact_tol && eb <= exact_tol {
            ni < nb
        } else {
            ei < eb
        };
        if better {
            best = i;
        }
    }
    if scored[best].0 > 1e-8 {
        return Err(Error::NotFound(format!(
            "root assignment does not reproduce the coefficients (error {:.3e})",
            scored[best].0
        )));
    }

    Ok(candidates
        .swap_remove(best)
        .into_iter()
        .map(|(root, multiplicity)| Zero {
            root,
            multiplicity,
            location: classify(root),
        })
        .collect())
}

/// Verdict of the two-sided boundedness test for a ratio of symbols.
#[derive(Debug, Clone, PartialEq)]
pub enum RatioBound {
    Bounded,
    Unbounded { obstruction: String },
    Inconclusive { reason: String },
}

/// Whether `phi / psi` and `psi / phi` both extend boundedly over the disk:
/// true exactly when the interior zero multisets coincide. Roots inside the
/// boundary band cannot be certified on either side and force `Inconclusive`.
pub fn ratio_bounded_both_ways(phi: &AnalyticSymbol, psi: &AnalyticSymbol) -> Result<RatioBound> {
    if phi.is_zero() || psi.is_zero() {
        return Err(Error::DegenerateSymbol("ratio against the zero symbol".into()));
    }
    if !phi.is_polynomial() || !psi.is_polynomial() {
        return Err(Error::Unsupported("ratio test requires polynomial symbols".into()));
    }
    // Proportional symbols have a constant nonzero ratio; decide exactly.
    if phi.degree() == psi.degree() {
        let scale_phi = phi.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
        let lead_phi = *phi.coeffs().last().unwrap();
        let lead_psi = *psi.coeffs().last().unwrap();
        let c = lead_phi / lead_psi;
        let proportional = phi
            .coeffs()
            .iter()
            .zip(psi.coeffs())
            .all(|(a, b)| (a - b * c).norm() <= 1e-12 * scale_phi);
        if proportional {
            return Ok(RatioBound::Bounded);
        }
    }
    let z_phi = zeros_in_disk(phi)?;
    let z_psi = zeros_in_disk(psi)?;
    for z in z_phi.iter().chain(z_psi.iter()) {
        if z.location == RootLocation::Boundary {
            return Ok(RatioBound::Inconclusive {
                reason: format!(
                    "root {:.6}+{:.6}i sits in the boundary band; side of the circle uncertifiable",
                    z.root.re, z.root.im
                ),
            });
        }
    }
    let interior = |zs: &[Zero]| -> Vec<(Complex64, usize)> {
        zs.iter()
            .filter(|z| z.location == RootLocation::Interior)
            .map(|z| (z.root, z.multiplicity))
            .collect()
    };
    let a = interior(&z_phi);
    let b = interior(&z_psi);
    let mut b_used = vec![false; b.len()];
    for &(r, m) in &a {
        let hit = b.iter().enumerate().find(|(j, (s, _))| {
            !b_used[*j] && (r - s).norm() <= 1e-6 * (1.0 + r.norm())
        });
        match hit {
            Some((j, &(_, mb))) if mb == m => b_used[j] = true,
            Some((_, &(s, mb))) => {
                return Ok(RatioBound::Unbounded {
                    obstruction: format!(
                        "zero {:.6}+{:.6}i has multiplicity {m} vs {mb} at {:.6}+{:.6}i",
                        r.re, r.im, s.re, s.im
                    ),
                })
            }
            None => {
                return Ok(RatioBound::Unbounded {
                    obstruction: format!("zero {:.6}+{:.6}i (mult {m}) unmatched", r.re, r.im),
                })
            }
        }
    }
    if let Some(j) = b_used.iter().position(|u| !u) {
        let (s, mb) = b[j];
        return Ok(RatioBound::Unbounded {
            obstruction: format!("zero {:.6}+{:.6}i (mult {mb}) unmatched", s.re, s.im),
        });
    }
    Ok(RatioBound::Bounded)
}

/// Matrix of the adjoint of multiplication by `phi`, mapping the truncated
/// `source` kernel space into the truncated `target` space.
///
/// In the orthonormal bases the entry at `(m, m+j)` is
/// `conj(c_j) sqrt(a_m^tgt / a_{m+j}^src)`, an upper-banded matrix. Acting on
/// sections it realizes `phi*(w) = conj(phi(conj(w)))` up to the truncation
/// edge.
pub fn symbol_operator(
    phi: &AnalyticSymbol,
    source: &DiagonalKernel,
    target: &DiagonalKernel,
    n: usize,
) -> Result<CMatrix> {
    if phi.is_polynomial() && phi.degree() >= n {
        return Err(Error::TruncationInsufficient(format!(
            "symbol degree {} does not fit truncation {n}",
            phi.degree()
        )));
    }
    let a_src = source.coefficients(n)?;
    let a_tgt = target.coefficients(n)?;
    let mut out = CMatrix::zeros(n, n);
    for m in 0..n {
        for (j, c) in phi.coeffs().iter().enumerate() {
            let col = m + j;
            if col >= n {
                break;
            }
            out[(m, col)] = c.conj() * Complex64::new((a_tgt[m] / a_src[col]).sqrt(), 0.0);
        }
    }
    Ok(out)
}

/// Matrix of multiplication by `phi` from the truncated `source` kernel
/// space into the truncated `target` space: the adjoint counterpart of
/// [`symbol_operator`], lower-banded with entries
/// `c_j sqrt(a_m^src / a_{m+j}^tgt)` at `(m+j, m)`.
pub fn multiplication_operator(
    phi: &AnalyticSymbol,
    source: &DiagonalKernel,
    target: &DiagonalKernel,
    n: usize,
) -> Result<CMatrix> {
    if phi.is_polynomial() && phi.degree() >= n {
        return Err(Error::TruncationInsufficient(format!(
            "symbol degree {} does not fit truncation {n}",
            phi.degree()
        )));
    }
    let a_src = source.coefficients(n)?;
    let a_tgt = target.coefficients(n)?;
    let mut out = CMatrix::zeros(n, n);
    for m in 0..n {
        for (j, c) in phi.coeffs().iter().enumerate() {
            let row = m + j;
            if row >= n {
                break;
            }
            out[(row, m)] = c * Complex64::new((a_src[m] / a_tgt[row]).sqrt(), 0.0);
        }
    }
    Ok(out)
}

/// A disk automorphism `z -> e^{i theta} (z - a) / (1 - conj(a) z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusMap {
    a: Complex64,
    theta: f64,
}

impl MobiusMap {
    pub fn new(a: Complex64, theta: f64) -> Result<Self> {
        if a.norm() >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "Mobius center |a| = {} must be < 1",
                a.norm()
            )));
        }
        Ok(MobiusMap { a, theta })
    }

    pub fn identity() -> Self {
        MobiusMap {
            a: Complex64::ZERO,
            theta: 0.0,
        }
    }

    pub fn center(&self) -> Complex64 {
        self.a
    }

    pub fn phase(&self) -> f64 {
        self.theta
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        let rot = Complex64::from_polar(1.0, self.theta);
        rot * (z - self.a) / (Complex64::ONE - self.a.conj() * z)
    }

    pub fn derivative_at(&self, z: Complex64) -> Complex64 {
        let rot = Complex64::from_polar(1.0, self.theta);
        let den = Complex64::ONE - self.a.conj() * z;
        rot * Complex64::new(1.0 - self.a.norm_sqr(), 0.0) / (den * den)
    }

    /// The inverse automorphism, again in `(a, theta)` normal form.
    pub fn inverse(&self) -> MobiusMap {
        let rot = Complex64::from_polar(1.0, self.theta);
        MobiusMap {
            a: -self.a * rot,
            theta: -self.theta,
        }
    }

    /// `self ∘ other` as a normal-form automorphism.
    pub fn compose(&self, other: &MobiusMap) -> Result<MobiusMap> {
        // Matrix form [[rot, -rot a], [-conj(a), 1]] composes by product.
        let m1 = self.matrix();
        let m2 = other.matrix();
        let a11 = m1[0] * m2[0] + m1[1] * m2[2];
        let a12 = m1[0] * m2[1] + m1[1] * m2[3];
        let a21 = m1[2] * m2[0] + m1[3] * m2[2];
        let a22 = m1[2] * m2[1] + m1[3] * m2[3];
        if a11.norm() == 0.0 || a22.norm() == 0.0 {
            return Err(Error::InvalidParameter("degenerate composition".into()));
        }
        let a = -a12 / a11;
        let rot = a11 / a22;
        let theta = rot.arg();
        let composed = MobiusMap::new(a, theta)?;
        // Normal form consistency: denominator coefficient must match.
        let expect = -a.conj();
        if (a21 / a22 - expect).norm() > 1e-10 {
            return Err(Error::InvalidParameter(
                "composition left the automorphism family".into(),
            ));
        }
        Ok(composed)
    }

    fn matrix(&self) -> [Complex64; 4] {
        let rot = Complex64::from_polar(1.0, self.theta);
        [rot, -rot * self.a, -self.a.conj(), Complex64::ONE]
    }

    /// Power-series coefficients of the map on the disk, `n` terms.
    pub fn series(&self, n: usize) -> Vec<Complex64> {
        let rot = Complex64::from_polar(1.0, self.theta);
        let mut out = vec![Complex64::ZERO; n];
        if n == 0 {
            return out;
        }
        out[0] = -self.a * rot;
        let mut abar_pow = Complex64::ONE;
        for c in out.iter_mut().skip(1) {
            *c = rot * abar_pow * Complex64::new(1.0 - self.a.norm_sqr(), 0.0);
            abar_pow *= self.a.conj();
        }
        out
    }

    /// The map as a truncated-series symbol.
    pub fn as_symbol(&self, n: usize) -> AnalyticSymbol {
        let tail = self.a.norm().powi(n.saturating_sub(1) as i32) * (1.0 + self.a.norm());
        AnalyticSymbol::truncated_series(self.series(n), tail)
    }
}

/// Möbius functional calculus `e^{i theta} (T - a)(1 - conj(a) T)^{-1}` on a
/// square truncation.
pub fn mobius_of_operator(map: &MobiusMap, t: &CMatrix) -> Result<CMatrix> {
    let n = t.nrows();
    if t.ncols() != n {
        return Err(Error::Precondition("Mobius calculus needs a square matrix".into()));
    }
    let eye = CMatrix::identity(n, n);
    let resolvent_arg = &eye - t * map.center().conj();
    let cond = condition_number(&resolvent_arg);
    if !(cond < MOBIUS_COND_CAP) {
        return Err(Error::NearSingular(format!(
            "resolvent condition {cond:.3e} exceeds cap {MOBIUS_COND_CAP:.0e}"
        )));
    }
    let inv = try_inverse(&resolvent_arg, "Mobius resolvent")?;
    let rot = Complex64::from_polar(1.0, map.phase());
    Ok((t - &eye * map.center()) * inv * rot)
}

/// Matrix of the composition operator `f -> f ∘ psi` on the truncated kernel
/// space: column `m` expands `sqrt(a_m) psi(z)^m` in the orthonormal basis by
/// iterated truncated series multiplication.
pub fn composition_operator(
    psi: &AnalyticSymbol,
    k: &DiagonalKernel,
    n: usize,
) -> Result<CMatrix> {
    let at_zero = psi.eval(Complex64::ZERO).norm();
    if at_zero > 0.95 {
        return Err(Error::TruncationInsufficient(format!(
            "|psi(0)| = {at_zero:.4} too close to 1 for a certified truncation"
        )));
    }
    // The map must send the disk into itself; sample the boundary.
    for i in 0..64 {
        let z = Complex64::from_polar(0.999, i as f64 * std::f64::consts::TAU / 64.0);
        if psi.eval(z).norm() > 1.0 + 1e-9 {
            return Err(Error::InvalidParameter(
                "psi does not map the disk into itself".into(),
            ));
        }
    }
    let a = k.coefficients(n)?;
    let mut out = CMatrix::zeros(n, n);
    let mut power = vec![Complex64::ZERO; n];
    power[0] = Complex64::ONE;
    for m in 0..n {
        let col_scale = a[m].sqrt();
        for row in 0..n {
            out[(row, m)] = power[row] * Complex64::new(col_scale / a[row].sqrt(), 0.0);
        }
        if m + 1 < n {
            power = series::mul(&power, psi.coeffs(), n);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{DiagonalKernel, DiskPoint};
    use crate::shifts::{section, TruncatedShift};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn lam(l: f64) -> DiagonalKernel {
        DiagonalKernel::lambda_kernel(l, 128).unwrap()
    }

    #[test]
    fn constant_symbol_gives_diagonal_scaling() {
        let k = lam(1.0);
        let m = symbol_operator(&AnalyticSymbol::one(), &k, &k, 4).unwrap();
        assert!((m - CMatrix::identity(4, 4)).norm() < 1e-14);
    }

    #[test]
    fn z_symbol_is_the_backward_shift() {
        let k = lam(1.0);
        let m = symbol_operator(&AnalyticSymbol::z(), &k, &k, 4).unwrap();
        let shift = TruncatedShift::from_kernel(&k, 4).unwrap();
        assert!((m - shift.matrix()).norm() < 1e-14);
    }

    #[test]
    fn section_intertwining_between_spaces() {
        let k1 = lam(1.0);
        let k2 = lam(2.0);
        let phi = AnalyticSymbol::polynomial(vec![c(-0.5, 0.0), c(1.0, 0.0)]);
        let n = 32;
        let m = symbol_operator(&phi, &k2, &k1, n).unwrap();
        let w = DiskPoint::new(c(0.3, 0.0)).unwrap();
        let t2 = section(&k2, &w, n).unwrap();
        let t1 = section(&k1, &w, n).unwrap();
        let lhs = &m * t2.coords();
        let rhs = t1.coords() * phi.eval_conj(w.value());
        let err = (lhs - rhs).norm() / t1.coords().norm();
        assert!(err < 1e-6, "intertwining residual {err}");
    }

    #[test]
    fn multiplicativity_is_exact_at_truncation() {
        let k = lam(2.0);
        let n = 16;
        let phi = AnalyticSymbol::polynomial(vec![c(1.0, 0.5), c(0.0, 0.0), c(2.0, 0.0)]);
        let psi = AnalyticSymbol::polynomial(vec![c(-0.5, 0.0), c(1.0, 0.0)]);
        let combined = symbol_operator(&phi.mul(&psi), &k, &k, n).unwrap();
        let product =
            symbol_operator(&phi, &k, &k, n).unwrap() * symbol_operator(&psi, &k, &k, n).unwrap();
        assert!(
            (combined - product).norm() < 1e-13,
            "adjoint multiplication not multiplicative"
        );
    }

    #[test]
    fn degree_cap() {
        let k = lam(1.0);
        let phi = AnalyticSymbol::power_of_linear(c(0.0, 0.0), 5);
        assert!(symbol_operator(&phi, &k, &k, 4).is_err());
    }

    #[test]
    fn zeros_of_squared_linear_factor() {
        let phi = AnalyticSymbol::power_of_linear(c(0.5, 0.0), 2);
        let zs = zeros_in_disk(&phi).unwrap();
        assert_eq!(zs.len(), 1);
        assert_eq!(zs[0].multiplicity, 2);
        assert!((zs[0].root - c(0.5, 0.0)).norm() < 1e-9);
        assert_eq!(zs[0].location, RootLocation::Interior);
    }

    #[test]
    fn zeros_of_constants_and_boundary() {
        assert!(zeros_in_disk(&AnalyticSymbol::one()).unwrap().is_empty());

        let phi = AnalyticSymbol::polynomial(vec![c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let zs = zeros_in_disk(&phi).unwrap();
        assert_eq!(zs.len(), 2);
        for z in zs {
            assert_eq!(z.location, RootLocation::Boundary);
            assert_eq!(z.multiplicity, 1);
        }

        assert!(zeros_in_disk(&AnalyticSymbol::constant(Complex64::ZERO)).is_err());
    }

    #[test]
    fn zero_merge_under_products() {
        let phi = AnalyticSymbol::power_of_linear(c(0.5, 0.0), 1);
        let psi = AnalyticSymbol::from_roots(&[c(0.5, 0.0), c(-0.25, 0.1)], c(2.0, 0.0));
        let prod = phi.mul(&psi);
        let zs = zeros_in_disk(&prod).unwrap();
        let at_half = zs
            .iter()
            .find(|z| (z.root - c(0.5, 0.0)).norm() < 1e-7)
            .expect("merged root at 0.5");
        assert_eq!(at_half.multiplicity, 2);
        let other = zs
            .iter()
            .find(|z| (z.root - c(-0.25, 0.1)).norm() < 1e-7)
            .expect("simple root kept");
        assert_eq!(other.multiplicity, 1);
    }

    #[test]
    fn triple_root_multiplicity() {
        let phi = AnalyticSymbol::power_of_linear(c(0.3, -0.2), 3);
        let zs = zeros_in_disk(&phi).unwrap();
        assert_eq!(zs.len(), 1);
        assert_eq!(zs[0].multiplicity, 3);
        assert!((zs[0].root - c(0.3, -0.2)).norm() < 1e-8);
    }

    #[test]
    fn ratio_verdicts() {
        let a = AnalyticSymbol::power_of_linear(c(0.5, 0.0), 2);
        let b = a.scale(c(3.0, 0.0));
        assert_eq!(ratio_bounded_both_ways(&a, &b).unwrap(), RatioBound::Bounded);

        let p = AnalyticSymbol::power_of_linear(c(0.5, 0.0), 1);
        let q = AnalyticSymbol::power_of_linear(c(1.0 / 3.0, 0.0), 1);
        assert!(matches!(
            ratio_bounded_both_ways(&p, &q).unwrap(),
            RatioBound::Unbounded { .. }
        ));

        assert_eq!(ratio_bounded_both_ways(&p, &p).unwrap(), RatioBound::Bounded);

        // Boundary root forces Inconclusive.
        let boundary = AnalyticSymbol::power_of_linear(c(1.0, 0.0), 1);
        assert!(matches!(
            ratio_bounded_both_ways(&boundary, &p).unwrap(),
            RatioBound::Inconclusive { .. }
        ));

        // Same interior zeros, different exterior factors: still bounded.
        let u = AnalyticSymbol::from_roots(&[c(0.5, 0.0), c(3.0, 0.0)], Complex64::ONE);
        let v = AnalyticSymbol::from_roots(&[c(0.5, 0.0), c(-5.0, 0.0)], Complex64::ONE);
        assert_eq!(ratio_bounded_both_ways(&u, &v).unwrap(), RatioBound::Bounded);
    }

    #[test]
    fn mobius_identity_and_negation() {
        let t = TruncatedShift::from_kernel(&lam(1.0), 5).unwrap();
        let id = MobiusMap::identity();
        let m = mobius_of_operator(&id, t.matrix()).unwrap();
        assert!((m.clone() - t.matrix()).norm() < 1e-14);

        let neg = MobiusMap::new(c(0.0, 0.0), std::f64::consts::PI).unwrap();
        let m = mobius_of_operator(&neg, t.matrix()).unwrap();
        assert!((m + t.matrix()).norm() < 1e-12);
    }

    #[test]
    fn mobius_resolvent_matches_neumann_series() {
        // Independent series oracle: (1 - conj(a) T)^{-1} = sum conj(a)^k T^k.
        let t = TruncatedShift::from_kernel(&lam(1.0), 3).unwrap();
        let map = MobiusMap::new(c(0.5, 0.0), 0.0).unwrap();
        let direct = mobius_of_operator(&map, t.matrix()).unwrap();

        let n = 3;
        let eye = CMatrix::identity(n, n);
        let mut series_inv = CMatrix::zeros(n, n);
        let mut pow = eye.clone();
        for _ in 0..200 {
            series_inv += &pow * Complex64::from_polar(1.0, 0.0);
            pow = &pow * (t.matrix() * map.center().conj());
        }
        let oracle = (t.matrix() - &eye * map.center()) * series_inv;
        assert!((direct - oracle).norm() < 1e-12);
    }

    #[test]
    fn mobius_scalar_action_on_sections() {
        let k = lam(1.0);
        let n = 32;
        let t = TruncatedShift::from_kernel(&k, n).unwrap();
        let map = MobiusMap::new(c(0.5, 0.0), 0.0).unwrap();
        let ft = mobius_of_operator(&map, t.matrix()).unwrap();
        let w = DiskPoint::new(c(0.3, 0.1)).unwrap();
        let s = section(&k, &w, n).unwrap();
        let lhs = &ft * s.coords();
        let rhs = s.coords() * map.apply(w.value());
        let err = (lhs - rhs).norm() / s.coords().norm();
        assert!(err < 1e-6, "scalar action residual {err}");
    }

    #[test]
    fn mobius_composition_on_operators() {
        let t = TruncatedShift::from_kernel(&lam(1.0), 12).unwrap();
        let m1 = MobiusMap::new(c(0.3, 0.1), 0.4).unwrap();
        let m2 = MobiusMap::new(c(-0.2, 0.25), -1.1).unwrap();
        let composed = m2.compose(&m1).unwrap();
        let lhs = mobius_of_operator(&m2, &mobius_of_operator(&m1, t.matrix()).unwrap()).unwrap();
        let rhs = mobius_of_operator(&composed, t.matrix()).unwrap();
        assert!((lhs - rhs).norm() < 1e-8);
    }

    #[test]
    fn mobius_inverse_roundtrip_on_grid() {
        let m = MobiusMap::new(c(0.4, -0.3), 0.8).unwrap();
        let inv = m.inverse();
        for i in 0..25 {
            let z = Complex64::from_polar(0.03 * i as f64, i as f64);
            let back = inv.apply(m.apply(z));
            assert!((back - z).norm() < 1e-12);
        }
    }

    #[test]
    fn mobius_series_matches_evaluation() {
        let m = MobiusMap::new(c(0.3, 0.2), 0.5).unwrap();
        let coeffs = m.series(64);
        let z = c(0.4, -0.1);
        let by_series = series::eval(&coeffs, z);
        assert!((by_series - m.apply(z)).norm() < 1e-12);
    }

    #[test]
    fn composition_operator_identity_and_rotation() {
        let k = lam(1.0);
        let ident = AnalyticSymbol::z();
        let m = composition_operator(&ident, &k, 6).unwrap();
        assert!((m - CMatrix::identity(6, 6)).norm() < 1e-14);

        let theta = 0.7;
        let rot = AnalyticSymbol::polynomial(vec![c(0.0, 0.0), Complex64::from_polar(1.0, theta)]);
        let m = composition_operator(&rot, &k, 6).unwrap();
        for i in 0..6 {
            let expect = Complex64::from_polar(1.0, theta * i as f64);
            assert!((m[(i, i)] - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn composition_intertwines_multiplication() {
        // C_psi M_z = M_psi C_psi on the truncation interior.
        let k = lam(1.0);
        let n = 16;
        let map = MobiusMap::new(c(0.3, 0.0), 0.0).unwrap();
        let psi = map.as_symbol(n);
        let cpsi = composition_operator(&psi, &k, n).unwrap();

        // Multiplication by z is the transpose-shape lower shift with the
        // reciprocal weights of the backward shift.
        let shift = TruncatedShift::from_kernel(&k, n).unwrap();
        let mz = shift.matrix().adjoint();
        let mpsi = symbol_operator(&psi, &k, &k, n).unwrap().adjoint();

        let lhs = &cpsi * &mz;
        let rhs = &mpsi * &cpsi;
        let d = n - 2;
        let mut err: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                err = err.max((lhs[(i, j)] - rhs[(i, j)]).norm());
            }
        }
        assert!(err < 1e-10, "composition intertwining residual {err}");
    }
}
