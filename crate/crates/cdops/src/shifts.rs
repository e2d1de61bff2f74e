//! Weighted backward shifts realized as finite truncations.
//!
//! For a diagonal kernel with coefficients `a_n`, the adjoint of
//! multiplication by `z` is the backward shift with weights
//! `d_n = sqrt(a_n / a_{n+1})`; compression to the span of the first `N`
//! basis vectors keeps the eigenvector relation exact up to a single
//! last-coordinate residual.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernels::{DiagonalKernel, DiskPoint};
use crate::linalg::CMatrix;

/// Weight sequence `d_0 .. d_{M-2}` of a backward shift, with its bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSequence {
    weights: Vec<f64>,
    inf: f64,
    sup: f64,
    lambda: Option<f64>,
}

impl WeightSequence {
    /// Weights from the kernel coefficients, `count` of them.
    pub fn from_kernel(k: &DiagonalKernel, count: usize) -> Result<Self> {
        let coeffs = k.coefficients(count + 1)?;
        let weights: Vec<f64> = coeffs.windows(2).map(|p| (p[0] / p[1]).sqrt()).collect();
        Self::from_weights(weights, k.lambda())
    }

    pub fn from_weights(weights: Vec<f64>, lambda: Option<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("empty weight sequence".into()));
        }
        let inf = weights.iter().cloned().fold(f64::INFINITY, f64::min);
        let sup = weights.iter().cloned().fold(0.0_f64, f64::max);
        if !(inf > 0.0) || !sup.is_finite() {
            return Err(Error::InvalidParameter(
                "weights must be bounded away from 0 and finite".into(),
            ));
        }
        Ok(WeightSequence {
            weights,
            inf,
            sup,
            lambda,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.inf, self.sup)
    }

    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    fn is_nondecreasing(&self) -> bool {
        self.weights.windows(2).all(|p| p[1] >= p[0] - 1e-15 * self.sup)
    }

    fn is_nonincreasing(&self) -> bool {
        self.weights.windows(2).all(|p| p[1] <= p[0] + 1e-15 * self.sup)
    }
}

/// One running-product sample of [`weight_product_asymptotics`].
#[derive(Debug, Clone, Copy)]
pub struct ProductSample {
    /// Index `n` of the last factor.
    pub n: usize,
    /// `prod_{k <= n} d_k`.
    pub product: f64,
    /// `product / (n + 1)^{(1 - lambda) / 2}` when the source power law is
    /// known, else the raw product again.
    pub normalized: f64,
}

/// Running weight products with their power-law normalization.
pub fn weight_product_asymptotics(ws: &WeightSequence, n_max: usize) -> Result<Vec<ProductSample>> {
    if n_max >= ws.len() {
        return Err(Error::TruncationInsufficient(format!(
            "n_max = {n_max} but only {} weights stored",
            ws.len()
        )));
    }
    let mut out = Vec::with_capacity(n_max + 1);
    let mut product = 1.0;
    for (n, &d) in ws.weights().iter().enumerate().take(n_max + 1) {
        product *= d;
        let normalized = match ws.lambda() {
            Some(lambda) => product / ((n as f64) + 1.0).powf((1.0 - lambda) / 2.0),
            None => product,
        };
        out.push(ProductSample {
            n,
            product,
            normalized,
        });
    }
    Ok(out)
}

/// `||T^n||` for the truncated backward shift (or `||S^n||` for its forward
/// right inverse when `right_inverse` is set): the largest window product of
/// `n` consecutive weights (reciprocals for the right inverse).
///
/// Monotone sequences place the maximal window at the monotone end, so no
/// scan is needed there; generic sequences fall back to a prefix-sum scan in
/// log space.
pub fn operator_norm_power(ws: &WeightSequence, n: usize, right_inverse: bool) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    if n > ws.len() {
        return Err(Error::TruncationInsufficient(format!(
            "window {n} exceeds {} stored weights",
            ws.len()
        )));
    }
    let log_window = |start: usize| -> f64 {
        let mut s = 0.0;
        for &d in &ws.weights()[start..start + n] {
            let l = d.ln();
            s += if right_inverse { -l } else { l };
        }
        s
    };
    let last_start = ws.len() - n;
    let increasing = ws.is_nondecreasing();
    let decreasing = ws.is_nonincreasing();
    let best_log = if increasing || decreasing {
        // Window sits at the end where the (possibly reciprocal) weights are
        // largest.
        let at_start = if right_inverse { increasing } else { decreasing };
        if at_start {
            log_window(0)
        } else {
            log_window(last_start)
        }
    } else {
        let mut prefix = vec![0.0; ws.len() + 1];
        for (i, &d) in ws.weights().iter().enumerate() {
            let l = d.ln();
            prefix[i + 1] = prefix[i] + if right_inverse { -l } else { l };
        }
        (0..=last_start)
            .map(|k| prefix[k + n] - prefix[k])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    Ok(best_log.exp())
}

/// `N x N` compression of a weighted backward shift.
#[derive(Debug, Clone)]
pub struct TruncatedShift {
    dim: usize,
    matrix: CMatrix,
    weights: WeightSequence,
    label: String,
}

impl TruncatedShift {
    /// Compression of the backward shift of `k` to the first `N` basis
    /// vectors.
    pub fn from_kernel(k: &DiagonalKernel, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("truncation needs N >= 2".into()));
        }
        let weights = WeightSequence::from_kernel(k, n - 1)?;
        let mut matrix = CMatrix::zeros(n, n);
        for (i, &d) in weights.weights().iter().enumerate() {
            matrix[(i, i + 1)] = Complex64::new(d, 0.0);
        }
        Ok(TruncatedShift {
            dim: n,
            matrix,
            weights,
            label: k.label().to_string(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn weights(&self) -> &WeightSequence {
        &self.weights
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `||T_N t_N(w) - w t_N(w)||`, confined to the last coordinate by the
    /// compression choice; equals `|w|^N sqrt(a_{N-1})` exactly.
    pub fn eigen_residual(&self, k: &DiagonalKernel, w: &DiskPoint) -> Result<f64> {
        let t = section(k, w, self.dim)?;
        let image = &self.matrix * t.coords();
        let scaled = t.coords() * w.value();
        Ok((image - scaled).norm())
    }
}

/// Truncated kernel section `t_N(w)` with coordinates `sqrt(a_n) w^n`.
#[derive(Debug, Clone)]
pub struct SectionVector {
    w: DiskPoint,
    coords: DVector<Complex64>,
}

impl SectionVector {
    pub fn point(&self) -> DiskPoint {
        self.w
    }

    pub fn coords(&self) -> &DVector<Complex64> {
        &self.coords
    }

    pub fn norm_squared(&self) -> f64 {
        self.coords.norm_squared()
    }
}

/// The truncated section of `k` at `w`, `N` coordinates.
pub fn section(k: &DiagonalKernel, w: &DiskPoint, n: usize) -> Result<SectionVector> {
    let coeffs = k.coefficients(n)?;
    let mut coords = DVector::zeros(n);
    let mut pw = Complex64::ONE;
    for (i, &a) in coeffs.iter().enumerate() {
        coords[i] = Complex64::new(a.sqrt(), 0.0) * pw;
        pw *= w.value();
    }
    Ok(SectionVector { w: *w, coords })
}

/// Derivative section: coordinates `sqrt(a_n) n w^{n-1}`.
pub fn section_derivative(k: &DiagonalKernel, w: &DiskPoint, n: usize) -> Result<SectionVector> {
    let coeffs = k.coefficients(n)?;
    let mut coords = DVector::zeros(n);
    let mut pw = Complex64::ONE;
    for (i, &a) in coeffs.iter().enumerate() {
        if i > 0 {
            coords[i] = Complex64::new(a.sqrt() * i as f64, 0.0) * pw;
            pw *= w.value();
        }
    }
    Ok(SectionVector { w: *w, coords })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::DiagonalKernel;

    fn lambda(l: f64, m: usize) -> DiagonalKernel {
        DiagonalKernel::lambda_kernel(l, m).unwrap()
    }

    #[test]
    fn hardy_weights_are_unit() {
        let t = TruncatedShift::from_kernel(&lambda(1.0, 8), 3).unwrap();
        assert_eq!(t.weights().weights(), &[1.0, 1.0]);
    }

    #[test]
    fn bergman_weights() {
        let t = TruncatedShift::from_kernel(&lambda(2.0, 8), 3).unwrap();
        let expected = [1.0 / 2f64.sqrt(), (2.0 / 3.0_f64).sqrt()];
        for (w, e) in t.weights().weights().iter().zip(expected) {
            assert!((w - e).abs() < 1e-15);
        }
    }

    #[test]
    fn two_coefficient_kernel() {
        let k = DiagonalKernel::from_coeffs(vec![1.0, 4.0], "pair").unwrap();
        let t = TruncatedShift::from_kernel(&k, 2).unwrap();
        assert!((t.weights().weights()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sections_at_origin_and_interior() {
        let k = lambda(1.0, 8);
        let s = section(&k, &DiskPoint::real(0.0).unwrap(), 4).unwrap();
        assert_eq!(s.coords()[0], Complex64::ONE);
        assert!(s.coords().rows(1, 3).norm() == 0.0);

        let k2 = lambda(2.0, 8);
        let s = section(&k2, &DiskPoint::real(0.5).unwrap(), 3).unwrap();
        let expected = [1.0, 2f64.sqrt() * 0.5, 3f64.sqrt() * 0.25];
        for (c, e) in s.coords().iter().zip(expected) {
            assert!((c - Complex64::new(e, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn eigen_residual_law_exactly() {
        // T_N t_N - w t_N = -w^N sqrt(a_{N-1}) e_{N-1}, derived by direct
        // coordinate comparison.
        let k = lambda(1.0, 16);
        let t = TruncatedShift::from_kernel(&k, 8).unwrap();
        let w = DiskPoint::real(0.5).unwrap();
        let res = t.eigen_residual(&k, &w).unwrap();
        assert!((res - 0.5_f64.powi(8)).abs() < 1e-14);
    }

    #[test]
    fn eigen_residual_law_across_family() {
        for l in [1.0, 1.5, 2.0, 3.0] {
            let k = lambda(l, 80);
            for n in [4usize, 16, 64] {
                let t = TruncatedShift::from_kernel(&k, n).unwrap();
                for r in [0.0, 0.3, 0.7] {
                    let w = DiskPoint::real(r).unwrap();
                    let a = k.coefficients(n).unwrap();
                    let law = r.powi(n as i32) * a[n - 1].sqrt();
                    let res = t.eigen_residual(&k, &w).unwrap();
                    assert!(
                        (res - law).abs() < 1e-12 * (1.0 + law),
                        "lambda {l} N {n} r {r}: {res} vs {law}"
                    );
                }
            }
        }
    }

    #[test]
    fn section_padding_consistency() {
        let k = lambda(2.0, 32);
        let w = DiskPoint::real(0.4).unwrap();
        let small = section(&k, &w, 8).unwrap();
        let large = section(&k, &w, 16).unwrap();
        for i in 0..8 {
            assert!((small.coords()[i] - large.coords()[i]).norm() < 1e-15);
        }
        // Norm identity against the partial kernel sum.
        let psum = k.partial_diag_sum(&w, 8).unwrap();
        assert!((small.norm_squared() - psum).abs() < 1e-13);
    }

    #[test]
    fn telescoping_product() {
        for l in [1.5, 2.0, 3.0] {
            let k = lambda(l, 600);
            let ws = WeightSequence::from_kernel(&k, 512).unwrap();
            let samples = weight_product_asymptotics(&ws, 500).unwrap();
            let coeffs = k.coefficients(502).unwrap();
            for s in samples.iter().step_by(37) {
                let expected = (1.0 / coeffs[s.n + 1]).sqrt();
                assert!(
                    (s.product - expected).abs() <= 1e-12 * expected,
                    "telescoping off at n = {}",
                    s.n
                );
            }
        }
    }

    #[test]
    fn unit_weights_products() {
        let k = lambda(1.0, 64);
        let ws = WeightSequence::from_kernel(&k, 32).unwrap();
        for s in weight_product_asymptotics(&ws, 30).unwrap() {
            assert!((s.product - 1.0).abs() < 1e-14);
            assert!((s.normalized - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn bergman_product_telescopes_to_inverse_sqrt() {
        let k = lambda(2.0, 64);
        let ws = WeightSequence::from_kernel(&k, 32).unwrap();
        let samples = weight_product_asymptotics(&ws, 20).unwrap();
        for s in samples {
            let expected = 1.0 / ((s.n as f64 + 2.0).sqrt());
            assert!((s.product - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn norm_power_windows() {
        let k1 = lambda(1.0, 64);
        let ws1 = WeightSequence::from_kernel(&k1, 32).unwrap();
        assert!((operator_norm_power(&ws1, 5, false).unwrap() - 1.0).abs() < 1e-14);

        // lambda = 2 weights increase toward 1, so the shift window sits at
        // the end and the right-inverse window at the start.
        let k2 = lambda(2.0, 64);
        let ws2 = WeightSequence::from_kernel(&k2, 32).unwrap();
        let n = 3;
        let shift_norm = operator_norm_power(&ws2, n, false).unwrap();
        let w = ws2.weights();
        let end: f64 = w[w.len() - n..].iter().product();
        assert!((shift_norm - end).abs() < 1e-14);

        let inv_norm = operator_norm_power(&ws2, n, true).unwrap();
        let start: f64 = w[..n].iter().map(|d| 1.0 / d).product();
        assert!((inv_norm - start).abs() < 1e-14);
    }

    #[test]
    fn norm_bounded_by_sup() {
        let k = lambda(3.0, 64);
        let ws = WeightSequence::from_kernel(&k, 32).unwrap();
        let (_, sup) = ws.bounds();
        let norm1 = operator_norm_power(&ws, 1, false).unwrap();
        assert!(norm1 <= sup + 1e-14);
    }

    #[test]
    fn window_too_large_errors() {
        let k = lambda(1.0, 8);
        let ws = WeightSequence::from_kernel(&k, 4).unwrap();
        assert!(operator_norm_power(&ws, 5, false).is_err());
    }
}
