//! Diagonal reproducing kernels `K(z, w) = sum a_n z^n conj(w)^n` on the unit
//! disk, their coefficient sequences and radial evaluation.
//!
//! The power family `K_lambda(z, w) = (1 - z conj(w))^{-lambda}` is carried in
//! closed form; generic kernels are finite coefficient lists with a certified
//! geometric tail.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::fit_slope;

/// Largest admissible last-term magnitude when a finite coefficient list is
/// summed directly.
const TAIL_TERM_BOUND: f64 = 1e-16;
/// Relative bound the certified remainder must satisfy.
const TAIL_REL_BOUND: f64 = 1e-12;
/// Relative tolerance for checking a declared power-law tail against stored
/// coefficients.
const LAMBDA_CONSISTENCY: f64 = 1e-12;

/// A point of the open unit disk, validated at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskPoint(Complex64);

impl DiskPoint {
    pub fn new(w: Complex64) -> Result<Self> {
        if w.norm() < 1.0 {
            Ok(DiskPoint(w))
        } else {
            Err(Error::OutOfDomain(format!("|w| = {} >= 1", w.norm())))
        }
    }

    pub fn real(r: f64) -> Result<Self> {
        Self::new(Complex64::new(r, 0.0))
    }

    pub fn value(&self) -> Complex64 {
        self.0
    }

    pub fn radius(&self) -> f64 {
        self.0.norm()
    }
}

/// Closed-form descriptor for the coefficient tail, when one is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelTail {
    /// No closed form; only the stored coefficients are trusted.
    Finite,
    /// `a_n = prod_{k<n} (lambda + k) / (k + 1)`, the binomial series of
    /// `(1 - z conj(w))^{-lambda}`.
    LambdaPower(f64),
}

/// Positive coefficient sequence of a diagonal kernel, normalized to `a_0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalKernel {
    coeffs: Vec<f64>,
    tail: KernelTail,
    label: String,
}

/// Growth classification of a radial kernel ratio as `r -> 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrowthTag {
    Diverges,
    Bounded,
    Vanishes,
}

/// Radial samples of `K_1(r, r) / K_2(r, r)` and their growth class.
#[derive(Debug, Clone)]
pub struct RatioProfile {
    pub samples: Vec<(f64, f64)>,
    pub tag: GrowthTag,
}

impl DiagonalKernel {
    /// Kernel from an explicit coefficient list, rescaled so `a_0 = 1`.
    ///
    /// When `tail` declares a power law, every stored consecutive ratio is
    /// checked against it.
    pub fn new(coeffs: Vec<f64>, tail: KernelTail, label: impl Into<String>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidParameter(
                "kernel needs at least two coefficients".into(),
            ));
        }
        if coeffs.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidParameter(
                "kernel coefficients must be positive and finite".into(),
            ));
        }
        let a0 = coeffs[0];
        let coeffs: Vec<f64> = coeffs.iter().map(|a| a / a0).collect();
        if let KernelTail::LambdaPower(lambda) = tail {
            if !(lambda > 0.0) {
                return Err(Error::InvalidParameter("lambda must be positive".into()));
            }
            for n in 0..coeffs.len() - 1 {
                let expected = (lambda + n as f64) / (n as f64 + 1.0);
                let got = coeffs[n + 1] / coeffs[n];
                if (got - expected).abs() > LAMBDA_CONSISTENCY * expected.abs() {
                    return Err(Error::InvalidParameter(format!(
                        "declared lambda tail inconsistent with stored ratio at n = {n}"
                    )));
                }
            }
        }
        Ok(DiagonalKernel {
            coeffs,
            tail,
            label: label.into(),
        })
    }

    /// The power-family kernel with `M` stored coefficients.
    pub fn lambda_kernel(lambda: f64, m: usize) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be a positive real, got {lambda}"
            )));
        }
        if m < 2 {
            return Err(Error::InvalidParameter("need at least 2 coefficients".into()));
        }
        let mut coeffs = Vec::with_capacity(m);
        coeffs.push(1.0);
        for n in 0..m - 1 {
            let next = coeffs[n] * (lambda + n as f64) / (n as f64 + 1.0);
            coeffs.push(next);
        }
        Ok(DiagonalKernel {
            coeffs,
            tail: KernelTail::LambdaPower(lambda),
            label: format!("lambda={lambda}"),
        })
    }

    /// Kernel from coefficients with no closed-form tail.
    pub fn from_coeffs(coeffs: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        Self::new(coeffs, KernelTail::Finite, label)
    }

    pub fn tail(&self) -> KernelTail {
        self.tail
    }

    pub fn lambda(&self) -> Option<f64> {
        match self.tail {
            KernelTail::LambdaPower(l) => Some(l),
            KernelTail::Finite => None,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn stored_len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn stored_coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// First `n` coefficients, extending through the closed-form tail when
    /// the stored list is shorter.
    pub fn coefficients(&self, n: usize) -> Result<Vec<f64>> {
        if n <= self.coeffs.len() {
            return Ok(self.coeffs[..n].to_vec());
        }
        match self.tail {
            KernelTail::Finite => Err(Error::TruncationInsufficient(format!(
                "kernel '{}' stores {} coefficients, {} requested",
                self.label,
                self.coeffs.len(),
                n
            ))),
            KernelTail::LambdaPower(lambda) => {
                let mut out = self.coeffs.clone();
                out.reserve(n - out.len());
                while out.len() < n {
                    let k = out.len() - 1;
                    let next = out[k] * (lambda + k as f64) / (k as f64 + 1.0);
                    out.push(next);
                }
                Ok(out)
            }
        }
    }

    /// `K(w, w)`: closed form for the power family, certified truncated sum
    /// otherwise.
    pub fn eval_diag(&self, w: &DiskPoint) -> Result<f64> {
        let r2 = w.value().norm_sqr();
        match self.tail {
            KernelTail::LambdaPower(lambda) => Ok((1.0 - r2).powf(-lambda)),
            KernelTail::Finite => {
                let m = self.coeffs.len();
                let last_term = self.coeffs[m - 1] * r2.powi((m - 1) as i32);
                if last_term >= TAIL_TERM_BOUND {
                    return Err(Error::TruncationInsufficient(format!(
                        "tail term a_{{{}}} |w|^{} = {:.3e} exceeds {:.0e}",
                        m - 1,
                        2 * (m - 1),
                        last_term,
                        TAIL_TERM_BOUND
                    )));
                }
                let mut sum = 0.0;
                let mut pw = 1.0;
                for &a in &self.coeffs {
                    sum += a * pw;
                    pw *= r2;
                }
                // Ratio test with the last stored ratio as geometric bound.
                let q = self.coeffs[m - 1] / self.coeffs[m - 2];
                let rho = q * r2;
                if rho >= 1.0 {
                    return Err(Error::TruncationInsufficient(
                        "geometric tail bound does not contract".into(),
                    ));
                }
                let remainder = last_term * rho / (1.0 - rho);
                if remainder > TAIL_REL_BOUND * sum {
                    return Err(Error::TruncationInsufficient(format!(
                        "certified remainder {remainder:.3e} above relative bound"
                    )));
                }
                Ok(sum)
            }
        }
    }

    /// Truncated partial sum of `K(w, w)` over the first `n` terms.
    pub fn partial_diag_sum(&self, w: &DiskPoint, n: usize) -> Result<f64> {
        let coeffs = self.coefficients(n)?;
        let r2 = w.value().norm_sqr();
        let mut sum = 0.0;
        let mut pw = 1.0;
        for &a in &coeffs {
            sum += a * pw;
            pw *= r2;
        }
        Ok(sum)
    }
}

/// Radial profile of `K_1(r, r) / K_2(r, r)` with a growth tag fitted from the
/// three largest radii: slope of `log(ratio)` against `log(1 - r)` below
/// `-0.1` means divergence, above `0.1` decay, in between boundedness.
pub fn kernel_ratio_profile(
    k1: &DiagonalKernel,
    k2: &DiagonalKernel,
    radii: &[f64],
) -> Result<RatioProfile> {
    if radii.len() < 3 {
        return Err(Error::InvalidParameter(
            "need at least three radii for the growth fit".into(),
        ));
    }
    if radii.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidParameter("radii must be strictly increasing".into()));
    }
    if *radii.last().unwrap() >= 1.0 || radii[0] <= 0.0 {
        return Err(Error::InvalidParameter("radii must lie in (0, 1)".into()));
    }
    let mut samples = Vec::with_capacity(radii.len());
    for &r in radii {
        let w = DiskPoint::real(r)?;
        let v1 = k1.eval_diag(&w)?;
        let v2 = k2.eval_diag(&w)?;
        samples.push((r, v1 / v2));
    }
    let top = &samples[samples.len() - 3..];
    let xs: Vec<f64> = top.iter().map(|&(r, _)| (1.0 - r).ln()).collect();
    let ys: Vec<f64> = top.iter().map(|&(_, v)| v.ln()).collect();
    let slope = fit_slope(&xs, &ys);
    let tag = if slope < -0.1 {
        GrowthTag::Diverges
    } else if slope > 0.1 {
        GrowthTag::Vanishes
    } else {
        GrowthTag::Bounded
    };
    Ok(RatioProfile { samples, tag })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_one_and_two_coefficients() {
        let k1 = DiagonalKernel::lambda_kernel(1.0, 4).unwrap();
        assert_eq!(k1.stored_coeffs(), &[1.0, 1.0, 1.0, 1.0]);
        let k2 = DiagonalKernel::lambda_kernel(2.0, 4).unwrap();
        assert_eq!(k2.stored_coeffs(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn lambda_fractional_matches_direct_product() {
        // Direct product of (lambda + k) / (k + 1), computed by hand for
        // lambda = 1.5: a_1 = 1.5, a_2 = 1.5 * 2.5 / 2 = 1.875.
        let k = DiagonalKernel::lambda_kernel(1.5, 3).unwrap();
        assert!((k.stored_coeffs()[1] - 1.5).abs() < 1e-15);
        assert!((k.stored_coeffs()[2] - 1.875).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DiagonalKernel::lambda_kernel(0.0, 4).is_err());
        assert!(DiagonalKernel::lambda_kernel(-1.0, 4).is_err());
        assert!(DiagonalKernel::lambda_kernel(2.0, 1).is_err());
    }

    #[test]
    fn eval_diag_closed_form_and_at_origin() {
        let k1 = DiagonalKernel::lambda_kernel(1.0, 4).unwrap();
        let origin = DiskPoint::real(0.0).unwrap();
        assert!((k1.eval_diag(&origin).unwrap() - 1.0).abs() < 1e-15);

        let k2 = DiagonalKernel::lambda_kernel(2.0, 4).unwrap();
        let half = DiskPoint::real(0.5).unwrap();
        let expected = 16.0 / 9.0;
        assert!((k2.eval_diag(&half).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn closed_form_agrees_with_partial_sums() {
        // Independent oracle: direct summation of the binomial series.
        let k = DiagonalKernel::lambda_kernel(2.0, 4).unwrap();
        let w = DiskPoint::real(0.5).unwrap();
        let sum = k.partial_diag_sum(&w, 200).unwrap();
        let closed = k.eval_diag(&w).unwrap();
        assert!(
            (sum - closed).abs() <= 1e-12 * closed,
            "partial sum {sum} vs closed {closed}"
        );
    }

    #[test]
    fn finite_kernel_tail_failure_near_boundary() {
        let coeffs = vec![1.0; 64];
        let k = DiagonalKernel::from_coeffs(coeffs, "hardy-64").unwrap();
        let w = DiskPoint::real(0.999).unwrap();
        assert!(matches!(
            k.eval_diag(&w),
            Err(Error::TruncationInsufficient(_))
        ));
    }

    #[test]
    fn finite_kernel_sums_when_certified() {
        let coeffs = vec![1.0; 512];
        let k = DiagonalKernel::from_coeffs(coeffs, "hardy-512").unwrap();
        let w = DiskPoint::real(0.5).unwrap();
        let v = k.eval_diag(&w).unwrap();
        assert!((v - 1.0 / (1.0 - 0.25)).abs() < 1e-12);
    }

    #[test]
    fn normalization_rescales_a0() {
        let k = DiagonalKernel::from_coeffs(vec![2.0, 4.0, 8.0], "scaled").unwrap();
        assert_eq!(k.stored_coeffs()[0], 1.0);
        assert_eq!(k.stored_coeffs()[1], 2.0);
    }

    #[test]
    fn ratio_profile_tags() {
        let k1 = DiagonalKernel::lambda_kernel(1.0, 8).unwrap();
        let k2 = DiagonalKernel::lambda_kernel(2.0, 8).unwrap();
        let radii = [0.5, 0.9, 0.99, 0.999];

        let p = kernel_ratio_profile(&k2, &k1, &radii).unwrap();
        assert_eq!(p.tag, GrowthTag::Diverges);

        let p = kernel_ratio_profile(&k1, &k1, &radii).unwrap();
        assert_eq!(p.tag, GrowthTag::Bounded);
        assert!(p.samples.iter().all(|&(_, v)| (v - 1.0).abs() < 1e-14));

        let p = kernel_ratio_profile(&k1, &k2, &[0.5, 0.9, 0.99]).unwrap();
        assert_eq!(p.tag, GrowthTag::Vanishes);
        // (1 - r^2)^{+1} closed-form values.
        let expected = [0.75, 0.19, 0.0199];
        for ((_, v), e) in p.samples.iter().zip(expected) {
            assert!((v - e).abs() < 1e-12, "ratio {v} vs {e}");
        }
    }

    #[test]
    fn power_family_identity_on_disk() {
        // eval * (1 - |w|^2)^lambda = 1 for |w| <= 0.95.
        for lambda in [1.0, 1.5, 2.0, 3.0] {
            let k = DiagonalKernel::lambda_kernel(lambda, 8).unwrap();
            for r in [0.0, 0.3, 0.7, 0.95] {
                let w = DiskPoint::real(r).unwrap();
                let v = k.eval_diag(&w).unwrap();
                let canceled = v * (1.0 - r * r).powf(lambda);
                assert!((canceled - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coefficients_extend_through_tail() {
        let k = DiagonalKernel::lambda_kernel(2.0, 3).unwrap();
        let ext = k.coefficients(6).unwrap();
        assert_eq!(ext, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);

        let fin = DiagonalKernel::from_coeffs(vec![1.0, 1.0], "short").unwrap();
        assert!(fin.coefficients(3).is_err());
    }

    #[test]
    fn coefficient_log_concavity_for_lambda_at_least_one() {
        // Consecutive ratios (lambda + n)/(n + 1) decrease exactly when
        // lambda >= 1, i.e. a_n a_{n+2} <= a_{n+1}^2; equivalently the shift
        // weights are nondecreasing. (For lambda <= 1 the inequality flips.)
        for lambda in [1.0, 1.3, 2.0, 3.7] {
            let k = DiagonalKernel::lambda_kernel(lambda, 32).unwrap();
            let a = k.stored_coeffs();
            for n in 0..a.len() - 2 {
                assert!(
                    a[n] * a[n + 2] <= a[n + 1] * a[n + 1] * (1.0 + 1e-12),
                    "log-concavity fails at n = {n} for lambda = {lambda}"
                );
            }
        }
        for lambda in [0.3, 0.8, 1.0] {
            let k = DiagonalKernel::lambda_kernel(lambda, 32).unwrap();
            let a = k.stored_coeffs();
            for n in 0..a.len() - 2 {
                assert!(
                    a[n] * a[n + 2] >= a[n + 1] * a[n + 1] * (1.0 - 1e-12),
                    "log-convexity fails at n = {n} for lambda = {lambda}"
                );
            }
        }
    }
}
