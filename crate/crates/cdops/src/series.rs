//! Truncated power-series arithmetic on coefficient vectors.
//!
//! All routines return series truncated to a caller-chosen length `n`
//! (coefficients of z^0 .. z^{n-1}).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Truncated product of two series.
pub fn mul(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::ZERO; n];
    for (i, &ai) in a.iter().enumerate().take(n) {
        if ai == Complex64::ZERO {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(n - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Truncated quotient `a / b`; requires `b[0] != 0`.
pub fn div(a: &[Complex64], b: &[Complex64], n: usize) -> Result<Vec<Complex64>> {
    let b0 = b.first().copied().unwrap_or(Complex64::ZERO);
    if b0.norm() == 0.0 {
        return Err(Error::DegenerateSymbol(
            "series division by a symbol vanishing at 0".into(),
        ));
    }
    let mut q = vec![Complex64::ZERO; n];
    for k in 0..n {
        let mut acc = a.get(k).copied().unwrap_or(Complex64::ZERO);
        for j in 1..=k {
            let bj = b.get(j).copied().unwrap_or(Complex64::ZERO);
            acc -= bj * q[k - j];
        }
        q[k] = acc / b0;
    }
    Ok(q)
}

/// Composition `p(inner)` of a polynomial with a series, truncated to `n`
/// terms, by Horner's scheme.
pub fn compose_poly(p: &[Complex64], inner: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut acc = vec![Complex64::ZERO; n];
    for &c in p.iter().rev() {
        acc = mul(&acc, inner, n);
        if !acc.is_empty() {
            acc[0] += c;
        }
    }
    acc
}

/// Term-by-term derivative.
pub fn derivative(a: &[Complex64]) -> Vec<Complex64> {
    if a.len() <= 1 {
        return vec![];
    }
    a.iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| c * k as f64)
        .collect()
}

/// Horner evaluation at a point.
pub fn eval(a: &[Complex64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::ZERO;
    for &c in a.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn division_inverts_multiplication() {
        let a = vec![c(1.0), c(2.0), c(-1.0), c(0.5)];
        let b = vec![c(2.0), c(-1.0), c(0.25)];
        let prod = mul(&a, &b, 8);
        let back = div(&prod, &b, 4).unwrap();
        for (x, y) in back.iter().zip(&a) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn geometric_series_from_division() {
        // 1 / (1 - z/2) = sum (z/2)^k
        let one = vec![c(1.0)];
        let den = vec![c(1.0), c(-0.5)];
        let q = div(&one, &den, 10).unwrap();
        for (k, qk) in q.iter().enumerate() {
            assert!((qk - c(0.5_f64.powi(k as i32))).norm() < 1e-14);
        }
    }

    #[test]
    fn compose_matches_direct_evaluation() {
        let p = vec![c(1.0), c(0.0), c(3.0)]; // 1 + 3 z^2
        let inner = vec![c(0.0), c(0.5), c(0.25)]; // z/2 + z^2/4
        let comp = compose_poly(&p, &inner, 12);
        let z = Complex64::new(0.3, 0.1);
        let direct = eval(&p, eval(&inner, z));
        let through = eval(&comp, z);
        assert!((direct - through).norm() < 1e-10);
    }
}
