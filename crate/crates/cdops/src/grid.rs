//! Square lattice grids on the disk for field evaluation and differencing.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A rectangular lattice `{ (x0 + i h, y0 + j h) }`, row-major in `j` then `i`.
///
/// Fields produced on a lattice can be differenced in place; each central
/// difference shrinks the usable region by one ring ([`LatticeGrid::shrink`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeGrid {
    pub x0: f64,
    pub y0: f64,
    pub step: f64,
    pub nx: usize,
    pub ny: usize,
}

impl LatticeGrid {
    /// Square lattice with `n x n` points covering `[-half_width, half_width]^2`.
    pub fn centered(half_width: f64, n: usize) -> Self {
        assert!(n >= 2, "lattice needs at least 2 points per side");
        let step = 2.0 * half_width / (n as f64 - 1.0);
        LatticeGrid {
            x0: -half_width,
            y0: -half_width,
            step,
            nx: n,
            ny: n,
        }
    }

    /// Small lattice centered at `c`, for localized stencils.
    pub fn around(c: Complex64, half_width: f64, n: usize) -> Self {
        assert!(n >= 2);
        let step = 2.0 * half_width / (n as f64 - 1.0);
        LatticeGrid {
            x0: c.re - half_width,
            y0: c.im - half_width,
            step,
            nx: n,
            ny: n,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, ix: usize, iy: usize) -> Complex64 {
        Complex64::new(self.x0 + ix as f64 * self.step, self.y0 + iy as f64 * self.step)
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// Iterate `(ix, iy, point)` row-major.
    pub fn iter_points(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.ny).flat_map(move |iy| (0..self.nx).map(move |ix| (ix, iy, self.point(ix, iy))))
    }

    /// The lattice with `margin` rings removed on every side.
    pub fn shrink(&self, margin: usize) -> Option<LatticeGrid> {
        if self.nx <= 2 * margin || self.ny <= 2 * margin {
            return None;
        }
        Some(LatticeGrid {
            x0: self.x0 + margin as f64 * self.step,
            y0: self.y0 + margin as f64 * self.step,
            step: self.step,
            nx: self.nx - 2 * margin,
            ny: self.ny - 2 * margin,
        })
    }

    /// Integer offset of `inner`'s origin inside `self`, when the lattices
    /// share step and alignment.
    pub fn offset_of(&self, inner: &LatticeGrid) -> Option<(usize, usize)> {
        if (self.step - inner.step).abs() > 1e-12 * self.step {
            return None;
        }
        let fx = (inner.x0 - self.x0) / self.step;
        let fy = (inner.y0 - self.y0) / self.step;
        let ix = fx.round();
        let iy = fy.round();
        if (fx - ix).abs() > 1e-8 || (fy - iy).abs() > 1e-8 || ix < 0.0 || iy < 0.0 {
            return None;
        }
        Some((ix as usize, iy as usize))
    }

    /// Largest `|w|` over the lattice.
    pub fn max_radius(&self) -> f64 {
        self.iter_points()
            .map(|(_, _, w)| w.norm())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shrink_keeps_alignment() {
        let g = LatticeGrid::centered(0.8, 21);
        let inner = g.shrink(2).unwrap();
        assert_eq!(inner.nx, 17);
        assert_eq!(g.offset_of(&inner), Some((2, 2)));
        let p_outer = g.point(5, 7);
        let p_inner = inner.point(3, 5);
        assert!((p_outer - p_inner).norm() < 1e-14);
    }

    #[test]
    fn centered_covers_the_square() {
        let g = LatticeGrid::centered(0.5, 11);
        assert!((g.point(0, 0) - Complex64::new(-0.5, -0.5)).norm() < 1e-14);
        assert!((g.point(10, 10) - Complex64::new(0.5, 0.5)).norm() < 1e-14);
    }
}
