//! Curvature of kernel bundles and second fundamental forms at truncation.
//!
//! The rank-1 curvature is `-dd̄ log K(w, w)`, evaluated in closed form for
//! the power family and by a 5-point Laplacian stencil with one Richardson
//! level otherwise. Covariant derivatives act on lattice fields by Wirtinger
//! combinations of central differences; in rank 1 the commutator term of the
//! holomorphic-direction recursion vanishes identically, so both directions
//! are plain differences. Rank-n curvature is assembled from the Gram matrix
//! of a holomorphic frame, where the commutator term is kept.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::cfb::CfbOperator;
use crate::error::{Error, Result};
use crate::grid::LatticeGrid;
use crate::kernels::{DiagonalKernel, DiskPoint, KernelTail};
use crate::linalg::{condition_number, try_inverse, CMatrix};
use crate::shifts::{section, section_derivative};
use crate::symbols::AnalyticSymbol;

/// Step for fresh point stencils.
const FD_STEP: f64 = 1e-3;
/// Largest radius at which curvature evaluation is attempted.
const RADIUS_CAP: f64 = 0.95;
/// Gram condition cap before a frame is declared degenerate.
const FRAME_COND_CAP: f64 = 1e8;

/// How a field's values were produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    ClosedForm,
    FiniteDifference { step: f64 },
}

/// Which evaluation path `curvature_rank1` takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureMethod {
    /// Closed form when the kernel has a power tail, stencil otherwise.
    Auto,
    /// Force the closed form; errors for finite kernels.
    ClosedForm,
    /// Force the stencil.
    FiniteDifference,
}

/// Wirtinger direction of a covariant derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// d/dw.
    W,
    /// d/d(conj w).
    WBar,
}

/// Scalar field on a lattice with its covariant-derivative order.
#[derive(Debug, Clone)]
pub struct CurvatureField {
    pub grid: LatticeGrid,
    pub values: Vec<Complex64>,
    /// `(i, j)` means `i` holomorphic and `j` antiholomorphic derivatives.
    pub order: (u32, u32),
    pub provenance: Provenance,
}

impl CurvatureField {
    pub fn value(&self, ix: usize, iy: usize) -> Complex64 {
        self.values[self.grid.index(ix, iy)]
    }

    /// Largest imaginary part, useful when the field should be real.
    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Pointwise difference with a field on the same lattice.
    pub fn difference(&self, other: &CurvatureField) -> Result<Vec<Complex64>> {
        if self.grid != other.grid {
            return Err(Error::Precondition("fields live on different lattices".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect())
    }
}

/// Mixed Wirtinger derivative `dd̄ log f` at one point: 5-point Laplacian of
/// `log f` at steps `h` and `h/2` combined by one Richardson level, divided
/// by 4. The evaluator must return positive values on the stencil.
pub fn dd_bar_log_at<F>(f: F, w: Complex64) -> Result<f64>
where
    F: Fn(Complex64) -> Result<f64>,
{
    let logf = |z: Complex64| -> Result<f64> {
        let v = f(z)?;
        if !(v > 0.0) {
            return Err(Error::InvalidWitness(format!(
                "log argument {v:.3e} not positive at {z}"
            )));
        }
        Ok(v.ln())
    };
    let lap = |h: f64| -> Result<f64> {
        let c = logf(w)?;
        let xp = logf(w + Complex64::new(h, 0.0))?;
        let xm = logf(w - Complex64::new(h, 0.0))?;
        let yp = logf(w + Complex64::new(0.0, h))?;
        let ym = logf(w - Complex64::new(0.0, h))?;
        Ok((xp + xm + yp + ym - 4.0 * c) / (h * h))
    };
    let lap_h = lap(FD_STEP)?;
    let lap_h2 = lap(FD_STEP / 2.0)?;
    Ok((4.0 * lap_h2 - lap_h) / 3.0 / 4.0)
}

/// `-dd̄ log K` at one point through the stencil path.
pub fn curvature_rank1_at(k: &DiagonalKernel, w: Complex64, method: CurvatureMethod) -> Result<f64> {
    if w.norm() > RADIUS_CAP + 1e-12 {
        return Err(Error::OutOfDomain(format!(
            "curvature evaluation at |w| = {:.4} beyond {RADIUS_CAP}",
            w.norm()
        )));
    }
    let closed = |lambda: f64| -lambda / (1.0 - w.norm_sqr()).powi(2);
    match (method, k.tail()) {
        (CurvatureMethod::Auto | CurvatureMethod::ClosedForm, KernelTail::LambdaPower(l)) => {
            Ok(closed(l))
        }
        (CurvatureMethod::ClosedForm, KernelTail::Finite) => Err(Error::Unsupported(
            "closed form requested for a kernel without a power tail".into(),
        )),
        _ => {
            let ddbar = dd_bar_log_at(|z| k.eval_diag(&DiskPoint::new(z)?), w)?;
            Ok(-ddbar)
        }
    }
}

/// Rank-1 curvature field on a lattice.
pub fn curvature_rank1(
    k: &DiagonalKernel,
    grid: &LatticeGrid,
    method: CurvatureMethod,
) -> Result<CurvatureField> {
    let mut values = Vec::with_capacity(grid.len());
    for (_, _, w) in grid.iter_points() {
        values.push(Complex64::new(curvature_rank1_at(k, w, method)?, 0.0));
    }
    let provenance = match (method, k.tail()) {
        (CurvatureMethod::Auto | CurvatureMethod::ClosedForm, KernelTail::LambdaPower(_)) => {
            Provenance::ClosedForm
        }
        _ => Provenance::FiniteDifference { step: FD_STEP },
    };
    Ok(CurvatureField {
        grid: grid.clone(),
        values,
        order: (0, 0),
        provenance,
    })
}

fn wirtinger_at(
    grid: &LatticeGrid,
    values: &[Complex64],
    ix: usize,
    iy: usize,
) -> (Complex64, Complex64) {
    let h = grid.step;
    let fx = (values[grid.index(ix + 1, iy)] - values[grid.index(ix - 1, iy)]) / (2.0 * h);
    let fy = (values[grid.index(ix, iy + 1)] - values[grid.index(ix, iy - 1)]) / (2.0 * h);
    let i = Complex64::I;
    ((fx - i * fy) * 0.5, (fx + i * fy) * 0.5)
}

/// Covariant derivative of a rank-1 lattice field.
///
/// In rank 1 the connection commutator vanishes (scalar algebra), so both
/// directions reduce to central Wirtinger differences of the stored values;
/// the lattice shrinks by one ring.
pub fn covariant_derivative(field: &CurvatureField, direction: Direction) -> Result<CurvatureField> {
    let inner = field
        .grid
        .shrink(1)
        .ok_or_else(|| Error::OutOfDomain("differencing margin exhausted".into()))?;
    let mut values = Vec::with_capacity(inner.len());
    for (jx, jy, _) in inner.iter_points() {
        let (dw, dwbar) = wirtinger_at(&field.grid, &field.values, jx + 1, jy + 1);
        values.push(match direction {
            Direction::W => dw,
            Direction::WBar => dwbar,
        });
    }
    let order = match direction {
        Direction::W => (field.order.0 + 1, field.order.1),
        Direction::WBar => (field.order.0, field.order.1 + 1),
    };
    Ok(CurvatureField {
        grid: inner,
        values,
        order,
        provenance: Provenance::FiniteDifference { step: field.grid.step },
    })
}

/// Which second-fundamental-form variant a field carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SffVariant {
    /// The normalized form with the curvature denominator.
    Classical,
    /// The raw section-norm ratio of the connecting block.
    Generalized,
}

/// Second fundamental form samples along a point list.
#[derive(Debug, Clone)]
pub struct SecondFundamentalForm {
    pub points: Vec<Complex64>,
    pub values: Vec<f64>,
    pub variant: SffVariant,
    /// Empirical truncation bound: largest shift of the ratio when the
    /// truncation is halved.
    pub residual_bound: f64,
}

fn block_section_ratio(
    block: &CMatrix,
    k2: &DiagonalKernel,
    w: &DiskPoint,
    n: usize,
) -> Result<f64> {
    let t2 = section(k2, w, n)?;
    let image = block.view((0, 0), (n, n)) * t2.coords();
    Ok(image.norm_squared() / t2.norm_squared())
}

/// Generalized second fundamental form of one connecting block: the ratio
/// `||B t_2(w)||^2 / ||t_2(w)||^2` from truncated sections.
pub fn sff_ratio_field(
    block: &CMatrix,
    k2: &DiagonalKernel,
    points: &[DiskPoint],
) -> Result<SecondFundamentalForm> {
    let n = block.nrows();
    if block.ncols() != n {
        return Err(Error::Precondition("block must be square at truncation".into()));
    }
    let mut values = Vec::with_capacity(points.len());
    let mut bound: f64 = 0.0;
    for w in points {
        let full = block_section_ratio(block, k2, w, n)?;
        let half = block_section_ratio(block, k2, w, n / 2)?;
        bound = bound.max((full - half).abs());
        values.push(full);
    }
    Ok(SecondFundamentalForm {
        points: points.iter().map(|p| p.value()).collect(),
        values,
        variant: SffVariant::Generalized,
        residual_bound: bound,
    })
}

/// Classical second fundamental form of a 2x2 intertwined corner:
/// `kappa / sqrt(ratio - kappa)` with `kappa` the curvature of the upper
/// diagonal kernel and `ratio` the generalized form of the block.
pub fn sff_classical(
    k1: &DiagonalKernel,
    block: &CMatrix,
    k2: &DiagonalKernel,
    points: &[DiskPoint],
) -> Result<SecondFundamentalForm> {
    let ratio = sff_ratio_field(block, k2, points)?;
    let mut values = Vec::with_capacity(points.len());
    for (w, &r) in points.iter().zip(&ratio.values) {
        let kappa = curvature_rank1_at(k1, w.value(), CurvatureMethod::Auto)?;
        let denom = r - kappa;
        if denom <= 0.0 {
            return Err(Error::Precondition(
                "second-fundamental-form denominator must be positive".into(),
            ));
        }
        values.push(kappa / denom.sqrt());
    }
    Ok(SecondFundamentalForm {
        points: ratio.points,
        values,
        variant: SffVariant::Classical,
        residual_bound: ratio.residual_bound,
    })
}

/// Generalized second fundamental form of the `(i, i+1)` block of a block
/// operator (blocks 0-indexed).
pub fn sff_generalized(
    t: &CfbOperator,
    i: usize,
    points: &[DiskPoint],
) -> Result<SecondFundamentalForm> {
    if i + 1 >= t.block_count() {
        return Err(Error::InvalidParameter(format!(
            "superdiagonal index {i} out of range for {} blocks",
            t.block_count()
        )));
    }
    let block = t.block(i, i + 1);
    sff_ratio_field(&block, t.kernel(i + 1), points)
}

/// Closed-form generalized second fundamental form for power-family kernels:
/// `|phi*(w)|^2 (1 - |w|^2)^{lambda_2 - lambda_1}`.
pub fn sff_power_family_closed_form(
    lambda1: f64,
    lambda2: f64,
    phi: &AnalyticSymbol,
    w: Complex64,
) -> f64 {
    let conj_val = phi.eval_conj(w).norm_sqr();
    conj_val * (1.0 - w.norm_sqr()).powf(lambda2 - lambda1)
}

/// Holomorphic frame sampled on a lattice: `vectors[p]` holds the frame
/// vectors at lattice point `p` (row-major).
#[derive(Debug, Clone)]
pub struct FrameField {
    pub grid: LatticeGrid,
    pub vectors: Vec<Vec<DVector<Complex64>>>,
}

/// Matrix-valued lattice field.
#[derive(Debug, Clone)]
pub struct MatrixField {
    pub grid: LatticeGrid,
    pub values: Vec<CMatrix>,
    pub order: (u32, u32),
}

impl MatrixField {
    pub fn value(&self, ix: usize, iy: usize) -> &CMatrix {
        &self.values[self.grid.index(ix, iy)]
    }
}

/// Rank-n curvature with the connection field needed for holomorphic-direction
/// covariant derivatives.
#[derive(Debug, Clone)]
pub struct RankNCurvature {
    pub kappa: MatrixField,
    /// `h^{-1} d h`, one differencing ring larger than `kappa`.
    pub connection: MatrixField,
    pub max_gram_condition: f64,
}

fn gram_at(vectors: &[DVector<Complex64>]) -> CMatrix {
    let n = vectors.len();
    CMatrix::from_fn(n, n, |i, j| vectors[i].dotc(&vectors[j]))
}

fn matrix_wirtinger(
    grid: &LatticeGrid,
    values: &[CMatrix],
    ix: usize,
    iy: usize,
    direction: Direction,
) -> CMatrix {
    let h = grid.step;
    let fx = (&values[grid.index(ix + 1, iy)] - &values[grid.index(ix - 1, iy)]) / Complex64::new(2.0 * h, 0.0);
    let fy = (&values[grid.index(ix, iy + 1)] - &values[grid.index(ix, iy - 1)]) / Complex64::new(2.0 * h, 0.0);
    let i = Complex64::I;
    match direction {
        Direction::W => (fx.clone() - fy.clone() * i) * Complex64::new(0.5, 0.0),
        Direction::WBar => (fx + fy * i) * Complex64::new(0.5, 0.0),
    }
}

/// Curvature `-d̄ (h^{-1} d h)` of a rank-n frame from its Gram field.
pub fn curvature_rank_n(frame: &FrameField) -> Result<RankNCurvature> {
    if frame.vectors.len() != frame.grid.len() {
        return Err(Error::Precondition("frame samples do not match the lattice".into()));
    }
    let rank = frame
        .vectors
        .first()
        .map(|v| v.len())
        .ok_or_else(|| Error::Precondition("empty frame".into()))?;
    if rank == 0 {
        return Err(Error::Precondition("frame has no vectors".into()));
    }
    let mut gram = Vec::with_capacity(frame.vectors.len());
    let mut max_cond: f64 = 0.0;
    for vs in &frame.vectors {
        let h = gram_at(vs);
        let cond = condition_number(&h);
        if !(cond < FRAME_COND_CAP) {
            return Err(Error::SingularFrame(format!(
                "Gram condition {cond:.3e} exceeds {FRAME_COND_CAP:.0e}"
            )));
        }
        max_cond = max_cond.max(cond);
        gram.push(h);
    }

    let conn_grid = frame
        .grid
        .shrink(1)
        .ok_or_else(|| Error::OutOfDomain("lattice too small for the connection".into()))?;
    let mut connection = Vec::with_capacity(conn_grid.len());
    for (jx, jy, _) in conn_grid.iter_points() {
        let (ix, iy) = (jx + 1, jy + 1);
        let dh = matrix_wirtinger(&frame.grid, &gram, ix, iy, Direction::W);
        let hinv = try_inverse(&gram[frame.grid.index(ix, iy)], "Gram matrix")?;
        connection.push(hinv * dh);
    }

    let kappa_grid = conn_grid
        .shrink(1)
        .ok_or_else(|| Error::OutOfDomain("lattice too small for curvature".into()))?;
    let mut kappa = Vec::with_capacity(kappa_grid.len());
    for (jx, jy, _) in kappa_grid.iter_points() {
        let dbar = matrix_wirtinger(&conn_grid, &connection, jx + 1, jy + 1, Direction::WBar);
        kappa.push(-dbar);
    }

    Ok(RankNCurvature {
        kappa: MatrixField {
            grid: kappa_grid,
            values: kappa,
            order: (0, 0),
        },
        connection: MatrixField {
            grid: conn_grid,
            values: connection,
            order: (0, 0),
        },
        max_gram_condition: max_cond,
    })
}

/// Covariant derivative of a matrix field: plain Wirtinger difference in the
/// antiholomorphic direction, difference plus connection commutator in the
/// holomorphic one.
pub fn covariant_derivative_rank_n(
    field: &MatrixField,
    connection: &MatrixField,
    direction: Direction,
) -> Result<MatrixField> {
    let inner = field
        .grid
        .shrink(1)
        .ok_or_else(|| Error::OutOfDomain("differencing margin exhausted".into()))?;
    let offset = connection
        .grid
        .offset_of(&inner)
        .ok_or_else(|| Error::Precondition("connection lattice does not cover the field".into()))?;
    let mut values = Vec::with_capacity(inner.len());
    for (jx, jy, _) in inner.iter_points() {
        let mut d = matrix_wirtinger(&field.grid, &field.values, jx + 1, jy + 1, direction);
        if direction == Direction::W {
            let a = connection.value(jx + offset.0, jy + offset.1);
            let f = field.value(jx + 1, jy + 1);
            d += a * f - f * a;
        }
        values.push(d);
    }
    let order = match direction {
        Direction::W => (field.order.0 + 1, field.order.1),
        Direction::WBar => (field.order.0, field.order.1 + 1),
    };
    Ok(MatrixField {
        grid: inner,
        values,
        order,
    })
}

/// The rank-2 frame of an intertwined upper-triangular corner
/// `[[T_1, M*_phi], [0, T_2]]`: `gamma_1 = (t_1, 0)` and
/// `gamma_2 = (-phi*(w) t_1'(w), t_2(w))`.
pub fn corner_frame(
    k1: &DiagonalKernel,
    k2: &DiagonalKernel,
    phi: &AnalyticSymbol,
    grid: &LatticeGrid,
    n: usize,
) -> Result<FrameField> {
    let mut vectors = Vec::with_capacity(grid.len());
    for (_, _, w) in grid.iter_points() {
        let p = DiskPoint::new(w)?;
        let t1 = section(k1, &p, n)?;
        let t1d = section_derivative(k1, &p, n)?;
        let t2 = section(k2, &p, n)?;
        let phi_star = phi.eval_conj(w);
        let mut g1 = DVector::zeros(2 * n);
        g1.rows_mut(0, n).copy_from(t1.coords());
        let mut g2 = DVector::zeros(2 * n);
        g2.rows_mut(0, n).copy_from(&(t1d.coords() * (-phi_star)));
        g2.rows_mut(n, n).copy_from(t2.coords());
        vectors.push(vec![g1, g2]);
    }
    Ok(FrameField {
        grid: grid.clone(),
        vectors,
    })
}
