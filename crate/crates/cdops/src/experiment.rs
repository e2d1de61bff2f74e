//! Experiment configuration, task orchestration and report emission.
//!
//! Configs are TOML with complex numbers as `[re, im]` pairs. A run executes
//! its tasks in order and appends one self-describing JSON record per task to
//! the report, so interrupted sweeps keep everything already computed.
//! Verdict fields are deterministic for a fixed config and seed; timings are
//! excluded from that guarantee.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cfb::{diag_part, strongly_irreducible, CfbBuilder, CfbOperator};
use crate::curvature::{
    curvature_rank1_at, sff_generalized, sff_power_family_closed_form, CurvatureMethod,
};
use crate::error::{Error, Result};
use crate::grid::LatticeGrid;
use crate::kernels::{DiagonalKernel, DiskPoint};
use crate::linalg::CMatrix;
use crate::oracle::{direct_intertwiner, fd_dbar_dlog, sylvester_solve, IntertwinerStructure};
use crate::property_h::{
    brute_force_tau, check_kernel_ratio, check_lambda_gap, check_norm_limit, check_weight_product,
    PhStatus, PropertyHVerdict,
};
use crate::shifts::{TruncatedShift, WeightSequence};
use crate::similarity::{
    decide_multiplication_family, j21_intertwiner, main1_witness_check, weak_homogeneity,
    SimStatus, WhStatus,
};
use crate::symbols::{AnalyticSymbol, MobiusMap};

/// Default per-block truncation dimension.
pub const DEFAULT_TRUNCATION: usize = 32;
/// Default seed for all randomized searches.
pub const DEFAULT_SEED: u64 = 42;

fn default_grid_n() -> usize {
    21
}
fn default_half_width() -> f64 {
    0.8
}

/// Kernel declaration: either a power-family exponent or an explicit
/// coefficient list.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KernelSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
}

impl KernelSpec {
    pub fn lambda(l: f64) -> Self {
        KernelSpec {
            lambda: Some(l),
            coeffs: None,
        }
    }

    pub fn to_kernel(&self, min_len: usize) -> Result<DiagonalKernel> {
        match (self.lambda, &self.coeffs) {
            (Some(l), None) => DiagonalKernel::lambda_kernel(l, min_len.max(2)),
            (None, Some(c)) => DiagonalKernel::from_coeffs(c.clone(), "coeffs"),
            _ => Err(Error::InvalidParameter(
                "kernel needs exactly one of `lambda` or `coeffs`".into(),
            )),
        }
    }
}

/// Symbol declaration: a coefficient list of `[re, im]` pairs, or a factored
/// form with roots and a scale.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SymbolSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roots: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<[f64; 2]>,
}

impl SymbolSpec {
    pub fn to_symbol(&self) -> Result<AnalyticSymbol> {
        match (&self.coeffs, &self.roots) {
            (Some(c), None) => Ok(AnalyticSymbol::polynomial(
                c.iter().map(|p| Complex64::new(p[0], p[1])).collect(),
            )),
            (None, Some(r)) => {
                let roots: Vec<Complex64> = r.iter().map(|p| Complex64::new(p[0], p[1])).collect();
                let scale = self
                    .scale
                    .map(|p| Complex64::new(p[0], p[1]))
                    .unwrap_or(Complex64::ONE);
                Ok(AnalyticSymbol::from_roots(&roots, scale))
            }
            _ => Err(Error::InvalidParameter(
                "symbol needs exactly one of `coeffs` or `roots`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CofactorSpec {
    pub i: usize,
    pub j: usize,
    pub symbol: SymbolSpec,
}

/// One named operator.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OperatorSpec {
    pub kernels: Vec<KernelSpec>,
    #[serde(default)]
    pub superdiag: Vec<SymbolSpec>,
    #[serde(default)]
    pub cofactors: Vec<CofactorSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
}

impl OperatorSpec {
    pub fn build(&self, default_truncation: usize) -> Result<CfbOperator> {
        let n = self.truncation.unwrap_or(default_truncation);
        let kernels: Vec<DiagonalKernel> = self
            .kernels
            .iter()
            .map(|k| k.to_kernel(n + 1))
            .collect::<Result<_>>()?;
        let superdiag: Vec<AnalyticSymbol> = self
            .superdiag
            .iter()
            .map(|s| s.to_symbol())
            .collect::<Result<_>>()?;
        let mut b = CfbBuilder::new(kernels, superdiag, n);
        for c in &self.cofactors {
            b = b.cofactor(c.i, c.j, c.symbol.to_symbol()?);
        }
        b.build()
    }
}

/// Square evaluation grid, optionally clipped to a disk radius.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridSpec {
    #[serde(default = "default_grid_n")]
    pub n: usize,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_radius: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n: default_grid_n(),
            half_width: default_half_width(),
            max_radius: None,
        }
    }
}

impl GridSpec {
    /// Lattice points inside the configured radius.
    pub fn points(&self) -> Vec<Complex64> {
        let grid = LatticeGrid::centered(self.half_width, self.n);
        let cap = self.max_radius.unwrap_or(self.half_width);
        grid.iter_points()
            .map(|(_, _, w)| w)
            .filter(|w| w.norm() <= cap + 1e-12)
            .collect()
    }
}

/// Task declarations, tagged by `kind`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskSpec {
    /// Curvature field of a kernel (or one diagonal block of an operator).
    Curvature {
        #[serde(skip_serializing_if = "Option::is_none")]
        kernel: Option<KernelSpec>,
        #[serde(skip_serializing_if = "Option::is_none")]
        operator: Option<String>,
        #[serde(default)]
        block: usize,
        #[serde(default)]
        grid: GridSpec,
        #[serde(skip_serializing_if = "Option::is_none")]
        csv: Option<String>,
    },
    /// Generalized second fundamental form of one superdiagonal block.
    Sff {
        operator: String,
        #[serde(default)]
        index: usize,
        #[serde(default)]
        grid: GridSpec,
        #[serde(skip_serializing_if = "Option::is_none")]
        csv: Option<String>,
    },
    /// Property (H) criteria for a kernel pair.
    PropertyH {
        lambda1: f64,
        lambda2: f64,
        /// `lambda-gap`, `weight-product`, `norm-limit`, `kernel-ratio`,
        /// `brute-force` or `all`.
        #[serde(default = "default_criterion")]
        criterion: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        n_max: Option<usize>,
        #[serde(skip_serializing_if = "Option::is_none")]
        truncation: Option<usize>,
    },
    /// Multiplication-family similarity decision, optionally with the
    /// two-condition witness check on the constructed witnesses.
    Similar {
        left: String,
        right: String,
        #[serde(default)]
        main1: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        witness_binary: Option<String>,
    },
    /// The I + K recursion against the direct vectorized solve.
    J21 { left: String, right: String },
    /// Weak homogeneity with sampled Möbius maps.
    Homogeneous {
        operator: String,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_max_center")]
        max_center: f64,
    },
    /// Structured-vs-oracle consistency checks.
    OracleCrosscheck {
        /// `sylvester`, `intertwiner` or `curvature-stencil`.
        what: String,
        #[serde(default = "default_lambda1")]
        lambda1: f64,
        #[serde(default = "default_lambda2")]
        lambda2: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        truncation: Option<usize>,
    },
}

fn default_criterion() -> String {
    "all".into()
}
fn default_samples() -> usize {
    5
}
fn default_max_center() -> f64 {
    0.6
}
fn default_lambda1() -> f64 {
    1.0
}
fn default_lambda2() -> f64 {
    2.0
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
}

/// A whole experiment.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance_scale: Option<f64>,
    #[serde(default)]
    pub fail_fast: bool,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub operators: BTreeMap<String, OperatorSpec>,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config parse: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Validate cross-references and ranges before running anything.
    pub fn validate(&self) -> Result<()> {
        for (idx, task) in self.tasks.iter().enumerate() {
            let check_op = |name: &str| -> Result<()> {
                if self.operators.contains_key(name) {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "task {idx}: operator '{name}' is not defined"
                    )))
                }
            };
            match task {
                TaskSpec::Curvature { operator, grid, kernel, .. } => {
                    if let Some(name) = operator {
                        check_op(name)?;
                    }
                    if operator.is_none() && kernel.is_none() {
                        return Err(Error::InvalidParameter(format!(
                            "task {idx}: curvature needs a kernel or an operator"
                        )));
                    }
                    if grid.max_radius.unwrap_or(grid.half_width) > 0.95 {
                        return Err(Error::InvalidParameter(format!(
                            "task {idx}: grid radius beyond 0.95"
                        )));
                    }
                }
                TaskSpec::Sff { operator, grid, .. } => {
                    check_op(operator)?;
                    if grid.max_radius.unwrap_or(grid.half_width) > 0.95 {
                        return Err(Error::InvalidParameter(format!(
                            "task {idx}: grid radius beyond 0.95"
                        )));
                    }
                }
                TaskSpec::Similar { left, right, .. } | TaskSpec::J21 { left, right } => {
                    check_op(left)?;
                    check_op(right)?;
                }
                TaskSpec::Homogeneous { operator, .. } => check_op(operator)?,
                TaskSpec::PropertyH { .. } | TaskSpec::OracleCrosscheck { .. } => {}
            }
        }
        if let Some(ts) = self.tolerance_scale {
            if !(ts > 0.0) {
                return Err(Error::InvalidParameter("tolerance_scale must be positive".into()));
            }
        }
        Ok(())
    }
}

/// One report line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRecord {
    pub task: usize,
    pub kind: String,
    pub status: String,
    pub inputs: serde_json::Value,
    pub outcome: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub timing_ms: f64,
    pub version: String,
    pub seed: u64,
}

/// Result of a full run.
#[derive(Debug)]
pub struct RunSummary {
    pub records: Vec<ReportRecord>,
    pub report_path: Option<PathBuf>,
    pub failed_tasks: usize,
}

/// CSV of complex samples: `re_w, im_w, re_value, im_value`.
pub fn write_field_csv(path: &Path, rows: &[(Complex64, Complex64)]) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "re_w,im_w,re_value,im_value")?;
    for (w, v) in rows {
        writeln!(f, "{},{},{},{}", w.re, w.im, v.re, v.im)?;
    }
    Ok(())
}

const MATRIX_MAGIC: &[u8; 8] = b"CDOPSMX1";

/// Dense binary matrix layout: magic, u64 rows, u64 cols, then row-major
/// `(re, im)` f64 pairs, all little-endian.
pub fn write_matrix_binary(path: &Path, m: &CMatrix) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(MATRIX_MAGIC)?;
    f.write_all(&(m.nrows() as u64).to_le_bytes())?;
    f.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            f.write_all(&m[(i, j)].re.to_le_bytes())?;
            f.write_all(&m[(i, j)].im.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Read back a matrix written by [`write_matrix_binary`].
pub fn read_matrix_binary(path: &Path) -> std::io::Result<CMatrix> {
    let bytes = fs::read(path)?;
    let bad = |msg: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string());
    if bytes.len() < 24 || &bytes[..8] != MATRIX_MAGIC {
        return Err(bad("bad magic"));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    if bytes.len() != 24 + rows * cols * 16 {
        return Err(bad("length mismatch"));
    }
    let mut m = CMatrix::zeros(rows, cols);
    let mut off = 24;
    for i in 0..rows {
        for j in 0..cols {
            let re = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            let im = f64::from_le_bytes(bytes[off + 8..off + 16].try_into().unwrap());
            m[(i, j)] = Complex64::new(re, im);
            off += 16;
        }
    }
    Ok(m)
}

fn json(v: impl Serialize) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn ph_summary(v: &PropertyHVerdict) -> serde_json::Value {
    serde_json::json!({
        "criterion": format!("{:?}", v.criterion),
        "status": format!("{:?}", v.status),
        "note": v.evidence.note,
        "samples": v.evidence.samples,
    })
}

/// Execute a config. Writes the report and the resolved-config echo when an
/// output directory is configured.
pub fn run(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    let seed = config.seed.unwrap_or(DEFAULT_SEED);
    let truncation = config.truncation.unwrap_or(DEFAULT_TRUNCATION);
    let tol_scale = config.tolerance_scale.unwrap_or(1.0);

    let out_dir = config.output.dir.clone();
    if let Some(dir) = &out_dir {
        fs::create_dir_all(dir)
            .map_err(|e| Error::InvalidParameter(format!("cannot create output dir: {e}")))?;
        // Resolved-config echo: defaults made explicit.
        let mut resolved = config.clone();
        resolved.seed = Some(seed);
        resolved.truncation = Some(truncation);
        resolved.tolerance_scale = Some(tol_scale);
        fs::write(dir.join("resolved.toml"), resolved.to_toml())
            .map_err(|e| Error::InvalidParameter(format!("cannot write resolved config: {e}")))?;
    }
    let report_path = out_dir.as_ref().map(|d| {
        d.join(
            config
                .output
                .report
                .clone()
                .unwrap_or_else(|| "report.jsonl".into()),
        )
    });
    let mut report_file = match &report_path {
        Some(p) => Some(
            fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|e| Error::InvalidParameter(format!("cannot open report: {e}")))?,
        ),
        None => None,
    };

    let mut records = Vec::new();
    let mut failed = 0usize;
    for (idx, task) in config.tasks.iter().enumerate() {
        let started = std::time::Instant::now();
        let outcome = run_task(config, task, truncation, seed, tol_scale, out_dir.as_deref());
        let timing_ms = started.elapsed().as_secs_f64() * 1e3;
        let record = match outcome {
            Ok(outcome) => ReportRecord {
                task: idx,
                kind: task_kind(task).to_string(),
                status: "ok".into(),
                inputs: json(task),
                outcome,
                error: None,
                timing_ms,
                version: env!("CARGO_PKG_VERSION").into(),
                seed,
            },
            Err(e) => {
                failed += 1;
                ReportRecord {
                    task: idx,
                    kind: task_kind(task).to_string(),
                    status: "error".into(),
                    inputs: json(task),
                    outcome: serde_json::Value::Null,
                    error: Some(e.to_string()),
                    timing_ms,
                    version: env!("CARGO_PKG_VERSION").into(),
                    seed,
                }
            }
        };
        if let Some(f) = &mut report_file {
            let line = serde_json::to_string(&record)
                .map_err(|e| Error::InvalidParameter(format!("report serialize: {e}")))?;
            writeln!(f, "{line}").map_err(|e| Error::InvalidParameter(format!("report write: {e}")))?;
        }
        let is_err = record.status == "error";
        records.push(record);
        if is_err && config.fail_fast {
            break;
        }
    }
    Ok(RunSummary {
        records,
        report_path,
        failed_tasks: failed,
    })
}

fn task_kind(task: &TaskSpec) -> &'static str {
    match task {
        TaskSpec::Curvature { .. } => "curvature",
        TaskSpec::Sff { .. } => "sff",
        TaskSpec::PropertyH { .. } => "property-h",
        TaskSpec::Similar { .. } => "similar",
        TaskSpec::J21 { .. } => "j21",
        TaskSpec::Homogeneous { .. } => "homogeneous",
        TaskSpec::OracleCrosscheck { .. } => "oracle-crosscheck",
    }
}

fn build_named(config: &ExperimentConfig, name: &str, truncation: usize) -> Result<CfbOperator> {
    config
        .operators
        .get(name)
        .ok_or_else(|| Error::InvalidParameter(format!("operator '{name}' not defined")))?
        .build(truncation)
}

fn run_task(
    config: &ExperimentConfig,
    task: &TaskSpec,
    truncation: usize,
    seed: u64,
    tol_scale: f64,
    out_dir: Option<&Path>,
) -> Result<serde_json::Value> {
    match task {
        TaskSpec::Curvature {
            kernel,
            operator,
            block,
            grid,
            csv,
        } => {
            let k = match (kernel, operator) {
                (Some(ks), None) => ks.to_kernel(truncation.max(256))?,
                (None, Some(name)) => build_named(config, name, truncation)?.kernel(*block).clone(),
                _ => {
                    return Err(Error::InvalidParameter(
                        "curvature task needs exactly one of kernel/operator".into(),
                    ))
                }
            };
            let points = grid.points();
            let mut rows = Vec::with_capacity(points.len());
            let mut max_rel_err: f64 = 0.0;
            for &w in &points {
                let fd = curvature_rank1_at(&k, w, CurvatureMethod::FiniteDifference)?;
                if let Some(l) = k.lambda() {
                    let cf = -l / (1.0 - w.norm_sqr()).powi(2);
                    max_rel_err = max_rel_err.max(((fd - cf) / cf).abs());
                }
                rows.push((w, Complex64::new(fd, 0.0)));
            }
            let csv_path = match (csv, out_dir) {
                (Some(name), Some(dir)) => {
                    let p = dir.join(name);
                    write_field_csv(&p, &rows)
                        .map_err(|e| Error::InvalidParameter(format!("csv write: {e}")))?;
                    Some(p)
                }
                _ => None,
            };
            Ok(serde_json::json!({
                "points": rows.len(),
                "min": rows.iter().map(|r| r.1.re).fold(f64::INFINITY, f64::min),
                "max": rows.iter().map(|r| r.1.re).fold(f64::NEG_INFINITY, f64::max),
                "max_rel_error_vs_closed_form": if k.lambda().is_some() { Some(max_rel_err) } else { None },
                "csv": csv_path.map(|p| p.display().to_string()),
            }))
        }
        TaskSpec::Sff {
            operator,
            index,
            grid,
            csv,
        } => {
            let t = build_named(config, operator, truncation)?;
            let points: Vec<DiskPoint> = grid
                .points()
                .into_iter()
                .map(DiskPoint::new)
                .collect::<Result<_>>()?;
            let sff = sff_generalized(&t, *index, &points)?;
            let mut max_cf_err = None;
            if let (Some(l1), Some(l2)) = (t.kernel(*index).lambda(), t.kernel(*index + 1).lambda())
            {
                let phi = t.superdiagonal_symbol(*index);
                let mut e: f64 = 0.0;
                for (w, v) in sff.points.iter().zip(&sff.values) {
                    let cf = sff_power_family_closed_form(l1, l2, phi, *w);
                    e = e.max((v - cf).abs() / (1.0 + cf));
                }
                max_cf_err = Some(e);
            }
            let rows: Vec<(Complex64, Complex64)> = sff
                .points
                .iter()
                .zip(&sff.values)
                .map(|(w, v)| (*w, Complex64::new(*v, 0.0)))
                .collect();
            let csv_path = match (csv, out_dir) {
                (Some(name), Some(dir)) => {
                    let p = dir.join(name);
                    write_field_csv(&p, &rows)
                        .map_err(|e| Error::InvalidParameter(format!("csv write: {e}")))?;
                    Some(p)
                }
                _ => None,
            };
            Ok(serde_json::json!({
                "points": sff.points.len(),
                "residual_bound": sff.residual_bound,
                "max_rel_error_vs_closed_form": max_cf_err,
                "csv": csv_path.map(|p| p.display().to_string()),
            }))
        }
        TaskSpec::PropertyH {
            lambda1,
            lambda2,
            criterion,
            n_max,
            truncation: task_n,
        } => {
            let n_max = n_max.unwrap_or(4096);
            let bf_n = task_n.unwrap_or(24);
            let mut verdicts = Vec::new();
            let needs = |c: &str| criterion == "all" || criterion == c;
            if needs("lambda-gap") {
                verdicts.push(ph_summary(&check_lambda_gap(*lambda1, *lambda2)?));
            }
            if needs("weight-product") || needs("norm-limit") {
                let k1 = DiagonalKernel::lambda_kernel(*lambda1, n_max + 2)?;
                let k2 = DiagonalKernel::lambda_kernel(*lambda2, n_max + 2)?;
                let w1 = WeightSequence::from_kernel(&k1, n_max)?;
                let w2 = WeightSequence::from_kernel(&k2, n_max)?;
                if needs("weight-product") {
                    verdicts.push(ph_summary(&check_weight_product(&w1, &w2, n_max)?));
                }
                if needs("norm-limit") {
                    verdicts.push(ph_summary(&check_norm_limit(&w1, &w2, n_max)?));
                }
            }
            if needs("kernel-ratio") {
                let k1 = DiagonalKernel::lambda_kernel(*lambda1, 8)?;
                let k2 = DiagonalKernel::lambda_kernel(*lambda2, 8)?;
                verdicts.push(ph_summary(&check_kernel_ratio(
                    &k1,
                    &k2,
                    &[0.5, 0.9, 0.99, 0.999],
                )?));
            }
            if needs("brute-force") {
                let k1 = DiagonalKernel::lambda_kernel(*lambda1, bf_n + 2)?;
                let k2 = DiagonalKernel::lambda_kernel(*lambda2, bf_n + 2)?;
                let t1 = TruncatedShift::from_kernel(&k1, bf_n)?;
                let t2 = TruncatedShift::from_kernel(&k2, bf_n)?;
                let rep = brute_force_tau(t1.matrix(), t2.matrix())?;
                verdicts.push(serde_json::json!({
                    "criterion": "BruteForce",
                    "status": format!("{:?}", rep.verdict.status),
                    "note": rep.verdict.evidence.note,
                    "kernel_dim": rep.kernel_dim,
                    "range_dim": rep.range_dim,
                    "intersection_dim": rep.intersection_dim,
                }));
            }
            if verdicts.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "unknown criterion '{criterion}'"
                )));
            }
            let all_hold = verdicts
                .iter()
                .all(|v| v["status"] == json(format!("{:?}", PhStatus::Holds)));
            Ok(serde_json::json!({ "verdicts": verdicts, "all_hold": all_hold }))
        }
        TaskSpec::Similar {
            left,
            right,
            main1,
            witness_binary,
        } => {
            let t = build_named(config, left, truncation)?;
            let tt = build_named(config, right, truncation)?;
            let verdict = decide_multiplication_family(&t, &tt)?;
            let mut out = serde_json::json!({
                "status": format!("{:?}", verdict.status),
                "obstruction": verdict.obstruction,
                "witness_condition": verdict.witness.as_ref().map(|w| w.condition),
                "interior_residual": verdict.witness.as_ref().map(|w| w.interior_residual),
                "notes": verdict.notes,
            });
            if let (Some(name), Some(dir), Some(w)) = (witness_binary, out_dir, &verdict.witness) {
                let p = dir.join(name);
                write_matrix_binary(&p, &w.x)
                    .map_err(|e| Error::InvalidParameter(format!("binary write: {e}")))?;
                out["witness_file"] = json(p.display().to_string());
            }
            if *main1 && verdict.status == SimStatus::Similar {
                // Main1 witnesses from the multiplication-family diagonal
                // blocks, jointly rescaled into bundle maps.
                let w = verdict.witness.as_ref().expect("similar verdict has witness");
                let nn = t.block_dim();
                let nblocks = t.block_count();
                let mut smin_global = f64::INFINITY;
                let mut blocks = Vec::with_capacity(nblocks);
                for i in 0..nblocks {
                    let xi = w.x.view((i * nn, i * nn), (nn, nn)).into_owned();
                    smin_global = smin_global.min(
                        crate::linalg::singular_values(&xi)
                            .into_iter()
                            .fold(f64::INFINITY, f64::min),
                    );
                    blocks.push(xi);
                }
                let c = 1.01 / smin_global;
                let mut phis = Vec::with_capacity(nblocks);
                for xi in &blocks {
                    let g = xi.adjoint() * xi * Complex64::new(c * c, 0.0)
                        - CMatrix::identity(nn, nn);
                    let eig = g.symmetric_eigen();
                    let mut d = CMatrix::zeros(nn, nn);
                    for (i, &l) in eig.eigenvalues.iter().enumerate() {
                        d[(i, i)] = Complex64::new(l.max(0.0).sqrt(), 0.0);
                    }
                    phis.push(&eig.eigenvectors * d * eig.eigenvectors.adjoint());
                }
                let points: Vec<DiskPoint> = [0.0, 0.2, 0.4, 0.55, 0.7]
                    .iter()
                    .map(|&r| DiskPoint::new(Complex64::new(r, 0.02)))
                    .collect::<Result<_>>()?;
                let rep = main1_witness_check(&t, &tt, &phis, &points)?;
                out["main1"] = serde_json::json!({
                    "status": format!("{:?}", rep.status),
                    "curvature_residuals": rep.curvature_residuals,
                    "sff_residuals": rep.sff_residuals,
                });
            }
            Ok(out)
        }
        TaskSpec::J21 { left, right } => {
            let t = build_named(config, left, truncation)?;
            let tt = build_named(config, right, truncation)?;
            let rec = j21_intertwiner(&t, &tt)?;
            let search = direct_intertwiner(
                t.matrix(),
                tt.matrix(),
                IntertwinerStructure::BlockUpper {
                    n: t.block_count(),
                    dim: t.block_dim(),
                },
            )?;
            // Residual of the best direct candidate, same interior measure.
            let direct_res = search
                .best
                .as_ref()
                .map(|x| {
                    let r = x * t.matrix() - tt.matrix() * x;
                    t.edge_mask().interior_frobenius(&r, t.block_dim())
                        / (x.norm() * t.matrix().norm()).max(1e-300)
                })
                .unwrap_or(f64::INFINITY);
            Ok(serde_json::json!({
                "recursion_interior_residual": rec.interior_residual,
                "stage_residuals": rec.stage_residuals.iter().map(|r| r.2).collect::<Vec<_>>(),
                "direct_interior_residual": direct_res,
                "residual_agreement": (rec.interior_residual - direct_res).abs(),
                "solution_space_dim": search.report.solution_space_dim,
            }))
        }
        TaskSpec::Homogeneous {
            operator,
            samples,
            max_center,
        } => {
            let t = build_named(config, operator, truncation)?;
            let maps = sample_mobius_maps(*samples, *max_center, seed)?;
            let rep = weak_homogeneity(&t, &maps)?;
            Ok(serde_json::json!({
                "status": format!("{:?}", rep.status),
                "obstruction": rep.obstruction,
                "checks": rep.checks.iter().map(|c| serde_json::json!({
                    "center": [c.center.re, c.center.im],
                    "phase": c.phase,
                    "residual": c.residual,
                })).collect::<Vec<_>>(),
                "weakly_homogeneous": rep.status == WhStatus::WeaklyHomogeneous,
            }))
        }
        TaskSpec::OracleCrosscheck {
            what,
            lambda1,
            lambda2,
            truncation: task_n,
        } => {
            let n = task_n.unwrap_or(12.min(truncation));
            let k1 = DiagonalKernel::lambda_kernel(*lambda1, n + 2)?;
            let k2 = DiagonalKernel::lambda_kernel(*lambda2, n + 2)?;
            let cap = 1e-8 * tol_scale;
            match what.as_str() {
                "sylvester" => {
                    let a = TruncatedShift::from_kernel(&k1, n)?.matrix().clone();
                    let b = TruncatedShift::from_kernel(&k2, n)?.matrix().clone();
                    let mut z = CMatrix::zeros(n, n);
                    for i in 0..n {
                        for j in 0..n {
                            z[(i, j)] = Complex64::new(
                                ((i * 3 + j) % 7) as f64 * 0.1 - 0.3,
                                ((i + 2 * j) % 5) as f64 * 0.1,
                            );
                        }
                    }
                    let rhs = &a * &z - &z * &b;
                    let (_, rep) = sylvester_solve(&a, &b, &rhs)?;
                    Ok(serde_json::json!({
                        "what": what,
                        "residual": rep.residual,
                        "pass": rep.residual <= cap,
                    }))
                }
                "intertwiner" => {
                    let a = TruncatedShift::from_kernel(&k1, n)?.matrix().clone();
                    let b = TruncatedShift::from_kernel(&k2, n)?.matrix().clone();
                    let search = direct_intertwiner(&b, &a, IntertwinerStructure::Full)?;
                    let max_below = search
                        .basis
                        .iter()
                        .map(crate::property_h::below_diagonal_mass)
                        .fold(0.0_f64, f64::max);
                    Ok(serde_json::json!({
                        "what": what,
                        "solution_space_dim": search.report.solution_space_dim,
                        "max_below_diagonal_mass": max_below,
                        "pass": max_below <= 1e-10 * tol_scale,
                    }))
                }
                "curvature-stencil" => {
                    // Structured stencil against the independent nested
                    // Wirtinger stencil on log K.
                    let grid = LatticeGrid::around(Complex64::new(0.4, 0.1), 8e-3, 9);
                    let values: Vec<Complex64> = grid
                        .iter_points()
                        .map(|(_, _, w)| {
                            let p = DiskPoint::new(w)?;
                            Ok(Complex64::new(k1.eval_diag(&p)?.ln(), 0.0))
                        })
                        .collect::<Result<_>>()?;
                    let (inner, mixed) = fd_dbar_dlog(&grid, &values)?;
                    let mut max_diff: f64 = 0.0;
                    for (ix, iy, w) in inner.iter_points() {
                        let oracle = -mixed[inner.index(ix, iy)].re;
                        let structured =
                            curvature_rank1_at(&k1, w, CurvatureMethod::FiniteDifference)?;
                        max_diff = max_diff.max((oracle - structured).abs());
                    }
                    Ok(serde_json::json!({
                        "what": what,
                        "max_difference": max_diff,
                        "pass": max_diff <= 1e-6 * tol_scale,
                    }))
                }
                other => Err(Error::InvalidParameter(format!(
                    "unknown crosscheck '{other}'"
                ))),
            }
        }
    }
}

/// Deterministic Möbius samples with `|a| <= max_center`.
pub fn sample_mobius_maps(count: usize, max_center: f64, seed: u64) -> Result<Vec<MobiusMap>> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let r = max_center * rng.random::<f64>().sqrt();
        let ang = rng.random::<f64>() * std::f64::consts::TAU;
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        out.push(MobiusMap::new(Complex64::from_polar(r, ang), theta)?);
    }
    Ok(out)
}

/// Sanity harness used by tests and the strong-irreducibility CLI output.
pub fn si_summary(t: &CfbOperator) -> serde_json::Value {
    let si = strongly_irreducible(t);
    serde_json::json!({
        "strongly_irreducible": si.strongly_irreducible,
        "split": si.split.map(|s| serde_json::json!({
            "zero_superdiagonal": s.zero_superdiagonal,
            "left_blocks": [s.left_blocks.start, s.left_blocks.end],
            "right_blocks": [s.right_blocks.start, s.right_blocks.end],
        })),
        "diagonal_blocks": diag_part(t).map(|d| d.len()).unwrap_or(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_config() -> ExperimentConfig {
        let text = r#"
seed = 7
truncation = 16

[operators.pair_left]
kernels = [{ lambda = 1.0 }, { lambda = 2.0 }]
superdiag = [{ roots = [[0.5, 0.0]], scale = [1.0, 0.0] }]

[operators.pair_right]
kernels = [{ lambda = 1.0 }, { lambda = 2.0 }]
superdiag = [{ roots = [[0.5, 0.0]], scale = [3.0, 0.0] }]

[[tasks]]
kind = "similar"
left = "pair_left"
right = "pair_right"

[[tasks]]
kind = "property-h"
lambda1 = 1.0
lambda2 = 2.0
criterion = "lambda-gap"
"#;
        ExperimentConfig::from_toml(text).unwrap()
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = demo_config();
        let echoed = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, echoed);
    }

    #[test]
    fn run_produces_deterministic_verdicts() {
        let cfg = demo_config();
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.records.len(), 2);
        assert_eq!(a.failed_tasks, 0);
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.outcome, rb.outcome);
            assert_eq!(ra.status, rb.status);
        }
        assert_eq!(a.records[0].outcome["status"], "Similar");
    }

    #[test]
    fn empty_task_list_is_a_clean_run() {
        let cfg = ExperimentConfig::default();
        let summary = run(&cfg).unwrap();
        assert_eq!(summary.records.len(), 0);
        assert_eq!(summary.failed_tasks, 0);
    }

    #[test]
    fn validation_rejects_unknown_operator() {
        let mut cfg = demo_config();
        cfg.tasks.push(TaskSpec::J21 {
            left: "missing".into(),
            right: "pair_left".into(),
        });
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn task_errors_are_recorded_not_fatal() {
        let mut cfg = demo_config();
        // lambda below 1 violates the gap-criterion hypothesis.
        cfg.tasks = vec![TaskSpec::PropertyH {
            lambda1: 0.5,
            lambda2: 1.0,
            criterion: "lambda-gap".into(),
            n_max: None,
            truncation: None,
        }];
        let summary = run(&cfg).unwrap();
        assert_eq!(summary.failed_tasks, 1);
        assert_eq!(summary.records[0].status, "error");
    }

    #[test]
    fn matrix_binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let m = CMatrix::from_fn(3, 2, |i, j| Complex64::new(i as f64, j as f64 - 0.5));
        write_matrix_binary(&path, &m).unwrap();
        let back = read_matrix_binary(&path).unwrap();
        assert_eq!(m, back);
    }
}
