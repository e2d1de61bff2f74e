//! Numerical workbench for Cowen-Douglas operator theory on finite
//! truncations: diagonal reproducing kernels on the unit disk, their weighted
//! backward shifts, curvature and second fundamental forms, Property (H)
//! criteria, block operators with commuting cofactor structure, and the
//! similarity / weak-homogeneity decision procedures built on top of them.
//!
//! The primary interface is the `examples/` directory: one runnable example
//! per capability.
//!
//! ```bash
//! cargo run --example curvature_closed_form
//! cargo run --example stirling_weights
//! cargo run --example kernel_ratio_growth
//! cargo run --example property_h_criteria
//! cargo run --example intertwiner_structure
//! cargo run --example second_fundamental_form
//! cargo run --example cfb_assembly
//! cargo run --example similarity_family
//! cargo run --example j21_recursion
//! cargo run --example main1_witness
//! cargo run --example weak_homogeneity
//! cargo run --example run_config
//! ```
//!
//! A thin `cdops` binary exposes the same tasks for batch runs driven by a
//! TOML config (`cdops run --config experiment.toml`) or as one-off
//! subcommands; see the crate README.
//!
//! Numerical contract, in brief: kernels are normalized to `a_0 = 1`;
//! sections, shifts and symbol operators are compressions to the span of the
//! first `N` basis vectors; identities that hold for the infinite operators
//! are checked on edge-mask interiors where the compression is exact; all
//! randomized searches take explicit seeds and default to fixed ones.

pub mod cfb;
pub mod curvature;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod kernels;
mod linalg;
pub mod oracle;
pub mod property_h;
mod series;
pub mod shifts;
pub mod similarity;
pub mod symbols;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
