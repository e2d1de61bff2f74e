//! Thin command-line front end: parses flags, builds an experiment config,
//! and hands it to the library runner.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use cdops::experiment::{
    run, ExperimentConfig, GridSpec, KernelSpec, OperatorSpec, OutputSpec, SymbolSpec, TaskSpec,
};

#[derive(Parser)]
#[command(name = "cdops", version, about = "Curvature, Property (H) and similarity computations for truncated Cowen-Douglas operators")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// Output directory for reports, CSV grids and binary matrices.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for all randomized searches.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Per-block truncation dimension.
    #[arg(long, global = true)]
    truncation: Option<usize>,
    /// Stop at the first failing task.
    #[arg(long, global = true)]
    fail_fast: bool,
    /// Scale factor applied to crosscheck tolerances.
    #[arg(long, global = true)]
    tolerance_scale: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task in a TOML experiment config.
    Run {
        /// Path to the experiment file.
        #[arg(long)]
        config: PathBuf,
    },
    /// Finite-difference curvature field of a power-family kernel.
    Curvature {
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 21)]
        grid_n: usize,
        #[arg(long, default_value_t = 0.8)]
        half_width: f64,
        #[arg(long)]
        max_radius: Option<f64>,
        /// CSV file name (written into --out).
        #[arg(long)]
        csv: Option<String>,
    },
    /// Generalized second fundamental form of a two-block operator.
    Sff {
        #[arg(long)]
        lambda1: f64,
        #[arg(long)]
        lambda2: f64,
        /// Comma-separated real coefficients of the connecting symbol.
        #[arg(long, default_value = "1")]
        symbol: String,
        #[arg(long, default_value_t = 0.7)]
        half_width: f64,
        #[arg(long)]
        csv: Option<String>,
    },
    /// Property (H) criteria for a kernel pair.
    PropertyH {
        #[arg(long)]
        lambda1: f64,
        #[arg(long)]
        lambda2: f64,
        /// lambda-gap | weight-product | norm-limit | kernel-ratio |
        /// brute-force | all
        #[arg(long, default_value = "all")]
        criterion: String,
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Multiplication-family similarity of two operators with equal kernel
    /// chains.
    Similar {
        /// Comma-separated kernel exponents, e.g. "1,2".
        #[arg(long)]
        lambdas: String,
        /// Semicolon-separated superdiagonal symbols, each a comma list of
        /// real coefficients.
        #[arg(long)]
        left_symbols: String,
        #[arg(long)]
        right_symbols: String,
        /// Also run the two-condition witness check on the constructed
        /// witnesses.
        #[arg(long)]
        main1: bool,
        /// Export the witness in the dense binary layout.
        #[arg(long)]
        witness_binary: Option<String>,
    },
    /// I+K recursion for operators with equal diagonals and superdiagonals.
    J21 {
        #[arg(long)]
        lambdas: String,
        #[arg(long)]
        symbols: String,
        /// Real coefficients of the left operator's (0, n-1) cofactor.
        #[arg(long)]
        left_cofactor: Option<String>,
        /// Real coefficients of the right operator's (0, n-1) cofactor.
        #[arg(long)]
        right_cofactor: Option<String>,
    },
    /// Weak homogeneity of an operator under sampled Möbius maps.
    Homogeneous {
        #[arg(long)]
        lambdas: String,
        #[arg(long)]
        symbols: String,
        #[arg(long, default_value_t = 5)]
        samples: usize,
        #[arg(long, default_value_t = 0.6)]
        max_center: f64,
    },
    /// Structured-vs-oracle consistency checks.
    OracleCrosscheck {
        /// sylvester | intertwiner | curvature-stencil
        #[arg(long, default_value = "sylvester")]
        what: String,
        #[arg(long, default_value_t = 1.0)]
        lambda1: f64,
        #[arg(long, default_value_t = 2.0)]
        lambda2: f64,
    },
}

fn parse_reals(text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("cannot parse '{s}' as a real number"))
        })
        .collect()
}

fn parse_symbol(text: &str) -> anyhow::Result<SymbolSpec> {
    let coeffs = parse_reals(text)?;
    Ok(SymbolSpec {
        coeffs: Some(coeffs.into_iter().map(|c| [c, 0.0]).collect()),
        roots: None,
        scale: None,
    })
}

fn parse_symbol_list(text: &str) -> anyhow::Result<Vec<SymbolSpec>> {
    text.split(';').map(parse_symbol).collect()
}

fn chain_operator(
    lambdas: &str,
    symbols: &str,
    cofactor: Option<&str>,
) -> anyhow::Result<OperatorSpec> {
    let lambdas = parse_reals(lambdas)?;
    let superdiag = parse_symbol_list(symbols)?;
    if superdiag.len() + 1 != lambdas.len() {
        bail!(
            "{} kernels need {} superdiagonal symbols, got {}",
            lambdas.len(),
            lambdas.len() - 1,
            superdiag.len()
        );
    }
    let cofactors = match cofactor {
        Some(text) if lambdas.len() >= 3 => vec![cdops::experiment::CofactorSpec {
            i: 0,
            j: lambdas.len() - 1,
            symbol: parse_symbol(text)?,
        }],
        Some(_) => bail!("cofactors need at least three blocks"),
        None => vec![],
    };
    Ok(OperatorSpec {
        kernels: lambdas.into_iter().map(KernelSpec::lambda).collect(),
        superdiag,
        cofactors,
        truncation: None,
    })
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let mut config = match cli.command {
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            ExperimentConfig::from_toml(&text).context("parsing experiment config")?
        }
        Command::Curvature {
            lambda,
            grid_n,
            half_width,
            max_radius,
            csv,
        } => one_task(TaskSpec::Curvature {
            kernel: Some(KernelSpec::lambda(lambda)),
            operator: None,
            block: 0,
            grid: GridSpec {
                n: grid_n,
                half_width,
                max_radius,
            },
            csv,
        }),
        Command::Sff {
            lambda1,
            lambda2,
            symbol,
            half_width,
            csv,
        } => {
            let mut cfg = one_task(TaskSpec::Sff {
                operator: "pair".into(),
                index: 0,
                grid: GridSpec {
                    n: 15,
                    half_width,
                    max_radius: Some(half_width),
                },
                csv,
            });
            cfg.operators.insert(
                "pair".into(),
                OperatorSpec {
                    kernels: vec![KernelSpec::lambda(lambda1), KernelSpec::lambda(lambda2)],
                    superdiag: vec![parse_symbol(&symbol)?],
                    cofactors: vec![],
                    truncation: None,
                },
            );
            cfg
        }
        Command::PropertyH {
            lambda1,
            lambda2,
            criterion,
            n_max,
        } => one_task(TaskSpec::PropertyH {
            lambda1,
            lambda2,
            criterion,
            n_max,
            truncation: None,
        }),
        Command::Similar {
            lambdas,
            left_symbols,
            right_symbols,
            main1,
            witness_binary,
        } => {
            let mut cfg = one_task(TaskSpec::Similar {
                left: "left".into(),
                right: "right".into(),
                main1,
                witness_binary,
            });
            cfg.operators
                .insert("left".into(), chain_operator(&lambdas, &left_symbols, None)?);
            cfg.operators
                .insert("right".into(), chain_operator(&lambdas, &right_symbols, None)?);
            cfg
        }
        Command::J21 {
            lambdas,
            symbols,
            left_cofactor,
            right_cofactor,
        } => {
            let mut cfg = one_task(TaskSpec::J21 {
                left: "left".into(),
                right: "right".into(),
            });
            cfg.operators.insert(
                "left".into(),
                chain_operator(&lambdas, &symbols, left_cofactor.as_deref())?,
            );
            cfg.operators.insert(
                "right".into(),
                chain_operator(&lambdas, &symbols, right_cofactor.as_deref())?,
            );
            cfg
        }
        Command::Homogeneous {
            lambdas,
            symbols,
            samples,
            max_center,
        } => {
            let mut cfg = one_task(TaskSpec::Homogeneous {
                operator: "op".into(),
                samples,
                max_center,
            });
            cfg.operators
                .insert("op".into(), chain_operator(&lambdas, &symbols, None)?);
            cfg
        }
        Command::OracleCrosscheck {
            what,
            lambda1,
            lambda2,
        } => one_task(TaskSpec::OracleCrosscheck {
            what,
            lambda1,
            lambda2,
            truncation: None,
        }),
    };

    // Command-line overrides.
    if let Some(dir) = cli.global.out {
        config.output.dir = Some(dir);
    }
    if cli.global.seed.is_some() {
        config.seed = cli.global.seed;
    }
    if cli.global.truncation.is_some() {
        config.truncation = cli.global.truncation;
    }
    if cli.global.tolerance_scale.is_some() {
        config.tolerance_scale = cli.global.tolerance_scale;
    }
    if cli.global.fail_fast {
        config.fail_fast = true;
    }

    let summary = run(&config)?;
    for record in &summary.records {
        println!("{}", serde_json::to_string(record)?);
    }
    if let Some(p) = &summary.report_path {
        eprintln!("report: {}", p.display());
    }
    if summary.failed_tasks > 0 {
        bail!("{} task(s) failed", summary.failed_tasks);
    }
    Ok(())
}

fn one_task(task: TaskSpec) -> ExperimentConfig {
    ExperimentConfig {
        seed: None,
        truncation: None,
        tolerance_scale: None,
        fail_fast: false,
        output: OutputSpec::default(),
        operators: BTreeMap::new(),
        tasks: vec![task],
    }
}
