//! The `lowrank` command-line front end.
//!
//! Every command prints `key=value` lines on stdout. Exit codes: 0 success,
//! 2 usage (bad flags, rank arity, mismatched dims), 3 I/O or file format,
//! 4 numerical failure or the dense-size guard. Indices and modes on the
//! command line are 1-based.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::cp::{cp_als, rank222_classify, AlsOptions, BOUNDARY_TOL};
use crate::error::TensorError;
use crate::funcgrid::{discretize, poly_discretize_cp, CartesianGrid, MonomialPoly};
use crate::io::{self, Decomposition};
use crate::tensor::{DenseTensor, MultiIndex, Norm};
use crate::tt::{
    self, check_dense_size, tt_entry, tt_marginal, tt_partition, tt_svd, TtTruncation,
};
use crate::tucker::{hooi, hosvd, ranks_for_tolerance};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Tensor(e) => match e {
                TensorError::Shape(_)
                | TensorError::InvalidArgument(_)
                | TensorError::IndexOutOfRange { .. } => 2,
                TensorError::Io(_) | TensorError::Format { .. } | TensorError::Parse { .. } => 3,
                TensorError::Numerical(_)
                | TensorError::Evaluation { .. }
                | TensorError::TooLarge { .. } => 4,
            },
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Debug, Parser)]
#[command(
    name = "lowrank",
    version,
    about = "Dense tensors and their CP, Tucker and TT approximations"
)]
pub struct Cli {
    /// Largest number of entries any dense tensor may have [default: $LOWRANK_MAX_DENSE_ENTRIES or 1e8]
    #[arg(long, global = true)]
    pub max_dense: Option<u128>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dims, norms and entry sum of a tensor file
    Info { path: PathBuf },
    /// Fit a CP, Tucker or TT decomposition
    Decompose(DecomposeArgs),
    /// Densify a CPD1, TUCK1 or TTEN1 file
    Reconstruct {
        decomposition: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Relative l2 error of a decomposition against a tensor
    Error {
        tensor: PathBuf,
        decomposition: PathBuf,
    },
    /// Queries answered inside the TT format
    Tt {
        #[command(subcommand)]
        query: TtQuery,
    },
    /// Sample a polynomial or builtin function on a Cartesian grid
    Grid(GridArgs),
    /// Hyperdeterminant and rank class of a 2x2x2 tensor
    Rank222 { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Cp,
    Hosvd,
    Hooi,
    Tt,
}

#[derive(Debug, clap::Args)]
#[command(group(ArgGroup::new("target").required(true).args(["rank", "tol"])))]
pub struct DecomposeArgs {
    pub path: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Comma-separated ranks: one for cp, d for hosvd/hooi, d-1 for tt
    #[arg(long, value_delimiter = ',')]
    pub rank: Option<Vec<usize>>,
    /// Relative error target (hosvd, hooi, tt)
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub max_sweeps: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub rel_tol: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the run report as JSON
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum TtQuery {
    /// Sum of all entries
    Z { path: PathBuf },
    /// Sum over every mode except MODE
    Marginal { mode: usize, path: PathBuf },
    /// One entry
    Entry {
        path: PathBuf,
        #[arg(required = true, num_args = 1..)]
        index: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Builtin {
    /// (x + y)^2
    SquareOfSum,
    /// 1 in any number of variables
    One,
    /// exp(x_1 + ... + x_d)
    ExpSum,
}

#[derive(Debug, clap::Args)]
#[command(group(ArgGroup::new("source").required(true).args(["poly", "builtin"])))]
pub struct GridArgs {
    /// Polynomial file, one `coeff e1 ... ed` term per line
    #[arg(long)]
    pub poly: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub builtin: Option<Builtin>,
    /// Mesh file, one ascending list of points per line
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the CP form of a polynomial
    #[arg(long)]
    pub cp_out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub method: String,
    pub dims: Vec<usize>,
    pub requested_ranks: Option<Vec<usize>>,
    pub tolerance: Option<f64>,
    pub achieved_ranks: Vec<usize>,
    pub relative_error: f64,
    pub objective_trace: Option<Vec<f64>>,
    pub step_qualities: Option<Vec<f64>>,
    pub seed: u64,
    pub wall_time_seconds: f64,
}

fn join<T: std::fmt::Debug>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn join_dims(xs: &[usize]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

struct Ctx {
    cap: u128,
    out: String,
}

impl Ctx {
    fn line(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.out, "{key}={value}");
    }
}

fn densify(dec: &Decomposition, cap: u128) -> CliResult<DenseTensor> {
    check_dense_size(&dec.dims(), cap)?;
    Ok(match dec {
        Decomposition::Cp(c) => c.reconstruct()?,
        Decomposition::Tucker(t) => t.reconstruct()?,
        Decomposition::Tt(t) => tt::tt_reconstruct_with_cap(t, cap)?,
    })
}

fn relative_error(a: &DenseTensor, b: &DenseTensor) -> CliResult<f64> {
    let err = a.sub(b)?.norm2();
    let n = a.norm2();
    Ok(if n > 0.0 { err / n } else { err })
}

fn read_tensor(path: &Path, cap: u128) -> CliResult<DenseTensor> {
    let t = io::read_tensor(path)?;
    check_dense_size(t.dims(), cap)?;
    Ok(t)
}

/// Runs an already parsed command line.
pub fn execute(cli: &Cli) -> CliResult<String> {
    let mut ctx = Ctx {
        cap: cli.max_dense.unwrap_or_else(tt::max_dense_entries),
        out: String::new(),
    };
    match &cli.command {
        Command::Info { path } => cmd_info(&mut ctx, path)?,
        Command::Decompose(args) => cmd_decompose(&mut ctx, args)?,
        Command::Reconstruct { decomposition, out } => {
            cmd_reconstruct(&mut ctx, decomposition, out)?
        }
        Command::Error {
            tensor,
            decomposition,
        } => cmd_error(&mut ctx, tensor, decomposition)?,
        Command::Tt { query } => cmd_tt(&mut ctx, query)?,
        Command::Grid(args) => cmd_grid(&mut ctx, args)?,
        Command::Rank222 { path } => cmd_rank222(&mut ctx, path)?,
    }
    Ok(ctx.out)
}

fn cmd_info(ctx: &mut Ctx, path: &Path) -> CliResult<()> {
    let a = read_tensor(path, ctx.cap)?;
    ctx.line("dims", join_dims(a.dims()));
    ctx.line("order", a.order());
    ctx.line("entries", a.len());
    ctx.line("norm_l1", format!("{:?}", a.norm(Norm::L1)));
    ctx.line("norm_l2", format!("{:?}", a.norm(Norm::L2)));
    ctx.line("norm_inf", format!("{:?}", a.norm(Norm::Inf)));
    ctx.line("partition_sum", format!("{:?}", a.partition_sum()));
    Ok(())
}

fn cmd_decompose(ctx: &mut Ctx, args: &DecomposeArgs) -> CliResult<()> {
    let a = read_tensor(&args.path, ctx.cap)?;
    let d = a.order();
    let start = Instant::now();
    let opts = AlsOptions {
        max_sweeps: args.max_sweeps,
        rel_tol: args.rel_tol,
        seed: args.seed,
        ..AlsOptions::default()
    };
    let expected = match args.method {
        Method::Cp => 1,
        Method::Hosvd | Method::Hooi => d,
        Method::Tt => d - 1,
    };
    if let Some(r) = &args.rank {
        if r.len() != expected {
            return usage(format!(
                "--rank needs {expected} value(s) for this method on an order-{d} tensor, got {}",
                r.len()
            ));
        }
    }
    if let Some(eps) = args.tol {
        if !(0.0..1.0).contains(&eps) {
            return usage(format!("--tol {eps} outside [0, 1)"));
        }
    }

    let mut trace = None;
    let mut extra: Vec<(&str, String)> = Vec::new();
    let mut qualities = None;
    let dec = match args.method {
        Method::Cp => {
            let Some(r) = &args.rank else {
                return usage("cp needs --rank; a tolerance does not determine a CP rank");
            };
            let fit = cp_als(&a, r[0], &opts)?;
            extra.push(("sweeps", (fit.objective_trace.len() - 1).to_string()));
            extra.push(("ill_conditioned_sweeps", join(&fit.ill_conditioned_sweeps)));
            trace = Some(fit.objective_trace);
            Decomposition::Cp(fit.decomposition)
        }
        Method::Hosvd | Method::Hooi => {
            let ranks = match (&args.rank, args.tol) {
                (Some(r), _) => r.clone(),
                (None, Some(eps)) => ranks_for_tolerance(&a, eps)?,
                (None, None) => unreachable!("clap requires --rank or --tol"),
            };
            if args.method == Method::Hosvd {
                Decomposition::Tucker(hosvd(&a, &ranks)?.decomposition)
            } else {
                let fit = hooi(&a, &ranks, &opts)?;
                trace = Some(fit.error_trace);
                Decomposition::Tucker(fit.decomposition)
            }
        }
        Method::Tt => {
            let truncation = match (&args.rank, args.tol) {
                (Some(r), _) => TtTruncation::Ranks(r.clone()),
                (None, Some(eps)) => TtTruncation::Tolerance(eps),
                (None, None) => unreachable!("clap requires --rank or --tol"),
            };
            let (t, q) = tt_svd(&a, &truncation)?;
            extra.push(("global_quality", format!("{:?}", q.global_quality())));
            qualities = Some(q.step_qualities);
            Decomposition::Tt(t)
        }
    };

    let bytes = dec.encode();
    std::fs::write(&args.out, &bytes).map_err(TensorError::from)?;
    // the reported error comes from the written artifact, not the engine
    let stored = io::decode_decomposition(&bytes)?;
    let rel = relative_error(&a, &densify(&stored, ctx.cap)?)?;
    let achieved = match &stored {
        Decomposition::Cp(c) => vec![c.rank()],
        Decomposition::Tucker(t) => t.ranks(),
        Decomposition::Tt(t) => t.ranks(),
    };
    let wall = start.elapsed().as_secs_f64();

    let method = format!("{:?}", args.method).to_lowercase();
    ctx.line("method", &method);
    ctx.line("dims", join_dims(a.dims()));
    match (&args.rank, args.tol) {
        (Some(r), _) => ctx.line("requested_ranks", join_dims(r)),
        (None, Some(eps)) => ctx.line("tolerance", format!("{eps:?}")),
        _ => {}
    }
    ctx.line("achieved_ranks", join_dims(&achieved));
    ctx.line("relative_error", format!("{rel:?}"));
    if let Some(q) = &qualities {
        ctx.line("theta", join(q));
    }
    for (k, v) in &extra {
        ctx.line(k, v);
    }
    if let Some(t) = &trace {
        let key = if args.method == Method::Hooi {
            "error_trace"
        } else {
            "objective_trace"
        };
        ctx.line(key, join(t));
    }
    ctx.line("seed", args.seed);
    ctx.line("wall_time", format!("{wall:.6}"));

    if let Some(path) = &args.report {
        let report = RunReport {
            method,
            dims: a.dims().to_vec(),
            requested_ranks: args.rank.clone(),
            tolerance: args.tol,
            achieved_ranks: achieved,
            relative_error: rel,
            objective_trace: trace,
            step_qualities: qualities,
            seed: args.seed,
            wall_time_seconds: wall,
        };
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| TensorError::Numerical(e.to_string()))?;
        std::fs::write(path, json + "\n").map_err(TensorError::from)?;
    }
    Ok(())
}

fn cmd_reconstruct(ctx: &mut Ctx, path: &Path, out: &Path) -> CliResult<()> {
    let dec = io::read_decomposition(path)?;
    let dense = densify(&dec, ctx.cap)?;
    io::write_tensor(out, &dense)?;
    ctx.line("dims", join_dims(dense.dims()));
    ctx.line("norm_l2", format!("{:?}", dense.norm2()));
    Ok(())
}

fn cmd_error(ctx: &mut Ctx, tensor: &Path, path: &Path) -> CliResult<()> {
    let a = read_tensor(tensor, ctx.cap)?;
    let dec = io::read_decomposition(path)?;
    if dec.dims() != a.dims() {
        return usage(format!(
            "tensor dims {:?} differ from decomposition dims {:?}",
            a.dims(),
            dec.dims()
        ));
    }
    let b = densify(&dec, ctx.cap)?;
    ctx.line("absolute_error", format!("{:?}", a.sub(&b)?.norm2()));
    ctx.line("relative_error", format!("{:?}", relative_error(&a, &b)?));
    Ok(())
}

fn read_tt(path: &Path) -> CliResult<tt::TtTensor> {
    let bytes = std::fs::read(path).map_err(TensorError::from)?;
    Ok(io::decode_tt(&bytes)?)
}

fn cmd_tt(ctx: &mut Ctx, query: &TtQuery) -> CliResult<()> {
    match query {
        TtQuery::Z { path } => {
            let t = read_tt(path)?;
            ctx.line("z", format!("{:?}", tt_partition(&t)));
        }
        TtQuery::Marginal { mode, path } => {
            let t = read_tt(path)?;
            if *mode == 0 || *mode > t.order() {
                return usage(format!("mode {mode} outside 1..={}", t.order()));
            }
            let m = tt_marginal(&t, mode - 1)?;
            ctx.line("mode", mode);
            ctx.line("marginal", join(m.values()));
        }
        TtQuery::Entry { path, index } => {
            let t = read_tt(path)?;
            let idx = MultiIndex::from_one_based(index)?;
            ctx.line("entry", format!("{:?}", tt_entry(&t, idx.as_slice())?));
        }
    }
    Ok(())
}

fn builtin_poly(b: Builtin, arity: usize) -> CliResult<Option<MonomialPoly>> {
    Ok(match b {
        Builtin::SquareOfSum => {
            if arity != 2 {
                return usage(format!("square-of-sum needs 2 meshes, got {arity}"));
            }
            Some(MonomialPoly::new(
                2,
                vec![(1.0, vec![2, 0]), (2.0, vec![1, 1]), (1.0, vec![0, 2])],
            )?)
        }
        Builtin::One => Some(MonomialPoly::constant(arity, 1.0)?),
        Builtin::ExpSum => None,
    })
}

fn cmd_grid(ctx: &mut Ctx, args: &GridArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.mesh).map_err(TensorError::from)?;
    let grid = CartesianGrid::new(io::parse_meshes(&text)?)?;
    check_dense_size(&grid.dims(), ctx.cap)?;
    let poly = match (&args.poly, args.builtin) {
        (Some(p), _) => Some(io::parse_poly(
            &std::fs::read_to_string(p).map_err(TensorError::from)?,
        )?),
        (None, Some(b)) => builtin_poly(b, grid.order())?,
        (None, None) => unreachable!("clap requires --poly or --builtin"),
    };
    if let Some(p) = &poly {
        if p.arity() != grid.order() {
            return usage(format!(
                "polynomial in {} variables on {} meshes",
                p.arity(),
                grid.order()
            ));
        }
    }
    let dense = match &poly {
        Some(p) => discretize(&grid, |x| Ok(p.eval(x)))?,
        None => discretize(&grid, |x| Ok(x.iter().sum::<f64>().exp()))?,
    };
    io::write_tensor(&args.out, &dense)?;
    ctx.line("dims", join_dims(dense.dims()));
    ctx.line("norm_l2", format!("{:?}", dense.norm2()));
    if let Some(p) = &poly {
        ctx.line("terms", p.len());
    }
    if let Some(path) = &args.cp_out {
        let Some(p) = &poly else {
            return usage("--cp-out needs a polynomial source");
        };
        let cp = poly_discretize_cp(p, &grid)?;
        std::fs::write(path, io::encode_cp(&cp)).map_err(TensorError::from)?;
        ctx.line("cp_rank", cp.rank());
        ctx.line(
            "cp_relative_error",
            format!("{:?}", relative_error(&dense, &cp.reconstruct()?)?),
        );
    }
    Ok(())
}

fn cmd_rank222(ctx: &mut Ctx, path: &Path) -> CliResult<()> {
    let a = read_tensor(path, ctx.cap)?;
    let (delta, class) = rank222_classify(&a, BOUNDARY_TOL)?;
    let _ = writeln!(ctx.out, "Δ={delta:?} class={class}");
    Ok(())
}

/// Entry point of the binary: prints the result and returns the exit code.
pub fn main_exit_code() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(
            CliError::from(TensorError::Format {
                offset: 0,
                message: String::new()
            })
            .exit_code(),
            3
        );
        assert_eq!(
            CliError::from(TensorError::Numerical(String::new())).exit_code(),
            4
        );
        assert_eq!(
            CliError::from(TensorError::TooLarge {
                requested: 2,
                cap: 1
            })
            .exit_code(),
            4
        );
    }

    #[test]
    fn parser_requires_one_target() {
        assert!(
            Cli::try_parse_from(["lowrank", "decompose", "a", "--method", "tt", "--out", "b"])
                .is_err()
        );
        assert!(Cli::try_parse_from([
            "lowrank",
            "decompose",
            "a",
            "--method",
            "tt",
            "--rank",
            "2,2",
            "--tol",
            "0.1",
            "--out",
            "b"
        ])
        .is_err());
        let cli = Cli::try_parse_from([
            "lowrank",
            "decompose",
            "a",
            "--method",
            "tt",
            "--rank",
            "2,2",
            "--out",
            "b",
        ])
        .unwrap();
        match cli.command {
            Command::Decompose(args) => assert_eq!(args.rank, Some(vec![2, 2])),
            other => panic!("unexpected {other:?}"),
        }
    }
}
