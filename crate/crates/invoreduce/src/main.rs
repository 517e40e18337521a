//! Command-line interface: symbolic reduction of operators written in the
//! small declaration language, plus the numeric Green's-function pipelines.
//!
//! Exit codes carry verification results: `reduce` exits 0 iff the composed
//! operator is a pure PDE operator, `commute` exits 0 iff the commutator
//! vanishes, `find-reducer` exits 0 iff a reducer was found, and `verify`
//! exits 0 iff the relative residual is below the threshold. Usage and input
//! errors exit with 2.

use clap::{Args, Parser, Subcommand};
use invoreduce::dsl;
use invoreduce::greens::{
    apply_r_heat_termwise, biharm_navier_disk, g1_poisson_disk, g3_compose, g4_heat_disk,
    DiskSpec, KernelFn, PolarPoint, SeriesTruncation,
};
use invoreduce::numverify::{residual_check, PolarGrid};
use invoreduce::opalgebra::{
    find_reducer, is_pure_pde, op_commutator, op_compose, reduce_order2, InvOperator,
};
use invoreduce::quad::QuadSpec;
use invoreduce::specfun::BesselZeroTable;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "invoreduce",
    about = "Reduce linear PDE operators with linear involutions and build/verify disk Green's functions",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce an order-2 operator: print the reducer and the composed operator
    Reduce {
        /// Program file in the operator language
        file: PathBuf,
        /// Operator name to reduce
        #[arg(long, default_value = "L")]
        op: String,
        /// Also write the JSON result to this path
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compose two named operators (left applied after right)
    Compose {
        file: PathBuf,
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Commutator [left, right] = left*right - right*left; exit 0 iff zero
    Commute {
        file: PathBuf,
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search for a reducer with component degrees up to the bound
    FindReducer {
        file: PathBuf,
        #[arg(long, default_value = "L")]
        op: String,
        #[arg(long)]
        max_degree: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Green's-function kernels
    Greens {
        #[command(subcommand)]
        command: GreensCommand,
    },
    /// End-to-end residual verification of the bent-plate pipeline
    Verify(VerifyArgs),
    /// Bessel utilities
    Bessel {
        #[command(subcommand)]
        command: BesselCommand,
    },
}

#[derive(Subcommand)]
enum GreensCommand {
    /// Evaluate a model kernel against a fixed source point over a polar grid
    Eval(GreensEvalArgs),
}

#[derive(Args)]
struct GreensEvalArgs {
    /// Model kernel: the bent-plate Green's function or the Navier
    /// bi-Laplacian kernel
    #[arg(long, value_parser = ["heat-disk", "biharm"])]
    model: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 20)]
    nmax: u32,
    #[arg(long, default_value_t = 20)]
    mmax: u32,
    /// Evaluation grid as NRxNPHI
    #[arg(long, default_value = "64x128")]
    grid: String,
    /// Carry the polar area element in the composition integral
    #[arg(long, default_value = "on", value_parser = ["on", "off"])]
    jacobian: String,
    /// Output CSV path (a .meta.json sidecar is written next to it)
    #[arg(long)]
    out: PathBuf,
    /// Source point radius (default rho/2)
    #[arg(long)]
    src_r: Option<f64>,
    /// Source point angle
    #[arg(long, default_value_t = 0.0)]
    src_phi: f64,
    #[arg(long, default_value_t = 64)]
    quad_nr: usize,
    #[arg(long, default_value_t = 256)]
    quad_nphi: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "heat-disk", value_parser = ["heat-disk"])]
    model: String,
    /// Source term: `const` is h = 1, `bump` is h = 1 - (r/rho)^2
    #[arg(long, default_value = "bump", value_parser = ["const", "bump"])]
    source: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 20)]
    nmax: u32,
    #[arg(long, default_value_t = 20)]
    mmax: u32,
    /// Residual grid as NRxNPHI
    #[arg(long, default_value = "64x128")]
    grid: String,
    #[arg(long, default_value_t = 64)]
    quad_nr: usize,
    #[arg(long, default_value_t = 256)]
    quad_nphi: usize,
    /// Pass iff l2_relative is at most this threshold
    #[arg(long, default_value_t = 5e-2)]
    threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BesselCommand {
    /// Dump a table of Bessel zeros as CSV (n,m,mu)
    Zeros {
        #[arg(long, default_value_t = 20)]
        nmax: u32,
        #[arg(long, default_value_t = 20)]
        mmax: u32,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    invoreduce::configure_thread_pool_from_env();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Reduce { file, op, out } => {
            let program = load_program(&file)?;
            let l = named_operator(&program, &op)?;
            let r = reduce_order2(l).map_err(|e| e.to_string())?;
            let rl = op_compose(&r, l).map_err(|e| e.to_string())?;
            let pure = is_pure_pde(&rl);
            let payload = serde_json::json!({
                "reducer": r.to_json(),
                "composed": rl.to_json(),
                "pure": pure,
            });
            emit_json(&payload, out.as_deref())?;
            Ok(exit_flag(pure))
        }
        Command::Compose {
            file,
            left,
            right,
            out,
        } => {
            let program = load_program(&file)?;
            let l = named_operator(&program, &left)?;
            let r = named_operator(&program, &right)?;
            let composed = op_compose(l, r).map_err(|e| e.to_string())?;
            emit_json(&composed.to_json(), out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Commute {
            file,
            left,
            right,
            out,
        } => {
            let program = load_program(&file)?;
            let l = named_operator(&program, &left)?;
            let r = named_operator(&program, &right)?;
            let commutator = op_commutator(l, r).map_err(|e| e.to_string())?;
            let zero = commutator.is_zero();
            let payload = serde_json::json!({
                "commutator": commutator.to_json(),
                "zero": zero,
            });
            emit_json(&payload, out.as_deref())?;
            Ok(exit_flag(zero))
        }
        Command::FindReducer {
            file,
            op,
            max_degree,
            out,
        } => {
            let program = load_program(&file)?;
            let l = named_operator(&program, &op)?;
            let search = find_reducer(l, max_degree).map_err(|e| e.to_string())?;
            let payload = serde_json::json!({
                "reducer": search.reducer.as_ref().map(InvOperator::to_json),
                "nullspace_dim": search.nullspace_dim,
            });
            eprintln!("nullspace dimension: {}", search.nullspace_dim);
            if search.reducer.is_none() {
                println!("none");
                if let Some(path) = out.as_deref() {
                    write_text(path, &pretty(&payload))?;
                }
                return Ok(ExitCode::FAILURE);
            }
            emit_json(&payload, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Greens {
            command: GreensCommand::Eval(args),
        } => greens_eval(args),
        Command::Verify(args) => verify(args),
        Command::Bessel {
            command: BesselCommand::Zeros { nmax, mmax, out },
        } => {
            let table = BesselZeroTable::build(nmax, mmax).map_err(|e| e.to_string())?;
            match out {
                Some(path) => write_text(&path, &table.to_csv())?,
                None => print!("{}", table.to_csv()),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn greens_eval(args: GreensEvalArgs) -> Result<ExitCode, String> {
    let spec = DiskSpec::new(args.rho, args.alpha, args.beta).map_err(|e| e.to_string())?;
    let (nr, nphi) = parse_grid(&args.grid)?;
    let jacobian = args.jacobian == "on";
    let quad = QuadSpec {
        nr: args.quad_nr,
        nphi: args.quad_nphi,
        jacobian,
    };
    let kernel = match args.model.as_str() {
        "heat-disk" => {
            let trunc =
                SeriesTruncation::new(args.nmax, args.mmax).map_err(|e| e.to_string())?;
            g4_heat_disk(&spec, &trunc, &quad).map_err(|e| e.to_string())?
        }
        "biharm" => biharm_navier_disk(spec.rho),
        other => return Err(format!("unknown model {other}")),
    };
    let grid = PolarGrid::uniform_offset(spec.rho, nr, nphi).map_err(|e| e.to_string())?;
    let source = PolarPoint::new(args.src_r.unwrap_or(spec.rho / 2.0), args.src_phi);
    let pairs: Vec<(PolarPoint, PolarPoint)> =
        grid.points().into_iter().map(|p| (p, source)).collect();
    let values = kernel.eval_over_points(&pairs).map_err(|e| e.to_string())?;

    let mut csv = String::from("r,phi,value\n");
    for (pair, value) in pairs.iter().zip(&values) {
        csv.push_str(&format!(
            "{:.16e},{:.16e},{:.16e}\n",
            pair.0.r, pair.0.phi, value
        ));
    }
    write_text(&args.out, &csv)?;

    let meta = serde_json::json!({
        "model": args.model,
        "spec": spec,
        "truncation": {"n_max": args.nmax, "m_max": args.mmax},
        "quad": quad,
        "jacobian": jacobian,
        "grid": {"nr": nr, "nphi": nphi},
        "source": {"r": source.r, "phi": source.phi},
        "kernel": kernel.describe(),
    });
    let meta_path = args.out.with_extension("csv.meta.json");
    write_text(&meta_path, &pretty(&meta))?;
    Ok(ExitCode::SUCCESS)
}

fn verify(args: VerifyArgs) -> Result<ExitCode, String> {
    let spec = DiskSpec::new(args.rho, args.alpha, args.beta).map_err(|e| e.to_string())?;
    let (nr, nphi) = parse_grid(&args.grid)?;
    let quad = QuadSpec::new(args.quad_nr, args.quad_nphi);
    let trunc = SeriesTruncation::new(args.nmax, args.mmax).map_err(|e| e.to_string())?;

    let kernel: KernelFn = if spec.beta == 0.0 {
        // pure Poisson degeneration still runs through the composed pipeline
        let r_g2 = apply_r_heat_termwise(&spec, &trunc).map_err(|e| e.to_string())?;
        g3_compose(&r_g2, &g1_poisson_disk(&spec), &spec, &quad)
    } else {
        g4_heat_disk(&spec, &trunc, &quad).map_err(|e| e.to_string())?
    };
    let grid = PolarGrid::uniform_offset(spec.rho, nr, nphi).map_err(|e| e.to_string())?;
    let rho = spec.rho;
    let h: Box<dyn Fn(PolarPoint) -> f64 + Sync> = match args.source.as_str() {
        "const" => Box::new(|_p| 1.0),
        _ => Box::new(move |p: PolarPoint| 1.0 - (p.r / rho) * (p.r / rho)),
    };
    let report = residual_check(&kernel, &h, spec.alpha, spec.beta, &grid, &quad)
        .map_err(|e| e.to_string())?;
    let payload = report.to_json();
    emit_json(&payload, args.out.as_deref())?;
    Ok(exit_flag(report.l2_relative <= args.threshold))
}

fn load_program(path: &Path) -> Result<dsl::Program, String> {
    let source = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let ast = dsl::parse(&source).map_err(|e| e.to_string())?;
    dsl::lower(&ast).map_err(|e| e.to_string())
}

fn named_operator<'p>(
    program: &'p dsl::Program,
    name: &str,
) -> Result<&'p InvOperator, String> {
    program
        .operator(name)
        .ok_or_else(|| format!("no operator named `{name}` in the program"))
}

fn parse_grid(text: &str) -> Result<(usize, usize), String> {
    let (a, b) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("grid must look like 64x128, got {text}"))?;
    let nr = a.parse().map_err(|_| format!("bad grid rows in {text}"))?;
    let nphi = b.parse().map_err(|_| format!("bad grid columns in {text}"))?;
    Ok((nr, nphi))
}

fn pretty(value: &serde_json::Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text
}

fn emit_json(value: &serde_json::Value, out: Option<&Path>) -> Result<(), String> {
    let text = pretty(value);
    print!("{text}");
    if let Some(path) = out {
        write_text(path, &text)?;
    }
    Ok(())
}

fn write_text(path: &Path, content: &str) -> Result<(), String> {
    std::fs::write(path, content).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn exit_flag(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
