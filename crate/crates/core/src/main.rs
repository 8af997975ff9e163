use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use emdq::bench::{run_bench, BenchConfig};
use emdq::datagen::{sample_manifold, ManifoldSpec};
use emdq::io::{read_point_set, write_point_set, Format};
use emdq::query::{emd_query, QueryOutcome, QueryParams, SolverChoice};
use emdq::transport::{brute_force_oracle, solve_exact, solve_sinkhorn, Regularization, SinkhornParams, TransportInstance};
use emdq::{EmdError, SplitMode};

#[derive(Parser)]
#[command(name = "emdq", version, about = "Earth mover's distance threshold queries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether EMD(A, B) is above or below a threshold.
    Query(QueryArgs),
    /// Compute EMD(A, B) with a full solver.
    Emd(EmdArgs),
    /// Write a synthetic point set sampled from a random polynomial manifold.
    Gen(GenArgs),
    /// Time the query against full solves over a sweep of thresholds.
    Bench(BenchArgs),
}

#[derive(Args)]
struct Inputs {
    /// First point set (CSV or EMDQ1 binary).
    #[arg(long)]
    a: PathBuf,
    /// Second point set.
    #[arg(long)]
    b: PathBuf,
    /// CSV inputs carry a leading weight column.
    #[arg(long)]
    weighted: bool,
}

impl Inputs {
    fn load(&self) -> Result<(emdq::WeightedPointSet, emdq::WeightedPointSet), EmdError> {
        Ok((read_point_set(&self.a, self.weighted)?, read_point_set(&self.b, self.weighted)?))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverKind {
    Exact,
    Sinkhorn,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmdSolverKind {
    Exact,
    Sinkhorn,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeKind {
    Adaptive,
    Fixed,
}

#[derive(Args)]
struct SinkhornArgs {
    /// Absolute entropic regularization; overrides --eta-factor.
    #[arg(long)]
    eta: Option<f64>,
    /// Regularization as a multiple of the largest ground distance.
    #[arg(long, default_value_t = 0.02)]
    eta_factor: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Stop when the L1 marginal violation is at most tol·W.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

impl SinkhornArgs {
    fn params(&self) -> SinkhornParams {
        SinkhornParams {
            reg: match self.eta {
                Some(eta) => Regularization::Absolute(eta),
                None => Regularization::Relative(self.eta_factor),
            },
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }
}

#[derive(Args)]
struct ModeArgs {
    #[arg(long, value_enum, default_value_t = ModeKind::Adaptive)]
    mode: ModeKind,
    /// Doubling dimension of the inputs, for --mode fixed.
    #[arg(long)]
    rho: Option<u32>,
}

impl ModeArgs {
    fn mode(&self) -> Result<SplitMode, EmdError> {
        match (self.mode, self.rho) {
            (ModeKind::Adaptive, _) => Ok(SplitMode::Adaptive),
            (ModeKind::Fixed, Some(rho)) => Ok(SplitMode::Fixed { rho }),
            (ModeKind::Fixed, None) => Err(EmdError::InvalidArgument("--mode fixed needs --rho".into())),
        }
    }
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Threshold T, in distance units.
    #[arg(long, short = 't')]
    threshold: f64,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = SolverKind::Exact)]
    solver: SolverKind,
    #[command(flatten)]
    sinkhorn: SinkhornArgs,
    #[command(flatten)]
    mode: ModeArgs,
    /// Print the outcome as one JSON object.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EmdArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, value_enum, default_value_t = EmdSolverKind::Exact)]
    solver: EmdSolverKind,
    #[command(flatten)]
    sinkhorn: SinkhornArgs,
}

#[derive(Args)]
struct GenArgs {
    /// Output file; `.csv` writes CSV, anything else EMDQ1 binary.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Ambient dimension.
    #[arg(long, default_value_t = 500)]
    d: usize,
    /// Latent dimension.
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, default_value_t = 8)]
    degree: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Inclusive integer range of θ, e.g. `-10..10`; T = 2^θ·EMD.
    #[arg(long, allow_hyphen_values = true, default_value = "-10..10")]
    theta_range: String,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.03,0.05")]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    repeat: usize,
    /// Skip the Sinkhorn baseline.
    #[arg(long)]
    no_sinkhorn: bool,
    #[command(flatten)]
    sinkhorn: SinkhornArgs,
    #[command(flatten)]
    mode: ModeArgs,
    /// Keep calling each setting for at least this many seconds per round.
    #[arg(long, default_value_t = 0.05)]
    min_time: f64,
    /// CSV report destination.
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(err: &EmdError) -> u8 {
    match err {
        EmdError::Imbalance { .. } => 3,
        EmdError::Solver(_) | EmdError::TooLarge { .. } => 4,
        _ => 2,
    }
}

fn parse_theta_range(s: &str) -> Result<Vec<i32>, EmdError> {
    let bad = || EmdError::Parse(format!("theta range must look like LO..HI, got {s:?}"));
    let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
    let lo: i32 = lo.trim().parse().map_err(|_| bad())?;
    let hi: i32 = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}

fn print_outcome(out: &QueryOutcome) {
    println!("verdict: {}", out.verdict);
    println!("delta_tilde: {}", out.delta_tilde);
    println!("h_max: {}", out.h_max);
    if !out.levels.is_empty() {
        println!("level\tnodes\tsources\tsinks\testimate\tband\tseconds");
    }
    for t in &out.levels {
        println!(
            "{}\t{}\t{}\t{}\t{:.6e}\t{:.6e}\t{:.4}",
            t.level, t.node_count, t.surplus_sources, t.surplus_sinks, t.estimate, t.band, t.elapsed_secs
        );
    }
}

fn cmd_query(args: &QueryArgs) -> Result<(), EmdError> {
    let (a, b) = args.inputs.load()?;
    let solver = match args.solver {
        SolverKind::Exact => SolverChoice::Exact,
        SolverKind::Sinkhorn => {
            eprintln!("warning: the Sinkhorn sub-solver only approximates each level; verdicts carry no guarantee");
            SolverChoice::Sinkhorn(args.sinkhorn.params())
        }
    };
    let params = QueryParams {
        solver,
        mode: args.mode.mode()?,
        ..QueryParams::new(args.threshold, args.eps)
    };
    let out = emd_query(&a, &b, &params)?;
    if args.json {
        println!("{}", serde_json::to_string(&out).map_err(|e| EmdError::Io(e.to_string()))?);
    } else {
        print_outcome(&out);
    }
    Ok(())
}

fn cmd_emd(args: &EmdArgs) -> Result<(), EmdError> {
    let (a, b) = args.inputs.load()?;
    let inst = TransportInstance::new(a, b)?;
    let start = Instant::now();
    let (cost, note) = match args.solver {
        EmdSolverKind::Exact => (solve_exact(&inst)?.cost, None),
        EmdSolverKind::Sinkhorn => {
            let (plan, diag) = solve_sinkhorn(&inst, &args.sinkhorn.params())?;
            let note = format!(
                "iterations: {}\nconverged: {}\nmarginal_error: {:e}\neta: {}",
                diag.iterations, diag.converged, diag.marginal_error, diag.eta
            );
            (plan.cost, Some(note))
        }
        EmdSolverKind::Oracle => (brute_force_oracle(&inst)?, None),
    };
    let seconds = start.elapsed().as_secs_f64();
    let w = inst.total_mass();
    println!("emd: {}", if w > 0.0 { cost / w } else { 0.0 });
    println!("cost: {cost}");
    println!("seconds: {seconds:.6}");
    if let Some(note) = note {
        println!("{note}");
    }
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> Result<(), EmdError> {
    let spec = ManifoldSpec {
        ambient_dim: args.d,
        intrinsic_dim: args.m,
        degree: args.degree,
        n_points: args.n,
        seed: args.seed,
        coefficient_scale: args.scale,
    };
    let set = sample_manifold(&spec)?;
    write_point_set(&args.out, &set, Format::from_path(&args.out, false))
}

fn cmd_bench(args: &BenchArgs) -> Result<(), EmdError> {
    let (a, b) = args.inputs.load()?;
    let cfg = BenchConfig {
        thetas: parse_theta_range(&args.theta_range)?,
        epsilons: args.eps.clone(),
        repeat: args.repeat,
        sinkhorn: (!args.no_sinkhorn).then(|| args.sinkhorn.params()),
        mode: args.mode.mode()?,
        min_time_secs: args.min_time,
    };
    let report = run_bench(&a, &b, &cfg)?;
    write_report(&args.out, &report)?;
    println!("emd: {}", report.emd);
    if let Some(e) = report.emd_sinkhorn {
        println!("emd_sinkhorn: {e}");
    }
    println!("delta_tilde: {}", report.delta_tilde);
    println!("precision: {}", report.precision);
    println!("rows: {}", report.rows.len());
    Ok(())
}

fn write_report(path: &Path, report: &emdq::bench::BenchReport) -> Result<(), EmdError> {
    let file = File::create(path).map_err(|e| EmdError::Io(format!("{}: {e}", path.display())))?;
    report.write_csv(BufWriter::new(file))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Query(args) => cmd_query(args),
        Command::Emd(args) => cmd_emd(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
