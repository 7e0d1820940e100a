use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use onco::cli::{self, load_config, ControlSpec, RunConfig};
use onco::OncoError;

#[derive(Parser)]
#[command(
    name = "onco",
    version,
    about = "Tumor growth simulation and optimal chemotherapy schedules"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward run under a fixed schedule.
    Simulate(Common),
    /// Optimal infusion schedule by projected gradient descent.
    Optimize(Common),
    /// Optimal versus untreated tumor burden.
    Compare(Common),
    /// Adjoint gradient against finite differences.
    Gradcheck(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`, then $ONCO_OUT_DIR, then ./onco-out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `zero`, `exp-decay` or a `t,I` CSV file.
    #[arg(long)]
    control: Option<String>,
    /// Number of spatial nodes.
    #[arg(long)]
    nx: Option<usize>,
    /// Seed for gradient-check probes.
    #[arg(long)]
    seed: Option<u64>,
}

fn configure(args: &Common) -> Result<RunConfig, OncoError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(c) = &args.control {
        cfg.control = ControlSpec::parse(c);
    }
    if let Some(nx) = args.nx {
        cfg.n_x = nx;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<i32, OncoError> {
    let (Command::Simulate(args)
    | Command::Optimize(args)
    | Command::Compare(args)
    | Command::Gradcheck(args)) = &cli.command;
    let cfg = configure(args)?;
    let out = cfg.resolve_output_dir(args.out.as_deref());
    let code = match &cli.command {
        Command::Simulate(_) => {
            let o = cli::simulate(&cfg, &out)?;
            println!(
                "J = {:.10e}, clamped nodes = {}",
                o.cost, o.trajectory.clamp_count
            );
            0
        }
        Command::Optimize(_) => {
            let o = cli::optimize_schedule(&cfg, &out)?;
            let r = &o.report;
            println!(
                "J = {:.10e} after {} iterations (converged: {})",
                r.final_cost, r.iterations_used, r.converged
            );
            if let Some(f) = &r.failure {
                eprintln!("error: {f}");
            }
            o.exit_code()
        }
        Command::Compare(_) => {
            let o = cli::compare(&cfg, &out)?;
            println!(
                "delta(T) = {:.3} %, peak reduction at t=0.9 = {:.3} %, drug peak at t = {}",
                o.metrics.final_delta().unwrap_or(f64::NAN),
                o.metrics
                    .peak_reduction_at(cli::commands::PEAK_REPORT_TIME)
                    .unwrap_or(f64::NAN),
                o.drug_peak_time
                    .map_or("n/a".to_string(), |t| format!("{t:.4}")),
            );
            o.exit_code()
        }
        Command::Gradcheck(_) => {
            let o = cli::check_gradient(&cfg, &out)?;
            for p in &o.report.probes {
                println!(
                    "probe {}: adjoint {:+.8e}  fd {:+.8e}  rel {:.3e}  {}",
                    p.probe,
                    p.adjoint,
                    p.finite_difference,
                    p.rel_error,
                    if p.passed() { "pass" } else { "FAIL" }
                );
            }
            o.exit_code()
        }
    };
    println!("artifacts in {}", out.display());
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
