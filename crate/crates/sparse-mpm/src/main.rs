#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sparse_mpm::{
    compare, load_config, read_metrics, run_scenario, sliding_box_oracle, write_report, Error, Result, RunOptions,
    Scenario,
};
use sparse_mpm_core::Backend;

#[derive(Parser)]
#[command(name = "sparse-mpm", version, about = "Explicit MPM on dense or block-sparse grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario, writing frames and metrics.
    Run(RunArgs),
    /// Compare the metrics of a baseline run with a candidate run.
    Compare {
        baseline: PathBuf,
        candidate: PathBuf,
        /// Write the report as CSV here as well as printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a scenario, printing it with defaults filled in.
    ValidateConfig { config: PathBuf },
    /// Closed-form reference solutions.
    #[command(subcommand)]
    Oracle(Oracle),
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendArg::Dense)]
    backend: BackendArg,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Serial scatter: results independent of thread count and backend.
    #[arg(long)]
    deterministic: bool,
    /// Output directory; defaults to the scenario's `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_steps: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Dense,
    Scan,
    Hash,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Dense => Backend::Dense,
            BackendArg::Scan => Backend::Scan,
            BackendArg::Hash => Backend::Hash,
        }
    }
}

#[derive(Subcommand)]
enum Oracle {
    /// Displacement of a Coulomb block released on an incline.
    SlidingBox {
        #[arg(long)]
        theta_deg: f64,
        #[arg(long, default_value_t = 0.268)]
        mu: f64,
        #[arg(long, default_value_t = 9.81)]
        g: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn run(args: RunArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let scenario = Scenario::build(&config, base_dir(&args.config))?;
    let out = args
        .out
        .or_else(|| config.output.directory.as_ref().map(|d| base_dir(&args.config).join(d)));
    let options = RunOptions {
        backend: args.backend.into(),
        threads: args.threads,
        deterministic: args.deterministic,
        out: out.clone(),
        max_steps: args.max_steps,
    };
    let outcome = run_scenario(&scenario, &options)?;
    let m = &outcome.metrics;
    println!("scenario      {}", config.name);
    println!("backend       {} ({} threads{})", m.backend, m.threads, if m.deterministic { ", deterministic" } else { "" });
    println!("steps         {}", m.steps.len());
    println!("time_s        {}", m.final_time());
    println!("compute_s     {:.6}", m.compute_time());
    println!("io_s          {:.6}", m.io_time);
    println!("n_dense       {}", m.n_dense);
    println!("peak_memory   {} bytes", m.peak_memory_bytes());
    if let Ok(r) = m.sparsity_ratio() {
        println!("r_active      {r:.3}");
    }
    if let Some(dir) = out {
        println!("frames        {} in {}", outcome.frames_written, dir.display());
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Compare { baseline, candidate, out } => {
            let c = compare(&read_metrics(&baseline)?, &read_metrics(&candidate)?)?;
            println!("baseline          {} ({:.6} s)", c.baseline_backend, c.baseline_time);
            println!("candidate         {} ({:.6} s)", c.candidate_backend, c.candidate_time);
            for p in &c.phases {
                println!("  {:<14}  {:>12.6} {:>12.6}", p.phase, p.baseline, p.candidate);
            }
            println!("speedup           {:.4}", c.speedup);
            println!("memory_reduction  {:.4}", c.memory_reduction);
            if let Some(path) = out {
                write_report(&c, path)?;
            }
            Ok(())
        }
        Command::ValidateConfig { config } => {
            let c = load_config(&config)?;
            print!("{}", c.to_toml_string());
            eprintln!("{}: ok (hash {})", config.display(), c.config_hash());
            Ok(())
        }
        Command::Oracle(Oracle::SlidingBox { theta_deg, mu, g, t }) => {
            if !(theta_deg > 0.0 && theta_deg < 90.0) || !(t >= 0.0) {
                return Err(Error::Config("theta must lie in (0, 90) degrees and t must be non-negative".into()));
            }
            println!("{}", sliding_box_oracle(theta_deg, mu, g, t));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
