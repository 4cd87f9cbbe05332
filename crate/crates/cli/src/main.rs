//! `slp plan <scenario> --method slp --out results/`
//!
//! Exit status: 0 on success, 2 when the plan needed slack above
//! `SLACK_LIMIT`, 1 on any error. Log level via `RUST_LOG`.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::{info, warn};
use slp_core::{emit_report, plan, Method, PlanOptions, Scenario};

const SLACK_LIMIT: f64 = 1e-3;

#[derive(Parser)]
#[command(name = "slp", version, about = "Spatial-domain trajectory planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a trajectory for a scenario file and write CSV, SVG and JSON output.
    Plan(PlanArgs),
}

#[derive(clap::Args)]
struct PlanArgs {
    scenario: PathBuf,
    #[arg(long, default_value = "slp")]
    method: Method,
    #[arg(long)]
    out: PathBuf,
    /// Maximum number of SLP iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Number of grid intervals.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    no_footprint: bool,
    /// Write the last LP of the SLP loop in LP format.
    #[arg(long)]
    export_lp: Option<PathBuf>,
    /// Also solve each LP cold and record pivot counts.
    #[arg(long)]
    compare_cold: bool,
}

fn run_plan(args: &PlanArgs) -> Result<bool> {
    let scenario = Scenario::load(&args.scenario)?;
    let options = PlanOptions {
        iterations: args.iters,
        grid: args.grid,
        disable_footprint: args.no_footprint,
        compare_cold_start: args.compare_cold,
        keep_last_lp: args.export_lp.is_some(),
    };
    let started = Instant::now();
    let result = plan(&scenario, args.method, &options)?;
    info!("planned in {:.3} s", started.elapsed().as_secs_f64());

    let centerline = scenario.centerline()?;
    let halfwidth = |s: f64| scenario.road.halfwidth.half_width_at(s);
    let files = emit_report(&result, &centerline, &halfwidth, &args.out)?;
    for f in &files {
        info!("wrote {}", f.display());
    }
    if let (Some(path), Some(lp)) = (&args.export_lp, &result.last_lp) {
        let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        lp.write_lp_format(&mut BufWriter::new(file))?;
        info!("wrote {}", path.display());
    }

    let (v_min, _) = result.speed.minimum();
    println!(
        "{} iterations={} converged={} max|delta|={:.2}deg min_vmax={:.1}km/h slack={:.3e}",
        result.method,
        result.iterations,
        result.converged,
        result.max_abs_steering().to_degrees(),
        v_min * 3.6,
        result.slacks.max()
    );
    let ok = result.slacks.max() <= SLACK_LIMIT;
    if !ok {
        warn!("slack {:.3e} exceeds {SLACK_LIMIT:e}; corridor or end pose not met", result.slacks.max());
    }
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Plan(args) => match run_plan(args) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(2),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
    }
}
