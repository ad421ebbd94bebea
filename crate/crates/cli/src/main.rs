use std::path::PathBuf;
use std::process::ExitCode;

use bbem_core::harness::{run_config, run_convergence, verify_suite, DEFAULT_SEED, SUITE_NAMES};
use bbem_core::kernels::{brinkman_velocity_tensor, pressure_vector, BrinkmanParams, Vec3};
use bbem_core::{exec, BbemError};
use clap::{Parser, Subcommand};

/// Boundary-integral solvers for the Brinkman and Darcy–Forchheimer–Brinkman systems.
#[derive(Parser)]
#[command(name = "bbem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem described by a JSON config and write report.json and fields.csv.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite and print one line per check.
    Verify {
        /// One of kernels, jumps, nullspaces, green, solvers, mixed, semilinear.
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Print the full report as JSON instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Run a manufactured-solution convergence study over the config's levels.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the fundamental solution at one point.
    Kernels {
        /// Point as x,y,z.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_point)]
        eval: [f64; 3],
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
}

fn parse_point(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got {s:?}"));
    }
    let mut p = [0.0; 3];
    for (v, t) in p.iter_mut().zip(parts) {
        *v = t.trim().parse().map_err(|e| format!("bad coordinate {t:?}: {e}"))?;
    }
    Ok(p)
}

fn run(command: Command) -> Result<bool, BbemError> {
    match command {
        Command::Solve { config, out } => {
            let outcome = run_config(&config, out.as_deref())?;
            log::info!("solved in {:.2} s", outcome.wall_time_s);
            println!("{}", serde_json::to_string_pretty(&outcome.report)?);
            eprintln!("wrote {}", outcome.output_dir.display());
            Ok(true)
        }
        Command::Verify { suite, seed, json } => {
            if !SUITE_NAMES.contains(&suite.as_str()) {
                return Err(BbemError::UnknownSuite(suite));
            }
            let report = verify_suite(&suite, seed)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                for c in &report.checks {
                    let verdict = if c.passed { "pass" } else { "FAIL" };
                    println!("{verdict} {:<48} {:>12.4e} {:?} {:e}", c.name, c.value, c.comparison, c.threshold);
                }
                println!(
                    "suite {} seed {}: {} ({:.2} s)",
                    report.suite,
                    report.seed,
                    if report.passed { "passed" } else { "FAILED" },
                    report.total_seconds()
                );
            }
            Ok(report.passed)
        }
        Command::Converge { config, out } => {
            let (table, file) = run_convergence(&config, out.as_deref())?;
            print!("{}", table.to_csv()?);
            eprintln!("wrote {}", file.display());
            Ok(true)
        }
        Command::Kernels { eval, alpha } => {
            let params = BrinkmanParams::new(alpha, 0.0)?;
            let x = Vec3::from(eval);
            let g = brinkman_velocity_tensor(&x, &params)?;
            let pi = pressure_vector(&x)?;
            let rows: Vec<[f64; 3]> = (0..3).map(|i| [g[(i, 0)], g[(i, 1)], g[(i, 2)]]).collect();
            let out = serde_json::json!({ "x": eval, "alpha": alpha, "G": rows, "Pi": [pi.x, pi.y, pi.z] });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    exec::init_global_pool();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
