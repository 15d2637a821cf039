use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ctrlopt_harness::check::{derivative_checks, invariant_checks};
use ctrlopt_harness::config::{default_out_dir, ConfigArgs, ConfigError, RunConfig};
use ctrlopt_harness::export::write_trace;
use ctrlopt_harness::runner::{execute, summary_line, RunError};
use ctrlopt_harness::sweep::{run_sweep, SweepError, TABLE_FILE};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;

/// Optimization algorithms derived from control Lyapunov functions.
#[derive(Parser, Debug)]
#[command(name = "ctrlopt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one algorithm or flow on one problem and write its trace.
    Run(ConfigArgs),
    /// Run every algorithm and flow on the catalog and write a comparison table.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory (defaults to $CTRLOPT_OUT_DIR, then the working directory).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Finite-difference and invariant self-checks.
    Check {
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn config_error(e: &ConfigError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn cmd_run(args: &ConfigArgs) -> ExitCode {
    let cfg = match args.resolve().and_then(|c| c.validate_run().map(|()| c)) {
        Ok(c) => c,
        Err(e) => return config_error(&e),
    };
    let outcome = match execute(&cfg) {
        Ok(o) => o,
        Err(RunError::Config(e)) => return config_error(&e),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    };
    let format = cfg.format().expect("validated");
    let path = output_path(&cfg);
    if let Err(e) = write_trace(&path, format, &outcome.trace) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_FAILURE);
    }
    println!("{}", summary_line(outcome.summary()));
    println!("trace: {}", path.display());
    match &outcome.degenerate {
        Some(reason) => {
            eprintln!("error: run degenerated: {reason}");
            ExitCode::from(EXIT_DEGENERATE)
        }
        None => ExitCode::SUCCESS,
    }
}

fn output_path(cfg: &RunConfig) -> PathBuf {
    cfg.output.clone().unwrap_or_else(|| {
        let mut name = format!(
            "{}_{}",
            cfg.problem.as_deref().unwrap_or("problem"),
            cfg.algo.as_deref().unwrap_or("cd")
        );
        if cfg.algo.as_deref() == Some("flow_max_principle") {
            name.push('_');
            name.push_str(cfg.clf.as_deref().unwrap_or("max_squares"));
        }
        let ext = cfg.format().map(|f| f.extension()).unwrap_or("csv");
        default_out_dir().join(format!("{name}.{ext}"))
    })
}

fn cmd_sweep(args: &ConfigArgs, out_dir: Option<PathBuf>) -> ExitCode {
    let cfg = match args.resolve() {
        Ok(c) => c,
        Err(e) => return config_error(&e),
    };
    let out_dir = out_dir.unwrap_or_else(default_out_dir);
    match run_sweep(&cfg, &out_dir) {
        Ok(results) => {
            for r in &results {
                let label = r.cell.label();
                match &r.outcome {
                    Ok(o) => println!("{label}: {}", summary_line(o.summary())),
                    Err(e) => println!("{label}: error: {e}"),
                }
            }
            println!("table: {}", out_dir.join(TABLE_FILE).display());
            ExitCode::SUCCESS
        }
        Err(SweepError::Config(e)) => config_error(&e),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn cmd_check(points: usize, seed: u64) -> ExitCode {
    let mut all_passed = true;
    let results = derivative_checks(&[2, 8, 32], points, seed)
        .into_iter()
        .chain(invariant_checks(points, seed));
    for r in results {
        all_passed &= r.passed;
        println!("{r}");
    }
    if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURE)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Sweep { config, out_dir } => cmd_sweep(&config, out_dir),
        Command::Check { points, seed } => cmd_check(points, seed),
    }
}
