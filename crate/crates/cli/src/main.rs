use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use deeplyap::verifier::{DEFAULT_DECREASE_SLACK, DEFAULT_DT, DEFAULT_EXCLUSION_RADIUS};
use deeplyap_cli::{
    cmd_params, cmd_simulate, cmd_slice, cmd_train, cmd_verify, parse_state, SimulateArgs, SliceArgs, TrainArgs,
    VerifyArgs, EXIT_USAGE,
};

/// Train and check neural-network Lyapunov functions.
#[derive(Parser)]
#[command(name = "deeplyap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network; exit 0 if converged, 2 if max_epochs was reached.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed_override: Option<u64>,
        /// Overrides outputs.checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Overrides outputs.report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check bounds and decrease on fresh samples; exit 3 on any violation.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_EXCLUSION_RADIUS)]
        r0: f64,
        #[arg(long)]
        seed_override: Option<u64>,
        /// Also write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Integrate trajectories and check that W decreases along them.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Initial value as comma-separated coordinates; repeatable.
        #[arg(long = "x0", value_parser = parse_state, required = true, allow_hyphen_values = true)]
        x0: Vec<Vec<f64>>,
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
        #[arg(long, default_value_t = DEFAULT_DT, allow_hyphen_values = true)]
        dt: f64,
        #[arg(long, default_value_t = DEFAULT_DECREASE_SLACK)]
        slack: f64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Export W and DW·f on a coordinate plane as CSV.
    Slice {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Two one-based coordinates, e.g. `2,8`.
        #[arg(long, value_parser = parse_axes)]
        axes: (usize, usize),
        #[arg(long, default_value_t = 1.0)]
        half_width: f64,
        #[arg(long, default_value_t = 51)]
        resolution: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the number of trainable parameters.
    Params {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_axes(s: &str) -> Result<(usize, usize), String> {
    match s.split(',').map(|t| t.trim().parse::<usize>()).collect::<Result<Vec<_>, _>>() {
        Ok(v) if v.len() == 2 => Ok((v[0], v[1])),
        _ => Err(format!("expected two comma-separated indices, got `{s}`")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = io::stdout().lock();
    let mut log = io::stderr();
    let result = match cli.command {
        Command::Train {
            config,
            seed_override,
            checkpoint,
            report,
        } => cmd_train(
            &TrainArgs {
                config,
                seed_override,
                checkpoint,
                report,
            },
            &mut out,
            &mut log,
        ),
        Command::Verify {
            config,
            checkpoint,
            samples,
            r0,
            seed_override,
            report,
        } => cmd_verify(
            &VerifyArgs {
                config,
                checkpoint,
                samples,
                r0,
                seed_override,
                report,
            },
            &mut out,
            &mut log,
        ),
        Command::Simulate {
            config,
            checkpoint,
            x0,
            t_end,
            dt,
            slack,
            out_dir,
        } => cmd_simulate(
            &SimulateArgs {
                config,
                checkpoint,
                x0,
                t_end,
                dt,
                slack,
                out_dir,
            },
            &mut out,
            &mut log,
        ),
        Command::Slice {
            config,
            checkpoint,
            axes,
            half_width,
            resolution,
            out: path,
        } => cmd_slice(
            &SliceArgs {
                config,
                checkpoint,
                axes,
                half_width,
                resolution,
                out: path,
            },
            &mut out,
            &mut log,
        ),
        Command::Params { config } => cmd_params(&config, &mut out),
    };
    match result {
        Ok(outcome) => ExitCode::from(outcome.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE as u8)
        }
    }
}
