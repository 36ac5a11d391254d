use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qdemon_cli::config::{parse_feedback_mode, parse_info_timing, parse_mode};
use qdemon_cli::{cmd_check, cmd_run, cmd_sweep, RunConfig};
use qdemon_core::ft::SweepAxis;
use qdemon_core::{FeedbackMode, InfoTiming, Mode};

#[derive(Parser)]
#[command(name = "qdemon", version, about = "Monitored-qubit Maxwell demon simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a batch and write trajectories.jsonl, summary.json and bloch_points.csv.
    Run(Common),
    /// Repeat the batch over a list of tau or beta values and write sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Values in config units (tau in us), comma or space separated, ascending.
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Run reduced-size consistency checks and print a pass/fail table.
    Check(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Tau,
    Beta,
}

/// Config file plus per-key overrides. Flags win over the file.
#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores). Does not change any output.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    omega_r_mhz: Option<f64>,
    #[arg(long)]
    k_khz: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    tau_us: Option<f64>,
    #[arg(long)]
    dt_ns: Option<f64>,
    #[arg(long)]
    n_traj: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// hierarchy | filter-only
    #[arg(long, value_parser = |s: &str| parse_mode(s).map_err(|e| e.to_string()))]
    mode: Option<Mode>,
    /// ideal | randomized | off
    #[arg(long, value_parser = |s: &str| parse_feedback_mode(s).map_err(|e| e.to_string()))]
    feedback_mode: Option<FeedbackMode>,
    #[arg(long)]
    initial_projection: Option<bool>,
    /// post-feedback | pre-feedback
    #[arg(long, value_parser = |s: &str| parse_info_timing(s).map_err(|e| e.to_string()))]
    info_timing: Option<InfoTiming>,
    #[arg(long)]
    path_stride: Option<usize>,
    #[arg(long)]
    emit_paths: Option<bool>,
    #[arg(long)]
    bootstrap_b: Option<usize>,
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v;
                }
            )*};
        }
        apply!(
            omega_r_mhz, k_khz, eta, beta, tau_us, dt_ns, n_traj, seed, mode, feedback_mode,
            initial_projection, info_timing, path_stride, emit_paths, bootstrap_b, output_dir
        );
        cfg.validate()?;
        Ok(cfg)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.threads {
            builder = builder.num_threads(n);
        }
        builder.build().context("cannot start worker pool")
    }
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.resolve()?;
            let (summary, written) = common.pool()?.install(|| cmd_run(&cfg))?;
            print_written(&written);
            if let Some(ft) = summary.ft_tpm {
                println!("ft_tpm = {:.5} +/- {:.5}", ft.mean, ft.se);
            }
            println!("<I> = {:.5} +/- {:.5}", summary.mean_i, summary.mean_i_se);
            for flag in &summary.flags {
                println!("flag: {flag}");
            }
        }
        Command::Sweep { common, axis, values } => {
            let cfg = common.resolve()?;
            let axis = match axis {
                Axis::Tau => SweepAxis::Tau,
                Axis::Beta => SweepAxis::Beta,
            };
            let (_, written) = common.pool()?.install(|| cmd_sweep(&cfg, axis, &values))?;
            print_written(&written);
        }
        Command::Check(common) => {
            let cfg = common.resolve()?;
            let report = common.pool()?.install(|| cmd_check(&cfg.params(), cfg.bootstrap_b))?;
            print!("{report}");
            let failed = report.failures();
            if !failed.is_empty() {
                eprintln!("failed checks: {}", failed.join(", "));
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
