use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vscpt::analysis::fit_gaussian_peaks;
use vscpt::io::read_distribution_csv;
use vscpt::scenario::{oracle_check, preset_by_name, RECOIL_CENTERS};
use vscpt::{build_momentum_grid, parse_config, run_scenario, Error, ScenarioConfig, SimParams};

/// Block-sparse generalized optical Bloch equation simulator for 1D
/// velocity-selective coherent population trapping.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a JSON configuration and write its outputs.
    Run(RunArgs),
    /// Fit five Gaussians at 0, ±ħk, ±2ħk to a distribution CSV.
    Fit {
        /// File with a `p_over_hbark,density` header.
        csv: PathBuf,
    },
    /// Compare the block integrator with the dense reference on a coarse grid.
    OracleCheck {
        #[arg(long, default_value_t = 5.0)]
        gamma_t: f64,
        #[arg(long, default_value_t = 4.0)]
        p_max: f64,
        #[arg(long, default_value_t = 4)]
        points_per_recoil: usize,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// short, medium, long, tilted or asymmetric
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Gaussian detector resolution in ħk applied before peak fitting.
    #[arg(long)]
    detector_sigma: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Grid points per ħk.
    #[arg(long)]
    grid_points: Option<usize>,
}

fn load_config(args: &RunArgs) -> Result<ScenarioConfig, Error> {
    let mut config = match (&args.preset, &args.config) {
        (Some(name), _) => preset_by_name(name)?,
        (None, Some(path)) => parse_config(&std::fs::read_to_string(path)?)?,
        (None, None) => unreachable!("clap requires one of --preset/--config"),
    };
    if let Some(sigma) = args.detector_sigma {
        config.detector_sigma = Some(sigma);
    }
    if let Some(dt) = args.dt {
        config.dt = dt;
    }
    if let Some(n) = args.grid_points {
        config.grid.points_per_recoil = n;
    }
    config.validate()?;
    Ok(config)
}

fn execute(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Run(args) => {
            let config = load_config(&args)?;
            let report = run_scenario(&config, &args.out)?;
            println!("{}", report.summary_json());
            Ok(true)
        }
        Command::Fit { csv } => {
            let dist = read_distribution_csv(&csv)?;
            let fit = fit_gaussian_peaks(&dist, &RECOIL_CENTERS)?;
            println!("{}", serde_json::to_string_pretty(&fit).expect("plain data serializes"));
            Ok(true)
        }
        Command::OracleCheck { gamma_t, p_max, points_per_recoil, tolerance } => {
            let grid = build_momentum_grid(p_max, points_per_recoil)?;
            let params = SimParams::new(0.3, 0.3, 0.0, 5e-3)?;
            let cmp = oracle_check(grid, &params, 0.15, gamma_t, 0.02)?;
            let pass = cmp.max_deviation <= tolerance && cmp.max_cross_family < 1e-14;
            let line = serde_json::json!({ "comparison": cmp, "tolerance": tolerance, "pass": pass });
            println!("{line}");
            Ok(pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::from(2)
        }
    }
}
