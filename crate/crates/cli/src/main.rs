use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spatial_econ::analysis::CriticalScan;
use spatial_econ::harness::experiments::{write_convergence_report, write_stability_report};
use spatial_econ::harness::{
    builtin, convergence_experiment, parse_config, run_scenario, stability_scan, Scenario,
};
use spatial_econ::Error;

#[derive(Parser)]
#[command(
    name = "spatial-econ",
    version,
    about = "Spatial agglomeration of workers: agents and mean-field PDE"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Run a built-in scenario (megacity, bignoise, via-emilia, metastability, wage-profile).
    Scenario {
        name: String,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Agent-to-PDE distance as the number of agents grows.
    Converge {
        config: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Critical moving cost at which the uniform distribution loses stability.
    StabilityScan {
        config: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
}

#[derive(Args)]
struct Overrides {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
    grid: Option<Vec<usize>>,
    /// Fraction of the stable time step used.
    #[arg(long)]
    safety: Option<f64>,
    /// Comma-separated snapshot times.
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<f64>>,
}

impl Overrides {
    fn apply(&self, mut s: Scenario) -> Result<Scenario, Error> {
        if let Some(seed) = self.seed {
            s.params.seed = seed;
        }
        if let Some(g) = &self.grid {
            s.grid.nx = g[0];
            s.grid.ny = g[1];
        }
        if let Some(f) = self.safety {
            s.numerics.safety = f;
        }
        if let Some(t) = &self.snapshots {
            s.run.snapshot_times = t.clone();
        }
        s.validate()?;
        Ok(s)
    }
}

fn load(config: &Path, opts: &Overrides) -> Result<Scenario, Error> {
    opts.apply(parse_config(config)?)
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, opts } => report_run(&load(&config, &opts)?, &opts.out),
        Command::Scenario { name, opts } => report_run(&opts.apply(builtin(&name)?)?, &opts.out),
        Command::Converge { config, opts } => {
            let s = load(&config, &opts)?;
            let report = convergence_experiment(&s)?;
            write_convergence_report(&opts.out, &report)?;
            println!("{:>8} {:>12} {:>12}", "N", "median L1", "median SW1");
            for r in &report.summary {
                println!(
                    "{:>8} {:>12.5} {:>12.5}",
                    r.n, r.median_l1, r.median_sliced_w1
                );
            }
            Ok(())
        }
        Command::StabilityScan { config, opts } => {
            let s = load(&config, &opts)?;
            let r = stability_scan(&s)?;
            std::fs::create_dir_all(&opts.out).map_err(|e| Error::io(&opts.out, e))?;
            write_stability_report(&opts.out, &r)?;
            match r.scan {
                CriticalScan::Bracket { lower, upper } => {
                    println!("critical c_M in [{lower:.10e}, {upper:.10e}]");
                    println!("uniform state is stable below and unstable above");
                }
                CriticalScan::OutOfRange { unstable } => {
                    let side = if unstable { "unstable" } else { "stable" };
                    println!("no stability change in the scanned range: {side} throughout");
                }
            }
            println!("max modal rate at c_M = {}: {:e}", r.params.c_m, r.max_rate);
            Ok(())
        }
    }
}

fn report_run(s: &Scenario, out: &Path) -> Result<(), Error> {
    let summary = run_scenario(s, out)?;
    if let Some(traj) = &summary.pde {
        let fin = &traj.final_state;
        let last = traj.metrics.last();
        println!(
            "{}: t = {} after {} steps, mass drift {:.1e}, clusters {}",
            s.name,
            fin.t,
            fin.step_count,
            traj.relative_mass_drift(),
            last.map_or(0, |m| m.cluster_count)
        );
    }
    if let Some(d) = summary.distances.last() {
        println!(
            "agents vs PDE at t = {}: L1 {:.4}, sliced W1 {:.4}",
            d.t, d.l1, d.sliced_w1
        );
    }
    println!("outputs in {}", summary.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else if e.is_numeric() {
                ExitCode::from(3)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
