use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use trapwave::convergence::{converge_and_write, MIN_OBSERVED_ORDER};
use trapwave::harness::report::{render_summary, render_sweep, report_dir};
use trapwave::harness::{run_and_write, sweep, ScenarioConfig, SweepAxis};
use trapwave::lemma_min_scan;

/// Scenario runner for the trapped-mode wave laboratory.
#[derive(Parser)]
#[command(name = "trapwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write energies.csv, morawetz.csv, spectral.csv
    /// and summary.json.
    Run {
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario once per value along one axis.
    Sweep {
        config: PathBuf,
        /// One of T, epsilon, resolution, ell.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid-refinement study over the configured spacings.
    Converge {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimum of (1 - 3s²)/(1+s²)³ + M s² on [0, smax].
    LemmaScan {
        #[arg(long = "M", default_value_t = 700.0)]
        m_const: f64,
        #[arg(long, default_value_t = 10.0)]
        smax: f64,
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
    },
    /// Print the results stored in an output directory.
    Report { dir: PathBuf },
}

fn load(path: &Path, out: Option<PathBuf>) -> trapwave::Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path)?;
    if out.is_some() {
        cfg.run.output_dir = out;
    }
    Ok(cfg)
}

fn exit(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => load(&config, out).and_then(|cfg| {
            let o = run_and_write(&cfg)?;
            print!("{}", render_summary(&o.summary));
            println!("outputs in {}", cfg.output_dir().display());
            Ok(o.summary.all_pass)
        }),
        Command::Sweep {
            config,
            axis,
            values,
            out,
        } => load(&config, out).and_then(|cfg| {
            let axis: SweepAxis = axis.parse()?;
            let r = sweep(&cfg, axis, &values)?;
            print!("{}", render_sweep(&r));
            Ok(r.all_pass)
        }),
        Command::Converge { config, out } => load(&config, out).and_then(|cfg| {
            let r = converge_and_write(&cfg)?;
            print!("{}", r.render());
            println!("residual orders required: >= {MIN_OBSERVED_ORDER}");
            Ok(r.all_pass())
        }),
        Command::LemmaScan { m_const, smax, n } => lemma_min_scan(m_const, smax, n).map(|s| {
            println!(
                "M = {m_const}: min = {:.12} at s = {:.9} ({} samples)",
                s.min, s.argmin, s.n_samples
            );
            s.min > 0.0
        }),
        Command::Report { dir } => report_dir(&dir).map(|(text, pass)| {
            print!("{text}");
            pass
        }),
    };
    match result {
        Ok(pass) => exit(pass),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
