use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

use st0sim::config::{OutputFormat, RunConfig};
use st0sim::error::Error;

mod commands;
mod output;
mod report;

#[derive(Parser, Debug)]
#[command(name = "st0sim", version, about = "Capacitively coupled singlet-triplet qubit pair simulator")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct GlobalArgs {
    /// TOML run configuration; defaults apply to anything not given.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimation accuracy over seeded trials, with posterior snapshots.
    Estimate,
    /// Continuous tracking of both field gradients.
    ClosedLoop,
    /// Rabi chevron and resonant fit.
    Rabi,
    /// Ramsey fringes with and without feedback.
    Ramsey,
    /// Conditional exchange traces and the power-law analysis.
    Coupling,
    /// Exact, perturbative and asymptotic Hund-Mulliken couplings and the D fit.
    HundMulliken,
    /// Bell fidelity sweeps.
    Bell,
    /// Fit a model to a trace file.
    Fit(FitArgs),
    /// JSON summary of all acceptance metrics.
    Report,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Trace CSV with a unit-suffixed first column.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    #[arg(long, default_value = "stretched_cosine")]
    model: String,
    #[arg(long, default_value = "p_triplet")]
    column: String,
    /// Required unit of the first column, e.g. `ns`.
    #[arg(long)]
    x_unit: Option<String>,
    /// `eps0` of the exp_detuning model, mV.
    #[arg(long, default_value_t = 0.0)]
    eps0: f64,
}

fn load_config(g: &GlobalArgs) -> st0sim::error::Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.out = o.clone();
    }
    if let Some(f) = g.format {
        cfg.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.global.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let cfg = match load_config(&cli.global) {
        Ok(c) => c,
        Err(e @ (Error::Parse { .. } | Error::Config(_))) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Estimate => commands::estimate(&cfg),
        Command::ClosedLoop => commands::closed_loop(&cfg),
        Command::Rabi => commands::rabi(&cfg),
        Command::Ramsey => commands::ramsey(&cfg),
        Command::Coupling => commands::coupling(&cfg),
        Command::HundMulliken => commands::hund_mulliken(&cfg),
        Command::Bell => commands::bell(&cfg),
        Command::Fit(a) => commands::fit(&cfg, &a.input, &a.model, &a.column, a.x_unit.as_deref(), a.eps0),
        Command::Report => report::report(&cfg),
    };
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
