use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use curvlab::runner::{self, exit, Command, Format, Overrides};

#[derive(Parser, Debug)]
#[command(name = "curvlab", version, about = "Smoothed polytope domains, Morrey sweeps, Clifford checks and exterior Hawking mass")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Comma-separated list of λ values, replacing the scenario's list.
    #[arg(long, global = true, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,

    /// Number of ray directions per λ.
    #[arg(long, global = true)]
    rays: Option<usize>,

    /// Morrey exponent in [1, 3/2).
    #[arg(long, global = true)]
    sigma: Option<f64>,

    /// Directory for output files (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Cap on worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Domain hypothesis checks over boundary samples; exit 1 if any fails.
    Hypotheses { scenario: PathBuf },
    /// λ sweep table and per-λ sample tables.
    Sweep { scenario: PathBuf },
    /// Morrey reports with per-radius rows and region-bound fits.
    Morrey { scenario: PathBuf },
    /// Clifford residual table for n = 3, 5, 7.
    CliffordCheck { scenario: Option<PathBuf> },
    /// Flow trace and inequality-chain report of an exterior scenario.
    Imcf { scenario: PathBuf },
    /// Everything applicable to the scenario, bundled into one JSON file.
    Report { scenario: PathBuf },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::INVALID_INPUT } else { exit::OK });
        }
    };
    ExitCode::from(execute(cli))
}

fn execute(cli: Cli) -> u8 {
    let (command, path) = match &cli.command {
        Cmd::Hypotheses { scenario } => (Command::Hypotheses, Some(scenario)),
        Cmd::Sweep { scenario } => (Command::Sweep, Some(scenario)),
        Cmd::Morrey { scenario } => (Command::Morrey, Some(scenario)),
        Cmd::CliffordCheck { scenario } => (Command::CliffordCheck, scenario.as_ref()),
        Cmd::Imcf { scenario } => (Command::Imcf, Some(scenario)),
        Cmd::Report { scenario } => (Command::Report, Some(scenario)),
    };
    let scenario = match path.map(curvlab::load_scenario).transpose() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::INVALID_INPUT;
        }
    };
    let overrides = Overrides {
        lambdas: cli.lambdas.clone(),
        rays: cli.rays,
        sigma: cli.sigma,
        format: match cli.format {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        },
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        pool = pool.num_threads(w.max(1));
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return exit::INVALID_INPUT;
        }
    };
    let outcome = pool.install(|| runner::run(command, scenario.as_ref(), &overrides));
    for m in &outcome.messages {
        eprintln!("{m}");
    }
    if !outcome.artifacts.is_empty() {
        if let Err(e) = std::fs::create_dir_all(&cli.out_dir) {
            eprintln!("error: cannot create {}: {e}", cli.out_dir.display());
            return exit::INVALID_INPUT;
        }
    }
    for a in &outcome.artifacts {
        let path = cli.out_dir.join(&a.file_name);
        if let Err(e) = std::fs::write(&path, &a.contents) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return exit::INVALID_INPUT;
        }
        println!("{}", path.display());
    }
    outcome.exit_code
}
