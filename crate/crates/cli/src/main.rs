use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use geograph_cli::config::{Experiment, ExperimentConfig};
use geograph_cli::experiments::{
    generate_graph, rows_to_csv, rows_to_plot_data, run_experiment, run_gbg_to_text,
    thresholds_to_text,
};

/// Experiment harness for planted-partition random connection models.
#[derive(Parser)]
#[command(name = "geograph", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key=value config file.
    #[arg(long)]
    config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path override (CSV for sweeps, text otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = rayon default).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one coupled graph and write it in the geograph v1 format.
    Generate(Common),
    /// Run GBG on a graph file (or a fresh sample) and print estimates.
    Gbg {
        #[command(flatten)]
        common: Common,
        /// Existing geograph v1 file; samples fresh when omitted.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Run the experiment named in the config.
    Sweep(Common),
    /// Percolation-probability sweep with coupled thinning.
    Percolation(Common),
    /// Triangle-profile planted-vs-null test.
    Distinguish(Common),
    /// Flip-Bad counts and their Campbell estimate.
    Flipbad(Common),
    /// Information-flow-from-infinity experiment.
    Infoflow(Common),
    /// Analytic threshold report.
    Thresholds(Common),
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_IO: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, force_experiment, graph_file) = match &cli.command {
        Command::Generate(c) => (c, None, None),
        Command::Gbg { common, graph } => (common, None, graph.clone()),
        Command::Sweep(c) => (c, None, None),
        Command::Percolation(c) => (c, Some(Experiment::PercolationSweep), None),
        Command::Distinguish(c) => (c, Some(Experiment::Distinguish), None),
        Command::Flipbad(c) => (c, Some(Experiment::FlipBad), None),
        Command::Infoflow(c) => (c, Some(Experiment::InfoFlow), None),
        Command::Thresholds(c) => (c, Some(Experiment::Thresholds), None),
    };

    let mut overrides: Vec<(String, String)> = Vec::new();
    if let Some(seed) = common.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(exp) = force_experiment {
        overrides.push(("experiment".into(), exp.name().to_string()));
    }
    let text = match std::fs::read_to_string(&common.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read config {}: {e}", common.config.display());
            return ExitCode::from(EXIT_IO);
        }
    };
    let config = match ExperimentConfig::from_text(&text, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let out_path: Option<PathBuf> =
        common.out.clone().or_else(|| config.out.as_ref().map(PathBuf::from));

    let workers = common.workers.unwrap_or(config.workers);
    let run = || -> Result<ExitCode, String> {
        match &cli.command {
            Command::Generate(_) => {
                let (text, _) = generate_graph(&config).map_err(stringify)?;
                emit(&text, out_path.as_deref())
            }
            Command::Gbg { .. } => {
                let text = run_gbg_to_text(&config, graph_file.as_deref()).map_err(stringify)?;
                emit(&text, out_path.as_deref())
            }
            _ => {
                let rows = run_experiment(&config).map_err(stringify)?;
                // thresholds print as key=value; the CSV is optional
                if config.experiment == Experiment::Thresholds {
                    print!("{}", thresholds_to_text(&rows));
                }
                let csv = rows_to_csv(&rows);
                if let Some(path) = out_path.as_deref() {
                    write_file(path, &csv)?;
                    let plot = rows_to_plot_data(&rows);
                    let plot_path = path.with_extension(match path.extension() {
                        Some(e) => format!("{}.plot", e.to_string_lossy()),
                        None => "plot".to_string(),
                    });
                    write_file(&plot_path, &plot)?;
                } else if config.experiment != Experiment::Thresholds {
                    print!("{csv}");
                }
                Ok(ExitCode::SUCCESS)
            }
        }
    };

    let outcome = if workers > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                eprintln!("error: cannot build worker pool: {e}");
                return ExitCode::from(EXIT_VALIDATION);
            }
        }
    } else {
        run()
    };
    match outcome {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            if message.contains("I/O") || message.contains("os error") {
                ExitCode::from(EXIT_IO)
            } else {
                ExitCode::from(EXIT_VALIDATION)
            }
        }
    }
}

fn stringify(e: geograph::Error) -> String {
    match e {
        geograph::Error::Io(io) => format!("I/O failure: {io}"),
        other => other.to_string(),
    }
}

fn emit(text: &str, path: Option<&std::path::Path>) -> Result<ExitCode, String> {
    match path {
        Some(p) => {
            write_file(p, text)?;
            Ok(ExitCode::SUCCESS)
        }
        None => {
            print!("{text}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn write_file(path: &std::path::Path, contents: &str) -> Result<(), String> {
    std::fs::write(path, contents)
        .map_err(|e| format!("I/O failure writing {}: {e}", path.display()))
}
