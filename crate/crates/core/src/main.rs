use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ris_idbp::acceptance;
use ris_idbp::harness::{
    emit_csv, emit_plot_script, error_report, parse_algorithms, priors_text, resolved_config, run_sweep,
    traces_text, ConfigFile,
};

#[derive(Parser)]
#[command(name = "ris-idbp", version, about = "RIS phase optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep described by a TOML file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination. The plot script, priors, traces and resolved
        /// config are written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated subset of es,idbp,tmh,ao1,ao2.
        #[arg(long)]
        algos: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        /// Write zeros in the timing column.
        #[arg(long)]
        no_timing: bool,
    },
    /// Run the acceptance criteria and report one line per criterion.
    Verify {
        /// Comma-separated criterion numbers; all by default.
        #[arg(long)]
        only: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            algos,
            trials,
            workers,
            no_timing,
        } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("config error: {}: {e}", config.display());
                    return ExitCode::from(1);
                }
            };
            let spec = (|| {
                let mut spec = ConfigFile::parse(&text)?.into_spec()?;
                if let Some(s) = seed {
                    spec.master_seed = s;
                }
                if let Some(a) = algos {
                    spec.algorithms = parse_algorithms(&a)?;
                }
                if let Some(t) = trials {
                    spec.trials = t;
                }
                if let Some(w) = workers {
                    spec.workers = w;
                }
                if no_timing {
                    spec.record_timing = false;
                }
                if out.is_some() {
                    spec.output_path = out.clone();
                }
                spec.validate()?;
                Ok::<_, ris_idbp::Error>(spec)
            })();
            let spec = match spec {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(1);
                }
            };
            let sweep = match run_sweep(&spec) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(1);
                }
            };
            let path = spec.output_path.clone().unwrap_or_else(|| PathBuf::from("results.csv"));
            let rows = &sweep.rows;
            let written = emit_csv(rows, &path)
                .and_then(|_| emit_plot_script(rows, &path.with_extension("gp")))
                .and_then(|_| Ok(std::fs::write(path.with_extension("priors.txt"), priors_text(&sweep.artifacts))?))
                .and_then(|_| Ok(std::fs::write(path.with_extension("trace.txt"), traces_text(&sweep.artifacts))?));
            if let Err(e) = written {
                eprintln!("write failed: {e}");
                return ExitCode::from(1);
            }
            match resolved_config(&text, &spec) {
                Ok(c) => {
                    if let Err(e) = std::fs::write(path.with_extension("config.toml"), c) {
                        eprintln!("write failed: {e}");
                        return ExitCode::from(1);
                    }
                }
                Err(e) => eprintln!("resolved config not written: {e}"),
            }
            let errors = error_report(rows);
            if !errors.is_empty() {
                eprint!("{errors}");
                let _ = std::fs::write(path.with_extension("errors.csv"), errors);
            }
            println!("{} rows written to {}", rows.len(), path.display());
            ExitCode::SUCCESS
        }
        Command::Verify { only } => {
            let only: Vec<u32> = match only
                .as_deref()
                .unwrap_or("")
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<u32>())
                .collect()
            {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("config error: bad criterion list: {e}");
                    return ExitCode::from(1);
                }
            };
            let outcomes = acceptance::run_selected(&only);
            for o in &outcomes {
                println!("{o}");
            }
            if outcomes.iter().all(|o| o.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
    }
}
