use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use polemap::commands;
use polemap::dataset::save_poses;
use polemap::mapfile::{load_map, save_map};
use polemap::report::{reloc_table, write_loc_csv, write_reloc_csv};
use polemap::{Config, Dataset, Error};

/// Pole-like landmark maps, relocalization and drift-corrected localization.
#[derive(Debug, Parser)]
#[command(name = "polemap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract and register every frame of a dataset into a cluster map.
    BuildMap {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Skip the member point sidecar.
        #[arg(long)]
        no_points: bool,
    },
    /// Relocalize one frame against a map and print the outcome.
    Relocalize {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        frame: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run drift correction over a dataset and write a TUM trajectory.
    Localize {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write a synthetic dataset and its prior map.
    Simulate {
        /// Configuration file with scene, route and drift settings.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a synthetic evaluation and emit a CSV report.
    Evaluate {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated retention fractions (reloc mode).
        #[arg(long, value_delimiter = ',')]
        retention: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print every configuration key with its default value.
    Defaults,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Reloc,
    Loc,
}

fn load_config(path: Option<&Path>) -> Result<Config, Error> {
    let Some(path) = path else { return Ok(Config::default()) };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Config::parse(&text).map_err(Error::Config)
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::BuildMap { dataset, config, out, no_points } => {
            let cfg = load_config(config.as_deref())?;
            let (map, s) = commands::build_map(&Dataset::new(dataset), &cfg)?;
            save_map(&out, &map, &cfg.labels, !no_points)?;
            println!("frames {}", s.frames);
            println!("clusters {}", s.clusters);
            println!("length_m {:.3}", s.length);
            match s.density {
                Some(d) => println!("density_per_m {d:.4}"),
                None => println!("density_per_m n/a"),
            }
        }
        Command::Relocalize { map, dataset, frame, config } => {
            let cfg = load_config(config.as_deref())?;
            let (map, _) = load_map(&map)?;
            let result = commands::relocalize_frame(&map, &Dataset::new(dataset), frame, &cfg);
            if matches!(result, Ok(_) | Err(Error::Reloc(_))) {
                println!("{}", commands::reloc_record(&result));
            }
            result?;
        }
        Command::Localize { map, dataset, out, config } => {
            let cfg = load_config(config.as_deref())?;
            let (map, _) = load_map(&map)?;
            let s = commands::localize(&map, &Dataset::new(dataset), &cfg)?;
            save_poses(&out, &s.output.trajectory)?;
            println!("frames {}", s.output.trajectory.len());
            println!("fixes {}", s.output.fixes_applied());
            println!("rmse_m {:.3}", s.rmse);
        }
        Command::Simulate { scene, out } => {
            let cfg = load_config(scene.as_deref())?;
            let s = commands::simulate(&cfg, &out)?;
            println!("frames {}", s.frames);
            println!("landmarks {}", s.landmarks);
        }
        Command::Evaluate { mode, config, retention, trials, seed, out } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(r) = retention {
                cfg.eval.retentions = r;
            }
            if let Some(t) = trials {
                cfg.eval.trials = t;
            }
            if let Some(s) = seed {
                cfg.eval.seed = s;
            }
            cfg.validate()?;
            let mut csv = Vec::new();
            let table = match mode {
                Mode::Reloc => {
                    let reports = commands::evaluate_reloc(&cfg)?;
                    write_reloc_csv(&mut csv, &reports)?;
                    reloc_table(&reports)
                }
                Mode::Loc => {
                    let report = commands::evaluate_loc(&cfg)?;
                    write_loc_csv(&mut csv, &report)?;
                    String::from_utf8(csv.clone()).expect("csv is utf-8")
                }
            };
            match out {
                Some(path) => {
                    write_out(&path, &csv)?;
                    print!("{table}");
                }
                None => std::io::stdout().write_all(&csv).map_err(|e| Error::io("<stdout>", e))?,
            }
        }
        Command::Defaults => print!("{}", Config::default().to_text()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
