use clap::{Args, Parser, Subcommand};
use memsnn::experiment::{calibrate, run_one, run_sweep, target_cycles, ExperimentConfig};
use memsnn::patterns::{write_pattern_file, PatternBlock, PatternSet};
use memsnn::report::{emit_report, parse_report, Format, Report};
use memsnn::topology::{NetworkScale, Rule, Shape};
use memsnn::Error;
use std::path::PathBuf;
use std::process::ExitCode;

/// Memristive SNN experiments. Any config field can be set with
/// `--field=value`; dotted names such as `--learning.srm.dt=0.02` reach
/// nested fields and list fields take comma-separated values.
#[derive(Parser)]
#[command(name = "memsnn", version)]
struct Cli {
    /// JSON config document; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Triple {
    #[arg(long)]
    scale: NetworkScale,
    #[arg(long)]
    shape: Shape,
    #[arg(long)]
    rule: Rule,
}

#[derive(Args)]
struct Output {
    #[arg(long, default_value = "json")]
    format: Format,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write training glyphs and a seeded test set as pattern files.
    GenPatterns {
        #[arg(long)]
        scale: NetworkScale,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        test_out: Option<PathBuf>,
    },
    /// Find a training threshold for a target cycle count.
    Calibrate {
        #[command(flatten)]
        triple: Triple,
        /// Defaults to the reference cycle count for the scale.
        #[arg(long)]
        target: Option<u32>,
    },
    /// Train, evaluate and cost a single configuration.
    Run {
        #[command(flatten)]
        triple: Triple,
        #[command(flatten)]
        output: Output,
    },
    /// Run every configured (scale, shape, rule) triple.
    Sweep {
        #[command(flatten)]
        output: Output,
    },
    /// Reformat a stored JSON report.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        output: Output,
    },
}

enum Failure {
    Config(String),
    Rows(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e.to_string())
    }
}

/// Pulls `--field=value` config overrides out of the argument list.
fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let fields = ExperimentConfig::field_names();
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    for a in args {
        if let Some((key, value)) = a.strip_prefix("--").and_then(|s| s.split_once('=')) {
            let root = key.split('.').next().unwrap_or_default().replace('-', "_");
            if fields.contains(&root) {
                overrides.push((key.to_string(), value.to_string()));
                continue;
            }
        }
        rest.push(a);
    }
    (rest, overrides)
}

fn write_out(text: &str, out: &Option<PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Config(format!("writing {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit(report: &Report, output: &Output) -> Result<(), Failure> {
    write_out(&emit_report(report, output.format)?, &output.out)?;
    if report.all_ok() {
        Ok(())
    } else {
        let failed: Vec<String> = report
            .rows
            .iter()
            .filter(|r| !r.is_ok())
            .map(|r| format!("{} {} {}: {}", r.scale, r.shape, r.rule, r.status))
            .collect();
        Err(Failure::Rows(failed.join("\n")))
    }
}

fn run(cli: Cli, overrides: &[(String, String)]) -> Result<(), Failure> {
    let file = cli
        .config
        .as_ref()
        .map(|p| {
            std::fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))
        })
        .transpose()?;
    let cfg = ExperimentConfig::load(file.as_deref(), overrides)?;
    match cli.command {
        Command::GenPatterns {
            scale,
            train_out,
            test_out,
        } => {
            let set = PatternSet::generate(
                scale,
                cfg.flip_prob,
                cfg.n_test_per_category,
                cfg.seed.unwrap_or(0),
            )?;
            let train: Vec<PatternBlock> = set
                .train_patterns
                .iter()
                .enumerate()
                .map(|(k, img)| PatternBlock {
                    index: k,
                    label: k,
                    image: img.clone(),
                })
                .collect();
            write_out(&write_pattern_file(scale, &train), &Some(train_out))?;
            if let Some(path) = test_out {
                let test: Vec<PatternBlock> = set
                    .test_items
                    .iter()
                    .enumerate()
                    .map(|(n, item)| PatternBlock {
                        index: n,
                        label: item.label,
                        image: item.image.clone(),
                    })
                    .collect();
                write_out(&write_pattern_file(scale, &test), &Some(path))?;
            }
            Ok(())
        }
        Command::Calibrate { triple, target } => {
            let target = target.unwrap_or_else(|| target_cycles(triple.scale));
            let c = calibrate(triple.scale, triple.shape, triple.rule, target, &cfg)
                .map_err(|e| Failure::Rows(e.to_string()))?;
            println!(
                "{}",
                serde_json::to_string_pretty(&c).map_err(|e| Failure::Config(e.to_string()))?
            );
            Ok(())
        }
        Command::Run { triple, output } => {
            let row = run_one(triple.scale, triple.shape, triple.rule, &cfg);
            emit(&Report::new(cfg, vec![row]), &output)
        }
        Command::Sweep { output } => {
            let rows = run_sweep(&cfg);
            emit(&Report::new(cfg, rows), &output)
        }
        Command::Report { input, output } => {
            let text = std::fs::read_to_string(&input)
                .map_err(|e| Failure::Config(format!("{}: {e}", input.display())))?;
            emit(&parse_report(&text)?, &output)
        }
    }
}

fn main() -> ExitCode {
    let (args, overrides) = split_overrides(std::env::args().collect());
    let cli = Cli::parse_from(args);
    match run(cli, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Rows(msg)) => {
            eprintln!("memsnn: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("memsnn: {msg}");
            ExitCode::from(2)
        }
    }
}
