use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use featint_cli::commands::{self, CliError, Outcome};
use featint_cli::config::RunConfig;

#[derive(Parser, Debug)]
#[command(
    name = "featint",
    version,
    about = "Feature interaction detection for #if-annotated product lines"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalFlags,
    #[command(subcommand)]
    command: Command,
}

/// Every flag overrides the same key of `--config`.
#[derive(Args, Debug, Default)]
struct GlobalFlags {
    /// Flat `key = value` file; keys are the long flag names.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    timeout_secs: Option<f64>,
    #[arg(long, global = true)]
    max_paths: Option<usize>,
    /// Longest call sequences kept per normal path.
    #[arg(short = 'L', global = true)]
    longest: Option<usize>,
    #[arg(long, global = true)]
    loop_bound: Option<i64>,
    /// base-address or object-offset.
    #[arg(long, global = true)]
    store_key_mode: Option<String>,
    #[arg(long, global = true)]
    min_support: Option<f64>,
    #[arg(long, global = true)]
    min_confidence: Option<f64>,
    /// stack, constraints or combined.
    #[arg(long, global = true)]
    source: Option<String>,
    /// nb, svm or rf.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Extra `key=value` settings, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Write measured wall-clock times into reports.
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Symbolically execute every product and write path and dependency corpora.
    Extract {
        /// FLC source unit.
        unit: PathBuf,
        products: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Mine feature interaction rules from a dependency corpus.
    Mine {
        deps: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Evaluate a classifier on a path corpus and save the fitted model.
    Train {
        paths: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Label the paths of a corpus with a saved model.
    Predict {
        /// Model file written by `train`.
        model_file: PathBuf,
        paths: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Leave-one-interaction-out, partial data and token importance studies.
    Ablate {
        paths: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Generate the benchmark product lines.
    GenBench {
        #[arg(short, long)]
        out: PathBuf,
        /// Suites to write: mailkit, liftkit, pumpkit, scale. Defaults to the first three.
        #[arg(long = "suite")]
        suites: Vec<String>,
    },
    /// Collect the CSV outputs of earlier commands into one markdown report.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn build_config(g: &GlobalFlags, inputs: Vec<String>) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::default();
    if let Some(path) = &g.config {
        config.apply_file(path)?;
    }
    for kv in &g.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        config.set("flag", k.trim(), v)?;
    }
    let flags: [(&str, Option<String>); 10] = [
        ("seed", g.seed.map(|v| v.to_string())),
        ("timeout-secs", g.timeout_secs.map(|v| v.to_string())),
        ("max-paths", g.max_paths.map(|v| v.to_string())),
        ("L", g.longest.map(|v| v.to_string())),
        ("loop-bound", g.loop_bound.map(|v| v.to_string())),
        ("store-key-mode", g.store_key_mode.clone()),
        ("min-support", g.min_support.map(|v| v.to_string())),
        ("min-confidence", g.min_confidence.map(|v| v.to_string())),
        ("source", g.source.clone()),
        ("model", g.model.clone()),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            config.set("flag", k, &v)?;
        }
    }
    if g.timings {
        config.timings = true;
    }
    config.inputs = inputs;
    Ok(config)
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Extract { unit, products, out } => {
            let cfg = build_config(&cli.global, vec![show(unit), show(products)])?;
            commands::extract(&cfg, unit, products, out)
        }
        Command::Mine { deps, out } => {
            let cfg = build_config(&cli.global, vec![show(deps)])?;
            commands::mine(&cfg, deps, out)
        }
        Command::Train { paths, out } => {
            let cfg = build_config(&cli.global, vec![show(paths)])?;
            commands::train(&cfg, paths, out)
        }
        Command::Predict { model_file, paths, out } => {
            let cfg = build_config(&cli.global, vec![show(model_file), show(paths)])?;
            commands::predict(&cfg, model_file, paths, out)
        }
        Command::Ablate { paths, out } => {
            let cfg = build_config(&cli.global, vec![show(paths)])?;
            commands::ablate(&cfg, paths, out)
        }
        Command::GenBench { out, suites } => {
            let cfg = build_config(&cli.global, Vec::new())?;
            commands::gen_bench(&cfg, out, suites)
        }
        Command::Report { dirs, out } => {
            let cfg = build_config(&cli.global, dirs.iter().map(|d| show(d)).collect())?;
            commands::report(&cfg, dirs, out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(outcome) => {
            if outcome.truncated {
                eprintln!("featint: analysis truncated by timeout or path budget");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("featint: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
