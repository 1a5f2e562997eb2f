use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lrscatter_cli::config::reference_page;
use lrscatter_cli::{execute, report, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "lrscatter", version, about = "Verification suites for long-range Hartree scattering")]
struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `numerics.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root; falls back to `output_dir` in the config, then LRSCATTER_OUT, then `runs`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replace an existing run directory.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Part {
    A,
    B,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Weight inequalities over random frequency pairs.
    VerifyWeights,
    /// Series weight bounds and asymptotics, and the product-algebra constant.
    VerifyAppendix {
        #[arg(long, value_enum, default_value = "both")]
        part: Part,
    },
    /// Identities and inequalities of the estimating functions.
    VerifyEstimators,
    /// Asymptotic hierarchy: closed forms and decay shapes.
    Expand,
    /// Forward solve of the amplitude/phase system with residual check.
    Solve,
    /// Wave operator: ladder, round trip, equation residual and asymptotic estimates.
    WaveOp,
    /// Gauge invariance of the hierarchy and of the wave operator.
    Gauge,
    /// Run whatever experiment the config names.
    Run,
    /// Summarise every run under the output root.
    Report,
    /// Print the configuration reference with all defaults.
    Defaults,
}

fn load(cli: &Cli, experiment: Option<Experiment>) -> Result<ExperimentConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let cfg = ExperimentConfig::from_toml(&text).map_err(|e| e.to_string())?;
            if let Some(x) = experiment {
                if cfg.experiment != x {
                    return Err(format!("config invalid: file names {:?}, command runs {:?}", cfg.experiment, x));
                }
            }
            cfg
        }
        None => ExperimentConfig::new(experiment.ok_or("`run` needs --config")?),
    };
    if let Some(s) = cli.seed {
        cfg.numerics.seed = s;
    }
    Ok(cfg)
}

fn root(cli: &Cli, cfg: Option<&ExperimentConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .or_else(|| std::env::var_os("LRSCATTER_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn run_experiments(cli: &Cli, experiments: &[Option<Experiment>]) -> ExitCode {
    let mut code = ExitCode::SUCCESS;
    for &x in experiments {
        let cfg = match load(cli, x) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        };
        let out = root(cli, Some(&cfg));
        match execute(&cfg, &out, cli.force) {
            Ok((dir, rec)) => {
                for w in &rec.warnings {
                    eprintln!("warning: {w}");
                }
                for a in &rec.assertions {
                    println!("[{}] {}: {}", if a.passed { "pass" } else { "FAIL" }, a.name, a.detail);
                }
                if let Some(e) = &rec.error {
                    eprintln!("error: {e}");
                    code = ExitCode::from(2);
                } else if !rec.passed && code == ExitCode::SUCCESS {
                    code = ExitCode::from(1);
                }
                println!("{} -> {}", rec.experiment, dir.display());
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        }
    }
    code
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let experiments: Vec<Option<Experiment>> = match &cli.command {
        Command::VerifyWeights => vec![Some(Experiment::Weights)],
        Command::VerifyAppendix { part } => match part {
            Part::A => vec![Some(Experiment::AppendixA)],
            Part::B => vec![Some(Experiment::AppendixB)],
            Part::Both if cli.config.is_some() => vec![None],
            Part::Both => vec![Some(Experiment::AppendixA), Some(Experiment::AppendixB)],
        },
        Command::VerifyEstimators => vec![Some(Experiment::Estimators)],
        Command::Expand => vec![Some(Experiment::Hierarchy)],
        Command::Solve => vec![Some(Experiment::AuxSolve)],
        Command::WaveOp => vec![Some(Experiment::WaveOp)],
        Command::Gauge => vec![Some(Experiment::Gauge)],
        Command::Run => vec![None],
        Command::Defaults => {
            print!("{}", reference_page());
            return ExitCode::SUCCESS;
        }
        Command::Report => {
            let out = root(&cli, None);
            return match report(&out) {
                Ok(records) => {
                    println!("{} runs summarised in {}", records.len(), out.join("report.md").display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
    };
    run_experiments(&cli, &experiments)
}
