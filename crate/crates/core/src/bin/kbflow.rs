use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kbflow::lab::{self, ExperimentConfig, SuiteContext};

#[derive(Parser)]
#[command(name = "kbflow", version, about = "Riccati flow and ensemble Kalman-Bucy verification lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suites selected in a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one suite and print its JSON report.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long)]
        seed: u64,
        /// Take run settings, model and map from this config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Turn run artifacts into long-format CSV tables.
    EmitPlotData {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the available suites.
    ListSuites,
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn fail(e: kbflow::Error) -> ExitCode {
    eprintln!("error: {e}");
    code(lab::exit_code(&e))
}

fn verify(suite: &str, seed: u64, config: Option<PathBuf>) -> kbflow::Result<i32> {
    let mut ctx = SuiteContext::new(seed);
    if let Some(path) = config {
        let cfg = ExperimentConfig::load(&path)?;
        ctx.run = cfg.run.clone();
        ctx.run.seed = seed;
        ctx.model = cfg.build_model()?;
        ctx.map = cfg.build_map()?;
    }
    let out = lab::verify_with(suite, &ctx)?;
    println!("{}", out.report.to_json());
    Ok(if out.report.passed() { lab::EXIT_OK } else { lab::EXIT_FAIL })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => match ExperimentConfig::load(&config) {
            Ok(cfg) => code(lab::run(&cfg, out.as_deref())),
            Err(e) => fail(e),
        },
        Command::Verify { suite, seed, config } => match verify(&suite, seed, config) {
            Ok(c) => code(c),
            Err(e) => fail(e),
        },
        Command::EmitPlotData { input, out } => match lab::emit_plot_data(&input, &out) {
            Ok(paths) => {
                for p in paths {
                    println!("{}", p.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::ListSuites => {
            for s in lab::SUITES {
                println!("{:<22} {}", s.name, s.summary);
            }
            ExitCode::SUCCESS
        }
    }
}
