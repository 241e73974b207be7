use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use koopman_observer::cli::{self, presets, Overrides, Source};
use koopman_observer::Error;

/// Koopman-based Luenberger observers for analytic nonlinear systems.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize, simulate and write trajectory.csv, spectrum.csv, summary.json.
    Run {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check assumptions and observability criteria without simulating.
    Check {
        #[command(flatten)]
        input: Input,
    },
    /// Built-in experiments.
    Presets {
        #[command(subcommand)]
        command: PresetCommand,
    },
}

#[derive(Subcommand)]
enum PresetCommand {
    List,
    Show { name: String },
}

#[derive(Args)]
struct Input {
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    degree: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
}

impl Input {
    fn load(&self) -> Result<cli::ExperimentConfig, Error> {
        let source = match (&self.preset, &self.config) {
            (Some(p), _) => Source::Preset(p),
            (None, Some(c)) => Source::File(c),
            (None, None) => unreachable!("clap requires one of them"),
        };
        let o = Overrides {
            dt: self.dt,
            t_end: self.t_end,
            degree: self.degree,
            beta: self.beta,
        };
        cli::load(source, &o)
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { input, out } => {
            let c = match input.load() {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            match cli::run(&c, &out) {
                Ok(r) => {
                    let s = &r.synthesis;
                    println!(
                        "{}: N_d = {}, N_β = {}, koopman rate {:.4}, baseline rate {:.4}; wrote {}",
                        c.system.name,
                        s.n_d(),
                        s.n_beta(),
                        r.koopman_rate.rate,
                        r.baseline_rate.rate,
                        out.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Check { input } => {
            let c = match input.load() {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let report = cli::check(&c);
            print!("{}", report.text);
            match report.failure {
                Some(e) => ExitCode::from(e.exit_code() as u8),
                None => ExitCode::SUCCESS,
            }
        }
        Command::Presets { command } => match command {
            PresetCommand::List => {
                for name in presets::names() {
                    println!("{name}");
                }
                ExitCode::SUCCESS
            }
            PresetCommand::Show { name } => match presets::text(&name) {
                Some(t) => {
                    print!("{t}");
                    ExitCode::SUCCESS
                }
                None => fail(&Error::validation(format!("unknown preset '{name}'"))),
            },
        },
    }
}
