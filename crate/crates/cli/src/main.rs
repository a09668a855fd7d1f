use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use efg_core::run::{io_run, Command, Format, RunConfig};
use efg_core::scenario::io_parse;
use efg_core::transcript::RunSettings;
use efg_core::Error;

#[derive(Parser)]
#[command(name = "efg", version, about = "Ramification and essential finite generation checks for monomial extensions")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Ramification index, initial index and the efg decision.
    Analyze(Opts),
    /// Bring the extension to normal form.
    Normalize(Opts),
    /// Monomial division over R.
    Divide(Opts),
    /// Divisibility certificate over S, printed as a transcript.
    Certify(Opts),
}

#[derive(Args)]
struct Opts {
    /// Scenario file; `-` reads stdin.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    max_steps: usize,
    /// Radius of the brute-force boxes.
    #[arg(long = "box", default_value_t = 20)]
    box_radius: u32,
    /// Interval refinement rounds before a sign is declared unresolved.
    #[arg(long, default_value_t = 16)]
    precision_rounds: u32,
    /// Print every transform record.
    #[arg(long)]
    trace: bool,
    #[arg(long, value_enum, default_value_t = OutFormat::Text)]
    format: OutFormat,
}

#[derive(ValueEnum, Clone, Copy)]
enum OutFormat {
    Text,
    Machine,
}

fn read_scenario(path: &PathBuf) -> Result<String, String> {
    if path.as_os_str() == "-" {
        std::io::read_to_string(std::io::stdin()).map_err(|e| format!("stdin: {e}"))
    } else {
        std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
    }
}

fn run(command: Command, opts: &Opts) -> Result<String, Error> {
    let text = read_scenario(&opts.scenario).map_err(|m| Error::parse(0, 0, m))?;
    let scenario = io_parse(&text)?;
    let config = RunConfig {
        settings: RunSettings {
            max_steps: opts.max_steps,
            box_radius: opts.box_radius,
            precision_rounds: opts.precision_rounds,
        },
        trace: opts.trace,
        format: match opts.format {
            OutFormat::Text => Format::Text,
            OutFormat::Machine => Format::Machine,
        },
    };
    io_run(&scenario, command, &config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, opts) = match &cli.command {
        Cmd::Analyze(o) => (Command::Analyze, o),
        Cmd::Normalize(o) => (Command::Normalize, o),
        Cmd::Divide(o) => (Command::Divide, o),
        Cmd::Certify(o) => (Command::Certify, o),
    };
    match run(command, opts) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("efg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
