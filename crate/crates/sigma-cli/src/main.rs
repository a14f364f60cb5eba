use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sigma_cli::run::{run, Command, Job, EXIT_INPUT};

/// Exact difference-field solvers and checkers.
#[derive(Parser, Debug)]
#[command(name = "sigma", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Input document, `-` for standard input.
    input: Option<PathBuf>,
    #[arg(long)]
    bounds_degree: Option<u32>,
    #[arg(long)]
    bounds_window: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exit with 3 when only a bounded or partial answer was reached.
    #[arg(long)]
    require_decision: bool,
    /// Write the JSON report here; the summary then goes to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_input(path: &PathBuf) -> std::io::Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        std::fs::read_to_string(path)
    }
}

/// Writes next to the target and renames, so readers never see a partial file.
fn write_atomic(path: &PathBuf, text: &str) -> std::io::Result<()> {
    let mut tmp = path.clone().into_os_string();
    tmp.push(".tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let input = match cli.input.as_ref().map(read_input).transpose() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot read input: {e}");
            return ExitCode::from(EXIT_INPUT as u8);
        }
    };
    let job = Job {
        command: cli.command,
        input,
        degree: cli.bounds_degree,
        window: cli.bounds_window,
        seed: cli.seed,
        require_decision: cli.require_decision,
    };
    let out = match run(&job) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT as u8);
        }
    };
    match &cli.out {
        Some(path) => {
            if let Err(e) = write_atomic(path, &out.json) {
                eprintln!("error: cannot write report: {e}");
                return ExitCode::from(EXIT_INPUT as u8);
            }
            print!("{}", out.summary);
        }
        None => {
            eprint!("{}", out.summary);
            print!("{}", out.json);
        }
    }
    ExitCode::from(out.exit_code as u8)
}
