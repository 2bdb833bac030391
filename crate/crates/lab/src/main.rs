use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mkdv_lab::config::{Command, RunConfig};
use mkdv_lab::suite;
use mkdv_lab::LabError;

#[derive(Parser)]
#[command(name = "mkdv", version, about = "Identity, spectrum and stability checks for mKdV breathers")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Closed forms, conserved quantities and the identity suite over the sweep.
    Verify(RunArgs),
    /// Linearized spectrum, scaling forms and coercivity over the sweep.
    Spectrum(RunArgs),
    /// Exact breathers and solitons through the time stepper.
    Evolve(RunArgs),
    /// Perturbed breathers over the stability horizon.
    Stability(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with overrides; every key has a default.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Existing directory for report.json, records.csv and per-run files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let (command, args) = match cli.command {
        Sub::Verify(a) => (Command::Verify, a),
        Sub::Spectrum(a) => (Command::Spectrum, a),
        Sub::Evolve(a) => (Command::Evolve, a),
        Sub::Stability(a) => (Command::Stability, a),
    };
    let mut cfg = match &args.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("mkdv: {e}");
                return ExitCode::from(EXIT_USAGE);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if !args.out.is_dir() {
        eprintln!("mkdv: output directory {} does not exist", args.out.display());
        return ExitCode::from(EXIT_USAGE);
    }
    let out = match suite::run(command, &cfg, suite::workers()) {
        Ok(o) => o,
        Err(LabError::Config(m)) => {
            eprintln!("mkdv: config: {m}");
            return ExitCode::from(EXIT_USAGE);
        }
        Err(e) => {
            eprintln!("mkdv: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    };
    let write = || -> Result<(), LabError> {
        std::fs::write(args.out.join("report.json"), out.report.to_json())?;
        out.report.write_csv(&args.out.join("records.csv"))?;
        for a in &out.artifacts {
            std::fs::write(args.out.join(&a.name), &a.contents)?;
        }
        Ok(())
    };
    if let Err(e) = write() {
        eprintln!("mkdv: {e}");
        return ExitCode::from(EXIT_INTERNAL);
    }
    let s = out.report.summary;
    println!("{}: {} checks, {} passed, {} failed", command.label(), s.total, s.passed, s.failed);
    for r in out.report.records.iter().filter(|r| !r.pass) {
        println!("FAIL {} measured {:e} budget {:e}", r.id, r.measured, r.budget);
    }
    if out.report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}
