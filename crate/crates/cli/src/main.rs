mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use report::{Envelope, Failure, InputDigest, Status, SCHEMA_VERSION};

pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Parser, Debug)]
#[command(name = "mf", version, about = "Marginal-family extension and fiberwise independence tools")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Input JSON file.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Report path (stdout when absent).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Tolerance override for the command's main check.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Omit the generation time so identical runs give identical reports.
    #[arg(long, global = true)]
    no_timestamp: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the hypotheses of the extension theorem on a family file.
    Verify(commands::VerifyArgs),
    /// Extend a family file over its window and report the step trace.
    Extend(commands::ExtendArgs),
    /// Decide extendability by linear feasibility.
    Oracle,
    /// Correcting measure of a measure literal toward the product of its marginals.
    Correct(commands::CorrectArgs),
    /// One painting step on a tower file.
    Paint(commands::PaintArgs),
    /// Iterated painting along a list of candidate times.
    Krengel(commands::KrengelArgs),
    /// The sign-partition counterexample on the shift-by-base-symbol skew product.
    Counterexample(commands::CounterexampleArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Verify(_) => "verify",
            Command::Extend(_) => "extend",
            Command::Oracle => "oracle",
            Command::Correct(_) => "correct",
            Command::Paint(_) => "paint",
            Command::Krengel(_) => "krengel",
            Command::Counterexample(_) => "counterexample",
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("MF_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::usage("usage", format!("MF_THREADS={v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::usage("usage", e.to_string()))
}

fn read_input(common: &Common) -> Result<Option<(Vec<u8>, InputDigest)>, Failure> {
    let Some(path) = &common.input else {
        return Ok(None);
    };
    let bytes = std::fs::read(path)
        .map_err(|e| Failure::usage("io", format!("cannot read {}: {e}", path.display())))?;
    let sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    Ok(Some((
        bytes,
        InputDigest { path: path.display().to_string(), sha256 },
    )))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let common = cli.common.clone();

    let mut digest = None;
    let result = configure_threads()
        .and_then(|()| read_input(&common))
        .and_then(|input| {
            let bytes = input.map(|(b, d)| {
                digest = Some(d);
                b
            });
            commands::run(&cli.command, &common, bytes.as_deref())
        });

    let (status, reason, message, checks, body) = match result {
        Ok(outcome) => {
            let (status, reason) = outcome.status();
            (status, reason, None, outcome.checks, outcome.body)
        }
        Err(f) => (f.status, f.reason, Some(f.message), Vec::new(), serde_json::Value::Null),
    };
    if let Some(m) = &message {
        eprintln!("mf {name}: {reason}: {m}");
    }
    let envelope = Envelope {
        schema_version: SCHEMA_VERSION,
        tool: "mf",
        version: env!("CARGO_PKG_VERSION"),
        core_version: mf_core::VERSION,
        command: name,
        input: digest,
        seed: common.seed,
        generated_at_unix: (!common.no_timestamp).then(|| {
            SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
        }),
        status,
        reason,
        message,
        checks,
        report: body,
    };
    let mut text = serde_json::to_string_pretty(&envelope).expect("report serializes");
    text.push('\n');
    let written = match &common.output {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("mf {name}: io: {e}");
        return ExitCode::from(Status::Error.exit_code());
    }
    ExitCode::from(status.exit_code())
}
