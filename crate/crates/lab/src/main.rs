use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ist_lab::commands::{execute, rerun, Command};
use ist_lab::error::{LabError, LabResult, EXIT_CHECK_FAILED, EXIT_OK};
use ist_lab::exec::Pool;
use ist_lab::output::Format;

/// Simulation and numerics for time-inhomogeneous splitting trees.
#[derive(Debug, Parser)]
#[command(name = "ist-lab", version)]
struct Cli {
    /// Base seed; replica `i` uses its own stream derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "ist-lab-out")]
    out: PathBuf,
    /// Worker threads for replicas (0: one per core).
    #[arg(long, global = true, env = "IST_LAB_THREADS", default_value_t = 0)]
    threads: usize,
    /// Encoding of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// JSON configuration file (see `ist-lab schema <subcommand>`).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Simulate truncated trees and dump the first one.
    Tree(ConfigArg),
    /// Build contour paths from trees or simulate them directly.
    Contour(ConfigArg),
    /// Solve the scale function on a grid.
    Scale(ConfigArg),
    /// Extinction probabilities as limits of the scale function.
    Extinction(ConfigArg),
    /// Population law at a fixed time, optionally against simulation.
    Population(ConfigArg),
    /// Criticality report from the drift criteria.
    Classify(ConfigArg),
    /// Tail estimates of the total tree length.
    Tails(ConfigArg),
    /// Conditioned parameters and their validation.
    Condition(ConfigArg),
    /// Rescaled contours against the Bessel limit.
    Scaling(ConfigArg),
    /// Run the acceptance suite.
    Verify(ConfigArg),
    /// Print the JSON schema of a subcommand's configuration.
    Schema {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(ist_lab::commands::SUBCOMMANDS))]
        subcommand: String,
    },
    /// Replay a run from its manifest and compare artifact hashes.
    Rerun {
        /// Path to a manifest.json written by an earlier run.
        manifest: PathBuf,
    },
}

/// Prints a line, ignoring a closed pipe on the reading side.
fn say(line: impl std::fmt::Display) {
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn read_config(name: &str, path: Option<&Path>) -> LabResult<Command> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| LabError::io(p, e))?,
        None if name == "verify" => "{}".to_string(),
        None => return Err(LabError::Usage(format!("`{name}` needs --config <path>"))),
    };
    Command::from_json(name, &text)
}

fn pool(threads: usize) -> LabResult<Pool> {
    Pool::new(threads).map_err(|e| LabError::Usage(format!("cannot start {threads} threads: {e}")))
}

fn real_main(cli: Cli) -> LabResult<i32> {
    let (name, arg) = match &cli.command {
        Sub::Schema { subcommand } => {
            let schema = Command::schema(subcommand)?;
            say(serde_json::to_string_pretty(&schema).expect("schema serializes"));
            return Ok(EXIT_OK);
        }
        Sub::Rerun { manifest } => {
            let exec = pool(cli.threads)?;
            let (new, mismatches) = rerun(manifest, &exec, &cli.out)?;
            for a in &new.artifacts {
                say(format_args!("{}  {}", a.sha256, a.file));
            }
            if mismatches.is_empty() {
                say(format_args!(
                    "all {} artifacts match the manifest",
                    new.artifacts.len()
                ));
                return Ok(EXIT_OK);
            }
            for m in &mismatches {
                eprintln!("mismatch: {m}");
            }
            return Ok(EXIT_CHECK_FAILED);
        }
        Sub::Tree(a) => ("tree", a),
        Sub::Contour(a) => ("contour", a),
        Sub::Scale(a) => ("scale", a),
        Sub::Extinction(a) => ("extinction", a),
        Sub::Population(a) => ("population", a),
        Sub::Classify(a) => ("classify", a),
        Sub::Tails(a) => ("tails", a),
        Sub::Condition(a) => ("condition", a),
        Sub::Scaling(a) => ("scaling", a),
        Sub::Verify(a) => ("verify", a),
    };
    let cmd = read_config(name, arg.config.as_deref())?;
    let exec = pool(cli.threads)?;
    let (summary, manifest) = execute(&cmd, cli.seed, &exec, &cli.out, cli.format)?;
    for line in &summary.lines {
        say(line);
    }
    say(format_args!(
        "wrote {} artifacts and {} to {}",
        manifest.artifacts.len(),
        ist_lab::output::MANIFEST_FILE,
        cli.out.display()
    ));
    Ok(if summary.failed {
        EXIT_CHECK_FAILED
    } else {
        EXIT_OK
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let code = match real_main(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
