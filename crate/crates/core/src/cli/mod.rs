//! Command-line interface: configuration, experiment pipeline and report
//! emission.
//!
//! Exit codes: `0` when every selected check passes, `1` when a check
//! fails, `2` for configuration or runtime errors.

mod config;
mod pipeline;

pub use config::{Check, DensitySource, ExperimentConfig, GridConfig};
pub use pipeline::{
    moment_table, run_all, verify_document, write_manifest, Artifacts, CheckOutcome, DiffusionPipeline, Pipeline,
    WalkPipeline,
};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::Result;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

fn checks_help() -> String {
    let mut s = String::from("Checks:\n");
    for c in Check::ALL {
        s.push_str(&format!("  {:<17} {}\n", c.name(), c.description()));
    }
    s.push_str("\nExit codes: 0 all checks pass, 1 a check failed, 2 invalid configuration or runtime error.");
    s
}

#[derive(Debug, Parser)]
#[command(name = "timerev", version, about = "Time reversal of diffusions and random walks", after_help = checks_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` of the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seed` of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Format of the report printed to stdout.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full pipeline: simulate, estimate densities, reverse, entropy, checks.
    Run(Common),
    /// Simulate the forward ensemble.
    Simulate(Common),
    /// Reversed drift (diffusions) or reversed intensities (walks) on probes.
    Reverse(Common),
    /// Relative-entropy report.
    Entropy(Common),
    /// Run checks; defaults to the checks listed in the configuration.
    #[command(after_help = checks_help())]
    Verify {
        #[command(flatten)]
        common: Common,
        /// Checks to run.
        #[arg(value_parser = parse_check)]
        checks: Vec<Check>,
    },
    /// Graph-walk utilities.
    Rw {
        #[command(subcommand)]
        action: RwAction,
    },
}

#[derive(Debug, Subcommand)]
enum RwAction {
    /// Reversed-intensity table `from,to,t,j_fwd,j_bwd`.
    Reverse(Common),
    /// Relative entropy against the counting walk.
    Entropy(Common),
}

fn parse_check(s: &str) -> std::result::Result<Check, String> {
    Check::parse(s).map_err(|e| e.to_string())
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, out))
}

/// Converts a numeric CSV table to a JSON array of row objects.
fn csv_to_json(table: &str) -> Value {
    let mut lines = table.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let rows: Vec<Value> = lines
        .map(|l| {
            let obj: serde_json::Map<String, Value> = header
                .iter()
                .zip(l.split(','))
                .map(|(h, v)| (h.to_string(), v.parse::<f64>().map_or(Value::Null, |x| json!(x))))
                .collect();
            Value::Object(obj)
        })
        .collect();
    Value::Array(rows)
}

/// `key,value` rows of a flattened JSON document.
fn json_to_csv(v: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&p, x, out);
                }
            }
            Value::Array(a) => {
                for (i, x) in a.iter().enumerate() {
                    walk(&format!("{prefix}.{i}"), x, out);
                }
            }
            other => out.push_str(&format!("{prefix},{other}\n")),
        }
    }
    let mut s = String::from("key,value\n");
    walk("", v, &mut s);
    s
}

fn print_table(table: &str, format: Format) -> Result<()> {
    match format {
        Format::Csv => print!("{table}"),
        Format::Json => println!("{}", serde_json::to_string_pretty(&csv_to_json(table))?),
    }
    Ok(())
}

fn print_doc(doc: &Value, format: Format) -> Result<()> {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(doc)?),
        Format::Csv => print!("{}", json_to_csv(doc)),
    }
    Ok(())
}

fn run_command(cli: Cli) -> Result<i32> {
    let code_for = |outcomes: &[CheckOutcome]| {
        if outcomes.iter().all(|o| o.pass) {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        }
    };
    match cli.command {
        Command::Run(common) => {
            let (cfg, out) = load(&common)?;
            let outcomes = run_all(&cfg, &out)?;
            for o in &outcomes {
                println!("{:<17} {}", o.check, if o.pass { "pass" } else { "FAIL" });
            }
            println!("artifacts written to {}", out.display());
            Ok(code_for(&outcomes))
        }
        Command::Simulate(common) => {
            let (cfg, out) = load(&common)?;
            let mut art = Artifacts::new(&out)?;
            let pipe = Pipeline::new(&cfg)?;
            pipe.write_ensemble(&mut art)?;
            write_manifest(&mut art, &cfg, "simulate", &[])?;
            let summary = match &pipe {
                Pipeline::Diffusion(p) => moment_table(&p.ensemble),
                Pipeline::Walk(_) => std::fs::read_to_string(art.dir().join("marginals.csv"))?,
            };
            print_table(&summary, common.format.unwrap_or(Format::Csv))?;
            Ok(EXIT_OK)
        }
        Command::Reverse(common) | Command::Rw { action: RwAction::Reverse(common) } => {
            let (cfg, out) = load(&common)?;
            let mut art = Artifacts::new(&out)?;
            let pipe = Pipeline::new(&cfg)?;
            let (name, table) = pipe.reversed_table()?;
            art.write(&name, table.as_bytes())?;
            write_manifest(&mut art, &cfg, "reverse", &[])?;
            print_table(&table, common.format.unwrap_or(Format::Csv))?;
            Ok(EXIT_OK)
        }
        Command::Entropy(common) | Command::Rw { action: RwAction::Entropy(common) } => {
            let (cfg, out) = load(&common)?;
            let mut art = Artifacts::new(&out)?;
            let pipe = Pipeline::new(&cfg)?;
            let (doc, fisher) = pipe.entropy()?;
            art.write_json("entropy.json", &doc)?;
            if let Some(f) = fisher {
                art.write("fisher.csv", f.as_bytes())?;
            }
            write_manifest(&mut art, &cfg, "entropy", &[])?;
            print_doc(&doc, common.format.unwrap_or(Format::Json))?;
            Ok(EXIT_OK)
        }
        Command::Verify { common, checks } => {
            let (mut cfg, out) = load(&common)?;
            if !checks.is_empty() {
                cfg.checks = checks;
                cfg.validate()?;
            }
            let mut art = Artifacts::new(&out)?;
            let pipe = Pipeline::new(&cfg)?;
            let outcomes = pipe.run_checks(&cfg.checks)?;
            let doc = verify_document(&outcomes);
            art.write_json("verify.json", &doc)?;
            write_manifest(&mut art, &cfg, "verify", &outcomes)?;
            print_doc(&doc, common.format.unwrap_or(Format::Json))?;
            Ok(code_for(&outcomes))
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run_command(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("timerev: {e}");
            EXIT_ERROR
        }
    }
}
