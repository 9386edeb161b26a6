mod args;
mod commands;
mod manifest;
mod table;

use std::fs;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use serde_json::json;

use args::Cli;
use commands::RunContext;
use manifest::RunManifest;

const DEFAULT_SEED: u64 = 42;
const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: fit did not converge; best point reported");
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e
                .chain()
                .any(|c| c.downcast_ref::<qfcsim::Error>().is_some_and(qfcsim::Error::is_numerical));
            ExitCode::from(if numerical { EXIT_NUMERICAL } else { EXIT_VALIDATION })
        }
    }
}

/// Runs the command and emits its outputs; returns the convergence flag.
fn execute(cli: &Cli) -> Result<bool> {
    if cli.threads == Some(0) {
        bail!("--threads must be at least 1");
    }
    if let Some(n) = cli.threads {
        // sweeps run on the global rayon pool
        std::env::set_var("RAYON_NUM_THREADS", n.to_string());
    }
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let ctx = RunContext {
        seed,
        threads: cli.threads,
    };
    let output = commands::run(&cli.command, &ctx)?;

    let config = json!({
        "command": cli.command.name(),
        "args": serde_json::to_value(&cli.command)?,
        "inputs": output.inputs,
    });
    let invocation: Vec<String> = std::env::args().skip(1).collect();
    let manifest = RunManifest::new(invocation.join(" "), &config, seed);

    let mut written = serde_json::Map::new();
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let preamble = manifest.comment_block();
        for t in &output.tables {
            let path = t.write(dir, &preamble)?;
            written.insert(t.name.to_string(), json!(path.display().to_string()));
        }
    }
    let record = json!({
        "manifest": manifest,
        "summary": output.summary,
        "tables": written,
    });
    let text = serde_json::to_string_pretty(&record)?;
    if let Some(dir) = &cli.out {
        let path = dir.join("summary.json");
        fs::write(&path, format!("{text}\n")).with_context(|| format!("cannot write {}", path.display()))?;
    }
    println!("{text}");
    Ok(output.converged)
}
