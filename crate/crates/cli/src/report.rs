//! Report assembly and output routing.
//!
//! Every command produces a [`Report`]: the echoed configuration (so a run
//! can be reproduced from its own output), the results object, and run
//! metadata.  Commands that generate sweep tables additionally carry a CSV
//! body; the CSV is the primary artifact for those commands and is what
//! `--out` captures.

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use std::io::Write;
use std::time::Instant;

use crate::GlobalOpts;

/// Machine-readable record of one invocation.
#[derive(Serialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub wall_ms: u128,
    /// Echo of the parsed subcommand arguments.
    pub config: Value,
    /// Command-specific results; estimates carry their budgets/tolerances.
    pub results: Value,
}

/// What one command handler hands back for emission.
pub struct Output {
    /// Dotted command path, e.g. "indicator.linearity".
    pub command: String,
    /// Echo of the parsed arguments.
    pub config: Value,
    /// Results object.
    pub results: Value,
    /// Human-readable summary lines (default stdout rendering).
    pub human: Vec<String>,
    /// CSV body for sweep commands, written verbatim.
    pub csv: Option<String>,
}

impl Output {
    pub fn new(command: &str, config: impl Serialize, results: Value) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            config: serde_json::to_value(config).context("serializing config")?,
            results,
            human: Vec::new(),
            csv: None,
        })
    }

    pub fn line(&mut self, s: impl Into<String>) {
        self.human.push(s.into());
    }
}

/// Route the handler output to stdout and/or `--out` per the global flags.
///
/// - CSV-bearing commands: `--out` receives the CSV; without `--out` the CSV
///   body goes to stdout verbatim (unless `--json`, which always prints the
///   report).  With `--out`, stdout still gets the report (JSON or human).
/// - Other commands: `--out` receives the JSON report; stdout gets the
///   report (JSON) or the human summary.
pub fn emit(global: &GlobalOpts, out: Output, started: Instant) -> Result<()> {
    let report = Report {
        command: out.command,
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: global.seed,
        tol: global.tol,
        max_iter: global.max_iter,
        wall_ms: started.elapsed().as_millis(),
        config: out.config,
        results: out.results,
    };
    let json = serde_json::to_string_pretty(&report).context("serializing report")?;

    match (&out.csv, &global.out) {
        (Some(csv), Some(path)) => {
            let mut f = std::fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            f.write_all(csv.as_bytes())
                .with_context(|| format!("writing {}", path.display()))?;
            if global.json {
                println!("{json}");
            } else {
                for line in &out.human {
                    println!("{line}");
                }
                println!("csv written: {}", path.display());
            }
        }
        (Some(csv), None) => {
            if global.json {
                println!("{json}");
            } else {
                print!("{csv}");
            }
        }
        (None, Some(path)) => {
            std::fs::write(path, json.as_bytes())
                .with_context(|| format!("writing {}", path.display()))?;
            if global.json {
                println!("{json}");
            } else {
                for line in &out.human {
                    println!("{line}");
                }
                println!("report written: {}", path.display());
            }
        }
        (None, None) => {
            if global.json {
                println!("{json}");
            } else {
                for line in &out.human {
                    println!("{line}");
                }
            }
        }
    }
    Ok(())
}
