//! omega-calc: deterministic experiment driver over the interpolation
//! calculus library.
//!
//! Every run is a pure function of (command, flags, seed): stochastic
//! searches are seeded explicitly, reports carry the budgets and tolerances
//! behind every estimate, and CSV bodies are byte-reproducible.  JSON is the
//! machine format (`--json`), CSV the sweep-table format, and plain text the
//! default human summary.
//!
//! Exit codes: 0 success, 2 precondition violation (bad flags or infeasible
//! inputs), 3 optimizer nonconvergence, 64 unknown command.

mod report;
mod run;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "omega-calc",
    version,
    about = "Interpolation norms, differentials, indicators, centralizer splits, twisted sums, and circle-grid commutators — reproducibly."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct GlobalOpts {
    /// Seed for every stochastic search in the run.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Optimizer tolerance.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    /// Optimizer iteration budget.
    #[arg(long, global = true, default_value_t = 100_000)]
    pub max_iter: usize,
    /// Emit the full report as JSON on stdout.
    #[arg(long, global = true, default_value_t = false)]
    pub json: bool,
    /// Write the primary artifact (CSV table when the command produces one,
    /// JSON report otherwise) to this path instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Indicator-functional experiments.
    Indicator {
        #[command(subcommand)]
        sub: IndicatorCmd,
    },
    /// Interpolation-norm solver against the weighted-ℓᵖ closed form.
    Interpolate(InterpolateArgs),
    /// Canonical-differential diagnostics: finite differences and lifts.
    Omega(OmegaArgs),
    /// Centralizer axioms and couple reconstruction.
    Centralizer {
        #[command(subcommand)]
        sub: CentralizerCmd,
    },
    /// Twisted-sum quasinorm against the analytic-family upper bound.
    Twisted(TwistedArgs),
    /// Unit-circle grid experiments.
    Circle {
        #[command(subcommand)]
        sub: CircleCmd,
    },
    /// Two-segment interpolation gluing.
    Wolff(WolffArgs),
}

#[derive(Subcommand, Debug)]
pub enum IndicatorCmd {
    /// Max defect of the t-affine law for the interpolated indicator.
    Linearity(LinearityArgs),
    /// Superadditivity constant δ(Φ) of a weighted-ℓᵖ indicator.
    Delta(DeltaArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct LinearityArgs {
    /// First endpoint exponent (a number or "inf").
    #[arg(long)]
    pub p0: String,
    /// Second endpoint exponent (a number or "inf").
    #[arg(long)]
    pub p1: String,
    /// Interior interpolation parameter in (0, 1).
    #[arg(long)]
    pub t: f64,
    /// Number of atoms.
    #[arg(long)]
    pub n: usize,
    /// Random nonnegative test functions to sweep.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct DeltaArgs {
    /// Exponent of the space (a number or "inf").
    #[arg(long)]
    pub p: String,
    /// Number of atoms.
    #[arg(long)]
    pub n: usize,
    /// Pair budget for the sampled search.
    #[arg(long, default_value_t = 400)]
    pub budget: usize,
    /// Evaluate through the numeric ball maximizer instead of the closed form.
    #[arg(long, default_value_t = false)]
    pub numeric: bool,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct InterpolateArgs {
    /// First endpoint exponent (a number or "inf").
    #[arg(long)]
    pub p0: String,
    /// Second endpoint exponent (a number or "inf").
    #[arg(long)]
    pub p1: String,
    /// Interior interpolation parameter in (0, 1).
    #[arg(long)]
    pub t: f64,
    /// Number of atoms.
    #[arg(long)]
    pub n: usize,
    /// Random test vectors to sweep.
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct OmegaArgs {
    /// First endpoint exponent (a number or "inf").
    #[arg(long)]
    pub p0: String,
    /// Second endpoint exponent (a number or "inf").
    #[arg(long)]
    pub p1: String,
    /// Interior interpolation parameter in (0, 1).
    #[arg(long)]
    pub t: f64,
    /// Number of atoms.
    #[arg(long)]
    pub n: usize,
    /// Random test vectors to sweep.
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
}

#[derive(Subcommand, Debug)]
pub enum CentralizerCmd {
    /// Sampled centralizer-axiom constants (ρ̂, Ĉ, M(ε), homogeneity).
    Axioms(AxiomsArgs),
    /// Reconstruct a couple from (space, Ω, t) and report its defects.
    Split(SplitArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct AxiomsArgs {
    /// Base space: "l1", "l2", or "lp" (with --p).
    #[arg(long, default_value = "l2")]
    pub space: String,
    /// Exponent when --space lp is chosen.
    #[arg(long)]
    pub p: Option<f64>,
    /// Centralizer kind: "logmod", "ranklog", or "zero".
    #[arg(long, default_value = "logmod")]
    pub omega: String,
    /// Number of atoms.
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    /// Sample budget.
    #[arg(long, default_value_t = 40)]
    pub samples: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SplitArgs {
    /// Base space: "l1", "l2", or "lp" (with --p).
    #[arg(long, default_value = "l2")]
    pub space: String,
    /// Exponent when --space lp is chosen.
    #[arg(long)]
    pub p: Option<f64>,
    /// Centralizer kind: "logmod", "ranklog", or "zero".
    #[arg(long, default_value = "logmod")]
    pub omega: String,
    /// Interior interpolation parameter in (0, 1).
    #[arg(long)]
    pub t: f64,
    /// Number of atoms.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TwistedArgs {
    /// First endpoint exponent (a number or "inf").
    #[arg(long)]
    pub p0: String,
    /// Second endpoint exponent (a number or "inf").
    #[arg(long)]
    pub p1: String,
    /// Interior interpolation parameter in (0, 1).
    #[arg(long)]
    pub t: f64,
    /// Number of atoms.
    #[arg(long)]
    pub n: usize,
    /// Random element pairs to sweep.
    #[arg(long, default_value_t = 30)]
    pub samples: usize,
}

#[derive(Subcommand, Debug)]
pub enum CircleCmd {
    /// Commutator-ratio sweep ‖[Ω, P]f‖₂/‖f‖₂ over grid sizes (CSV).
    Commutator(CommutatorArgs),
    /// Raw operator ratio ‖Ωf‖₂/‖f‖₂ on the concentrated test function (CSV).
    Growth(GrowthArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CommutatorArgs {
    /// Which map: 1 (log-singularity), 2 (log-modulus), or 3 (log-superlevel).
    #[arg(long)]
    pub omega: u8,
    /// Comma-separated power-of-two grid sizes, e.g. "256,4096".
    #[arg(long)]
    pub n: String,
    /// Random band-limited trials per grid size.
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct GrowthArgs {
    /// Which map: 1 (log-singularity), 2 (log-modulus), or 3 (log-superlevel).
    #[arg(long)]
    pub omega: u8,
    /// Comma-separated power-of-two grid sizes, e.g. "256,4096".
    #[arg(long)]
    pub n: String,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct WolffArgs {
    /// Number of atoms.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Inner position of the first glued segment, in (0, 1).
    #[arg(long)]
    pub theta1: f64,
    /// Inner position of the second glued segment, in (0, 1).
    #[arg(long)]
    pub theta2: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                ErrorKind::InvalidSubcommand => {
                    eprintln!("{e}");
                    ExitCode::from(64)
                }
                _ => {
                    eprintln!("{e}");
                    ExitCode::from(2)
                }
            };
        }
    };
    match run::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(run::exit_code(&err))
        }
    }
}
