//! Command-line front end for the `pblab` library.
//!
//! Every subcommand runs a set of residual checks and emits one
//! deterministic report: identical configuration (and seed, where one
//! applies) yields byte-identical output. Exit status 0 means every check
//! passed, 1 means at least one residual check failed (the report carries
//! per-check detail), and 2 means the run could not be configured at all.

mod checks;
mod classical;
mod props;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pblab::coeffs::NormalizationPair;
use pblab::hermite::Precision;
use pblab::C64;
use serde_json::Value;
use thiserror::Error;

/// Problems that prevent a run from producing a report. These exit with
/// status 2, distinct from checks that ran and failed (status 1).
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("cannot {action} {path}: {source}")]
    Io {
        action: &'static str,
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    fn config(detail: impl Into<String>) -> Self {
        CliError::Config(detail.into())
    }
}

/// Report serialization format. JSON is canonical; CSV exists only for
/// matrix-shaped and trajectory-shaped payloads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Member family selector for the coefficient command.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Family {
    /// Primal members, built over the difference-supported vacuum.
    Phi,
    /// Dual members, built over the sum-supported vacuum.
    Psi,
}

/// Divergent alternating series with tabulated regularized values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Terms `(-1)^k`; regularized value `1/2`.
    Alt,
    /// Terms `(-1)^k k`; regularized value `-1/4`.
    AltK,
    /// Terms `(-1)^k k^2`; regularized value `0`.
    AltK2,
    /// Terms `(-1)^k (2k+1)^2`; regularized value `-1/2`.
    AltOddSquare,
}

#[derive(Parser)]
#[command(
    name = "pblab",
    version,
    about = "Verification reports and simulations for weak ladder-operator families"
)]
struct Cli {
    /// Trusted truncation size of coefficient grids.
    #[arg(long, global = true, default_value_t = 64)]
    n: usize,

    /// Guard rows kept beyond the trusted block for operator applications.
    #[arg(long, global = true, default_value_t = 8)]
    guard: usize,

    /// Real normalization weight of the primal family (default sqrt(2)).
    #[arg(long, global = true, conflicts_with = "ab")]
    alpha: Option<f64>,

    /// Real normalization weight of the dual family (default sqrt(2)).
    #[arg(long, global = true, conflicts_with = "ab")]
    beta: Option<f64>,

    /// Pairing product alpha*conj(beta), split symmetrically over both
    /// weights; overrides --alpha and --beta.
    #[arg(long, global = true)]
    ab: Option<f64>,

    /// Write the report to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Report format; CSV is limited to matrices and trajectories.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pair every dual member against every primal member up to a label
    /// bound and compare the matrix with the identity.
    Biorth {
        /// Largest label component on each side.
        #[arg(long, default_value_t = 1)]
        kmax: usize,
    },

    /// Build one family member's coefficient grid and verify its structure
    /// against closed forms and, for the vacuum, quadrature.
    Coeffs {
        /// Which family the member belongs to.
        #[arg(long, value_enum, default_value_t = Family::Phi)]
        family: Family,

        /// First label component.
        #[arg(long, default_value_t = 0)]
        k1: usize,

        /// Second label component.
        #[arg(long, default_value_t = 0)]
        k2: usize,
    },

    /// Regularized value of a divergent alternating preset series, with an
    /// exact-versus-numeric cross-check.
    Abel {
        /// Which tabulated series to evaluate.
        #[arg(long, value_enum)]
        preset: Preset,
    },

    /// Occupation-word transfer residuals for all label pairs up to a bound.
    VerifyEigen {
        /// Largest label component on each side.
        #[arg(long, default_value_t = 2)]
        kmax: usize,
    },

    /// Agreement of the four adjoint-identity evaluation routes for all
    /// label pairs up to a bound.
    VerifyAdjoint {
        /// Largest label component on each side.
        #[arg(long, default_value_t = 2)]
        kmax: usize,
    },

    /// Integrate the coupled oscillator pair and check energy conservation
    /// and the decoupled-mode closed forms.
    Simulate(SimulateArgs),

    /// Seeded randomized invariant suites over operators, pairings, and
    /// parameter validation.
    Props {
        /// Seed for the deterministic case generator.
        #[arg(long, default_value_t = 42)]
        seed: u64,

        /// Number of cases per suite.
        #[arg(long, default_value_t = 100)]
        cases: usize,

        /// Largest label component drawn in the transfer suite.
        #[arg(long, default_value_t = 2)]
        kmax: usize,
    },
}

#[derive(Args)]
pub struct SimulateArgs {
    /// `key = value` configuration file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Oscillator mass shared by both coordinates.
    #[arg(long)]
    m: Option<f64>,

    /// Friction rate; damps one coordinate and pumps the other.
    #[arg(long)]
    gamma: Option<f64>,

    /// Spring constant shared by both coordinates.
    #[arg(long)]
    k: Option<f64>,

    /// Weight of the x self-term in the Lagrangian.
    #[arg(long = "A")]
    coupling_a: Option<f64>,

    /// Weight of the y self-term in the Lagrangian.
    #[arg(long = "B")]
    coupling_b: Option<f64>,

    /// Gain-mode weight in the y coordinate.
    #[arg(long = "alpha-y")]
    alpha_y: Option<f64>,

    /// Loss-mode weight in the y coordinate; when omitted and no config
    /// file is given it takes the sign that satisfies the mode-mass
    /// constraint.
    #[arg(long = "beta-y")]
    beta_y: Option<f64>,

    /// Integration step.
    #[arg(long)]
    dt: Option<f64>,

    /// Total integration time.
    #[arg(long = "T")]
    horizon: Option<f64>,
}

/// Settings shared by every subcommand, resolved from flags and the
/// environment before dispatch.
pub struct RunContext {
    pub n: usize,
    pub guard: usize,
    pub norm: NormalizationPair,
    pub precision: Precision,
}

impl RunContext {
    pub fn precision_name(&self) -> &'static str {
        match self.precision {
            Precision::Double => "double",
            Precision::Extended => "extended",
        }
    }
}

/// Finished run: the report text plus the check tally that decides the
/// exit status.
pub struct RunOutput {
    pub text: String,
    pub checks: usize,
    pub failures: usize,
}

impl RunOutput {
    /// Wrap a rendered JSON envelope, reading the tally back from its
    /// summary block.
    pub fn from_envelope(value: Value) -> Self {
        let checks = value["summary"]["checks"].as_u64().unwrap_or(0) as usize;
        let failures = value["summary"]["failures"].as_u64().unwrap_or(0) as usize;
        RunOutput {
            text: report::render(&value),
            checks,
            failures,
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn resolve_precision() -> Result<Precision, CliError> {
    match std::env::var("PBLAB_PRECISION") {
        Ok(raw) => match raw.to_ascii_lowercase().as_str() {
            "double" => Ok(Precision::Double),
            "extended" => Ok(Precision::Extended),
            other => Err(CliError::config(format!(
                "PBLAB_PRECISION must be \"double\" or \"extended\", got \"{other}\""
            ))),
        },
        Err(std::env::VarError::NotPresent) => Ok(Precision::Double),
        Err(err) => Err(CliError::config(format!("PBLAB_PRECISION: {err}"))),
    }
}

fn resolve_normalization(
    alpha: Option<f64>,
    beta: Option<f64>,
    ab: Option<f64>,
) -> Result<NormalizationPair, CliError> {
    match ab {
        Some(product) => {
            NormalizationPair::with_product(product).map_err(|e| CliError::config(e.to_string()))
        }
        None => {
            let a = alpha.unwrap_or(std::f64::consts::SQRT_2);
            let b = beta.unwrap_or(std::f64::consts::SQRT_2);
            NormalizationPair::new(C64::new(a, 0.0), C64::new(b, 0.0))
                .map_err(|e| CliError::config(e.to_string()))
        }
    }
}

/// Whether the command has a matrix- or trajectory-shaped payload that the
/// CSV format can carry.
fn csv_supported(command: &Command) -> bool {
    matches!(
        command,
        Command::Biorth { .. } | Command::Coeffs { .. } | Command::Simulate(_)
    )
}

fn run(cli: &Cli) -> Result<RunOutput, CliError> {
    if cli.n == 0 {
        return Err(CliError::config(
            "the truncation size --n must be at least 1",
        ));
    }
    if cli.format == Format::Csv && !csv_supported(&cli.command) {
        return Err(CliError::config(
            "CSV output is limited to matrix and trajectory reports; \
             this command emits JSON only",
        ));
    }
    let ctx = RunContext {
        n: cli.n,
        guard: cli.guard,
        norm: resolve_normalization(cli.alpha, cli.beta, cli.ab)?,
        precision: resolve_precision()?,
    };
    match &cli.command {
        Command::Biorth { kmax } => checks::biorth(&ctx, *kmax, cli.format),
        Command::Coeffs { family, k1, k2 } => {
            checks::coeffs(&ctx, *family, (*k1, *k2), cli.format)
        }
        Command::Abel { preset } => checks::abel(&ctx, *preset),
        Command::VerifyEigen { kmax } => checks::verify_eigen(&ctx, *kmax),
        Command::VerifyAdjoint { kmax } => checks::verify_adjoint(&ctx, *kmax),
        Command::Simulate(args) => classical::simulate(&ctx, args, cli.format),
        Command::Props { seed, cases, kmax } => props::props(&ctx, *seed, *cases, *kmax),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let output = match run(&cli) {
        Ok(output) => output,
        Err(err) => {
            eprintln!("pblab: {err}");
            return ExitCode::from(2);
        }
    };
    match &cli.out {
        Some(path) => {
            if let Err(source) = std::fs::write(path, &output.text) {
                eprintln!(
                    "pblab: {}",
                    CliError::Io {
                        action: "write",
                        path: path.display().to_string(),
                        source,
                    }
                );
                return ExitCode::from(2);
            }
        }
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            if let Err(err) = stdout.write_all(output.text.as_bytes()) {
                // A closed pipe means the reader has everything it wants;
                // any other write failure is a real error.
                if err.kind() != std::io::ErrorKind::BrokenPipe {
                    eprintln!("pblab: cannot write the report to stdout: {err}");
                    return ExitCode::from(2);
                }
            }
        }
    }
    if output.passed() {
        ExitCode::SUCCESS
    } else {
        eprintln!(
            "pblab: {} of {} checks failed",
            output.failures, output.checks
        );
        ExitCode::from(1)
    }
}
