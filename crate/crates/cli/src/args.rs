use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "riskeig",
    version,
    about = "Risk-sensitive control of finite MDPs via principal eigenvalues",
    long_about = "Reads an instance file (JSON) and writes a single JSON report to stdout.\n\
                  Exit codes: 0 success, 1 usage, 2 invalid input, 3 solver did not converge."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Convergence tolerance.
    #[arg(long, global = true, default_value_t = 1e-10, value_parser = positive_f64)]
    pub tol: f64,
    /// Iteration limit for power iterations.
    #[arg(long, global = true, default_value_t = 100_000)]
    pub max_iter: usize,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Largest number of deterministic policies to enumerate.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    pub cap: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check an instance file and summarize it.
    Validate { instance: PathBuf },
    /// Strongly connected classes of the support graph.
    Classify { instance: PathBuf },
    /// Optimal growth rate, eigenvector and policy.
    Solve {
        instance: PathBuf,
        /// Use the reducible solver even when the support is irreducible.
        #[arg(long)]
        force_reducible: bool,
        /// Ratio-iteration horizon, used when enumeration exceeds the cap.
        #[arg(long, default_value_t = 10_000)]
        horizon: usize,
    },
    /// Collatz–Wielandt bracket of the optimal eigenvalue at a positive vector.
    Bounds {
        instance: PathBuf,
        /// JSON array with one positive entry per state.
        #[arg(long)]
        vector: PathBuf,
    },
    /// Donsker–Varadhan optimizer for the matrix induced by a policy.
    Dv {
        instance: PathBuf,
        /// Policy file; defaults to the uniform policy.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Optimal occupation measure with its dual certificate.
    Occupation { instance: PathBuf },
    /// Per-state optimal growth by policy enumeration.
    Oracle { instance: PathBuf },
    /// Finite-horizon growth of a fixed policy.
    Eval {
        instance: PathBuf,
        /// Policy file; defaults to the uniform policy.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
        horizons: Vec<usize>,
        /// Also run a Monte Carlo estimate with this many samples per state.
        #[arg(long)]
        mc_samples: Option<usize>,
        /// Monte Carlo trajectory length; defaults to the last horizon.
        #[arg(long)]
        mc_steps: Option<usize>,
    },
    /// Sample one trajectory under a policy.
    Simulate {
        instance: PathBuf,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        start: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Classify { .. } => "classify",
            Command::Solve { .. } => "solve",
            Command::Bounds { .. } => "bounds",
            Command::Dv { .. } => "dv",
            Command::Occupation { .. } => "occupation",
            Command::Oracle { .. } => "oracle",
            Command::Eval { .. } => "eval",
            Command::Simulate { .. } => "simulate",
        }
    }

    pub fn instance(&self) -> &PathBuf {
        match self {
            Command::Validate { instance }
            | Command::Classify { instance }
            | Command::Solve { instance, .. }
            | Command::Bounds { instance, .. }
            | Command::Dv { instance, .. }
            | Command::Occupation { instance }
            | Command::Oracle { instance }
            | Command::Eval { instance, .. }
            | Command::Simulate { instance, .. } => instance,
        }
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("{v} is not a positive finite number")),
        Err(e) => Err(e.to_string()),
    }
}
