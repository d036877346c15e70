use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Mean-variance reinsurance and investment under partial or full information.
#[derive(Debug, Parser)]
#[command(name = "mvre", version)]
pub struct Cli {
    /// Use the printed frontier and dual constant `x0 e^{rT} + (a theta - a eta)/r`
    /// in the full-information solver instead of the riskless vertex.
    #[arg(long, global = true)]
    pub compat_paper_formulas: bool,

    /// Worker threads for Monte Carlo (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Model configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,

    /// Directory for output files.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Full,
    Partial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    Physical,
    Innovation,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Conditional mean and variance of the drift; writes filter.csv.
    Filter {
        #[command(flatten)]
        common: Common,
        /// Filter a simulated return path instead of reporting the expected mean.
        #[arg(long)]
        seed: Option<u64>,
        /// RK4 and observation steps on [0, T].
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
    },
    /// Efficient frontier from d_min; writes frontier.csv.
    Frontier {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Number of frontier points.
        #[arg(long, default_value_t = 101)]
        points: usize,
        /// Largest target (default: max(d, 2 d_min)).
        #[arg(long)]
        d_max: Option<f64>,
        /// Paths for the realised-variance report in projected-drift mode.
        #[arg(long, default_value_t = 10_000)]
        mc_paths: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Full-information value function on a (t, x) grid; writes value_surface.csv.
    ValueSurface {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 51)]
        nt: usize,
        #[arg(long, default_value_t = 101)]
        nx: usize,
        /// Shifted-wealth range; defaults cover the switching curve and x0.
        #[arg(long, allow_hyphen_values = true)]
        x_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        x_max: Option<f64>,
    },
    /// Dual objective over gamma; writes dual_curve.csv.
    DualCurve {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        gamma_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        gamma_max: Option<f64>,
        #[arg(long, default_value_t = 401)]
        points: usize,
    },
    /// Monte Carlo of the efficient strategy; writes summary.json and
    /// optionally paths.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        /// Time step (default: T / 5000).
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Strategy: full-information or partial-information efficient feedback.
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = Scheme::Physical)]
        scheme: Scheme,
        #[arg(long)]
        store_paths: bool,
    },
    /// Runs the self-check suite; exit code 2 if any check fails.
    Validate {
        #[arg(long)]
        config: PathBuf,
        /// Smaller Monte Carlo and random-draw sizes.
        #[arg(long)]
        quick: bool,
        /// Replace A1 in the full-information closed forms (fault injection).
        #[arg(long, allow_hyphen_values = true)]
        inject_a1: Option<f64>,
    },
}
