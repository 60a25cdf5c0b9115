//! `fairsel` — design, calibrate, and search top-k selection policies that
//! trade expected performance against demographic disparity.

mod cmds;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "fairsel",
    version,
    about = "Top-k selection policies balancing utility and demographic disparity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PopArgs {
    /// Population CSV (header row; first column is the id; attribute
    /// columns are {0,1}-coded; an `outcome` column is optional; every
    /// other column is a score)
    #[arg(long)]
    input: PathBuf,
    /// Attribute column name (repeatable; the first one is the attribute a
    /// single-attribute command operates on)
    #[arg(long = "attr", required = true)]
    attrs: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic population from a generator config
    Simulate {
        /// Generator config (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Output population CSV
        #[arg(long)]
        out: PathBuf,
        /// Override the config's RNG seed
        #[arg(long)]
        seed: Option<u64>,
        /// Keep outcomes only for the top fraction under the true
        /// coefficients (selective observation under a reference policy)
        #[arg(long)]
        observe_top: Option<f64>,
    },
    /// Fit the linear outcome model from the outcome column
    Fit {
        #[command(flatten)]
        pop: PopArgs,
        /// Output model TOML
        #[arg(long)]
        out: PathBuf,
    },
    /// Rotation search over score weights
    SearchCoeffs {
        #[command(flatten)]
        pop: PopArgs,
        #[arg(long)]
        theta: f64,
        /// Disparity price ATTR=FLOAT (repeatable)
        #[arg(long = "lambda", required = true)]
        lambdas: Vec<String>,
        /// Serialized outcome model (fitted from the outcome column when omitted)
        #[arg(long)]
        model: Option<PathBuf>,
        /// Rotation step angle in radians
        #[arg(long, default_value_t = 0.02)]
        step_angle: f64,
        /// Rotation steps per direction
        #[arg(long, default_value_t = 40)]
        steps: usize,
        /// Output policy TOML
        #[arg(long)]
        out: PathBuf,
        /// Optional evaluation report (JSON)
        #[arg(long)]
        report: Option<PathBuf>,
        /// Optional per-step trace (CSV)
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Grid search for the best single-attribute bonus
    SearchBonus {
        #[command(flatten)]
        pop: PopArgs,
        #[arg(long)]
        theta: f64,
        /// Disparity price ATTR=FLOAT (exactly one entry; names the
        /// attribute whose disparity the bonus repairs)
        #[arg(long = "lambda", required = true)]
        lambdas: Vec<String>,
        /// Grid granularity
        #[arg(long, default_value_t = 100)]
        grid_k: usize,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Greedy incremental bonus search over several attributes
    SearchBonusMulti {
        #[command(flatten)]
        pop: PopArgs,
        #[arg(long)]
        theta: f64,
        /// Disparity price ATTR=FLOAT (repeatable; keys are the searched attributes)
        #[arg(long = "lambda", required = true)]
        lambdas: Vec<String>,
        /// Bonus increment per greedy step
        #[arg(long, default_value_t = 1.0)]
        delta_b: f64,
        /// Step budget
        #[arg(long, default_value_t = 200)]
        max_steps: usize,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Convert a calibrated Bonus policy to the equivalent Quota policy
    BonusToQuota {
        #[command(flatten)]
        pop: PopArgs,
        /// Input policy TOML
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a calibrated Quota policy to the smallest equivalent Bonus policy
    QuotaToBonus {
        #[command(flatten)]
        pop: PopArgs,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Quantile distribution repair of the score columns
    BaselineMedian {
        #[command(flatten)]
        pop: PopArgs,
        /// Output repaired population CSV (score columns gain a `repaired_` prefix)
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Selection fraction for --selection-out
        #[arg(long)]
        theta: Option<f64>,
        /// Also write the top-k selection over the repaired scores
        #[arg(long)]
        selection_out: Option<PathBuf>,
    },
    /// Prefix-fair re-ranking with a binomial representation test
    BaselineFair {
        #[command(flatten)]
        pop: PopArgs,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Significance level of the per-prefix test
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        /// Target minimum protected proportion
        #[arg(long)]
        rho: f64,
        /// Output ranking CSV (position, id, group, score)
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        selection_out: Option<PathBuf>,
    },
    /// Evaluate a policy file on a population
    Evaluate {
        #[command(flatten)]
        pop: PopArgs,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Disparity price ATTR=FLOAT (repeatable)
        #[arg(long = "lambda")]
        lambdas: Vec<String>,
        /// Use exact-k admission at this fraction (threshold ties resolved
        /// by id, as during calibration) instead of plain threshold admission
        #[arg(long)]
        theta: Option<f64>,
        /// Output format
        #[arg(long, default_value = "json")]
        format: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write the admitted ids as a selection CSV
        #[arg(long)]
        selection_out: Option<PathBuf>,
    },
    /// Compare two selections (set difference, group counts, metric deltas)
    Compare {
        #[command(flatten)]
        pop: PopArgs,
        /// First selection CSV
        #[arg(long)]
        a: PathBuf,
        /// Second selection CSV
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit one CSV row per evaluated grid point for plotting
    Frontier {
        #[command(flatten)]
        pop: PopArgs,
        /// Sweep mode: bonus | coefficients
        #[arg(long)]
        mode: String,
        #[arg(long)]
        theta: f64,
        /// Objective column: bare FLOAT (prices the first --attr) or
        /// ATTR=FLOAT; repeatable, one phi column each
        #[arg(long = "lambda", required = true)]
        lambdas: Vec<String>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Bonus-mode grid granularity
        #[arg(long, default_value_t = 100)]
        grid_k: usize,
        /// Coefficients-mode rotation step angle
        #[arg(long, default_value_t = 0.02)]
        step_angle: f64,
        /// Coefficients-mode steps per direction
        #[arg(long, default_value_t = 40)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            observe_top,
        } => cmds::simulate(&config, &out, seed, observe_top),
        Command::Fit { pop, out } => cmds::fit(&pop.input, &pop.attrs, &out),
        Command::SearchCoeffs {
            pop,
            theta,
            lambdas,
            model,
            step_angle,
            steps,
            out,
            report,
            trace,
        } => cmds::search_coeffs(
            &pop.input,
            &pop.attrs,
            theta,
            &lambdas,
            model.as_deref(),
            step_angle,
            steps,
            &out,
            report.as_deref(),
            trace.as_deref(),
        ),
        Command::SearchBonus {
            pop,
            theta,
            lambdas,
            grid_k,
            model,
            out,
            report,
            trace,
        } => cmds::search_bonus(
            &pop.input,
            &pop.attrs,
            theta,
            &lambdas,
            grid_k,
            model.as_deref(),
            &out,
            report.as_deref(),
            trace.as_deref(),
        ),
        Command::SearchBonusMulti {
            pop,
            theta,
            lambdas,
            delta_b,
            max_steps,
            model,
            out,
            report,
        } => cmds::search_bonus_multi(
            &pop.input,
            &pop.attrs,
            theta,
            &lambdas,
            delta_b,
            max_steps,
            model.as_deref(),
            &out,
            report.as_deref(),
        ),
        Command::BonusToQuota {
            pop,
            policy,
            theta,
            out,
        } => cmds::convert_policy(true, &pop.input, &pop.attrs, &policy, theta, &out),
        Command::QuotaToBonus {
            pop,
            policy,
            theta,
            out,
        } => cmds::convert_policy(false, &pop.input, &pop.attrs, &policy, theta, &out),
        Command::BaselineMedian {
            pop,
            out,
            model,
            theta,
            selection_out,
        } => cmds::baseline_median(
            &pop.input,
            &pop.attrs,
            &out,
            model.as_deref(),
            theta,
            selection_out.as_deref(),
        ),
        Command::BaselineFair {
            pop,
            theta,
            model,
            alpha,
            rho,
            out,
            selection_out,
        } => cmds::baseline_fair(
            &pop.input,
            &pop.attrs,
            theta,
            model.as_deref(),
            alpha,
            rho,
            &out,
            selection_out.as_deref(),
        ),
        Command::Evaluate {
            pop,
            policy,
            model,
            lambdas,
            theta,
            format,
            out,
            selection_out,
        } => cmds::evaluate(
            &pop.input,
            &pop.attrs,
            &policy,
            model.as_deref(),
            &lambdas,
            theta,
            &format,
            &out,
            selection_out.as_deref(),
        ),
        Command::Compare {
            pop,
            a,
            b,
            model,
            out,
        } => cmds::compare(&pop.input, &pop.attrs, &a, &b, model.as_deref(), &out),
        Command::Frontier {
            pop,
            mode,
            theta,
            lambdas,
            model,
            grid_k,
            step_angle,
            steps,
            out,
        } => cmds::frontier(
            &pop.input,
            &pop.attrs,
            &mode,
            theta,
            &lambdas,
            model.as_deref(),
            grid_k,
            step_angle,
            steps,
            &out,
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
