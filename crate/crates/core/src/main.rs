//! Command-line interface: `simulate`, `select`, and `bound`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mlpsel::bound::BoundConfig;
use mlpsel::optimize::FitConfig;
use mlpsel::runner::{self, BoundSpec, SelectSpec, SimulateSpec};
use mlpsel::selection::PenaltySpec;
use mlpsel::simulation::SimConfig;

#[derive(Parser)]
#[command(
    name = "mlpsel",
    version,
    about = "Hidden-unit selection and overfitting-bound checks for one-hidden-layer regression networks"
)]
struct Cli {
    /// Worker threads; falls back to the MLPSEL_JOBS environment
    /// variable, then to all available cores. Results do not depend on
    /// the thread count.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the replication study on simulated data and tabulate which
    /// hidden-unit count each criterion selects.
    Simulate(SimulateArgs),
    /// Fit candidate widths to a CSV dataset and report the selected
    /// hidden-unit count.
    Select(SelectArgs),
    /// Check the overfitting bound on simulated data over many random
    /// candidates plus the fitted one.
    Bound(BoundArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Sample size per replication.
    #[arg(long, default_value_t = 500)]
    n: usize,
    /// Number of replications.
    #[arg(long, default_value_t = 20)]
    reps: usize,
    /// Largest candidate hidden-unit count.
    #[arg(long = "kmax", default_value_t = 6)]
    k_max: usize,
    /// Comma-separated criteria, each FAMILY:regime with family one of
    /// AIC, BIC, SP, VSP and regime one of known, plugin, log.
    #[arg(long, default_value = "BIC:known", value_delimiter = ',')]
    criteria: Vec<String>,
    /// Noise variance for ':known' criteria.
    #[arg(long)]
    sigma2: Option<f64>,
    /// BFGS restarts per fit.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for table.csv, table.md, and manifest.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write each replication's dataset as data_rep{r}.csv.
    #[arg(long)]
    dump_data: bool,
}

#[derive(Args)]
struct SelectArgs {
    /// CSV dataset: header row, input columns, then the target column.
    #[arg(long)]
    data: PathBuf,
    /// Largest candidate hidden-unit count.
    #[arg(long = "kmax", default_value_t = 6)]
    k_max: usize,
    /// Criterion as FAMILY:regime, e.g. BIC:known or SP:log.
    #[arg(long, default_value = "SP:log")]
    criterion: String,
    /// Noise variance for a ':known' criterion.
    #[arg(long)]
    sigma2: Option<f64>,
    /// BFGS restarts per fit.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for selection.csv and manifest.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct BoundArgs {
    /// Sample size of the simulated dataset.
    #[arg(long, default_value_t = 500)]
    n: usize,
    /// Exponential tilt of the generalized derivative; must be positive.
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Number of random candidate draws.
    #[arg(long, default_value_t = 200)]
    draws: usize,
    /// Monte-Carlo sample size for each norm estimate.
    #[arg(long = "norm-samples", default_value_t = 100_000)]
    norm_samples: usize,
    /// Replace every candidate by the generating parameter, exercising
    /// the degeneracy path.
    #[arg(long)]
    force_theta0: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for bound_report.csv and manifest.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn configure_threads(jobs: Option<usize>) {
    let jobs = jobs.or_else(|| {
        std::env::var("MLPSEL_JOBS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(j) = jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global();
    }
}

fn run(cli: Cli) -> mlpsel::Result<()> {
    let argv: Vec<String> = std::env::args().collect();
    match cli.command {
        Command::Simulate(args) => {
            let criteria = args
                .criteria
                .iter()
                .map(|c| PenaltySpec::parse(c, args.sigma2))
                .collect::<mlpsel::Result<Vec<_>>>()?;
            let spec = SimulateSpec {
                sim: SimConfig {
                    n: args.n,
                    reps: args.reps,
                    k_max: args.k_max,
                    criteria,
                    fit: FitConfig {
                        restarts: args.restarts,
                        ..FitConfig::default()
                    },
                    rng_seed: args.seed,
                },
                dump_data: args.dump_data,
            };
            let (_, markdown) = runner::execute_simulate(&spec, &args.out, argv)?;
            print!("{markdown}");
            println!("outputs written to {}", args.out.display());
            Ok(())
        }
        Command::Select(args) => {
            let spec = SelectSpec {
                data_path: args.data,
                k_max: args.k_max,
                criterion: PenaltySpec::parse(&args.criterion, args.sigma2)?,
                fit: FitConfig {
                    restarts: args.restarts,
                    rng_seed: args.seed,
                    ..FitConfig::default()
                },
            };
            let (_, result) = runner::execute_select(&spec, &args.out, argv)?;
            println!("chosen k = {}", result.chosen_k);
            for score in &result.scores {
                println!(
                    "k={} D={} mse={:.6} criterion={:.6}{}",
                    score.k,
                    score.param_dim,
                    score.mse_hat,
                    score.criterion,
                    if score.chosen { "  <- selected" } else { "" }
                );
            }
            Ok(())
        }
        Command::Bound(args) => {
            let spec = BoundSpec {
                bound: BoundConfig {
                    lambda: args.lambda,
                    norm_mc_samples: args.norm_samples,
                    theta_draws: args.draws,
                    rng_seed: args.seed,
                    force_theta0: args.force_theta0,
                },
                n: args.n,
            };
            let (_, report) = runner::execute_bound(&spec, &args.out, argv)?;
            println!("{}", report.summary_line());
            println!("skipped degenerate: {}", report.skipped_degenerate);
            if let Some(ratio) = report.max_ratio {
                println!("max overfit/bound ratio: {ratio:.6}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads(cli.jobs);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
