//! `sojourn` command line front end. Four subcommands: `run` executes one
//! experiment (config file or ad hoc lattice), `sweep` scans one or two
//! parameters, `analytics` prints the closed-form queue predictions, and
//! `validate-queue` checks simulated rounds against those predictions.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, ensure, Context};
use clap::{Args, Parser, Subcommand};
use sojourn::analytics::{self, QueueAnalytics};
use sojourn::config::{self, Config, NetworkConfig, SweepAxis, SweepConfig};
use sojourn::experiment;
use sojourn::output;
use sojourn::queueing::{draw_round_schedule, QueueParams};
use sojourn::rng;

#[derive(Parser)]
#[command(
    name = "sojourn",
    version,
    about = "Spatial public goods games where queueing sojourn times scale contributions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replicates of one experiment and write CSV outputs.
    Run(RunArgs),
    /// Scan one or two parameters over a grid of cells.
    Sweep(SweepArgs),
    /// Print closed-form queue predictions and write them as CSV.
    Analytics(AnalyticsArgs),
    /// Simulate rounds and test them against the closed forms.
    ValidateQueue(ValidateQueueArgs),
}

/// Options shared by `run` and `sweep`. Flags override config file values.
#[derive(Args)]
struct RunArgs {
    /// TOML experiment description.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Enhancement factor (required without --config).
    #[arg(long)]
    r: Option<f64>,
    /// Service rate (required without --config).
    #[arg(long)]
    mu: Option<f64>,
    /// Arrival rate.
    #[arg(long)]
    lambda: Option<f64>,
    /// Probability that imitation targets the best-reputation neighbor.
    #[arg(long)]
    pr: Option<f64>,
    /// Fermi selection temperature.
    #[arg(long)]
    kappa: Option<f64>,
    /// Master seed; fixes topology, initial states and every round.
    #[arg(long)]
    seed: Option<u64>,
    /// Maximum evolution steps per replicate.
    #[arg(long)]
    steps: Option<u32>,
    /// Replicates per experiment (per cell under `sweep`).
    #[arg(long)]
    replicates: Option<u32>,
    /// Lattice side for ad hoc runs without a config file.
    #[arg(long)]
    side: Option<u32>,
    /// Directory for CSV outputs.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    base: RunArgs,
    /// First axis: "name=v1,v2,..." or "name=start:stop:step"
    /// (name is r, mu, lambda or p_r).
    #[arg(long)]
    axis1: Option<String>,
    /// Optional second axis in the same form.
    #[arg(long)]
    axis2: Option<String>,
}

#[derive(Args)]
struct AnalyticsArgs {
    /// Arrival rate.
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
    /// Service rate.
    #[arg(long)]
    mu: f64,
    /// System capacity (player count).
    #[arg(long, default_value_t = 2500)]
    capacity: usize,
    /// Enhancement factor for the total-enhancement forecast.
    #[arg(long, default_value_t = 4.0)]
    r: f64,
    /// Cooperator count for the forecast; defaults to capacity / 2.
    #[arg(long)]
    cooperators: Option<usize>,
    /// Directory for CSV outputs.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ValidateQueueArgs {
    /// Arrival rate.
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
    /// Service rate.
    #[arg(long)]
    mu: f64,
    /// Players per round.
    #[arg(long, default_value_t = 2500)]
    players: usize,
    /// Rounds to simulate.
    #[arg(long, default_value_t = 100)]
    rounds: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Significance level for the distribution tests.
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Directory for CSV outputs.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Analytics(args) => cmd_analytics(&args),
        Command::ValidateQueue(args) => cmd_validate_queue(&args),
    }
}

/// Merge the config file (if any) with command line overrides.
fn build_config(args: &RunArgs) -> anyhow::Result<Config> {
    let mut config = match &args.config {
        Some(path) => config::load_config(path)?,
        None => {
            let (Some(r), Some(mu)) = (args.r, args.mu) else {
                bail!("provide --config, or both --r and --mu for an ad hoc lattice run");
            };
            Config::with_lattice(args.side.unwrap_or(50), mu, r)
        }
    };
    if args.config.is_some() {
        if let Some(side) = args.side {
            config.network = NetworkConfig::lattice(side);
        }
    }
    if let Some(r) = args.r {
        config.game.r = r;
    }
    if let Some(mu) = args.mu {
        config.queue.mu = mu;
    }
    if let Some(lambda) = args.lambda {
        config.queue.lambda = lambda;
    }
    if let Some(pr) = args.pr {
        config.evolution.p_r = pr;
    }
    if let Some(kappa) = args.kappa {
        config.evolution.kappa = kappa;
    }
    if let Some(seed) = args.seed {
        config.run.master_seed = seed;
    }
    if let Some(steps) = args.steps {
        config.evolution.max_steps = steps;
        if steps > 0 {
            config.evolution.tail_window = config.evolution.tail_window.min(steps);
        }
    }
    if let Some(replicates) = args.replicates {
        config.run.replicates = replicates;
    }
    if let Some(dir) = &args.out_dir {
        config.run.out_dir = dir.clone();
    }
    config.validate()?;
    Ok(config)
}

fn cmd_run(args: &RunArgs) -> anyhow::Result<()> {
    let config = build_config(args)?;
    let topology = config.build_topology()?;
    let result = experiment::run_replicates(
        &topology,
        &config.queue_params()?,
        &config.game_params()?,
        &config.evolution_params()?,
        config.run.master_seed,
        config.run.replicates,
        &config.capture_spec(),
    )?;
    let written =
        output::write_experiment(&config.run.out_dir, &config.capture, &topology, &result)?;
    for summary in &result.summaries {
        match summary.exit_step {
            Some(step) => println!(
                "replicate {}: rho_c = {:.6} (absorbed at step {step})",
                summary.replicate, summary.rho_c
            ),
            None => println!(
                "replicate {}: rho_c = {:.6}",
                summary.replicate, summary.rho_c
            ),
        }
    }
    println!(
        "mean rho_c = {:.6} +/- {:.6} over {} replicates",
        result.mean_rho_c,
        result.std_rho_c,
        result.summaries.len()
    );
    println!(
        "wrote {} files to {}",
        written.len(),
        config.run.out_dir.display()
    );
    Ok(())
}

/// "name=v1,v2" or "name=start:stop:step" (stop inclusive).
fn parse_axis(spec: &str) -> anyhow::Result<SweepAxis> {
    let (name, rest) = spec.split_once('=').with_context(|| {
        format!("axis {spec:?} must look like name=v1,v2 or name=start:stop:step")
    })?;
    let param = name.trim().parse()?;
    let rest = rest.trim();
    let values = if rest.contains(':') {
        let parts: Vec<&str> = rest.split(':').collect();
        ensure!(
            parts.len() == 3,
            "range axis {spec:?} must have exactly start:stop:step"
        );
        let start: f64 = parts[0].trim().parse()?;
        let stop: f64 = parts[1].trim().parse()?;
        let step: f64 = parts[2].trim().parse()?;
        ensure!(
            step > 0.0 && stop >= start,
            "range axis {spec:?} needs stop >= start and step > 0"
        );
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| start + i as f64 * step).collect()
    } else {
        rest.split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .with_context(|| format!("axis {spec:?} has a malformed value"))?
    };
    Ok(SweepAxis { param, values })
}

fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<()> {
    let mut config = build_config(&args.base)?;
    if args.axis2.is_some() && args.axis1.is_none() {
        bail!("--axis2 requires --axis1");
    }
    if let Some(spec) = &args.axis1 {
        config.sweep = Some(SweepConfig {
            axis1: parse_axis(spec)?,
            axis2: args.axis2.as_deref().map(parse_axis).transpose()?,
            replicates: None,
        });
        config.validate()?;
    }
    if config.sweep.is_none() {
        bail!("provide --axis1 or a config file with a [sweep] section");
    }
    let result = experiment::run_sweep(&config)?;
    let path = output::write_sweep(&config.run.out_dir, &result)?;
    for cell in &result.cells {
        match (result.param2, cell.axis2) {
            (Some(param2), Some(value2)) => println!(
                "{}={} {}={}: mean rho_c = {:.6} +/- {:.6}",
                result.param1, cell.axis1, param2, value2, cell.mean_rho_c, cell.std_rho_c
            ),
            _ => println!(
                "{}={}: mean rho_c = {:.6} +/- {:.6}",
                result.param1, cell.axis1, cell.mean_rho_c, cell.std_rho_c
            ),
        }
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_analytics(args: &AnalyticsArgs) -> anyhow::Result<()> {
    let summary = QueueAnalytics::compute(args.lambda, args.mu, args.capacity)?;
    let cooperators = args.cooperators.unwrap_or(args.capacity / 2);
    let forecast =
        analytics::total_enhancement(args.r, cooperators, args.lambda, args.mu, args.capacity)?;

    println!(
        "lambda = {}, mu = {}, N = {}",
        args.lambda, args.mu, args.capacity
    );
    println!("rho            = {:.6}", summary.rho);
    println!("mean in system = {:.6}", summary.mean_in_system);
    println!("mean sojourn   = {:.6}", summary.mean_sojourn);
    println!(
        "psi (r = {}, N_c = {}) = {:.6}",
        args.r, cooperators, forecast.psi
    );
    match forecast.psi_limit {
        Some(limit) => println!("psi limit      = {limit:.6}"),
        None => println!("psi limit      = none (rho >= 1)"),
    }

    let mut stationary = String::from("n,P_n\n");
    for (n, p) in summary.stationary.iter().enumerate() {
        writeln!(stationary, "{n},{p}").expect("string write");
    }
    let psi_limit = forecast
        .psi_limit
        .map(|v| v.to_string())
        .unwrap_or_default();
    let row = format!(
        "lambda,mu,N,rho,L,ET,psi,psi_limit\n{},{},{},{},{},{},{},{}\n",
        args.lambda,
        args.mu,
        args.capacity,
        summary.rho,
        summary.mean_in_system,
        summary.mean_sojourn,
        forecast.psi,
        psi_limit
    );
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let stationary_path = args.out_dir.join("stationary.csv");
    output::write_atomic(&stationary_path, stationary.as_bytes())?;
    let summary_path = args.out_dir.join("analytics_summary.csv");
    output::write_atomic(&summary_path, row.as_bytes())?;
    println!("wrote {}", stationary_path.display());
    println!("wrote {}", summary_path.display());
    Ok(())
}

fn cmd_validate_queue(args: &ValidateQueueArgs) -> anyhow::Result<()> {
    ensure!(args.rounds > 0, "--rounds must be at least 1");
    let params = QueueParams::new(args.lambda, args.mu)?;
    let mut schedules = Vec::with_capacity(args.rounds as usize);
    let mut services = Vec::with_capacity(args.players * args.rounds as usize);
    let mut gaps = Vec::with_capacity(args.players * args.rounds as usize);
    for round in 1..=args.rounds {
        let mut stream = rng::round_rng(args.seed, 0, round);
        let schedule = draw_round_schedule(&params, args.players, &mut stream)?;
        services.extend_from_slice(schedule.services());
        let mut previous = 0.0;
        for node in schedule.arrival_order() {
            let arrival = schedule.arrivals()[node.index()];
            gaps.push(arrival - previous);
            previous = arrival;
        }
        schedules.push(schedule);
    }

    let observed = analytics::empirical_queue_stats(&schedules)?;
    let expected_sojourn = analytics::mean_sojourn(args.lambda, args.mu, args.players)?;
    let expected_in_system = analytics::mean_queue_length(args.lambda, args.mu, args.players)?;
    let ks_service = analytics::ks_exponential(&services, args.mu)?;
    let ks_gaps = analytics::ks_exponential(&gaps, args.lambda)?;

    println!(
        "{} rounds, {} players, lambda = {}, mu = {}",
        args.rounds, args.players, args.lambda, args.mu
    );
    let rows = [
        ("mean sojourn", expected_sojourn, observed.mean_sojourn),
        (
            "time avg in system",
            expected_in_system,
            observed.time_avg_in_system,
        ),
        ("arrival rate", args.lambda, observed.effective_arrival_rate),
        ("mean service", 1.0 / args.mu, observed.mean_service),
        (
            "KS service vs Exp(mu)",
            ks_service.critical_value(args.alpha),
            ks_service.statistic,
        ),
        (
            "KS gaps vs Exp(lambda)",
            ks_gaps.critical_value(args.alpha),
            ks_gaps.statistic,
        ),
    ];
    println!("{:<24} {:>14} {:>14}", "metric", "expected", "observed");
    let mut csv = String::from("metric,expected,observed\n");
    for (metric, expected, observed) in rows {
        println!("{metric:<24} {expected:>14.6} {observed:>14.6}");
        writeln!(
            csv,
            "{},{},{}",
            metric.replace(' ', "_"),
            expected,
            observed
        )
        .expect("string write");
    }
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let path = args.out_dir.join("validate_queue.csv");
    output::write_atomic(&path, csv.as_bytes())?;
    println!("wrote {}", path.display());

    ensure!(
        ks_service.passes(args.alpha),
        "service times failed the KS test against Exp(mu): D = {:.6}, critical = {:.6}",
        ks_service.statistic,
        ks_service.critical_value(args.alpha)
    );
    ensure!(
        ks_gaps.passes(args.alpha),
        "inter-arrival gaps failed the KS test against Exp(lambda): D = {:.6}, critical = {:.6}",
        ks_gaps.statistic,
        ks_gaps.critical_value(args.alpha)
    );
    println!("distribution tests passed at alpha = {}", args.alpha);
    Ok(())
}
