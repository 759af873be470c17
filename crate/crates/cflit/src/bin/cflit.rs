//! Command-line front end over the library pipeline.
//!
//! Subcommands: `hyperopt` (closed-form tau*/T* calculator), `allocate`
//! (one allocation run exported as RLE + JSON), `rates` (closed-form rate
//! expressions), `simulate` (full Monte Carlo pipeline), and `reproduce`
//! (named experiment sweeps).
//!
//! Exit codes: 0 ok, 2 usage or configuration error, 3 infeasible resource
//! demand, 4 numeric failure.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cflit::allocation::{AllocationSummary, StreamingAllocator};
use cflit::channel::GainTensor;
use cflit::error::Error;
use cflit::harness::{reproduce_experiment, run_cflit_planned, ExperimentConfig, ExperimentName, TranscriptSet};
use cflit::hyperopt::{convergence_bound, optimal_t, optimal_tau, zeta, BoundParams};
use cflit::rates::{analytic_rate_rsca, analytic_rate_threshold, optimal_threshold_qstar, rate_improvement};
use cflit::rng::derive_seed;

#[derive(Parser)]
#[command(name = "cflit", version, about = "Coexisting over-the-air learning and information transfer simulator")]
struct Cli {
    /// Configuration file (TOML, sections: system/learning/allocation/run).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Monte Carlo trials; overrides the config value.
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Output directory for data files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Transcript format written by `simulate`.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the convergence bound: optimal local steps, round budget,
    /// and a zeta table.
    Hyperopt(HyperoptArgs),
    /// Run one subcarrier allocation and export the grid.
    Allocate(AllocateArgs),
    /// Print the closed-form expected transfer rates and optimal threshold.
    Rates(RatesArgs),
    /// Run the full pipeline over Monte Carlo trials and write transcripts.
    Simulate,
    /// Run a named experiment sweep and write its CSV data and manifest.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct HyperoptArgs {
    /// Strong convexity constant.
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
    /// Smoothness constant.
    #[arg(long, default_value_t = 10.25)]
    lipschitz: f64,
    /// Data heterogeneity.
    #[arg(long, default_value_t = 0.639)]
    hetero: f64,
    /// Gradient bound (clipping threshold).
    #[arg(long, default_value_t = 1.0)]
    grad_bound: f64,
    /// Receiver noise variance.
    #[arg(long, default_value_t = 0.1)]
    noise_var: f64,
    /// Per-subcarrier power cap.
    #[arg(long, default_value_t = 1.0)]
    power_cap: f64,
    /// E[max_k rho_k^2/|h_k|^2] estimate.
    #[arg(long, default_value_t = 1.294)]
    channel_term: f64,
    /// Learning-rate offset (at least 16 L / mu).
    #[arg(long, default_value_t = 1000.0)]
    gamma: f64,
    /// E[||w_0 - w*||^2] for the finite-horizon bound.
    #[arg(long, default_value_t = 4.0)]
    init_dist_sq: f64,
    /// Target optimality gap.
    #[arg(long, default_value_t = 0.34)]
    epsilon: f64,
    /// Largest local-step count in the printed table.
    #[arg(long, default_value_t = 12)]
    tau_max: u32,
}

#[derive(Args)]
struct AllocateArgs {
    /// Allocation scheme.
    #[arg(long, value_enum, default_value_t = SchemeArg::Online)]
    scheme: SchemeArg,
    /// Aggregation resource-block demand d*T. Mutually exclusive with
    /// --p-it.
    #[arg(long, conflicts_with = "p_it")]
    fl_demand: Option<u64>,
    /// Transfer fraction; the demand becomes (1 - p_it) * M * S rounded to
    /// an integer.
    #[arg(long)]
    p_it: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Online,
    Offline,
    Rsca,
}

#[derive(Args)]
struct RatesArgs {
    /// Number of transfer devices N.
    #[arg(long, default_value_t = 5)]
    n_devices: usize,
    /// Effective SNR scale theta = P2/(phi sigma^2); defaults to the config
    /// system value.
    #[arg(long)]
    theta: Option<f64>,
    /// Threshold q; defaults to the rate-improvement maximizer q*.
    #[arg(long)]
    q: Option<f64>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Experiment name: fig2, fig3, fig4, fig5, fig6, fig7, table1.
    name: String,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Infeasible { .. } => 3,
        Error::Numeric(_) | Error::Convergence(_) => 4,
        Error::InvalidConfig(_)
        | Error::InvalidInput(_)
        | Error::Domain(_)
        | Error::ConfigParse(_)
        | Error::UnknownExperiment { .. } => 2,
        _ => 1,
    }
}

fn load_config(cli: &Cli, fallback: ExperimentConfig) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => fallback,
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.run.trials = trials;
    }
    Ok(cfg)
}

fn cmd_hyperopt(args: &HyperoptArgs) -> Result<(), Error> {
    let params = BoundParams::new(
        args.mu,
        args.lipschitz,
        args.hetero,
        args.grad_bound,
        args.noise_var,
        args.power_cap,
        args.channel_term,
        args.gamma,
        args.init_dist_sq,
    )?;
    let tau_star = optimal_tau(args.grad_bound, args.lipschitz, args.hetero)?;
    let t_star = optimal_t(tau_star, args.epsilon, &params)?;
    println!("tau* = {tau_star}");
    println!("T*   = {t_star}  (epsilon = {})", args.epsilon);
    println!();
    println!("{:>4} {:>14} {:>12} {:>14}", "tau", "zeta(tau)", "T(epsilon)", "bound_at_T*");
    for tau in 1..=args.tau_max.max(tau_star) {
        let z = zeta(tau, &params)?;
        let t_eps = optimal_t(tau, args.epsilon, &params)?;
        let bound = convergence_bound(t_star, tau, &params)?;
        println!("{tau:>4} {z:>14.4} {t_eps:>12} {:>14.6}", bound.leading);
    }
    Ok(())
}

fn cmd_allocate(cli: &Cli, args: &AllocateArgs) -> Result<(), Error> {
    let cfg = load_config(cli, ExperimentConfig::default())?;
    let sys = &cfg.system;
    let total = (sys.subcarriers * sys.symbols) as u64;
    let fl_demand = match (args.fl_demand, args.p_it) {
        (Some(d), _) => d,
        (None, Some(p)) => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidInput(format!("p_it must lie in [0, 1], got {p}")));
            }
            total - (p * total as f64).round() as u64
        }
        (None, None) => {
            return Err(Error::InvalidInput(
                "allocate needs --fl-demand or --p-it to size the aggregation share".into(),
            ))
        }
    };
    let gains = GainTensor::sample(
        sys.it_devices,
        sys.subcarriers,
        sys.symbols,
        sys.coherence_block_len,
        derive_seed(cfg.run.seed, &[3]),
    )?;
    let (grid, stats, budget) = match args.scheme {
        SchemeArg::Online => {
            let mut alloc = StreamingAllocator::threshold(sys.subcarriers, sys.symbols, fl_demand, sys.it_devices)?;
            let budget = *alloc.budget();
            let mut iter = gains.symbols_iter();
            while alloc.needs_gains() {
                alloc.decide_symbol(&iter.next().expect("tensor covers the horizon"))?;
            }
            let (grid, stats) = alloc.finish()?;
            (grid, Some(stats), budget)
        }
        SchemeArg::Rsca => {
            let mut alloc = StreamingAllocator::random(
                sys.subcarriers,
                sys.symbols,
                fl_demand,
                sys.it_devices,
                derive_seed(cfg.run.seed, &[7]),
            )?;
            let budget = *alloc.budget();
            let mut iter = gains.symbols_iter();
            while alloc.needs_gains() {
                alloc.decide_symbol(&iter.next().expect("tensor covers the horizon"))?;
            }
            let (grid, stats) = alloc.finish()?;
            (grid, Some(stats), budget)
        }
        SchemeArg::Offline => {
            let budget = cflit::allocation::AllocationBudget::new(
                sys.subcarriers,
                sys.symbols,
                fl_demand,
                sys.it_devices,
            )?;
            (cflit::allocation::offline_allocate(&gains, fl_demand)?, None, budget)
        }
    };
    let rate = cflit::rates::average_sum_rate(&grid, &gains, sys.theta())?;

    std::fs::create_dir_all(&cli.out)?;
    let rle_path = cli.out.join("allocation.rle");
    let mut rle = std::io::BufWriter::new(std::fs::File::create(&rle_path)?);
    grid.write_rle(&mut rle)?;
    let summary = AllocationSummary::new(&grid, &budget);
    let json_path = cli.out.join("allocation_summary.json");
    std::fs::write(
        &json_path,
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;

    println!(
        "allocated {} aggregation / {} transfer blocks (p_it = {:.6}, q = {:.6})",
        grid.fl_count(),
        grid.it_count(),
        budget.p_it,
        budget.q
    );
    if let Some(stats) = stats {
        println!(
            "rule-decided {} (transfer {}), forced-transfer {}, trailing-aggregation {}",
            stats.rule_decided, stats.rule_it, stats.forced_it, stats.trailing_fl
        );
    }
    println!("average transfer rate: {rate:.6} bits/RB = {:.3} Kbps", sys.kbps(rate));
    println!("wrote {} and {}", rle_path.display(), json_path.display());
    Ok(())
}

fn cmd_rates(cli: &Cli, args: &RatesArgs) -> Result<(), Error> {
    let cfg = load_config(cli, ExperimentConfig::default())?;
    let theta = args.theta.unwrap_or_else(|| cfg.system.theta());
    let q_star = optimal_threshold_qstar(args.n_devices, theta)?;
    let q = args.q.unwrap_or(q_star);
    let threshold = analytic_rate_threshold(args.n_devices, theta, q)?;
    let random = analytic_rate_rsca(args.n_devices, theta, q)?;
    let improvement = rate_improvement(args.n_devices, theta, q)?;
    println!("N = {}, theta = {theta:.6}, q = {q:.6}", args.n_devices);
    println!("threshold rule : {threshold:.6} bits/RB = {:.3} Kbps", cfg.system.kbps(threshold));
    println!("random sharing : {random:.6} bits/RB = {:.3} Kbps", cfg.system.kbps(random));
    println!("improvement    : {improvement:.6} bits/RB");
    println!("q*             : {q_star:.6}");
    Ok(())
}

fn cmd_simulate(cli: &Cli) -> Result<(), Error> {
    let cfg = load_config(cli, ExperimentConfig::default())?;
    let plan = cflit::harness::TrialPlan::prepare(&cfg)?;
    let trials: Vec<_> = {
        use rayon::prelude::*;
        (0..cfg.run.trials)
            .into_par_iter()
            .map(|trial| run_cflit_planned(&plan, &cfg, derive_seed(cfg.run.seed, &[0xEE, trial as u64])))
            .collect::<Result<Vec<_>, _>>()?
    };
    let set = TranscriptSet { trials };
    std::fs::create_dir_all(&cli.out)?;
    let mut written = Vec::new();
    match cli.format {
        OutputFormat::Csv => {
            let rounds_path = cli.out.join("rounds.csv");
            let summary_path = cli.out.join("summary.csv");
            set.write_rounds_csv(std::io::BufWriter::new(std::fs::File::create(&rounds_path)?))?;
            set.write_summary_csv(std::io::BufWriter::new(std::fs::File::create(&summary_path)?))?;
            written.push(rounds_path);
            written.push(summary_path);
        }
        OutputFormat::Json => {
            let path = cli.out.join("transcripts.json");
            set.write_json(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
            written.push(path);
        }
    }
    let t0 = &set.trials[0];
    println!(
        "{} trial(s), scheme {}, tau = {}, rounds = {}, p_it = {:.4}",
        set.trials.len(),
        t0.scheme,
        t0.tau,
        t0.rounds_planned,
        t0.p_it
    );
    println!(
        "mean rate {:.6} bits/RB ({:.3} Kbps), mean final averaged gap {:.6}",
        set.mean_rate_bits(),
        cfg.system.kbps(set.mean_rate_bits()),
        set.mean_final_gap_averaged()
    );
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_reproduce(cli: &Cli, args: &ReproduceArgs) -> Result<(), Error> {
    let name: ExperimentName = args.name.parse()?;
    // Experiments default to the desk-scale preset so a bare invocation
    // finishes in minutes; pass --config for other operating points.
    let cfg = load_config(cli, ExperimentConfig::desk_scale())?;
    let files = reproduce_experiment(name, &cfg, &cli.out)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Hyperopt(args) => cmd_hyperopt(args),
        Command::Allocate(args) => cmd_allocate(&cli, args),
        Command::Rates(args) => cmd_rates(&cli, args),
        Command::Simulate => cmd_simulate(&cli),
        Command::Reproduce(args) => cmd_reproduce(&cli, args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
