//! Named experiments that sweep the simulator and write CSV data plus a JSON
//! manifest. Plotting is left to external tools.
//!
//! Every experiment prepares the learning task once from the base seed and
//! then averages over Monte Carlo trials that differ only in channel,
//! noise, mini-batch and allocation randomness.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Scheme};
use crate::harness::simulate::{allocate_and_rate, run_fl_rounds, run_fl_rounds_with_stop, FlRunOutcome, TrialPlan};
use crate::hyperopt::zeta;
use crate::rng::derive_seed;

/// Registry of reproducible experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentName {
    /// Gap versus round for several local-step counts at one round budget.
    Fig2,
    /// Gap versus round for the optimized and fixed-step schemes.
    Fig3,
    /// Required rounds to reach the gap target versus the local-step count.
    Fig4,
    /// Average transfer rate versus the number of transfer devices.
    Fig5,
    /// Gap versus the horizon length.
    Fig6,
    /// Average transfer rate versus the horizon length.
    Fig7,
    /// Five-scheme transfer-rate comparison.
    Table1,
}

impl ExperimentName {
    pub fn all() -> &'static [ExperimentName] {
        use ExperimentName::*;
        &[Fig2, Fig3, Fig4, Fig5, Fig6, Fig7, Table1]
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::Fig2 => "fig2",
            ExperimentName::Fig3 => "fig3",
            ExperimentName::Fig4 => "fig4",
            ExperimentName::Fig5 => "fig5",
            ExperimentName::Fig6 => "fig6",
            ExperimentName::Fig7 => "fig7",
            ExperimentName::Table1 => "table1",
        }
    }
}

impl std::str::FromStr for ExperimentName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        for name in ExperimentName::all() {
            if name.as_str() == s {
                return Ok(*name);
            }
        }
        Err(Error::UnknownExperiment {
            name: s.to_string(),
            known: ExperimentName::all()
                .iter()
                .map(|n| n.as_str())
                .collect::<Vec<_>>()
                .join(", "),
        })
    }
}

impl std::fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Seed of one Monte Carlo trial.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    derive_seed(base, &[0xEE, trial as u64])
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".to_string())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(contents.as_bytes())?;
    f.flush()?;
    Ok(())
}

fn write_manifest(
    out_dir: &Path,
    name: ExperimentName,
    config: &ExperimentConfig,
    files: &[PathBuf],
    wall_seconds: f64,
) -> Result<PathBuf> {
    let manifest = serde_json::json!({
        "experiment": name.as_str(),
        "crate_version": env!("CARGO_PKG_VERSION"),
        "git": git_describe(),
        "base_seed": config.run.seed,
        "trials": config.run.trials,
        "wall_seconds": wall_seconds,
        "config": config.to_toml_string(),
        "files": files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
    });
    let path = out_dir.join(format!("{}_manifest.json", name.as_str()));
    write_file(&path, &serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    Ok(path)
}

/// Mean of a slice, NaN when empty.
fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Gap trajectories for a set of local-step counts at a common round budget.
fn run_fig2(config: &ExperimentConfig) -> Result<String> {
    let plan = TrialPlan::prepare(config)?;
    let tau_star = plan.tau_for(config)?;
    let budget = plan.rounds_for(tau_star, config)?;
    let mut taus = vec![1u32, tau_star, 10, 20];
    taus.sort_unstable();
    taus.dedup();

    let per_trial: Vec<Vec<FlRunOutcome>> = (0..config.run.trials)
        .into_par_iter()
        .map(|trial| -> Result<Vec<FlRunOutcome>> {
            let seed = trial_seed(config.run.seed, trial);
            taus.iter()
                .map(|&tau| {
                    run_fl_rounds(
                        &plan.dataset,
                        &plan.estimate,
                        config,
                        tau,
                        config.learning.lr_schedule(tau),
                        budget,
                        config.learning.epsilon,
                        seed,
                    )
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut csv = String::from("tau,round,mean_gap_current,mean_gap_averaged\n");
    for (ti, &tau) in taus.iter().enumerate() {
        for r in 0..budget as usize {
            let cur: Vec<f64> = per_trial.iter().map(|runs| runs[ti].records[r].gap_current).collect();
            let avg: Vec<f64> = per_trial.iter().map(|runs| runs[ti].records[r].gap_averaged).collect();
            csv.push_str(&format!("{tau},{r},{},{}\n", mean(&cur), mean(&avg)));
        }
    }
    Ok(csv)
}

/// Gap trajectories of the optimized scheme against fixed-step baselines,
/// each at its own bound-sized budget capped by the horizon.
fn run_fig3(config: &ExperimentConfig) -> Result<String> {
    let plan = TrialPlan::prepare(config)?;
    let capacity = (config.system.subcarriers * config.system.symbols) as u64
        / config.learning.round_rb_cost() as u64;
    let tau_star = plan.tau_for(config)?;
    let entries: Vec<(&str, u32, u64)> = [("proposed", tau_star), ("fixed-tau-1", 1), ("fixed-tau-10", 10)]
        .into_iter()
        .map(|(label, tau)| -> Result<(&str, u32, u64)> {
            Ok((label, tau, plan.rounds_for(tau, config)?.min(capacity)))
        })
        .collect::<Result<Vec<_>>>()?;

    let per_trial: Vec<Vec<FlRunOutcome>> = (0..config.run.trials)
        .into_par_iter()
        .map(|trial| -> Result<Vec<FlRunOutcome>> {
            let seed = trial_seed(config.run.seed, trial);
            entries
                .iter()
                .map(|&(_, tau, budget)| {
                    run_fl_rounds(
                        &plan.dataset,
                        &plan.estimate,
                        config,
                        tau,
                        config.learning.lr_schedule(tau),
                        budget,
                        config.learning.epsilon,
                        seed,
                    )
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut csv = String::from("scheme,round,mean_gap_current,mean_gap_averaged\n");
    for (si, &(label, _, budget)) in entries.iter().enumerate() {
        for r in 0..budget as usize {
            let cur: Vec<f64> = per_trial.iter().map(|runs| runs[si].records[r].gap_current).collect();
            let avg: Vec<f64> = per_trial.iter().map(|runs| runs[si].records[r].gap_averaged).collect();
            csv.push_str(&format!("{label},{r},{},{}\n", mean(&cur), mean(&avg)));
        }
    }
    Ok(csv)
}

/// Simulated and analytic round requirements per local-step count.
fn run_fig4(config: &ExperimentConfig) -> Result<String> {
    let plan = TrialPlan::prepare(config)?;
    let bound = plan.bound_params(config)?;
    let capacity = (config.system.subcarriers * config.system.symbols) as u64
        / config.learning.round_rb_cost() as u64;
    let taus: Vec<u32> = (1..=20).collect();
    let rows: Vec<(u32, Vec<Option<u64>>, f64)> = taus
        .par_iter()
        .map(|&tau| -> Result<(u32, Vec<Option<u64>>, f64)> {
            let analytic = zeta(tau, &bound)? / config.learning.epsilon;
            let mut simulated = Vec::with_capacity(config.run.trials);
            for trial in 0..config.run.trials {
                let run = run_fl_rounds_with_stop(
                    &plan.dataset,
                    &plan.estimate,
                    config,
                    tau,
                    config.learning.lr_schedule(tau),
                    capacity,
                    config.learning.epsilon,
                    trial_seed(config.run.seed, trial),
                    true,
                )?;
                simulated.push(run.rounds_to_epsilon);
            }
            Ok((tau, simulated, analytic))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut csv = String::from("tau,mean_simulated_rounds,censored_trials,analytic_rounds\n");
    for (tau, simulated, analytic) in rows {
        let reached: Vec<f64> = simulated.iter().flatten().map(|&r| r as f64).collect();
        let censored = simulated.iter().filter(|r| r.is_none()).count();
        csv.push_str(&format!("{tau},{},{censored},{analytic}\n", mean(&reached)));
    }
    Ok(csv)
}

/// Average transfer rate versus the number of transfer devices for the
/// online, offline and random allocators.
fn run_fig5(config: &ExperimentConfig) -> Result<String> {
    let plan = TrialPlan::prepare(config)?;
    let tau = plan.tau_for(config)?;
    let rounds = plan.rounds_for(tau, config)?;
    let fl_demand = rounds * config.learning.round_rb_cost() as u64;
    let schemes = [Scheme::Offline, Scheme::Online, Scheme::Rsca];

    let per_trial: Vec<Vec<[f64; 3]>> = (0..config.run.trials)
        .into_par_iter()
        .map(|trial| -> Result<Vec<[f64; 3]>> {
            let seed = trial_seed(config.run.seed, trial);
            (1..=10usize)
                .map(|n| {
                    let mut cfg_n = config.clone();
                    cfg_n.system.it_devices = n;
                    let mut rates = [0.0f64; 3];
                    for (i, &scheme) in schemes.iter().enumerate() {
                        let (_, _, rate) =
                            allocate_and_rate(&cfg_n, scheme, fl_demand, derive_seed(seed, &[0xA5, n as u64]))?;
                        rates[i] = rate;
                    }
                    Ok(rates)
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut csv = String::from("n_devices,scheme,mean_rate_bits_per_rb,mean_rate_kbps\n");
    for n_idx in 0..10 {
        for (i, scheme) in schemes.iter().enumerate() {
            let rates: Vec<f64> = per_trial.iter().map(|rows| rows[n_idx][i]).collect();
            let m = mean(&rates);
            csv.push_str(&format!("{},{scheme},{m},{}\n", n_idx + 1, config.system.kbps(m)));
        }
    }
    Ok(csv)
}

/// Sweep over the horizon length; produces both the gap table and the rate
/// table. When the bound-sized budget does not fit a horizon, the run is
/// truncated to the rounds that fit and flagged, never silently resized.
fn run_vs_s(config: &ExperimentConfig) -> Result<(String, String)> {
    let plan = TrialPlan::prepare(config)?;
    let tau = plan.tau_for(config)?;
    let rounds_wanted = plan.rounds_for(tau, config)?;
    let base_s = config.system.symbols;
    let mut s_grid: Vec<usize> = [0.5, 0.75, 1.0, 1.5, 2.0]
        .iter()
        .map(|f| ((base_s as f64 * f) as usize).max(1))
        .collect();
    s_grid.dedup();
    let d_rb = config.learning.round_rb_cost() as u64;
    let schemes = [Scheme::Offline, Scheme::Online, Scheme::Rsca];

    struct Row {
        truncated: bool,
        gap: f64,
        rates: [f64; 3],
    }
    let all_rows: Vec<Vec<Row>> = (0..config.run.trials)
        .into_par_iter()
        .map(|trial| -> Result<Vec<Row>> {
            let seed = trial_seed(config.run.seed, trial);
            let mut rows = Vec::new();
            for &s in &s_grid {
                let mut cfg_s = config.clone();
                cfg_s.system.symbols = s;
                let capacity = (cfg_s.system.subcarriers * s) as u64 / d_rb;
                let rounds = rounds_wanted.min(capacity);
                let fl_demand = rounds * d_rb;
                let run = run_fl_rounds(
                    &plan.dataset,
                    &plan.estimate,
                    &cfg_s,
                    tau,
                    cfg_s.learning.lr_schedule(tau),
                    rounds,
                    cfg_s.learning.epsilon,
                    seed,
                )?;
                let mut rates = [0.0f64; 3];
                for (i, &scheme) in schemes.iter().enumerate() {
                    let (_, _, rate) = allocate_and_rate(&cfg_s, scheme, fl_demand, derive_seed(seed, &[0x51, s as u64]))?;
                    rates[i] = rate;
                }
                rows.push(Row {
                    truncated: rounds < rounds_wanted,
                    gap: run.final_gap_averaged,
                    rates,
                });
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut gap_csv = String::from("symbols,tau,truncated_trials,mean_final_gap_averaged\n");
    let mut rate_csv = String::from("symbols,scheme,mean_rate_bits_per_rb,mean_rate_kbps\n");
    for (si, &s) in s_grid.iter().enumerate() {
        let rows: Vec<&Row> = all_rows.iter().map(|r| &r[si]).collect();
        let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
        let truncated = rows.iter().filter(|r| r.truncated).count();
        gap_csv.push_str(&format!("{s},{tau},{truncated},{}\n", mean(&gaps)));
        for (i, scheme) in schemes.iter().enumerate() {
            let rates: Vec<f64> = rows.iter().map(|r| r.rates[i]).collect();
            let m = mean(&rates);
            rate_csv.push_str(&format!("{s},{scheme},{m},{}\n", config.system.kbps(m)));
        }
    }
    Ok((gap_csv, rate_csv))
}

/// Row order of the five-scheme comparison.
pub const TABLE1_SCHEMES: [&str; 5] = ["offline", "proposed", "rsca", "fixed-tau-1", "fixed-tau-10"];

/// Aggregated five-scheme comparison, rows ordered as [`TABLE1_SCHEMES`].
pub struct Table1Summary {
    pub mean_rate_bits: [f64; 5],
    pub feasible: [bool; 5],
    pub rounds: [u64; 5],
    pub mean_gap: [f64; 5],
}

/// Five-scheme comparison on one learning task. The optimized-step schemes
/// share each trial's learning trajectory; only the allocator differs. A
/// fixed step count whose round budget exceeds the horizon leaves no
/// transfer blocks at all and scores zero rate.
pub fn table1_summary(config: &ExperimentConfig) -> Result<Table1Summary> {
    let plan = TrialPlan::prepare(config)?;
    let tau_star = plan.tau_for(config)?;
    let d_rb = config.learning.round_rb_cost() as u64;
    let capacity = (config.system.subcarriers * config.system.symbols) as u64 / d_rb;

    let rounds_star = plan.rounds_for(tau_star, config)?;
    if rounds_star > capacity {
        return Err(Error::Infeasible {
            required: rounds_star * d_rb,
            available: capacity * d_rb,
            min_symbols: (rounds_star * d_rb).div_ceil(config.system.subcarriers as u64),
        });
    }
    let rounds_1 = plan.rounds_for(1, config)?;
    let rounds_10 = plan.rounds_for(10, config)?;
    let feasible = [true, true, true, rounds_1 <= capacity, rounds_10 <= capacity];
    let rounds = [rounds_star, rounds_star, rounds_star, rounds_1, rounds_10];

    struct TrialRow {
        rate_bits: [f64; 5],
        gap: [f64; 5],
    }
    let trials: Vec<TrialRow> = (0..config.run.trials)
        .into_par_iter()
        .map(|trial| -> Result<TrialRow> {
            let seed = trial_seed(config.run.seed, trial);
            let mut rate_bits = [0.0f64; 5];
            let mut gap = [f64::NAN; 5];
            let run_star = run_fl_rounds(
                &plan.dataset,
                &plan.estimate,
                config,
                tau_star,
                config.learning.lr_schedule(tau_star),
                rounds_star,
                config.learning.epsilon,
                seed,
            )?;
            for (idx, scheme) in [(0usize, Scheme::Offline), (1, Scheme::Online), (2, Scheme::Rsca)] {
                let (_, _, rate) = allocate_and_rate(config, scheme, rounds_star * d_rb, seed)?;
                rate_bits[idx] = rate;
                gap[idx] = run_star.final_gap_averaged;
            }
            for (idx, tau, r) in [(3usize, 1u32, rounds_1), (4, 10, rounds_10)] {
                if !feasible[idx] {
                    continue;
                }
                let run = run_fl_rounds(
                    &plan.dataset,
                    &plan.estimate,
                    config,
                    tau,
                    config.learning.lr_schedule(tau),
                    r,
                    config.learning.epsilon,
                    seed,
                )?;
                let (_, _, rate) = allocate_and_rate(config, Scheme::Online, r * d_rb, seed)?;
                rate_bits[idx] = rate;
                gap[idx] = run.final_gap_averaged;
            }
            Ok(TrialRow { rate_bits, gap })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut summary = Table1Summary {
        mean_rate_bits: [0.0; 5],
        feasible,
        rounds,
        mean_gap: [f64::NAN; 5],
    };
    for (i, &ok) in feasible.iter().enumerate() {
        let rates: Vec<f64> = trials.iter().map(|t| t.rate_bits[i]).collect();
        summary.mean_rate_bits[i] = mean(&rates);
        if ok {
            let gaps: Vec<f64> = trials.iter().map(|t| t.gap[i]).collect();
            summary.mean_gap[i] = mean(&gaps);
        }
    }
    Ok(summary)
}

fn table1_csv(config: &ExperimentConfig, summary: &Table1Summary) -> String {
    let mut csv =
        String::from("scheme,mean_rate_bits_per_rb,mean_rate_kbps,rounds,mean_final_gap_averaged,feasible\n");
    for (i, name) in TABLE1_SCHEMES.iter().enumerate() {
        csv.push_str(&format!(
            "{name},{},{},{},{},{}\n",
            summary.mean_rate_bits[i],
            config.system.kbps(summary.mean_rate_bits[i]),
            summary.rounds[i],
            summary.mean_gap[i],
            summary.feasible[i]
        ));
    }
    csv
}

/// Runs a registered experiment and writes its data files and manifest into
/// `out_dir`. Returns the paths written.
pub fn reproduce_experiment(
    name: ExperimentName,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let mut files = Vec::new();
    match name {
        ExperimentName::Fig2 => {
            let csv = run_fig2(config)?;
            let path = out_dir.join("fig2_gap_vs_round_by_tau.csv");
            write_file(&path, &csv)?;
            files.push(path);
        }
        ExperimentName::Fig3 => {
            let csv = run_fig3(config)?;
            let path = out_dir.join("fig3_gap_vs_round_by_scheme.csv");
            write_file(&path, &csv)?;
            files.push(path);
        }
        ExperimentName::Fig4 => {
            let csv = run_fig4(config)?;
            let path = out_dir.join("fig4_required_rounds_vs_tau.csv");
            write_file(&path, &csv)?;
            files.push(path);
        }
        ExperimentName::Fig5 => {
            let csv = run_fig5(config)?;
            let path = out_dir.join("fig5_rate_vs_devices.csv");
            write_file(&path, &csv)?;
            files.push(path);
        }
        ExperimentName::Fig6 | ExperimentName::Fig7 => {
            let (gap_csv, rate_csv) = run_vs_s(config)?;
            let gap_path = out_dir.join("fig6_gap_vs_symbols.csv");
            let rate_path = out_dir.join("fig7_rate_vs_symbols.csv");
            write_file(&gap_path, &gap_csv)?;
            write_file(&rate_path, &rate_csv)?;
            files.push(gap_path);
            files.push(rate_path);
        }
        ExperimentName::Table1 => {
            let summary = table1_summary(config)?;
            let path = out_dir.join("table1_rates_by_scheme.csv");
            write_file(&path, &table1_csv(config, &summary))?;
            files.push(path);
        }
    }
    let manifest = write_manifest(out_dir, name, config, &files, started.elapsed().as_secs_f64())?;
    files.push(manifest);
    Ok(files)
}
