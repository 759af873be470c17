//! The end-to-end pipeline: generate data, estimate the task constants,
//! size the learning hyper-parameters, allocate subcarriers, run the
//! aggregation rounds, and score the transfer rate.

use crate::aircomp::{aggregate_over_air, normalize_update, RoundChannels, TransceiverDesign};
use crate::allocation::{offline_allocate, online_allocate, rsca_allocate, AllocationBudget, AllocationGrid};
use crate::channel::GainTensor;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Scheme};
use crate::harness::transcript::{RoundRecord, SimulationTranscript};
use crate::hyperopt::{optimal_t, optimal_tau, BoundParams};
use crate::learning::{
    estimate_learning_params, generate_synthetic, global_update, local_sgd, loss, LrSchedule, ModelState,
    SyntheticDataset, TaskEstimate, WeightedAverage, MODEL_DIM,
};
use crate::rates::average_sum_rate;
use crate::rng::derive_seed;

// Seed lanes: every random ingredient of a trial draws from its own stream.
const LANE_DATASET: u64 = 1;
const LANE_CHANNEL_TERM: u64 = 2;
const LANE_IT_GAINS: u64 = 3;
const LANE_FL_CHANNELS: u64 = 4;
const LANE_NOISE: u64 = 5;
const LANE_SGD: u64 = 6;
const LANE_RSCA: u64 = 7;

/// Dataset, task constants and hyper-parameters of one experiment. Derived
/// from the base seed alone: Monte Carlo trials share the learning task and
/// vary only in channel realizations, receiver noise, mini-batch order and
/// allocation coin flips, mirroring how the reference experiments average.
pub struct TrialPlan {
    pub dataset: SyntheticDataset,
    pub estimate: TaskEstimate,
    pub channel_term: f64,
}

impl TrialPlan {
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let lc = &config.learning;
        let base = config.run.seed;
        let dataset = generate_synthetic(
            lc.alpha,
            lc.beta,
            config.system.fl_devices,
            lc.total_samples,
            lc.power_law_exponent,
            derive_seed(base, &[LANE_DATASET]),
        )?;
        let estimate = estimate_learning_params(&dataset, lc.reg, lc.clip, lc.optimum_tol)?;
        let channel_term = if lc.channel_term > 0.0 {
            lc.channel_term
        } else {
            crate::aircomp::estimate_channel_term(
                &dataset.weights(),
                lc.term_samples,
                derive_seed(base, &[LANE_CHANNEL_TERM]),
                Some(lc.term_gain_floor),
            )?
        };
        Ok(TrialPlan {
            dataset,
            estimate,
            channel_term,
        })
    }

    /// Bound parameters at the estimated task constants. The learning-rate
    /// offset is raised to 16 L / mu when the configured value is below the
    /// bound's precondition; the round budget does not depend on it either
    /// way.
    pub fn bound_params(&self, config: &ExperimentConfig) -> Result<BoundParams> {
        let p = &self.estimate.params;
        let gamma_floor = 16.0 * p.lipschitz / p.mu;
        BoundParams::new(
            p.mu,
            p.lipschitz,
            p.hetero,
            p.grad_bound,
            config.system.noise_var,
            config.system.fl_power,
            self.channel_term,
            config.learning.gamma.max(gamma_floor * (1.0 + 1e-12)),
            self.estimate.init_dist_sq(),
        )
    }

    /// Local-step count for a scheme: the closed-form optimum, or the fixed
    /// override.
    pub fn tau_for(&self, config: &ExperimentConfig) -> Result<u32> {
        match config.allocation.scheme {
            Scheme::FixedTau => config
                .allocation
                .fixed_tau
                .ok_or_else(|| Error::InvalidConfig("scheme = fixed-tau requires fixed_tau".into())),
            _ => {
                let p = &self.estimate.params;
                optimal_tau(p.grad_bound, p.lipschitz, p.hetero)
            }
        }
    }

    /// Round budget for a local-step count at the configured gap target.
    pub fn rounds_for(&self, tau: u32, config: &ExperimentConfig) -> Result<u64> {
        optimal_t(tau, config.learning.epsilon, &self.bound_params(config)?)
    }
}

/// Seed stream of one device's local pass in one round, as used by
/// [`run_fl_rounds`]; exposed so a single device's update can be reproduced
/// in isolation.
pub fn round_sgd_seed(trial_seed: u64, round: u64, device: usize) -> u64 {
    derive_seed(trial_seed, &[LANE_SGD, round, device as u64])
}

/// Outcome of a sequence of aggregation rounds.
pub struct FlRunOutcome {
    pub records: Vec<RoundRecord>,
    /// Smallest round budget whose averaged iterate met the gap target.
    pub rounds_to_epsilon: Option<u64>,
    pub final_gap_current: f64,
    pub final_gap_averaged: f64,
    pub final_weights: Vec<f64>,
}

/// Runs `rounds` aggregation rounds of clipped local SGD with over-the-air
/// averaging. Channels are drawn fresh per round (the allocator holds no
/// sway over learning-device channels), noise per round from its own lane.
#[allow(clippy::too_many_arguments)]
pub fn run_fl_rounds(
    dataset: &SyntheticDataset,
    estimate: &TaskEstimate,
    config: &ExperimentConfig,
    tau: u32,
    schedule: LrSchedule,
    rounds: u64,
    epsilon: f64,
    seed: u64,
) -> Result<FlRunOutcome> {
    run_fl_rounds_with_stop(dataset, estimate, config, tau, schedule, rounds, epsilon, seed, false)
}

/// As [`run_fl_rounds`], optionally returning as soon as the averaged
/// iterate reaches the gap target — for sweeps that only need the crossing
/// round.
#[allow(clippy::too_many_arguments)]
pub fn run_fl_rounds_with_stop(
    dataset: &SyntheticDataset,
    estimate: &TaskEstimate,
    config: &ExperimentConfig,
    tau: u32,
    schedule: LrSchedule,
    rounds: u64,
    epsilon: f64,
    seed: u64,
    stop_on_target: bool,
) -> Result<FlRunOutcome> {
    let lc = &config.learning;
    let sys = &config.system;
    let weights_rho = dataset.weights();
    let mut state = ModelState::new(MODEL_DIM, schedule);
    let mut averager = WeightedAverage::new(MODEL_DIM, lc.gamma);
    let mut records = Vec::with_capacity(rounds as usize);
    let mut rounds_to_epsilon = None;

    let mut gap_current = loss(&state.weights, &dataset.devices, lc.reg)? - estimate.f_star;
    let mut gap_averaged = gap_current;
    for t in 0..rounds {
        // After this push the averager holds w_0..w_t, i.e. the averaged
        // iterate of a (t+1)-round budget.
        averager.push(&state.weights);
        gap_averaged = loss(&averager.average(), &dataset.devices, lc.reg)? - estimate.f_star;
        if rounds_to_epsilon.is_none() && gap_averaged <= epsilon {
            rounds_to_epsilon = Some(t + 1);
            if stop_on_target {
                break;
            }
        }

        let lr = state.learning_rate();
        let mut stats = Vec::with_capacity(dataset.devices.len());
        for (k, dev) in dataset.devices.iter().enumerate() {
            let batch = lc.batch.min(dev.len());
            let delta = local_sgd(
                &state.weights,
                dev,
                tau,
                batch,
                lr,
                lc.clip,
                lc.reg,
                round_sgd_seed(seed, t, k),
            )?;
            stats.push(normalize_update(delta, weights_rho[k])?);
        }
        let channels = RoundChannels::sample(
            dataset.devices.len(),
            MODEL_DIM,
            derive_seed(seed, &[LANE_FL_CHANNELS, t]),
        );
        let design = TransceiverDesign::for_round(&channels, &stats, sys.fl_power)?;
        let outcome = aggregate_over_air(
            &stats,
            &design,
            &channels,
            sys.noise_var,
            derive_seed(seed, &[LANE_NOISE, t]),
        )?;
        records.push(RoundRecord {
            round: t,
            gap_current,
            gap_averaged,
            mse_closed_form: outcome.mse_closed_form,
            mse_realized: outcome.mse_realized,
        });
        global_update(&mut state, &outcome.estimate)?;
        gap_current = loss(&state.weights, &dataset.devices, lc.reg)? - estimate.f_star;
    }
    Ok(FlRunOutcome {
        records,
        rounds_to_epsilon,
        final_gap_current: gap_current,
        final_gap_averaged: gap_averaged,
        final_weights: state.weights,
    })
}

/// Allocates the horizon for a given aggregation demand under the configured
/// scheme and scores the average transfer rate.
pub(crate) fn allocate_and_rate(
    config: &ExperimentConfig,
    scheme: Scheme,
    fl_demand: u64,
    seed: u64,
) -> Result<(AllocationGrid, AllocationBudget, f64)> {
    let sys = &config.system;
    let budget = AllocationBudget::new(sys.subcarriers, sys.symbols, fl_demand, sys.it_devices)?;
    let gains = GainTensor::sample(
        sys.it_devices,
        sys.subcarriers,
        sys.symbols,
        sys.coherence_block_len,
        derive_seed(seed, &[LANE_IT_GAINS]),
    )?;
    let grid = match scheme {
        Scheme::Online | Scheme::FixedTau => {
            online_allocate(gains.symbols_iter(), sys.subcarriers, sys.symbols, fl_demand, sys.it_devices)?
        }
        Scheme::Offline => offline_allocate(&gains, fl_demand)?,
        Scheme::Rsca => rsca_allocate(
            gains.symbols_iter(),
            sys.subcarriers,
            sys.symbols,
            fl_demand,
            sys.it_devices,
            derive_seed(seed, &[LANE_RSCA]),
        )?,
    };
    let rate = average_sum_rate(&grid, &gains, sys.theta())?;
    Ok((grid, budget, rate))
}

/// Full pipeline for one trial: dataset, constants, hyper-parameters,
/// allocation, aggregation rounds, transfer rate, transcript. The learning
/// task comes from the configuration's base seed; `seed` controls the
/// trial's channels, noise, batches and allocation randomness.
pub fn run_cflit(config: &ExperimentConfig, seed: u64) -> Result<SimulationTranscript> {
    let plan = TrialPlan::prepare(config)?;
    run_cflit_planned(&plan, config, seed)
}

/// As [`run_cflit`] with a prepared plan, so sweeps estimate the task once.
pub fn run_cflit_planned(
    plan: &TrialPlan,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<SimulationTranscript> {
    let tau = plan.tau_for(config)?;
    let rounds = plan.rounds_for(tau, config)?;
    let fl_demand = rounds * config.learning.round_rb_cost() as u64;
    let (_, budget, rate_bits) = allocate_and_rate(config, config.allocation.scheme, fl_demand, seed)?;

    let schedule = config.learning.lr_schedule(tau);
    let fl = run_fl_rounds(
        &plan.dataset,
        &plan.estimate,
        config,
        tau,
        schedule,
        rounds,
        config.learning.epsilon,
        seed,
    )?;

    let transcript = SimulationTranscript {
        seed,
        scheme: config.allocation.scheme.to_string(),
        tau,
        rounds_planned: rounds,
        epsilon: config.learning.epsilon,
        p_it: budget.p_it,
        q: budget.q,
        channel_term: plan.channel_term,
        lipschitz: plan.estimate.params.lipschitz,
        hetero: plan.estimate.params.hetero,
        f_star: plan.estimate.f_star,
        rate_bits_per_rb: rate_bits,
        rate_kbps: config.system.kbps(rate_bits),
        rounds_to_epsilon: fl.rounds_to_epsilon,
        final_gap_current: fl.final_gap_current,
        final_gap_averaged: fl.final_gap_averaged,
        rounds: fl.records,
    };
    transcript.validate()?;
    Ok(transcript)
}
