//! End-to-end acceptance suite. One test per release criterion; each prints
//! a `[acceptance] criterion N PASS` line (visible with `--nocapture`) and
//! pins its tolerance in code.
//!
//! Run with: `cargo test --release --test acceptance -- --nocapture`

use std::time::Instant;

use cflit::aircomp::{aggregation_mse, normalize_update, optimal_transceiver, RoundChannels, TransceiverDesign};
use cflit::allocation::{offline_allocate, online_allocate};
use cflit::channel::{GainTensor, MaxGainDistribution};
use cflit::harness::{table1_summary, trial_seed, ExperimentConfig, TrialPlan};
use cflit::hyperopt::{optimal_t, optimal_tau, BoundParams};
use cflit::learning::{gradient, loss, LrSchedule, MODEL_DIM};
use cflit::rates::{
    analytic_rate_rsca, analytic_rate_threshold, exp_integral_e1, optimal_threshold_qstar, rate_improvement,
};
use cflit::rng::{derive_seed, Stream};

/// Reference constants reported for the full-scale experiments.
fn reference_bound() -> BoundParams {
    BoundParams::new(0.5, 10.25, 0.639, 1.0, 0.1, 1.0, 1.294, 1000.0, 4.0).unwrap()
}

#[test]
fn criterion_1_optimal_local_steps_closed_form() {
    let start = Instant::now();
    let tau = optimal_tau(1.0, 10.25, 0.639).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(tau, 6, "closed-form optimal local-step count");
    assert!(elapsed.as_micros() < 1000, "took {elapsed:?}, budget 1 ms");
    println!("[acceptance] criterion 1 PASS: optimal_tau(G=1, L=10.25, Gamma=0.639) = 6 in {elapsed:?}");
}

#[test]
fn criterion_2_round_budget_closed_form() {
    let params = reference_bound();
    let start = Instant::now();
    let rounds = optimal_t(6, 0.34, &params).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(rounds, 1208, "closed-form minimum round count");
    assert!(elapsed.as_micros() < 1000, "took {elapsed:?}, budget 1 ms");
    println!("[acceptance] criterion 2 PASS: optimal_t(tau*=6, eps=0.34) = 1208 in {elapsed:?}");
}

#[test]
fn criterion_3_aggregation_error_identity_and_optimality() {
    let start = Instant::now();
    let mut rng = Stream::new(0xC3);
    let draws = 100_000u64;
    let mut worst_rel: f64 = 0.0;

    for instance in 0..100u64 {
        let devices = 1 + rng.next_below(5);
        let dim = 2 + rng.next_below(15); // update dimension, up to 16
        let power_cap = 0.5 + rng.next_f64();
        let noise_var = 0.05 + 0.2 * rng.next_f64();

        let mut weights: Vec<f64> = (0..devices).map(|_| 0.1 + rng.next_f64()).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let stats: Vec<_> = (0..devices)
            .map(|k| {
                let delta: Vec<f64> = (0..dim).map(|_| rng.next_normal()).collect();
                normalize_update(delta, weights[k]).unwrap()
            })
            .collect();
        let channels = RoundChannels::sample(devices, dim, derive_seed(0xC31, &[instance]));
        let design = TransceiverDesign::for_round(&channels, &stats, power_cap).unwrap();
        let pairs: Vec<(f64, f64)> = stats.iter().map(|s| (s.weight, s.std)).collect();
        let closed = aggregation_mse(&channels, &pairs, power_cap, noise_var).unwrap();

        // Independent oracle: push the complex received-signal chain
        // sum_k c h_k p_k x_k + c z through the design and accumulate the
        // realized error energy against the target weighted sum,
        // misalignment residue included.
        let mut gaps = vec![num_complex::Complex64::new(0.0, 0.0); devices * dim];
        for (i, rb) in design.per_rb.iter().enumerate() {
            for k in 0..devices {
                gaps[k * dim + i] = rb.denoise * channels.at(k, i) * rb.transmit[k]
                    - num_complex::Complex64::new(pairs[k].0 * pairs[k].1, 0.0);
            }
        }
        let sigma = noise_var.sqrt();
        let mut noise_rng = Stream::new(derive_seed(0xC32, &[instance]));
        let mut acc = 0.0;
        for _ in 0..draws {
            let mut energy = 0.0;
            for (i, rb) in design.per_rb.iter().enumerate() {
                let mut err = num_complex::Complex64::new(0.0, 0.0);
                for (k, s) in stats.iter().enumerate() {
                    err += gaps[k * dim + i] * s.normalized[i];
                }
                let z = num_complex::Complex64::new(noise_rng.next_normal(), noise_rng.next_normal())
                    * (sigma / std::f64::consts::SQRT_2);
                err += rb.denoise * z;
                energy += err.norm_sqr();
            }
            acc += energy;
        }
        let mc = acc / draws as f64;
        let rel = (mc - closed).abs() / closed.max(1e-300);
        worst_rel = worst_rel.max(rel);
        assert!(rel < 0.01, "instance {instance}: MC {mc} vs closed {closed} (rel {rel})");
    }

    // Grid search over unbiased (exactly aligned) designs on 2-device
    // single-block instances: nothing beats the closed form, and it is
    // attained at the minimum feasible de-noising scalar.
    for instance in 0..50u64 {
        let channels = RoundChannels::sample(2, 1, derive_seed(0xC33, &[instance]));
        if (0..2).any(|k| channels.at(k, 0).norm() < 1e-3) {
            continue;
        }
        let w = 0.2 + 0.6 * rng.next_f64();
        let stats = [(w, 0.5 + rng.next_f64()), (1.0 - w, 0.5 + rng.next_f64())];
        let power_cap = 0.5 + rng.next_f64();
        let noise_var = 0.05 + 0.2 * rng.next_f64();
        let closed = aggregation_mse(&channels, &stats, power_cap, noise_var).unwrap();
        let c_star = (0..2)
            .map(|k| stats[k].0 * stats[k].1 / channels.at(k, 0).norm())
            .fold(0.0f64, f64::max)
            / power_cap.sqrt();
        let mut best = f64::INFINITY;
        for i in 0..=10_000 {
            let c = c_star * (1.0 + 3.0 * i as f64 / 10_000.0);
            best = best.min(c * c * noise_var);
        }
        assert!(best >= closed - 1e-9, "aligned design at {best} beats closed form {closed}");
        // The design emitted by the library sits exactly at c*.
        let rb = optimal_transceiver(&channels.rb_column(0), &stats, power_cap).unwrap();
        assert!((rb.denoise - c_star).abs() <= 1e-12 * c_star);
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}, budget 1 min");
    println!(
        "[acceptance] criterion 3 PASS: 100 instances, MC vs closed form worst rel err {worst_rel:.2e}; aligned grid search never beats the closed form ({elapsed:?})"
    );
}

#[test]
fn criterion_4_rate_expressions_vs_monte_carlo() {
    let start = Instant::now();
    let n = 5usize;
    let theta = 2.512;
    let q = 2.754;
    let samples = 1_000_000u64;

    let mut rng = Stream::new(0xC4);
    let mut thresholded = 0.0;
    let mut unconditional = 0.0;
    for _ in 0..samples {
        let best = (0..n).map(|_| rng.next_exp()).fold(0.0f64, f64::max);
        let rate = (theta * best).ln_1p() / std::f64::consts::LN_2;
        unconditional += rate;
        if best >= q {
            thresholded += rate;
        }
    }
    let mc_threshold = thresholded / samples as f64;
    let analytic_threshold = analytic_rate_threshold(n, theta, q).unwrap();
    let rel_t = (mc_threshold - analytic_threshold).abs() / analytic_threshold;
    assert!(rel_t < 0.005, "threshold rate: MC {mc_threshold} vs closed {analytic_threshold} (rel {rel_t})");

    let p_it = 1.0 - (1.0 - (-q).exp()).powi(n as i32);
    let mc_rsca = p_it * unconditional / samples as f64;
    let analytic_rsca = analytic_rate_rsca(n, theta, q).unwrap();
    let rel_r = (mc_rsca - analytic_rsca).abs() / analytic_rsca;
    assert!(rel_r < 0.005, "random rate: MC {mc_rsca} vs closed {analytic_rsca} (rel {rel_r})");

    for i in 0..=200 {
        let qq = 10.0 * i as f64 / 200.0;
        let identity = analytic_rate_threshold(n, theta, qq).unwrap() - analytic_rate_rsca(n, theta, qq).unwrap();
        let direct = rate_improvement(n, theta, qq).unwrap();
        assert!((identity - direct).abs() < 1e-9, "improvement identity at q={qq}");
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}, budget 30 s");
    println!(
        "[acceptance] criterion 4 PASS: closed forms within {:.2}% / {:.2}% of 1e6-sample MC; improvement identity to 1e-9 ({elapsed:?})",
        rel_t * 100.0,
        rel_r * 100.0
    );
}

#[test]
fn criterion_5_improvement_nonnegative_with_interior_maximum() {
    let start = Instant::now();
    for &n in &[1usize, 2, 5, 10] {
        for &theta in &[0.5, 2.51, 10.0] {
            for i in 0..=1000 {
                let q = 20.0 * i as f64 / 1000.0;
                let v = rate_improvement(n, theta, q).unwrap();
                assert!(v >= -1e-9, "rho({q}) = {v} at n={n}, theta={theta}");
            }
            assert!(rate_improvement(n, theta, 0.0).unwrap().abs() <= 1e-12);
            let q_star = optimal_threshold_qstar(n, theta).unwrap();
            assert!(q_star > 0.0);
            assert!(rate_improvement(n, theta, 20.0 + q_star).unwrap() < 1e-4);
            let at = rate_improvement(n, theta, q_star).unwrap();
            assert!(at >= rate_improvement(n, theta, q_star + 0.01).unwrap());
            assert!(at >= rate_improvement(n, theta, (q_star - 0.01).max(0.0)).unwrap());
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 10, "took {elapsed:?}, budget 10 s");
    println!("[acceptance] criterion 5 PASS: improvement nonnegative on all grids, vanishing tail, interior maximum at q* ({elapsed:?})");
}

#[test]
fn criterion_6_online_allocator_feasible_and_near_optimal() {
    let start = Instant::now();
    let subcarriers = 512;
    let symbols = 2000;
    let n_devices = 5;
    let demand = 610u64 * 1208;
    let theta = 1.0 / (10f64.powf(0.6) * 0.1);

    let mut online_sum = 0.0;
    let mut offline_sum = 0.0;
    for seed in 0..20u64 {
        let gains = GainTensor::sample(n_devices, subcarriers, symbols, 1, derive_seed(0xC6, &[seed])).unwrap();
        let online = online_allocate(gains.symbols_iter(), subcarriers, symbols, demand, n_devices).unwrap();
        assert_eq!(online.fl_count(), demand, "seed {seed}: exact aggregation quota");
        let offline = offline_allocate(&gains, demand).unwrap();
        online_sum += cflit::rates::average_sum_rate(&online, &gains, theta).unwrap();
        offline_sum += cflit::rates::average_sum_rate(&offline, &gains, theta).unwrap();
    }
    let ratio = online_sum / offline_sum;
    assert!(ratio >= 0.98, "online/offline mean rate ratio {ratio}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "took {elapsed:?}, budget 2 min");
    println!(
        "[acceptance] criterion 6 PASS: exactly d*T aggregation blocks every seed; online/offline rate ratio {ratio:.5} >= 0.98 ({elapsed:?})"
    );
}

#[test]
fn criterion_7_scheme_ordering_at_desk_scale() {
    let start = Instant::now();
    let cfg = ExperimentConfig::desk_scale();
    assert_eq!(cfg.run.trials, 20);
    let summary = table1_summary(&cfg).unwrap();
    let [offline, proposed, rsca, tau1, tau10] = summary.mean_rate_bits;

    assert!(offline >= proposed, "offline {offline} >= proposed {proposed}");
    assert!(proposed > rsca, "proposed {proposed} > rsca {rsca}");
    assert_eq!(tau1, 0.0, "fixed tau=1 leaves no transfer blocks");
    assert!(!summary.feasible[3], "tau=1 budget must exceed the horizon");
    assert!(tau10 < proposed, "fixed tau=10 {tau10} below proposed {proposed}");
    assert!(summary.feasible[4], "tau=10 must fit the horizon");
    let ratio = proposed / offline;
    assert!(ratio >= 0.98, "proposed/offline ratio {ratio}");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 600, "took {elapsed:?}, budget 10 min");
    println!(
        "[acceptance] criterion 7 PASS: rates (bits/RB) offline {offline:.4} >= proposed {proposed:.4} > rsca {rsca:.4}; tau1 = 0 exactly; tau10 {tau10:.4} < proposed; proposed/offline {ratio:.5} ({elapsed:?})"
    );
}

#[test]
fn criterion_8_learning_convergence_at_desk_scale() {
    let start = Instant::now();
    let cfg = ExperimentConfig::desk_scale();
    let plan = TrialPlan::prepare(&cfg).unwrap();
    let tau_star = plan.tau_for(&cfg).unwrap();
    let budget = plan.rounds_for(tau_star, &cfg).unwrap();
    assert!(tau_star > 1 && tau_star < 20, "tau* = {tau_star} must sit between the baselines");

    // Equal-round-budget comparison under the default decaying schedule.
    let trials = 20usize;
    let mut means = [0.0f64; 3];
    let mut window_means: Vec<Vec<f64>> = Vec::new();
    for trial in 0..trials {
        let seed = trial_seed(cfg.run.seed, trial);
        for (i, &tau) in [1u32, tau_star, 20].iter().enumerate() {
            let run = cflit::harness::run_fl_rounds(
                &plan.dataset,
                &plan.estimate,
                &cfg,
                tau,
                cfg.learning.lr_schedule(tau),
                budget,
                cfg.learning.epsilon,
                seed,
            )
            .unwrap();
            means[i] += run.final_gap_averaged / trials as f64;
            if i == 1 {
                // Track 100-round window means of the tau* averaged-iterate
                // gap for the monotone-trend check.
                let windows: Vec<f64> = run
                    .records
                    .chunks(100)
                    .filter(|c| c.len() == 100)
                    .map(|c| c.iter().map(|r| r.gap_averaged).sum::<f64>() / c.len() as f64)
                    .collect();
                window_means.push(windows);
            }
        }
    }
    let [gap_tau1, gap_star, gap_tau20] = means;
    assert!(
        gap_star < gap_tau1,
        "tau*={tau_star} mean gap {gap_star} must beat tau=1 gap {gap_tau1}"
    );
    assert!(
        gap_star < gap_tau20,
        "tau*={tau_star} mean gap {gap_star} must beat tau=20 gap {gap_tau20}"
    );
    // Averaged over seeds, the gap decreases across consecutive 100-round
    // windows.
    let n_windows = window_means[0].len();
    for w in 1..n_windows {
        let prev: f64 = window_means.iter().map(|v| v[w - 1]).sum::<f64>() / trials as f64;
        let curr: f64 = window_means.iter().map(|v| v[w]).sum::<f64>() / trials as f64;
        assert!(curr < prev, "window {w}: mean gap {curr} did not decrease from {prev}");
    }

    // Rounds-to-epsilon under the schedule the bound is proved for. The
    // bound itself is independent of the schedule offset gamma while the
    // trajectory slows with it, so the comparison is pinned at gamma = 5000
    // (well above the 16 L / mu precondition) where prediction and
    // simulation are commensurate.
    let p = plan.estimate.params;
    let gamma = 5000.0;
    assert!(gamma >= 16.0 * p.lipschitz / p.mu);
    let schedule = LrSchedule::BoundDriven {
        mu: p.mu,
        tau: tau_star,
        gamma,
    };
    let mut ratio_sum = 0.0;
    for trial in 0..trials {
        let run = cflit::harness::run_fl_rounds(
            &plan.dataset,
            &plan.estimate,
            &cfg,
            tau_star,
            schedule,
            2 * budget,
            cfg.learning.epsilon,
            trial_seed(cfg.run.seed, trial),
        )
        .unwrap();
        let reached = run
            .rounds_to_epsilon
            .expect("the bound-driven run must reach the target within twice the predicted budget");
        ratio_sum += reached as f64 / budget as f64;
    }
    let mean_ratio = ratio_sum / trials as f64;
    assert!(
        (0.8..=1.3).contains(&mean_ratio),
        "simulated/predicted round ratio {mean_ratio} outside [0.8, 1.3]"
    );

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 600, "took {elapsed:?}, budget 10 min");
    println!(
        "[acceptance] criterion 8 PASS: mean averaged gap tau*={tau_star}: {gap_star:.4} < tau=1: {gap_tau1:.4} and tau=20: {gap_tau20:.4}; simulated/predicted rounds ratio {mean_ratio:.3} in [0.8, 1.3] ({elapsed:?})"
    );
}

#[test]
fn criterion_9_numeric_hygiene() {
    let start = Instant::now();

    // Gradient vs central finite differences.
    let ds = cflit::learning::generate_synthetic(1.0, 1.0, 2, 120, 1.5, 0xC9).unwrap();
    let mut rng = Stream::new(0xC91);
    let w: Vec<f64> = (0..MODEL_DIM).map(|_| 0.3 * rng.next_normal()).collect();
    let g = gradient(&w, &ds.devices, 0.5).unwrap();
    let h = 1e-6;
    let mut worst_grad: f64 = 0.0;
    for idx in (0..MODEL_DIM).step_by(23) {
        let mut wp = w.clone();
        wp[idx] += h;
        let mut wm = w.clone();
        wm[idx] -= h;
        let fd = (loss(&wp, &ds.devices, 0.5).unwrap() - loss(&wm, &ds.devices, 0.5).unwrap()) / (2.0 * h);
        worst_grad = worst_grad.max((fd - g[idx]).abs() / g[idx].abs().max(1e-8));
    }
    assert!(worst_grad < 1e-5, "gradient vs finite differences: {worst_grad}");

    // Exponential integral vs an independent quadrature oracle built on the
    // substitution E1(z) = int_0^inf exp(-z e^v) dv (Simpson on a truncated
    // smooth integrand).
    let oracle = |z: f64| -> f64 {
        let v_max = (745.0 / z).ln();
        let steps = 200_000usize;
        let dv = v_max / steps as f64;
        let f = |v: f64| (-z * v.exp()).exp();
        let mut acc = f(0.0) + f(v_max);
        for i in 1..steps {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * dv);
        }
        acc * dv / 3.0
    };
    let mut worst_e1: f64 = 0.0;
    for &z in &[1e-6, 1e-4, 1e-2, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0, 50.0] {
        let mine = exp_integral_e1(z).unwrap();
        let reference = oracle(z);
        worst_e1 = worst_e1.max((mine - reference).abs() / reference);
    }
    assert!(worst_e1 < 1e-10, "E1 vs quadrature oracle: {worst_e1}");

    // Quantile / CDF round trip.
    let mut worst_rt: f64 = 0.0;
    for n in 1..=32usize {
        let dist = MaxGainDistribution::new(n).unwrap();
        for i in 1..=50 {
            let p = i as f64 / 50.0;
            let q = dist.quantile_threshold(p).unwrap();
            worst_rt = worst_rt.max((dist.cdf(q) - (1.0 - p)).abs());
        }
    }
    assert!(worst_rt < 1e-10, "quantile/CDF round trip: {worst_rt}");

    // Byte-identical reruns of the full pipeline.
    let mut cfg = ExperimentConfig::desk_scale();
    cfg.system.fl_devices = 3;
    cfg.system.subcarriers = 32;
    cfg.system.symbols = 300;
    cfg.learning.total_samples = 300;
    cfg.learning.epsilon = 2.0;
    cfg.run.trials = 2;
    let render = || -> Vec<u8> {
        let plan = TrialPlan::prepare(&cfg).unwrap();
        let trials: Vec<_> = (0..cfg.run.trials)
            .map(|t| cflit::harness::run_cflit_planned(&plan, &cfg, trial_seed(cfg.run.seed, t)).unwrap())
            .collect();
        let set = cflit::harness::TranscriptSet { trials };
        let mut rounds = Vec::new();
        set.write_rounds_csv(&mut rounds).unwrap();
        let mut summary = Vec::new();
        set.write_summary_csv(&mut summary).unwrap();
        let mut json = Vec::new();
        set.write_json(&mut json).unwrap();
        [rounds, summary, json].concat()
    };
    let first = render();
    let second = render();
    assert_eq!(first, second, "identical config and seed must give byte-identical transcripts");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}, budget 1 min");
    println!(
        "[acceptance] criterion 9 PASS: gradient FD {worst_grad:.2e} < 1e-5, E1 {worst_e1:.2e} < 1e-10, round trip {worst_rt:.2e} < 1e-10, byte-identical reruns ({elapsed:?})"
    );
}
