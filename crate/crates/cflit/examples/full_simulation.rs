//! The complete coexistence pipeline on the desk-scale configuration:
//! task estimation, hyper-parameter sizing, subcarrier allocation,
//! aggregation rounds, and the transfer-rate score.
//!
//! Run: `cargo run --release --example full_simulation`

use cflit::harness::{run_cflit_planned, trial_seed, ExperimentConfig, TrialPlan};

fn main() -> cflit::Result<()> {
    let cfg = ExperimentConfig::desk_scale();
    println!(
        "system: {} learning + {} transfer devices, {} subcarriers x {} symbols, {} blocks per round",
        cfg.system.fl_devices,
        cfg.system.it_devices,
        cfg.system.subcarriers,
        cfg.system.symbols,
        cfg.learning.round_rb_cost()
    );

    let plan = TrialPlan::prepare(&cfg)?;
    let mut rates = Vec::new();
    for trial in 0..3usize {
        let t = run_cflit_planned(&plan, &cfg, trial_seed(cfg.run.seed, trial))?;
        println!(
            "trial {trial}: tau = {}, rounds = {}, p_it = {:.4}, q = {:.4}, rate = {:.4} bits/RB ({:.2} Kbps), final averaged gap = {:.4}",
            t.tau, t.rounds_planned, t.p_it, t.q, t.rate_bits_per_rb, t.rate_kbps, t.final_gap_averaged
        );
        rates.push(t.rate_bits_per_rb);
    }
    println!(
        "\nmean transfer rate over {} trials: {:.4} bits/RB",
        rates.len(),
        rates.iter().sum::<f64>() / rates.len() as f64
    );
    println!("(the `cflit` binary exposes this pipeline as `cflit simulate`)");
    Ok(())
}
