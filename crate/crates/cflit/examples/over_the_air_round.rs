//! One over-the-air aggregation round, end to end.
//!
//! Three devices normalize their model changes, the minimum-MSE transceiver
//! scalars are computed per resource block, and the noisy superposition is
//! demodulated. The realized error energy is compared against the closed
//! form, and the noiseless path is shown to be exact.
//!
//! Run: `cargo run --release --example over_the_air_round`

use cflit::aircomp::{
    aggregate_over_air, aggregation_mse, normalize_update, RoundChannels, TransceiverDesign,
};
use cflit::rng::Stream;

fn main() -> cflit::Result<()> {
    let dim = 16;
    let weights = [0.5, 0.3, 0.2];
    let mut rng = Stream::new(11);

    let stats: Vec<_> = weights
        .iter()
        .map(|&w| {
            let delta: Vec<f64> = (0..dim).map(|_| 0.1 * rng.next_normal()).collect();
            normalize_update(delta, w)
        })
        .collect::<cflit::Result<Vec<_>>>()?;
    for (k, s) in stats.iter().enumerate() {
        println!(
            "device {k}: weight {:.2}, update mean {:+.5}, std {:.5}",
            s.weight, s.mean, s.std
        );
    }

    let power_cap = 1.0;
    let noise_var = 0.1;
    let channels = RoundChannels::sample(weights.len(), dim, 99);
    let design = TransceiverDesign::for_round(&channels, &stats, power_cap)?;
    let peak_power = design
        .per_rb
        .iter()
        .flat_map(|rb| rb.transmit.iter().map(|p| p.norm_sqr()))
        .fold(0.0f64, f64::max);
    println!("\ntransceiver design: peak |p|^2 = {peak_power:.6} (cap {power_cap})");

    let pairs: Vec<(f64, f64)> = stats.iter().map(|s| (s.weight, s.std)).collect();
    let closed = aggregation_mse(&channels, &pairs, power_cap, noise_var)?;
    println!("closed-form aggregation error for this round: {closed:.6}");

    // Average the realized error energy over many noise draws.
    let draws = 20_000u64;
    let mut acc = 0.0;
    for seed in 0..draws {
        acc += aggregate_over_air(&stats, &design, &channels, noise_var, seed)?.mse_realized;
    }
    println!("mean realized error over {draws} draws:      {:.6}", acc / draws as f64);

    // Zero noise reproduces the exact weighted sum bitwise.
    let clean = aggregate_over_air(&stats, &design, &channels, 0.0, 0)?;
    println!(
        "noiseless estimate equals the exact weighted sum: {}",
        clean.estimate == clean.exact
    );
    Ok(())
}
