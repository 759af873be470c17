//! Block-fading channels and the distribution of the best transfer gain.
//!
//! Draws a fading grid, verifies the block structure, and compares the
//! closed-form CDF/quantile of the best-of-N gain against the empirical
//! fraction of resource blocks above the threshold.
//!
//! Run: `cargo run --release --example channel_order_statistics`

use cflit::channel::{sample_block_fading, ChannelConfig, GainTensor, MaxGainDistribution};

fn main() -> cflit::Result<()> {
    // A small grid with 4-symbol coherence blocks.
    let config = ChannelConfig::new(3, 8, 12, 4);
    let grid = sample_block_fading(&config, 7)?;
    println!(
        "grid: {} devices x {} subcarriers x {} symbols, coherence {} symbols",
        grid.devices(),
        grid.subcarriers(),
        grid.symbols(),
        grid.coherence_block_len()
    );
    let h = grid.coeff(0, 0, 0);
    println!(
        "device 0, subcarrier 0: h(s=0) = {:.4}{:+.4}i, constant over its block: {}",
        h.re,
        h.im,
        (0..4).all(|s| grid.coeff(0, 0, s) == h)
    );

    // Order statistics of the best-of-5 gain.
    let dist = MaxGainDistribution::new(5)?;
    let p_it = 0.280390625; // transfer share at the reference operating point
    let q = dist.quantile_threshold(p_it)?;
    println!("\nbest-of-5 exponential gains:");
    println!("  threshold q for transfer share {p_it:.6}: {q:.6}");
    println!("  CDF(q) = {:.6} (should equal 1 - p_it)", dist.cdf(q));
    println!("  density at q: {:.6}", dist.pdf(q));

    // Empirical check over a large sampled tensor.
    let tensor = GainTensor::sample(5, 64, 2000, 1, 42)?;
    let mut above = 0u64;
    let total = 64 * 2000;
    for s in 0..2000 {
        for m in 0..64 {
            if tensor.best(m, s).0 >= q {
                above += 1;
            }
        }
    }
    println!(
        "  empirical fraction above q over {total} blocks: {:.6}",
        above as f64 / total as f64
    );
    Ok(())
}
