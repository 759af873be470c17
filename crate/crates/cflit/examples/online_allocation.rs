//! Threshold-based online subcarrier allocation against the offline optimum
//! and the random baseline.
//!
//! Streams per-symbol gains through the online allocator, reports its
//! decision counters, validates feasibility, and compares the average
//! transfer rates of the three schemes on the same channel draw.
//!
//! Run: `cargo run --release --example online_allocation`

use cflit::allocation::{
    offline_allocate, rsca_allocate, validate_allocation, AllocationSummary, StreamingAllocator,
};
use cflit::channel::GainTensor;
use cflit::rates::average_sum_rate;

fn main() -> cflit::Result<()> {
    let (devices, subcarriers, symbols) = (5usize, 64usize, 400usize);
    let total = (subcarriers * symbols) as u64;
    let fl_demand = total * 6 / 10; // reserve 60% of blocks for aggregation
    let theta = 2.512;

    let gains = GainTensor::sample(devices, subcarriers, symbols, 1, 2024)?;

    let mut online = StreamingAllocator::threshold(subcarriers, symbols, fl_demand, devices)?;
    let budget = *online.budget();
    println!(
        "budget: {} aggregation / {} transfer blocks, p_it = {:.4}, threshold q = {:.4}",
        budget.fl_quota, budget.it_quota, budget.p_it, budget.q
    );
    let mut stream = gains.symbols_iter();
    while online.needs_gains() {
        online.decide_symbol(&stream.next().expect("tensor covers the horizon"))?;
    }
    let (online_grid, stats) = online.finish()?;
    println!(
        "online decisions: {} by rule ({} to transfer), {} forced to transfer, {} trailing aggregation",
        stats.rule_decided, stats.rule_it, stats.forced_it, stats.trailing_fl
    );
    assert!(validate_allocation(&online_grid, fl_demand).is_ok());

    let offline_grid = offline_allocate(&gains, fl_demand)?;
    let rsca_grid = rsca_allocate(gains.symbols_iter(), subcarriers, symbols, fl_demand, devices, 5)?;

    let r_online = average_sum_rate(&online_grid, &gains, theta)?;
    let r_offline = average_sum_rate(&offline_grid, &gains, theta)?;
    let r_rsca = average_sum_rate(&rsca_grid, &gains, theta)?;
    println!("\naverage transfer rate (bits per resource block):");
    println!("  offline optimum : {r_offline:.5}");
    println!("  online threshold: {r_online:.5}  ({:.2}% of offline)", 100.0 * r_online / r_offline);
    println!("  random baseline : {r_rsca:.5}  ({:.2}% of offline)", 100.0 * r_rsca / r_offline);

    let summary = AllocationSummary::new(&online_grid, &budget);
    println!("\nper-device block counts (online): {:?}", summary.per_device_counts);
    Ok(())
}
