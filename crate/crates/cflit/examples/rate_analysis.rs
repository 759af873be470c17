//! Closed-form expected transfer rates under Rayleigh fading.
//!
//! Evaluates the thresholded and gain-independent expected rates, their
//! improvement, and the improvement-maximizing threshold q*; sweeps the
//! threshold to show the improvement profile.
//!
//! Run: `cargo run --release --example rate_analysis`

use cflit::rates::{
    analytic_rate_rsca, analytic_rate_threshold, exp_integral_e1, optimal_threshold_qstar, rate_improvement,
};

fn main() -> cflit::Result<()> {
    let n = 5;
    let theta = 2.512; // P2 = 1, 6 dB rate gap, noise 0.1
    let q = 2.754; // threshold at the reference operating point

    println!("E1(1) = {:.10} (kernel of the closed forms)", exp_integral_e1(1.0)?);
    println!("\nN = {n}, theta = {theta}, q = {q}:");
    let r_threshold = analytic_rate_threshold(n, theta, q)?;
    let r_random = analytic_rate_rsca(n, theta, q)?;
    println!("  threshold rule   : {r_threshold:.6} bits/RB");
    println!("  random at same p : {r_random:.6} bits/RB");
    println!("  improvement      : {:.6} bits/RB", rate_improvement(n, theta, q)?);

    let q_star = optimal_threshold_qstar(n, theta)?;
    println!("\nimprovement-maximizing threshold q* = {q_star:.4}");
    println!("{:>6} {:>12} {:>12} {:>12}", "q", "threshold", "random", "improvement");
    for i in 0..=10 {
        let qq = q_star * i as f64 / 5.0;
        println!(
            "{qq:>6.2} {:>12.6} {:>12.6} {:>12.6}",
            analytic_rate_threshold(n, theta, qq)?,
            analytic_rate_rsca(n, theta, qq)?,
            rate_improvement(n, theta, qq)?
        );
    }
    Ok(())
}
