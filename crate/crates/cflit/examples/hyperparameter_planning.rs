//! Sizing the learning hyper-parameters from the convergence bound.
//!
//! Uses the reference constants (mu = 0.5, L = 10.25, Gamma = 0.639, G = 1,
//! sigma^2 = 0.1, P1 = 1, channel term 1.294) and prints the optimal
//! local-step count, the minimum round budget for a 0.34 gap target, and
//! the per-tau bound table.
//!
//! Run: `cargo run --release --example hyperparameter_planning`

use cflit::hyperopt::{convergence_bound, optimal_t, optimal_tau, psi, tau_relax, zeta, BoundParams};

fn main() -> cflit::Result<()> {
    let params = BoundParams::new(0.5, 10.25, 0.639, 1.0, 0.1, 1.0, 1.294, 1000.0, 4.0)?;
    let epsilon = 0.34;

    let relaxed = tau_relax(params.grad_bound, params.lipschitz, params.hetero)?;
    let tau_star = optimal_tau(params.grad_bound, params.lipschitz, params.hetero)?;
    let t_star = optimal_t(tau_star, epsilon, &params)?;
    println!("relaxed optimum tau  = {relaxed:.4}");
    println!("integer optimum tau* = {tau_star}");
    println!("round budget T*      = {t_star} for gap target {epsilon}");

    println!("\n{:>4} {:>10} {:>12} {:>10}", "tau", "psi(tau)", "zeta(tau)", "T(eps)");
    for tau in 1..=12u32 {
        let p = psi(tau, params.grad_bound, params.lipschitz, params.hetero)?;
        let z = zeta(tau, &params)?;
        let t = optimal_t(tau, epsilon, &params)?;
        let marker = if tau == tau_star { "  <- tau*" } else { "" };
        println!("{tau:>4} {p:>10.4} {z:>12.4} {t:>10}{marker}");
    }

    let bound = convergence_bound(t_star, tau_star, &params)?;
    println!("\nbound at (tau*, T*): leading {:.6}, three-term {:.6}, finite-horizon {:.6}",
        bound.leading, bound.asymptotic, bound.finite);
    Ok(())
}
