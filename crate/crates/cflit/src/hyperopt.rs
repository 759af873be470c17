//! Closed-form optimization of the learning hyper-parameters: the number of
//! local SGD steps per round (the computation-to-communication ratio) and the
//! number of aggregation rounds needed for a target optimality gap.
//!
//! For a mu-strongly-convex, L-smooth task with heterogeneity Gamma, gradient
//! bound G and aggregation-noise term `sigma^2/P1 * E[max_k rho_k^2/|h_k|^2]`,
//! the averaged iterate after T rounds satisfies
//!
//! ```text
//! gap(T) <= zeta(tau)/T + O(1/T^2),
//! zeta(tau) = (24/mu) [ (2 tau^2 + 1)/(3 tau) G^2 + 4 L Gamma / tau + G^2 sigma^2/P1 * term ]
//! ```
//!
//! Minimizing the tau-dependent part `psi(tau) = (2G^2/3) tau + (G^2 + 12 L
//! Gamma)/(3 tau)` over positive integers gives the optimal local-step count,
//! and the minimum round count for a gap target eps is `ceil(zeta(tau*) /
//! eps)`.

use crate::error::{Error, Result};

/// Inputs of the convergence bound.
#[derive(Debug, Clone, Copy)]
pub struct BoundParams {
    /// Strong convexity constant mu > 0.
    pub mu: f64,
    /// Smoothness constant L >= mu.
    pub lipschitz: f64,
    /// Data heterogeneity Gamma >= 0.
    pub hetero: f64,
    /// Gradient norm bound G (the clipping threshold).
    pub grad_bound: f64,
    /// Receiver noise variance sigma^2.
    pub noise_var: f64,
    /// Per-subcarrier transmit power cap P1.
    pub power_cap: f64,
    /// Estimate of E[max_k rho_k^2 / |h_k|^2].
    pub channel_term: f64,
    /// Learning-rate offset gamma; must be at least 16 L / mu.
    pub gamma: f64,
    /// E[ ||w_0 - w*||^2 ], used by the finite-horizon bound.
    pub init_dist_sq: f64,
}

impl BoundParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mu: f64,
        lipschitz: f64,
        hetero: f64,
        grad_bound: f64,
        noise_var: f64,
        power_cap: f64,
        channel_term: f64,
        gamma: f64,
        init_dist_sq: f64,
    ) -> Result<Self> {
        let params = BoundParams {
            mu,
            lipschitz,
            hetero,
            grad_bound,
            noise_var,
            power_cap,
            channel_term,
            gamma,
            init_dist_sq,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mu", self.mu),
            ("lipschitz", self.lipschitz),
            ("grad_bound", self.grad_bound),
            ("power_cap", self.power_cap),
            ("channel_term", self.channel_term),
            ("gamma", self.gamma),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.hetero < 0.0 || !self.hetero.is_finite() {
            return Err(Error::InvalidConfig(format!("hetero must be nonnegative, got {}", self.hetero)));
        }
        if self.noise_var < 0.0 || !self.noise_var.is_finite() {
            return Err(Error::InvalidConfig(format!("noise_var must be nonnegative, got {}", self.noise_var)));
        }
        if self.init_dist_sq < 0.0 || !self.init_dist_sq.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "init_dist_sq must be nonnegative, got {}",
                self.init_dist_sq
            )));
        }
        if self.lipschitz < self.mu {
            return Err(Error::InvalidConfig(format!(
                "lipschitz ({}) must be at least mu ({})",
                self.lipschitz, self.mu
            )));
        }
        if self.gamma < 16.0 * self.lipschitz / self.mu {
            return Err(Error::InvalidConfig(format!(
                "gamma = {} is below 16 L / mu = {}; the bound does not hold",
                self.gamma,
                16.0 * self.lipschitz / self.mu
            )));
        }
        Ok(())
    }

    /// The aggregation-noise constant `G^2 sigma^2 / P1 * channel_term`.
    fn noise_term(&self) -> f64 {
        self.grad_bound * self.grad_bound * self.noise_var / self.power_cap * self.channel_term
    }
}

fn check_tau(tau: u32) -> Result<()> {
    if tau == 0 {
        return Err(Error::InvalidInput("tau must be a positive integer".into()));
    }
    Ok(())
}

/// Per-round bound constant `zeta(tau)`; the asymptotic gap after T rounds is
/// `zeta(tau) / T`.
pub fn zeta(tau: u32, params: &BoundParams) -> Result<f64> {
    check_tau(tau)?;
    params.validate()?;
    let t = tau as f64;
    let g2 = params.grad_bound * params.grad_bound;
    let inner = (2.0 * t * t + 1.0) / (3.0 * t) * g2
        + 4.0 * params.lipschitz * params.hetero / t
        + params.noise_term();
    Ok(24.0 / params.mu * inner)
}

/// The tau-dependent part of `zeta`:
/// `psi(tau) = (2 G^2 / 3) tau + (G^2 + 12 L Gamma) / (3 tau)`.
pub fn psi(tau: u32, grad_bound: f64, lipschitz: f64, hetero: f64) -> Result<f64> {
    check_tau(tau)?;
    let t = tau as f64;
    let g2 = grad_bound * grad_bound;
    Ok(2.0 * g2 / 3.0 * t + (g2 + 12.0 * lipschitz * hetero) / (3.0 * t))
}

/// Real-valued minimizer of `psi` before integer rounding:
/// `max(1, sqrt(1/2 + 6 L Gamma / G^2))`.
pub fn tau_relax(grad_bound: f64, lipschitz: f64, hetero: f64) -> Result<f64> {
    if !(grad_bound > 0.0) {
        return Err(Error::InvalidInput(format!("grad_bound must be positive, got {grad_bound}")));
    }
    if hetero < 0.0 {
        return Err(Error::InvalidInput(format!("hetero must be nonnegative, got {hetero}")));
    }
    let relaxed = (0.5 + 6.0 * lipschitz * hetero / (grad_bound * grad_bound)).sqrt();
    Ok(relaxed.max(1.0))
}

/// Optimal integer local-step count: whichever of floor/ceil of the relaxed
/// minimizer gives the smaller `psi`, ties broken toward the smaller count.
pub fn optimal_tau(grad_bound: f64, lipschitz: f64, hetero: f64) -> Result<u32> {
    let relaxed = tau_relax(grad_bound, lipschitz, hetero)?;
    let lo = (relaxed.floor() as u32).max(1);
    let hi = (relaxed.ceil() as u32).max(1);
    if lo == hi {
        return Ok(lo);
    }
    let psi_lo = psi(lo, grad_bound, lipschitz, hetero)?;
    let psi_hi = psi(hi, grad_bound, lipschitz, hetero)?;
    Ok(if psi_lo <= psi_hi { lo } else { hi })
}

/// Minimum number of rounds with `zeta(tau)/T <= epsilon`, clamped to at
/// least one round.
pub fn optimal_t(tau_star: u32, epsilon: f64, params: &BoundParams) -> Result<u64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    let needed = (zeta(tau_star, params)? / epsilon).ceil();
    Ok((needed as u64).max(1))
}

/// Both forms of the gap bound at finite T.
#[derive(Debug, Clone, Copy)]
pub struct BoundValue {
    /// Exact finite-horizon right-hand side with `S_T = sum (gamma+t)^2`.
    pub finite: f64,
    /// Large-T expansion `zeta/T + 2 gamma zeta/T^2 + 3 mu gamma^3 D / (4 T^3)`.
    pub asymptotic: f64,
    /// Leading term `zeta(tau)/T`, the quantity the round count is sized by.
    pub leading: f64,
}

/// Evaluates the convergence bound at a finite horizon.
pub fn convergence_bound(t_rounds: u64, tau: u32, params: &BoundParams) -> Result<BoundValue> {
    check_tau(tau)?;
    params.validate()?;
    if t_rounds == 0 {
        return Err(Error::InvalidInput("round count must be positive".into()));
    }
    let t = t_rounds as f64;
    let gamma = params.gamma;
    // S_T = sum_{t=0}^{T-1} (gamma + t)^2 in closed form.
    let s_t = gamma * gamma * t + gamma * t * (t - 1.0) + t * (t - 1.0) * (2.0 * t - 1.0) / 6.0;
    let g2 = params.grad_bound * params.grad_bound;
    let tau_f = tau as f64;
    let bracket = (2.0 * tau_f * tau_f + 1.0) / (3.0 * tau_f) * g2
        + 4.0 * params.lipschitz * params.hetero / tau_f
        + params.noise_term();
    let finite = 8.0 * t * (t + 2.0 * gamma) / (params.mu * s_t) * bracket
        + params.mu * gamma.powi(3) / (4.0 * s_t) * params.init_dist_sq;
    let z = zeta(tau, params)?;
    let asymptotic = z / t
        + 2.0 * gamma * z / (t * t)
        + 3.0 * params.mu * gamma.powi(3) * params.init_dist_sq / (4.0 * t * t * t);
    Ok(BoundValue {
        finite,
        asymptotic,
        leading: z / t,
    })
}
