//! Deterministic full-batch optimization of the regularized loss, and
//! empirical estimation of the constants that feed the convergence bound.

use super::dataset::{DeviceData, SyntheticDataset};
use super::logistic::{gradient, hessian_vector_product, loss, softmax_table, FEATURES, MODEL_DIM};
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Constants of the learning task as used by the convergence bound.
#[derive(Debug, Clone, Copy)]
pub struct LearningParams {
    /// Strong convexity constant; equals the regularization weight.
    pub mu: f64,
    /// Smoothness constant: regularizer plus the estimated spectral norm of
    /// the data-fit Hessian at the optimum.
    pub lipschitz: f64,
    /// Data heterogeneity `F* - sum_k rho_k F_k*`.
    pub hetero: f64,
    /// Gradient bound enforced by clipping.
    pub grad_bound: f64,
}

/// Everything `estimate_learning_params` measures about a dataset.
#[derive(Debug, Clone)]
pub struct TaskEstimate {
    pub params: LearningParams,
    /// Minimum of the pooled loss.
    pub f_star: f64,
    /// Its minimizer.
    pub w_star: Vec<f64>,
    /// Minimum of each device's local loss.
    pub local_f_star: Vec<f64>,
}

impl TaskEstimate {
    /// Squared distance from the all-zeros starting model to the optimum.
    pub fn init_dist_sq(&self) -> f64 {
        self.w_star.iter().map(|w| w * w).sum()
    }
}

/// Safe upper bound on the smoothness constant of the pooled loss: the
/// softmax curvature is at most 1/2, so `L <= reg + 0.5 * lambda_max(G)`
/// with `G` the second-moment matrix of bias-augmented features;
/// `lambda_max` is bounded by the largest Gershgorin row sum.
fn step_lipschitz_bound(devices: &[DeviceData], reg: f64) -> f64 {
    const AUG: usize = FEATURES + 1;
    let mut moments = vec![0.0f64; AUG * AUG];
    let mut total = 0usize;
    for dev in devices {
        for i in 0..dev.len() {
            let (x, _) = dev.sample(i);
            for a in 0..FEATURES {
                let xa = x[a];
                for b in 0..FEATURES {
                    moments[a * AUG + b] += xa * x[b];
                }
                moments[a * AUG + FEATURES] += xa;
                moments[FEATURES * AUG + a] += xa;
            }
            moments[FEATURES * AUG + FEATURES] += 1.0;
            total += 1;
        }
    }
    let scale = 1.0 / total.max(1) as f64;
    let gersh = (0..AUG)
        .map(|r| moments[r * AUG..(r + 1) * AUG].iter().map(|m| (m * scale).abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    reg + 0.5 * gersh
}

/// Minimizes the pooled regularized loss from the origin by accelerated
/// gradient descent until the gradient norm falls below `tolerance`.
pub fn estimate_optimum(devices: &[DeviceData], reg: f64, tolerance: f64) -> Result<(f64, Vec<f64>)> {
    estimate_optimum_from(vec![0.0; MODEL_DIM], devices, reg, tolerance)
}

/// As [`estimate_optimum`] but from a caller-chosen starting point.
pub fn estimate_optimum_from(
    start: Vec<f64>,
    devices: &[DeviceData],
    reg: f64,
    tolerance: f64,
) -> Result<(f64, Vec<f64>)> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tolerance}")));
    }
    if !(reg > 0.0) {
        return Err(Error::InvalidConfig(
            "the optimum estimator requires a positive regularizer for strong convexity".into(),
        ));
    }
    let lipschitz = step_lipschitz_bound(devices, reg);
    let step = 1.0 / lipschitz;
    let kappa = lipschitz / reg;
    let beta = (kappa.sqrt() - 1.0) / (kappa.sqrt() + 1.0);

    let mut x = start;
    let mut y = x.clone();
    const MAX_ITERS: usize = 500_000;
    for _ in 0..MAX_ITERS {
        let g = gradient(&y, devices, reg)?;
        let g_norm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if g_norm <= tolerance {
            let value = loss(&y, devices, reg)?;
            return Ok((value, y));
        }
        let mut restart_dot = 0.0;
        let mut x_next = Vec::with_capacity(MODEL_DIM);
        for i in 0..MODEL_DIM {
            let xi = y[i] - step * g[i];
            restart_dot += g[i] * (xi - x[i]);
            x_next.push(xi);
        }
        if restart_dot > 0.0 {
            // Momentum points uphill; restart it.
            y = x_next.clone();
        } else {
            for i in 0..MODEL_DIM {
                y[i] = x_next[i] + beta * (x_next[i] - x[i]);
            }
        }
        x = x_next;
    }
    let g = gradient(&x, devices, reg)?;
    let g_norm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    Err(Error::Convergence(format!(
        "gradient norm {g_norm} after {MAX_ITERS} iterations (target {tolerance})"
    )))
}

/// Spectral norm of the unregularized Hessian at `point` by power iteration
/// on Hessian-vector products.
fn hessian_spectral_norm(point: &[f64], devices: &[DeviceData], iterations: usize) -> Result<f64> {
    let probs = softmax_table(point, devices);
    let mut rng = Stream::new(0x9d5f);
    let mut v: Vec<f64> = (0..MODEL_DIM).map(|_| rng.next_normal()).collect();
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let hv = hessian_vector_product(&probs, devices, &v)?;
        lambda = hv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if lambda < 1e-300 {
            return Ok(0.0);
        }
        v = hv.into_iter().map(|x| x / lambda).collect();
    }
    Ok(lambda)
}

/// Estimates (mu, L, Gamma, G) for a dataset: mu is the regularizer, L adds
/// the measured Hessian spectral norm at the optimum, Gamma compares the
/// global optimum against the size-weighted local optima, and G is the
/// configured clipping threshold.
pub fn estimate_learning_params(
    dataset: &SyntheticDataset,
    reg: f64,
    clip: f64,
    tolerance: f64,
) -> Result<TaskEstimate> {
    if !(clip > 0.0) {
        return Err(Error::InvalidConfig(format!("clip must be positive, got {clip}")));
    }
    let (f_star, w_star) = estimate_optimum(&dataset.devices, reg, tolerance)?;
    let weights = dataset.weights();
    let mut local_f_star = Vec::with_capacity(dataset.devices.len());
    for dev in &dataset.devices {
        let (f_k, _) = estimate_optimum(std::slice::from_ref(dev), reg, tolerance)?;
        local_f_star.push(f_k);
    }
    let weighted_local: f64 = weights.iter().zip(&local_f_star).map(|(&w, &f)| w * f).sum();
    // Nonnegative by definition; clamp the solver's tolerance-level residue.
    let hetero = (f_star - weighted_local).max(0.0);
    let lipschitz = reg + hessian_spectral_norm(&w_star, &dataset.devices, 100)?;
    Ok(TaskEstimate {
        params: LearningParams {
            mu: reg,
            lipschitz,
            hetero,
            grad_bound: clip,
        },
        f_star,
        w_star,
        local_f_star,
    })
}
