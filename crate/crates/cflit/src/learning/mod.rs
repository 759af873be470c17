//! The federated learning task: a regularized multinomial logistic regression
//! on synthetic heterogeneous data, trained by clipped local SGD with
//! periodic global aggregation.
//!
//! The model is a 10-class softmax layer over 60 features, flattened to a
//! 610-dimensional parameter vector (10x60 weights followed by 10 biases).

mod dataset;
mod logistic;
mod optimum;
mod sgd;

pub use dataset::{generate_synthetic, power_law_sizes, DeviceData, SyntheticDataset};
pub use logistic::{clip_to_norm, gradient, hessian_vector_product, loss, FEATURES, CLASSES, MODEL_DIM};
pub use optimum::{estimate_learning_params, estimate_optimum, estimate_optimum_from, LearningParams, TaskEstimate};
pub use sgd::local_sgd;

use crate::error::{Error, Result};

/// Learning-rate schedule over global rounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    /// `lambda_t = base * gamma / (gamma + t)`; the empirically tuned decay
    /// used by the simulation defaults.
    BaseDecay { base: f64, gamma: f64 },
    /// `lambda_t = 8 / (mu * tau * (gamma + t))`; the schedule under which
    /// the convergence bound is proved.
    BoundDriven { mu: f64, tau: u32, gamma: f64 },
}

impl LrSchedule {
    pub fn rate(&self, round: u64) -> f64 {
        match *self {
            LrSchedule::BaseDecay { base, gamma } => base * gamma / (gamma + round as f64),
            LrSchedule::BoundDriven { mu, tau, gamma } => 8.0 / (mu * tau as f64 * (gamma + round as f64)),
        }
    }
}

/// Global model with its round counter and learning-rate schedule.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub weights: Vec<f64>,
    pub round: u64,
    pub schedule: LrSchedule,
}

impl ModelState {
    /// Fresh model at the origin.
    pub fn new(dim: usize, schedule: LrSchedule) -> Self {
        ModelState {
            weights: vec![0.0; dim],
            round: 0,
            schedule,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.schedule.rate(self.round)
    }
}

/// Applies a received aggregate to the global model: `w += estimate`, round
/// counter advances, and the next learning rate follows from the schedule.
pub fn global_update(state: &mut ModelState, estimate: &[f64]) -> Result<()> {
    if estimate.len() != state.weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "update of length {} applied to model of length {}",
            estimate.len(),
            state.weights.len()
        )));
    }
    for (w, &r) in state.weights.iter_mut().zip(estimate) {
        *w += r;
    }
    state.round += 1;
    Ok(())
}

/// Weighted moving average of the model history with weights `(gamma + t)^2`.
pub fn weighted_average(history: &[Vec<f64>], gamma: f64) -> Result<Vec<f64>> {
    if history.is_empty() {
        return Err(Error::InvalidInput("weighted average of an empty model history".into()));
    }
    let dim = history[0].len();
    let mut acc = WeightedAverage::new(dim, gamma);
    for w in history {
        if w.len() != dim {
            return Err(Error::DimensionMismatch("model history entries disagree in length".into()));
        }
        acc.push(w);
    }
    Ok(acc.average())
}

/// Streaming form of [`weighted_average`] so a training loop can follow the
/// averaged iterate without retaining the history.
#[derive(Debug, Clone)]
pub struct WeightedAverage {
    sum: Vec<f64>,
    total_weight: f64,
    gamma: f64,
    t: u64,
}

impl WeightedAverage {
    pub fn new(dim: usize, gamma: f64) -> Self {
        WeightedAverage {
            sum: vec![0.0; dim],
            total_weight: 0.0,
            gamma,
            t: 0,
        }
    }

    pub fn push(&mut self, weights: &[f64]) {
        let eta = (self.gamma + self.t as f64).powi(2);
        for (s, &w) in self.sum.iter_mut().zip(weights) {
            *s += eta * w;
        }
        self.total_weight += eta;
        self.t += 1;
    }

    pub fn average(&self) -> Vec<f64> {
        self.sum.iter().map(|&s| s / self.total_weight).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn schedule_values() {
        let s = LrSchedule::BaseDecay { base: 0.05, gamma: 1000.0 };
        assert_relative_eq!(s.rate(0), 0.05, max_relative = 1e-12);
        assert_relative_eq!(s.rate(1000), 0.025, max_relative = 1e-12);
        let b = LrSchedule::BoundDriven { mu: 0.5, tau: 6, gamma: 1000.0 };
        assert_relative_eq!(b.rate(0), 8.0 / (0.5 * 6.0 * 1000.0), max_relative = 1e-12);
    }

    #[test]
    fn global_update_applies_and_advances() {
        let mut state = ModelState::new(3, LrSchedule::BaseDecay { base: 0.05, gamma: 1000.0 });
        global_update(&mut state, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(state.weights, [0.0; 3]);
        assert_eq!(state.round, 1);
        global_update(&mut state, &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(state.weights, vec![1.0, -2.0, 0.5]);
        assert!(global_update(&mut state, &[1.0]).is_err());
    }

    #[test]
    fn weighted_average_cases() {
        let w0 = vec![1.0, 2.0];
        assert_eq!(weighted_average(std::slice::from_ref(&w0), 1000.0).unwrap(), w0);

        // Identical entries average to themselves.
        let hist = vec![w0.clone(), w0.clone(), w0.clone()];
        let avg = weighted_average(&hist, 7.0).unwrap();
        for (a, b) in avg.iter().zip(&w0) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }

        // gamma = 1000, T = 2: (1000^2 w0 + 1001^2 w1) / (1000^2 + 1001^2).
        let w1 = vec![3.0, -1.0];
        let avg = weighted_average(&[w0.clone(), w1.clone()], 1000.0).unwrap();
        let s = 1000.0f64.powi(2) + 1001.0f64.powi(2);
        for i in 0..2 {
            let expected = (1000.0f64.powi(2) * w0[i] + 1001.0f64.powi(2) * w1[i]) / s;
            assert_relative_eq!(avg[i], expected, max_relative = 1e-12);
        }

        assert!(weighted_average(&[], 10.0).is_err());
    }

    #[test]
    fn streaming_average_matches_batch() {
        let hist: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, -(i as f64)]).collect();
        let batch = weighted_average(&hist, 3.0).unwrap();
        let mut acc = WeightedAverage::new(2, 3.0);
        for w in &hist {
            acc.push(w);
        }
        let streamed = acc.average();
        for (a, b) in batch.iter().zip(&streamed) {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
    }
}
