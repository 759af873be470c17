//! Clipped local SGD on one device.

use super::dataset::DeviceData;
use super::logistic::{accumulate_outer, clip_to_norm, CLASSES, FEATURES, MODEL_DIM};
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Runs `tau` clipped mini-batch SGD steps from the global model and returns
/// the local model change `w_after - w_before`.
///
/// Mini-batches are drawn uniformly without replacement within a pass: a
/// fresh permutation of the device's samples is consumed in consecutive
/// chunks of `batch`, and a new permutation starts whenever fewer than
/// `batch` samples remain. Each stochastic gradient (cross-entropy plus the
/// regularizer term) is clipped to norm `clip` before the step, so the
/// change always satisfies `||delta|| <= lr * tau * clip`.
#[allow(clippy::too_many_arguments)]
pub fn local_sgd(
    global_weights: &[f64],
    device: &DeviceData,
    tau: u32,
    batch: usize,
    learning_rate: f64,
    clip: f64,
    reg: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if global_weights.len() != MODEL_DIM {
        return Err(Error::DimensionMismatch(format!(
            "model vector has length {}, expected {MODEL_DIM}",
            global_weights.len()
        )));
    }
    if tau == 0 {
        return Err(Error::InvalidInput("tau must be at least 1".into()));
    }
    if batch == 0 || batch > device.len() {
        return Err(Error::InvalidConfig(format!(
            "batch size {batch} invalid for a device with {} samples",
            device.len()
        )));
    }
    if learning_rate < 0.0 || !(clip > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "learning rate must be nonnegative and clip positive (lr={learning_rate}, clip={clip})"
        )));
    }

    let mut rng = Stream::new(seed);
    let mut order: Vec<usize> = (0..device.len()).collect();
    rng.shuffle(&mut order);
    let mut cursor = 0usize;

    let mut w = global_weights.to_vec();
    let mut grad = vec![0.0; MODEL_DIM];
    let mut z = [0.0; CLASSES];
    for _ in 0..tau {
        if cursor + batch > device.len() {
            rng.shuffle(&mut order);
            cursor = 0;
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        for &idx in &order[cursor..cursor + batch] {
            let (x, y) = device.sample(idx);
            for c in 0..CLASSES {
                let row = &w[c * FEATURES..(c + 1) * FEATURES];
                let mut s = w[CLASSES * FEATURES + c];
                for (wj, xj) in row.iter().zip(x) {
                    s += wj * xj;
                }
                z[c] = s;
            }
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in z.iter_mut() {
                *v = (*v - m).exp();
                sum += *v;
            }
            for v in z.iter_mut() {
                *v /= sum;
            }
            z[y as usize] -= 1.0;
            accumulate_outer(&mut grad, &z, x);
        }
        cursor += batch;
        let scale = 1.0 / batch as f64;
        for (g, &wi) in grad.iter_mut().zip(&w) {
            *g = *g * scale + reg * wi;
        }
        clip_to_norm(&mut grad, clip);
        for (wi, &g) in w.iter_mut().zip(&grad) {
            *wi -= learning_rate * g;
        }
    }

    Ok(w.iter().zip(global_weights).map(|(a, b)| a - b).collect())
}
