//! Regularized softmax regression: loss, gradient, and Hessian-vector
//! products over flattened 10x60 (+10 bias) parameter vectors.

use super::dataset::DeviceData;
use crate::error::{Error, Result};

pub const FEATURES: usize = 60;
pub const CLASSES: usize = 10;
/// Flattened parameter count: CLASSES x FEATURES weights plus CLASSES biases.
pub const MODEL_DIM: usize = CLASSES * FEATURES + CLASSES;

fn check_dim(weights: &[f64]) -> Result<()> {
    if weights.len() != MODEL_DIM {
        return Err(Error::DimensionMismatch(format!(
            "model vector has length {}, expected {MODEL_DIM}",
            weights.len()
        )));
    }
    Ok(())
}

fn total_len(devices: &[DeviceData]) -> Result<usize> {
    let total: usize = devices.iter().map(|d| d.len()).sum();
    if total == 0 {
        return Err(Error::InvalidInput("loss over an empty sample set".into()));
    }
    Ok(total)
}

#[inline]
fn logits(weights: &[f64], x: &[f64], out: &mut [f64; CLASSES]) {
    for c in 0..CLASSES {
        let row = &weights[c * FEATURES..(c + 1) * FEATURES];
        let mut z = weights[CLASSES * FEATURES + c];
        for (wj, xj) in row.iter().zip(x) {
            z += wj * xj;
        }
        out[c] = z;
    }
}

#[inline]
fn softmax_in_place(z: &mut [f64; CLASSES]) {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Mean cross-entropy over all samples of the given devices, plus
/// `reg/2 * ||w||^2`.
pub fn loss(weights: &[f64], devices: &[DeviceData], reg: f64) -> Result<f64> {
    check_dim(weights)?;
    let total = total_len(devices)?;
    let mut acc = 0.0;
    let mut z = [0.0; CLASSES];
    for dev in devices {
        for i in 0..dev.len() {
            let (x, y) = dev.sample(i);
            logits(weights, x, &mut z);
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln() + m;
            acc += lse - z[y as usize];
        }
    }
    let sq_norm: f64 = weights.iter().map(|w| w * w).sum();
    Ok(acc / total as f64 + 0.5 * reg * sq_norm)
}

/// Gradient of [`loss`] with respect to the flattened parameters.
pub fn gradient(weights: &[f64], devices: &[DeviceData], reg: f64) -> Result<Vec<f64>> {
    check_dim(weights)?;
    let total = total_len(devices)?;
    let mut grad = vec![0.0; MODEL_DIM];
    let mut z = [0.0; CLASSES];
    for dev in devices {
        for i in 0..dev.len() {
            let (x, y) = dev.sample(i);
            logits(weights, x, &mut z);
            softmax_in_place(&mut z);
            z[y as usize] -= 1.0;
            accumulate_outer(&mut grad, &z, x);
        }
    }
    let scale = 1.0 / total as f64;
    for (g, &w) in grad.iter_mut().zip(weights) {
        *g = *g * scale + reg * w;
    }
    Ok(grad)
}

/// Adds `err (x^T, 1)` into a flattened gradient accumulator.
#[inline]
pub(super) fn accumulate_outer(grad: &mut [f64], err: &[f64; CLASSES], x: &[f64]) {
    for c in 0..CLASSES {
        let e = err[c];
        if e == 0.0 {
            continue;
        }
        let row = &mut grad[c * FEATURES..(c + 1) * FEATURES];
        for (g, &xj) in row.iter_mut().zip(x) {
            *g += e * xj;
        }
        grad[CLASSES * FEATURES + c] += e;
    }
}

/// Per-sample softmax probabilities at a fixed parameter vector; reused by
/// repeated Hessian-vector products.
pub(super) fn softmax_table(weights: &[f64], devices: &[DeviceData]) -> Vec<[f64; CLASSES]> {
    let mut table = Vec::new();
    let mut z = [0.0; CLASSES];
    for dev in devices {
        for i in 0..dev.len() {
            let (x, _) = dev.sample(i);
            logits(weights, x, &mut z);
            softmax_in_place(&mut z);
            table.push(z);
        }
    }
    table
}

/// Hessian-vector product of the *unregularized* mean cross-entropy at the
/// point where `probs` was computed: for each sample,
/// `H v ~ (diag(p) - p p^T)(V x + c)` pushed back through the features.
pub fn hessian_vector_product(
    probs: &[[f64; CLASSES]],
    devices: &[DeviceData],
    direction: &[f64],
) -> Result<Vec<f64>> {
    check_dim(direction)?;
    let total = total_len(devices)?;
    if probs.len() != total {
        return Err(Error::DimensionMismatch(format!(
            "{} probability rows for {} samples",
            probs.len(),
            total
        )));
    }
    let mut out = vec![0.0; MODEL_DIM];
    let mut row_idx = 0;
    let mut u = [0.0; CLASSES];
    for dev in devices {
        for i in 0..dev.len() {
            let (x, _) = dev.sample(i);
            logits(direction, x, &mut u);
            let p = &probs[row_idx];
            let dot: f64 = p.iter().zip(&u).map(|(&pc, &uc)| pc * uc).sum();
            let mut s = [0.0; CLASSES];
            for (sc, (&pc, &uc)) in s.iter_mut().zip(p.iter().zip(&u)) {
                *sc = pc * (uc - dot);
            }
            accumulate_outer(&mut out, &s, x);
            row_idx += 1;
        }
    }
    let scale = 1.0 / total as f64;
    for o in out.iter_mut() {
        *o *= scale;
    }
    Ok(out)
}

/// Scales `v` so its Euclidean norm is at most `bound`; direction preserved.
pub fn clip_to_norm(v: &mut [f64], bound: f64) {
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > bound {
        let scale = bound / norm;
        for x in v.iter_mut() {
            *x *= scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::generate_synthetic;
    use approx::assert_relative_eq;

    #[test]
    fn loss_at_origin_is_log_num_classes() {
        let ds = generate_synthetic(1.0, 1.0, 2, 100, 1.5, 3).unwrap();
        let w = vec![0.0; MODEL_DIM];
        let l = loss(&w, &ds.devices, 0.0).unwrap();
        assert_relative_eq!(l, (CLASSES as f64).ln(), max_relative = 1e-12);
        // The regularizer vanishes at the origin.
        let l_reg = loss(&w, &ds.devices, 0.5).unwrap();
        assert_relative_eq!(l_reg, (CLASSES as f64).ln(), max_relative = 1e-12);
    }

    #[test]
    fn rejects_wrong_dimension() {
        let ds = generate_synthetic(1.0, 1.0, 1, 50, 1.5, 3).unwrap();
        assert!(loss(&[0.0; 10], &ds.devices, 0.0).is_err());
        assert!(gradient(&[0.0; 10], &ds.devices, 0.0).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let ds = generate_synthetic(1.0, 1.0, 1, 50, 1.5, 17).unwrap();
        let mut rng = crate::rng::Stream::new(4);
        let reg = 0.5;
        let h = 1e-6;
        let mut max_rel: f64 = 0.0;
        // Ten random points, probing a spread of coordinates at each:
        // weight rows and biases alike.
        for _ in 0..10 {
            let w: Vec<f64> = (0..MODEL_DIM).map(|_| 0.3 * rng.next_normal()).collect();
            let g = gradient(&w, &ds.devices, reg).unwrap();
            for idx in (0..MODEL_DIM).step_by(89) {
                let mut wp = w.clone();
                wp[idx] += h;
                let mut wm = w.clone();
                wm[idx] -= h;
                let fd = (loss(&wp, &ds.devices, reg).unwrap() - loss(&wm, &ds.devices, reg).unwrap()) / (2.0 * h);
                let denom = g[idx].abs().max(1e-8);
                max_rel = max_rel.max((fd - g[idx]).abs() / denom);
            }
        }
        assert!(max_rel < 1e-5, "max relative gradient error {max_rel}");
    }

    #[test]
    fn hvp_matches_gradient_differences() {
        let ds = generate_synthetic(1.0, 1.0, 1, 60, 1.5, 29).unwrap();
        let mut rng = crate::rng::Stream::new(6);
        let w: Vec<f64> = (0..MODEL_DIM).map(|_| 0.2 * rng.next_normal()).collect();
        let v: Vec<f64> = (0..MODEL_DIM).map(|_| rng.next_normal()).collect();
        let probs = softmax_table(&w, &ds.devices);
        let hv = hessian_vector_product(&probs, &ds.devices, &v).unwrap();
        let h = 1e-6;
        let wp: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let wm: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let gp = gradient(&wp, &ds.devices, 0.0).unwrap();
        let gm = gradient(&wm, &ds.devices, 0.0).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..MODEL_DIM {
            let fd = (gp[i] - gm[i]) / (2.0 * h);
            num += (fd - hv[i]) * (fd - hv[i]);
            den += fd * fd;
        }
        assert!((num / den).sqrt() < 1e-4, "relative HVP error {}", (num / den).sqrt());
    }

    #[test]
    fn clipping_contract() {
        let mut rng = crate::rng::Stream::new(12);
        for _ in 0..100 {
            let mut v: Vec<f64> = (0..20).map(|_| 3.0 * rng.next_normal()).collect();
            let before = v.clone();
            let norm_before: f64 = before.iter().map(|x| x * x).sum::<f64>().sqrt();
            clip_to_norm(&mut v, 1.0);
            let norm_after: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm_after - norm_before.min(1.0)).abs() < 1e-12);
            // Direction preserved.
            if norm_before > 1.0 {
                for (a, b) in v.iter().zip(&before) {
                    assert_relative_eq!(a * norm_before, *b, max_relative = 1e-9);
                }
            } else {
                assert_eq!(v, before);
            }
        }
    }
}
