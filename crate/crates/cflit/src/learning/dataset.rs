//! Synthetic heterogeneous classification data.
//!
//! Device k draws a private softmax generator: label weights and biases with
//! entries N(u_k, 1), u_k ~ N(0, alpha), and feature coordinate j (1-based)
//! distributed N(v_{k,j}, 1/j^1.2) with per-coordinate means v_{k,j} ~
//! N(B_k, 1), B_k ~ N(0, beta).
//! `alpha` controls model heterogeneity across devices, `beta` data
//! heterogeneity. Device sizes follow a power law, rescaled to the requested
//! total.

use serde::{Deserialize, Serialize};

use super::logistic::{CLASSES, FEATURES};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Stream};

/// Samples held by one device: row-major `n x FEATURES` features and integer
/// labels in `0..CLASSES`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceData {
    pub features: Vec<f64>,
    pub labels: Vec<u8>,
}

impl DeviceData {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn sample(&self, i: usize) -> (&[f64], u8) {
        (&self.features[i * FEATURES..(i + 1) * FEATURES], self.labels[i])
    }
}

/// A full federation of device datasets plus the generator settings that
/// produced it, so snapshots are self-describing and replayable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub alpha: f64,
    pub beta: f64,
    pub power_law_exponent: f64,
    pub seed: u64,
    pub devices: Vec<DeviceData>,
}

impl SyntheticDataset {
    pub fn total_samples(&self) -> usize {
        self.devices.iter().map(|d| d.len()).sum()
    }

    /// Aggregation weights rho_k = D_k / D; they sum to one.
    pub fn weights(&self) -> Vec<f64> {
        let total = self.total_samples() as f64;
        self.devices.iter().map(|d| d.len() as f64 / total).collect()
    }

    /// Serializes the dataset as self-describing JSON.
    pub fn save<W: std::io::Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self).map_err(|e| Error::Numeric(format!("dataset serialization failed: {e}")))
    }

    pub fn load<R: std::io::Read>(r: R) -> Result<Self> {
        serde_json::from_reader(r).map_err(|e| Error::ConfigParse(format!("dataset snapshot: {e}")))
    }
}

/// Draws per-device sample counts from a Pareto power law, floors them at
/// `min_size`, and rescales so they sum to `total` exactly.
pub fn power_law_sizes(
    k_devices: usize,
    total: usize,
    exponent: f64,
    min_size: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if k_devices == 0 {
        return Err(Error::InvalidConfig("need at least one device".into()));
    }
    if !(exponent > 0.0) {
        return Err(Error::InvalidConfig(format!("power-law exponent must be positive, got {exponent}")));
    }
    if total < k_devices * min_size.max(1) {
        return Err(Error::InvalidConfig(format!(
            "total = {total} cannot give {k_devices} devices at least {} samples each",
            min_size.max(1)
        )));
    }
    let min_size = min_size.max(1);
    let mut rng = Stream::new(derive_seed(seed, &[0x5a]));
    let raw: Vec<f64> = (0..k_devices).map(|_| rng.next_unit().powf(-1.0 / exponent)).collect();
    let raw_total: f64 = raw.iter().sum();

    // Largest-remainder apportionment keeps the sum exact.
    let mut sizes: Vec<usize> = Vec::with_capacity(k_devices);
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(k_devices);
    let mut assigned = 0usize;
    for (i, r) in raw.iter().enumerate() {
        let exactly = r / raw_total * total as f64;
        let floor = exactly.floor() as usize;
        sizes.push(floor);
        assigned += floor;
        remainders.push((exactly - floor as f64, i));
    }
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take(total - assigned) {
        sizes[i] += 1;
    }

    // Enforce the floor by taking from the largest entries.
    loop {
        let deficit: usize = sizes.iter().map(|&s| min_size.saturating_sub(s)).sum();
        if deficit == 0 {
            break;
        }
        for s in sizes.iter_mut() {
            if *s < min_size {
                *s = min_size;
            }
        }
        let mut to_remove = deficit;
        while to_remove > 0 {
            let (idx, _) = sizes
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .unwrap();
            if sizes[idx] <= min_size {
                unreachable!("feasibility was checked up front");
            }
            let spare = sizes[idx] - min_size;
            let take = spare.min(to_remove);
            sizes[idx] -= take;
            to_remove -= take;
        }
    }
    debug_assert_eq!(sizes.iter().sum::<usize>(), total);
    Ok(sizes)
}

/// Generates a synthetic federation. Deterministic for a fixed seed; every
/// device has its own derived stream so the draw order is stable under
/// changes elsewhere.
pub fn generate_synthetic(
    alpha: f64,
    beta: f64,
    k_devices: usize,
    total_samples: usize,
    power_law_exponent: f64,
    seed: u64,
) -> Result<SyntheticDataset> {
    if k_devices == 0 {
        return Err(Error::InvalidConfig("need at least one device".into()));
    }
    if total_samples < k_devices {
        return Err(Error::InvalidConfig(format!(
            "total_samples = {total_samples} is below the device count {k_devices}"
        )));
    }
    if alpha < 0.0 || beta < 0.0 {
        return Err(Error::InvalidConfig("heterogeneity scalars must be nonnegative".into()));
    }
    // Keep the default mini-batch feasible when the total allows it.
    let min_size = (total_samples / k_devices).clamp(1, 32);
    let sizes = power_law_sizes(k_devices, total_samples, power_law_exponent, min_size, derive_seed(seed, &[1]))?;

    let mut devices = Vec::with_capacity(k_devices);
    for (k, &d_k) in sizes.iter().enumerate() {
        let mut rng = Stream::new(derive_seed(seed, &[2, k as u64]));
        let u_k = rng.next_normal() * alpha.sqrt();
        let b_k = rng.next_normal() * beta.sqrt();
        // Per-coordinate feature means around the device offset B_k.
        let v_k: Vec<f64> = (0..FEATURES).map(|_| b_k + rng.next_normal()).collect();

        let mut gen_w = [0.0; CLASSES * FEATURES];
        for w in gen_w.iter_mut() {
            *w = u_k + rng.next_normal();
        }
        let mut gen_b = [0.0; CLASSES];
        for b in gen_b.iter_mut() {
            *b = u_k + rng.next_normal();
        }

        let mut features = Vec::with_capacity(d_k * FEATURES);
        let mut labels = Vec::with_capacity(d_k);
        let stds: Vec<f64> = (1..=FEATURES).map(|j| (j as f64).powf(-0.6)).collect();
        for _ in 0..d_k {
            let start = features.len();
            for (mean, &std) in v_k.iter().zip(&stds) {
                features.push(mean + std * rng.next_normal());
            }
            let x = &features[start..start + FEATURES];
            let mut best = f64::NEG_INFINITY;
            let mut label = 0u8;
            for c in 0..CLASSES {
                let mut z = gen_b[c];
                for (j, &xj) in x.iter().enumerate() {
                    z += gen_w[c * FEATURES + j] * xj;
                }
                if z > best {
                    best = z;
                    label = c as u8;
                }
            }
            labels.push(label);
        }
        devices.push(DeviceData { features, labels });
    }
    Ok(SyntheticDataset {
        alpha,
        beta,
        power_law_exponent,
        seed,
        devices,
    })
}
