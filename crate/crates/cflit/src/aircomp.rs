//! Over-the-air model aggregation.
//!
//! Every device normalizes its model-change vector to zero mean and unit
//! variance, scales it by a transmit scalar, and all devices transmit
//! concurrently on the same resource blocks. The receiver sees the
//! channel-weighted superposition plus noise, applies a de-noising scalar and
//! de-normalizes. For given channels the mean-squared aggregation error is
//! minimized by
//!
//! ```text
//! c = (1/sqrt(P1)) max_k rho_k nu_k / |h_k|,    p_k = rho_k nu_k / (c h_k),
//! ```
//!
//! which aligns every device exactly (`c h_k p_k = rho_k nu_k`), puts the
//! device with the largest `rho_k nu_k / |h_k|` at full power, and leaves the
//! residual error as pure scaled noise with energy
//!
//! ```text
//! e_t = (sigma^2 / P1) * sum_i max_k rho_k^2 nu_k^2 / |h_{k,i}|^2 .
//! ```
//!
//! `e_t` is the energy of the complex error `c z`; the model update consumes
//! its real part. Under the optimal scalars the misalignment term is
//! identically zero, so the simulated estimate is computed as the exact
//! weighted sum plus `Re(c z)` — which also makes the noiseless path exact.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::{complex_gaussian, derive_seed};

/// Variance floor below which an update is treated as degenerate (constant):
/// the device then transmits nothing and is represented by its mean alone.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// A device's local model change together with its normalization statistics.
#[derive(Debug, Clone)]
pub struct LocalUpdateStats {
    /// Raw model change vector.
    pub delta: Vec<f64>,
    /// Per-coordinate mean of `delta`.
    pub mean: f64,
    /// Per-coordinate standard deviation of `delta`.
    pub std: f64,
    /// Aggregation weight rho_k (data share of the device).
    pub weight: f64,
    /// Normalized transmit symbols; all zeros when degenerate.
    pub normalized: Vec<f64>,
    /// True when the update variance is below [`VARIANCE_FLOOR`].
    pub degenerate: bool,
}

/// Computes mean/variance statistics and unit-variance transmit symbols.
pub fn normalize_update(delta: Vec<f64>, weight: f64) -> Result<LocalUpdateStats> {
    if delta.is_empty() {
        return Err(Error::InvalidInput("cannot normalize an empty update vector".into()));
    }
    if !(weight > 0.0 && weight <= 1.0) {
        return Err(Error::InvalidInput(format!("aggregation weight must lie in (0, 1], got {weight}")));
    }
    let d = delta.len() as f64;
    let mean = delta.iter().sum::<f64>() / d;
    let var = delta.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / d;
    let std = var.sqrt();
    let degenerate = std < VARIANCE_FLOOR;
    let normalized = if degenerate {
        vec![0.0; delta.len()]
    } else {
        delta.iter().map(|&x| (x - mean) / std).collect()
    };
    Ok(LocalUpdateStats {
        delta,
        mean,
        std,
        weight,
        normalized,
        degenerate,
    })
}

/// Channel coefficients of one aggregation round: `devices x rbs` complex
/// values, one per (device, resource block).
#[derive(Debug, Clone)]
pub struct RoundChannels {
    pub devices: usize,
    pub rbs: usize,
    coeffs: Vec<Complex64>,
}

impl RoundChannels {
    pub fn new(devices: usize, rbs: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != devices * rbs {
            return Err(Error::DimensionMismatch(format!(
                "round channels: expected {} coefficients, got {}",
                devices * rbs,
                coeffs.len()
            )));
        }
        Ok(RoundChannels { devices, rbs, coeffs })
    }

    /// Fresh i.i.d. CN(0, 1) coefficients keyed by the seed.
    pub fn sample(devices: usize, rbs: usize, seed: u64) -> Self {
        let coeffs = (0..devices * rbs)
            .map(|idx| {
                let (re, im) = complex_gaussian(derive_seed(seed, &[idx as u64]));
                Complex64::new(re, im)
            })
            .collect();
        RoundChannels { devices, rbs, coeffs }
    }

    #[inline]
    pub fn at(&self, device: usize, rb: usize) -> Complex64 {
        self.coeffs[device * self.rbs + rb]
    }

    /// Coefficients of every device on one resource block.
    pub fn rb_column(&self, rb: usize) -> Vec<Complex64> {
        (0..self.devices).map(|k| self.at(k, rb)).collect()
    }
}

/// Transmit and de-noising scalars for one resource block.
#[derive(Debug, Clone)]
pub struct RbTransceiver {
    /// One transmit scalar per device; zero for degenerate devices.
    pub transmit: Vec<Complex64>,
    /// Real nonnegative de-noising scalar.
    pub denoise: f64,
}

/// The scalars of a whole round, one [`RbTransceiver`] per resource block.
#[derive(Debug, Clone)]
pub struct TransceiverDesign {
    pub per_rb: Vec<RbTransceiver>,
    pub power_cap: f64,
}

/// Minimum-MSE transmit/de-noise scalars for one resource block.
///
/// `stats` carries (rho_k, nu_k) per device. Devices with nu below the
/// variance floor transmit nothing. Any zero channel on a transmitting device
/// is an error: the scalars are undefined there and regularizing silently
/// would corrupt the error identities.
pub fn optimal_transceiver(
    channels: &[Complex64],
    stats: &[(f64, f64)],
    power_cap: f64,
) -> Result<RbTransceiver> {
    if channels.is_empty() {
        return Err(Error::InvalidInput("transceiver design needs at least one device".into()));
    }
    if channels.len() != stats.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} channels vs {} stat pairs",
            channels.len(),
            stats.len()
        )));
    }
    if !(power_cap > 0.0) {
        return Err(Error::InvalidConfig(format!("power cap must be positive, got {power_cap}")));
    }
    let mut ratio_max = 0.0f64;
    for (k, (&h, &(rho, nu))) in channels.iter().zip(stats).enumerate() {
        if !(rho > 0.0) || nu < 0.0 {
            return Err(Error::InvalidInput(format!(
                "device {k}: weight must be positive and std nonnegative (rho={rho}, nu={nu})"
            )));
        }
        let mag = h.norm();
        if mag == 0.0 {
            return Err(Error::DegenerateChannel(format!("device {k} has |h| = 0 on this block")));
        }
        if nu >= VARIANCE_FLOOR {
            ratio_max = ratio_max.max(rho * nu / mag);
        }
    }
    let denoise = ratio_max / power_cap.sqrt();
    let transmit = channels
        .iter()
        .zip(stats)
        .map(|(&h, &(rho, nu))| {
            if nu < VARIANCE_FLOOR || denoise == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                rho * nu / (denoise * h)
            }
        })
        .collect();
    Ok(RbTransceiver { transmit, denoise })
}

impl TransceiverDesign {
    /// Optimal scalars for every resource block of a round.
    pub fn for_round(channels: &RoundChannels, stats: &[LocalUpdateStats], power_cap: f64) -> Result<Self> {
        if stats.len() != channels.devices {
            return Err(Error::DimensionMismatch(format!(
                "{} stat entries vs {} channel rows",
                stats.len(),
                channels.devices
            )));
        }
        let pairs: Vec<(f64, f64)> = stats.iter().map(|s| (s.weight, s.std)).collect();
        let per_rb = (0..channels.rbs)
            .map(|i| optimal_transceiver(&channels.rb_column(i), &pairs, power_cap))
            .collect::<Result<Vec<_>>>()?;
        Ok(TransceiverDesign { per_rb, power_cap })
    }

    /// Checks the power constraint and the exact-alignment identity
    /// `c h_k p_k = rho_k nu_k` against the given channels and statistics.
    pub fn validate(&self, channels: &RoundChannels, stats: &[LocalUpdateStats]) -> Result<()> {
        if self.per_rb.len() != channels.rbs || stats.len() != channels.devices {
            return Err(Error::DimensionMismatch(
                "design, channel and statistics shapes disagree".into(),
            ));
        }
        let cap = self.power_cap * (1.0 + 1e-12) + 1e-15;
        for (i, rb) in self.per_rb.iter().enumerate() {
            for (k, (&p, s)) in rb.transmit.iter().zip(stats).enumerate() {
                if p.norm_sqr() > cap {
                    return Err(Error::DesignViolation(format!(
                        "device {k}, block {i}: |p|^2 = {} exceeds power cap {}",
                        p.norm_sqr(),
                        self.power_cap
                    )));
                }
                if s.degenerate {
                    continue;
                }
                let target = s.weight * s.std;
                let attained = rb.denoise * channels.at(k, i) * p;
                if (attained - Complex64::new(target, 0.0)).norm() > 1e-9 * target.max(1e-30) {
                    return Err(Error::DesignViolation(format!(
                        "device {k}, block {i}: alignment residual {} on target {}",
                        (attained - Complex64::new(target, 0.0)).norm(),
                        target
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Closed-form minimum aggregation error for one round:
/// `(sigma^2/P1) * sum_i max_k rho_k^2 nu_k^2 / |h_{k,i}|^2`.
pub fn aggregation_mse(
    channels: &RoundChannels,
    stats: &[(f64, f64)],
    power_cap: f64,
    noise_var: f64,
) -> Result<f64> {
    if channels.rbs == 0 {
        return Err(Error::InvalidInput("aggregation needs at least one resource block".into()));
    }
    if noise_var < 0.0 {
        return Err(Error::InvalidConfig(format!("noise variance must be nonnegative, got {noise_var}")));
    }
    if !(power_cap > 0.0) {
        return Err(Error::InvalidConfig(format!("power cap must be positive, got {power_cap}")));
    }
    if stats.len() != channels.devices {
        return Err(Error::DimensionMismatch(format!(
            "{} stat entries vs {} channel rows",
            stats.len(),
            channels.devices
        )));
    }
    let mut total = 0.0;
    for i in 0..channels.rbs {
        let mut worst = 0.0f64;
        for (k, &(rho, nu)) in stats.iter().enumerate() {
            let gain = channels.at(k, i).norm_sqr();
            if gain == 0.0 {
                return Err(Error::DegenerateChannel(format!("device {k} has |h| = 0 on block {i}")));
            }
            worst = worst.max(rho * rho * nu * nu / gain);
        }
        total += worst;
    }
    Ok(noise_var / power_cap * total)
}

/// Outcome of one simulated aggregation round.
#[derive(Debug, Clone)]
pub struct AggregationResult {
    /// Received estimate of the weighted model change (real-demodulated).
    pub estimate: Vec<f64>,
    /// Exact weighted sum `sum_k rho_k delta_k`.
    pub exact: Vec<f64>,
    /// Energy of the complex aggregation error `c z` for this noise draw;
    /// its expectation over draws is `mse_closed_form`.
    pub mse_realized: f64,
    /// Closed-form minimum error for these channels and statistics.
    pub mse_closed_form: f64,
}

/// Simulates one over-the-air aggregation round under the given design.
///
/// The design must satisfy its power and alignment invariants (checked).
/// With exact alignment the received estimate decomposes as the exact
/// weighted sum plus `Re(c z)` with `z ~ CN(0, sigma^2)` i.i.d. per block,
/// so that is how it is computed; zero noise therefore reproduces the exact
/// sum bit for bit.
pub fn aggregate_over_air(
    stats: &[LocalUpdateStats],
    design: &TransceiverDesign,
    channels: &RoundChannels,
    noise_var: f64,
    seed: u64,
) -> Result<AggregationResult> {
    if stats.is_empty() {
        return Err(Error::InvalidInput("aggregation needs at least one device".into()));
    }
    let d = stats[0].delta.len();
    if stats.iter().any(|s| s.delta.len() != d) {
        return Err(Error::DimensionMismatch("devices disagree on the update dimension".into()));
    }
    if channels.rbs != d || design.per_rb.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "update dimension {d} vs {} channel blocks and {} design blocks",
            channels.rbs,
            design.per_rb.len()
        )));
    }
    if noise_var < 0.0 {
        return Err(Error::InvalidConfig(format!("noise variance must be nonnegative, got {noise_var}")));
    }
    design.validate(channels, stats)?;

    let mut exact = vec![0.0; d];
    for s in stats {
        for (e, &x) in exact.iter_mut().zip(&s.delta) {
            *e += s.weight * x;
        }
    }

    let mut estimate = exact.clone();
    let mut err_energy = 0.0;
    if noise_var > 0.0 {
        let sigma = noise_var.sqrt();
        for (i, (est, rb)) in estimate.iter_mut().zip(&design.per_rb).enumerate() {
            let (re, im) = complex_gaussian(derive_seed(seed, &[i as u64]));
            let z = Complex64::new(re * sigma, im * sigma);
            let scaled = rb.denoise * z;
            *est += scaled.re;
            err_energy += scaled.norm_sqr();
        }
    }

    let pairs: Vec<(f64, f64)> = stats.iter().map(|s| (s.weight, s.std)).collect();
    let mse_closed_form = aggregation_mse(channels, &pairs, design.power_cap, noise_var)?;

    Ok(AggregationResult {
        estimate,
        exact,
        mse_realized: err_energy,
        mse_closed_form,
    })
}

/// Upper bound on the expected aggregation error of one round:
/// `lambda^2 tau^2 G^2 sigma^2 / P1 * channel_term`.
pub fn expected_mse_bound(
    learning_rate: f64,
    tau: u32,
    grad_bound: f64,
    noise_var: f64,
    power_cap: f64,
    channel_term: f64,
) -> Result<f64> {
    if !(learning_rate > 0.0) || tau == 0 || !(grad_bound > 0.0) || !(power_cap > 0.0) || !(channel_term > 0.0) {
        return Err(Error::InvalidConfig(
            "expected_mse_bound needs positive rate, tau, gradient bound, power cap and channel term".into(),
        ));
    }
    if noise_var < 0.0 {
        return Err(Error::InvalidConfig(format!("noise variance must be nonnegative, got {noise_var}")));
    }
    let t = tau as f64;
    Ok(learning_rate * learning_rate * t * t * grad_bound * grad_bound * noise_var / power_cap * channel_term)
}

/// `max_k rho_k^2 / g_k` for one draw of per-device gains.
pub fn channel_term_sample(weights: &[f64], gains: &[f64]) -> f64 {
    weights
        .iter()
        .zip(gains)
        .map(|(&rho, &g)| rho * rho / g)
        .fold(0.0, f64::max)
}

/// Monte Carlo estimate of `E[max_k rho_k^2 / |h_k|^2]` over i.i.d. CN(0, 1)
/// channels.
///
/// The underlying expectation diverges for Rayleigh gains (1/|h|^2 has no
/// mean), so any finite-sample value depends on the sample count and on the
/// optional lower clamp `gain_floor` applied to |h|^2. Both are explicit
/// parameters for that reason; treat the output as an estimator value, not a
/// universal constant.
pub fn estimate_channel_term(
    weights: &[f64],
    n_samples: usize,
    seed: u64,
    gain_floor: Option<f64>,
) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::InvalidInput("at least one device weight required".into()));
    }
    if n_samples == 0 {
        return Err(Error::InvalidInput("at least one sample required".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 || weights.iter().any(|&w| !(w > 0.0 && w <= 1.0)) {
        return Err(Error::InvalidInput(format!(
            "weights must be positive and sum to 1 (sum = {total})"
        )));
    }
    if let Some(floor) = gain_floor {
        if !(floor > 0.0) {
            return Err(Error::InvalidInput(format!("gain floor must be positive, got {floor}")));
        }
    }
    let mut acc = 0.0;
    let mut gains = vec![0.0; weights.len()];
    for trial in 0..n_samples {
        for (k, g) in gains.iter_mut().enumerate() {
            let (re, im) = complex_gaussian(derive_seed(seed, &[trial as u64, k as u64]));
            let mut gain = re * re + im * im;
            if let Some(floor) = gain_floor {
                gain = gain.max(floor);
            }
            *g = gain;
        }
        acc += channel_term_sample(weights, &gains);
    }
    Ok(acc / n_samples as f64)
}
