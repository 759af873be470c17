//! Block-fading channel realizations and order statistics of the best
//! information-transfer channel gain.
//!
//! Channel coefficients are i.i.d. circularly-symmetric complex Gaussian
//! CN(0, 1) per (device, subcarrier, coherence block) and constant within a
//! block. The squared magnitude of a coefficient is therefore Exponential(1),
//! and the maximum gain over `n` devices on one resource block has
//!
//! ```text
//! CDF  F(x) = (1 - e^{-x})^n            x >= 0
//! PDF  f(x) = n e^{-x} (1 - e^{-x})^{n-1}
//! ```
//!
//! with quantile function `Q(p) = -ln(1 - p^{1/n})`. These distributions
//! drive the threshold-based online subcarrier allocator.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::{complex_gaussian, derive_seed, mix64};

/// Small-scale fading model for a channel grid.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FadingModel {
    /// Independent CN(0, 1) coefficients per (subcarrier, block). This is the
    /// model all closed-form analysis assumes.
    #[default]
    IidPerSubcarrier,
    /// Correlated subcarrier responses from a tapped delay line with an
    /// exponential power delay profile, normalized to unit average power.
    /// Useful for frequency-selective realism; the analytical rate formulas
    /// do not apply exactly under this model.
    TappedDelayLine { taps: usize },
}

/// Dimensions and coherence structure of a channel grid.
#[derive(Debug, Clone, Copy)]
pub struct ChannelConfig {
    pub devices: usize,
    pub subcarriers: usize,
    pub symbols: usize,
    /// Number of consecutive OFDM symbols sharing one fading realization.
    pub coherence_block_len: usize,
    pub fading: FadingModel,
}

impl ChannelConfig {
    pub fn new(devices: usize, subcarriers: usize, symbols: usize, coherence_block_len: usize) -> Self {
        ChannelConfig {
            devices,
            subcarriers,
            symbols,
            coherence_block_len,
            fading: FadingModel::IidPerSubcarrier,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.devices == 0 || self.subcarriers == 0 || self.symbols == 0 {
            return Err(Error::InvalidConfig(format!(
                "channel grid dimensions must be positive (devices={}, subcarriers={}, symbols={})",
                self.devices, self.subcarriers, self.symbols
            )));
        }
        if self.coherence_block_len == 0 {
            return Err(Error::InvalidConfig(
                "coherence_block_len must be at least 1 symbol".into(),
            ));
        }
        if let FadingModel::TappedDelayLine { taps } = self.fading {
            if taps == 0 {
                return Err(Error::InvalidConfig("tapped delay line needs at least 1 tap".into()));
            }
        }
        Ok(())
    }
}

/// A materialized grid of complex fading coefficients, immutable after
/// construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct ChannelGrid {
    devices: usize,
    subcarriers: usize,
    symbols: usize,
    coherence_block_len: usize,
    /// Index layout: `(device * subcarriers + subcarrier) * symbols + symbol`.
    coeffs: Vec<Complex64>,
}

impl ChannelGrid {
    pub fn devices(&self) -> usize {
        self.devices
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn coherence_block_len(&self) -> usize {
        self.coherence_block_len
    }

    #[inline]
    pub fn coeff(&self, device: usize, subcarrier: usize, symbol: usize) -> Complex64 {
        self.coeffs[(device * self.subcarriers + subcarrier) * self.symbols + symbol]
    }

    /// Squared magnitude of one coefficient.
    #[inline]
    pub fn gain(&self, device: usize, subcarrier: usize, symbol: usize) -> f64 {
        self.coeff(device, subcarrier, symbol).norm_sqr()
    }

    /// Copies all per-device gains into a symbol-major tensor.
    pub fn gain_tensor(&self) -> GainTensor {
        let mut gains = vec![0.0; self.devices * self.subcarriers * self.symbols];
        for s in 0..self.symbols {
            for m in 0..self.subcarriers {
                for n in 0..self.devices {
                    gains[(s * self.subcarriers + m) * self.devices + n] = self.gain(n, m, s);
                }
            }
        }
        GainTensor {
            devices: self.devices,
            subcarriers: self.subcarriers,
            symbols: self.symbols,
            gains,
        }
    }

    /// Binary dump: magic, dimensions, then (re, im) little-endian f64 pairs
    /// in (device, subcarrier, symbol) order.
    pub fn write_binary<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"CFLG")?;
        for dim in [
            self.devices as u64,
            self.subcarriers as u64,
            self.symbols as u64,
            self.coherence_block_len as u64,
        ] {
            w.write_all(&dim.to_le_bytes())?;
        }
        for c in &self.coeffs {
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: std::io::Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"CFLG" {
            return Err(Error::InvalidInput("not a channel grid dump (bad magic)".into()));
        }
        let mut dims = [0u64; 4];
        for d in dims.iter_mut() {
            let mut buf = [0u8; 8];
            r.read_exact(&mut buf)?;
            *d = u64::from_le_bytes(buf);
        }
        let [devices, subcarriers, symbols, coherence] = dims.map(|d| d as usize);
        let count = devices
            .checked_mul(subcarriers)
            .and_then(|x| x.checked_mul(symbols))
            .ok_or_else(|| Error::InvalidInput("channel dump dimensions overflow".into()))?;
        let mut coeffs = Vec::with_capacity(count);
        let mut buf = [0u8; 16];
        for _ in 0..count {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf[0..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..16].try_into().unwrap());
            coeffs.push(Complex64::new(re, im));
        }
        Ok(ChannelGrid {
            devices,
            subcarriers,
            symbols,
            coherence_block_len: coherence,
            coeffs,
        })
    }
}

/// Draws a block-fading grid. Deterministic for a fixed seed: the coefficient
/// of (device, subcarrier, block) is a pure function of the seed and those
/// indices, so grids can be regenerated piecewise and in parallel.
pub fn sample_block_fading(config: &ChannelConfig, seed: u64) -> Result<ChannelGrid> {
    config.validate()?;
    let blocks = config.symbols.div_ceil(config.coherence_block_len);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); config.devices * config.subcarriers * config.symbols];
    for k in 0..config.devices {
        for b in 0..blocks {
            let per_subcarrier: Vec<Complex64> = match config.fading {
                FadingModel::IidPerSubcarrier => (0..config.subcarriers)
                    .map(|m| {
                        let (re, im) = complex_gaussian(derive_seed(seed, &[k as u64, m as u64, b as u64]));
                        Complex64::new(re, im)
                    })
                    .collect(),
                FadingModel::TappedDelayLine { taps } => {
                    tapped_delay_response(seed, k, b, taps, config.subcarriers)
                }
            };
            let s_start = b * config.coherence_block_len;
            let s_end = (s_start + config.coherence_block_len).min(config.symbols);
            for (m, &h) in per_subcarrier.iter().enumerate() {
                let base = (k * config.subcarriers + m) * config.symbols;
                for s in s_start..s_end {
                    coeffs[base + s] = h;
                }
            }
        }
    }
    Ok(ChannelGrid {
        devices: config.devices,
        subcarriers: config.subcarriers,
        symbols: config.symbols,
        coherence_block_len: config.coherence_block_len,
        coeffs,
    })
}

/// Frequency response of a tapped delay line with exponential power delay
/// profile p_j ∝ e^{-j}, normalized so the average subcarrier power is 1.
fn tapped_delay_response(seed: u64, device: usize, block: usize, taps: usize, subcarriers: usize) -> Vec<Complex64> {
    let norm: f64 = (0..taps).map(|j| (-(j as f64)).exp()).sum();
    let tap_coeffs: Vec<Complex64> = (0..taps)
        .map(|j| {
            let power = (-(j as f64)).exp() / norm;
            let (re, im) = complex_gaussian(derive_seed(seed, &[device as u64, block as u64, 0x7d1 + j as u64]));
            Complex64::new(re, im) * power.sqrt()
        })
        .collect();
    (0..subcarriers)
        .map(|m| {
            let mut h = Complex64::new(0.0, 0.0);
            for (j, &a) in tap_coeffs.iter().enumerate() {
                let phase = -std::f64::consts::TAU * (j * m) as f64 / subcarriers as f64;
                h += a * Complex64::new(phase.cos(), phase.sin());
            }
            h
        })
        .collect()
}

/// Returns the largest gain in the list together with its index. Ties go to
/// the lowest index, which keeps allocation deterministic.
pub fn max_gain(gains: &[f64]) -> Result<(f64, usize)> {
    if gains.is_empty() {
        return Err(Error::InvalidInput("max_gain over an empty gain list".into()));
    }
    let mut best = gains[0];
    let mut arg = 0;
    for (i, &g) in gains.iter().enumerate().skip(1) {
        if g > best {
            best = g;
            arg = i;
        }
    }
    Ok((best, arg))
}

/// Distribution of the best-of-`n` Exponential(1) channel gain.
#[derive(Debug, Clone, Copy)]
pub struct MaxGainDistribution {
    n: usize,
}

impl MaxGainDistribution {
    pub fn new(n_devices: usize) -> Result<Self> {
        if n_devices == 0 {
            return Err(Error::InvalidInput("order statistics need at least one device".into()));
        }
        Ok(MaxGainDistribution { n: n_devices })
    }

    pub fn devices(&self) -> usize {
        self.n
    }

    /// `(1 - e^{-x})^n` for x >= 0, zero below.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        (-(-x).exp_m1()).powi(self.n as i32)
    }

    /// `n e^{-x} (1 - e^{-x})^{n-1}` for x >= 0, zero below.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.n as f64 * (-x).exp() * (-(-x).exp_m1()).powi(self.n as i32 - 1)
    }

    /// Threshold q such that a fraction `p_it` of resource blocks has best
    /// gain at least q: `q = -ln(1 - (1 - p_it)^{1/n})`.
    ///
    /// `p_it = 1` gives q = 0 (everything above threshold). `p_it <= 0` is a
    /// domain error: reserving every block for aggregation leaves no finite
    /// threshold.
    pub fn quantile_threshold(&self, p_it: f64) -> Result<f64> {
        if p_it > 1.0 || p_it.is_nan() {
            return Err(Error::InvalidInput(format!("p_it = {p_it} exceeds 1")));
        }
        if p_it <= 0.0 {
            return Err(Error::Domain(
                "p_it = 0: no blocks left for transfer, threshold is unbounded".into(),
            ));
        }
        if p_it == 1.0 {
            return Ok(0.0);
        }
        // (1 - p)^{1/n} via exp(ln1p(-p)/n) keeps full precision near both ends.
        let root = ((-p_it).ln_1p() / self.n as f64).exp();
        Ok(-(-root).ln_1p())
    }
}

/// Gains of every device on every subcarrier of one OFDM symbol,
/// subcarrier-major: the slice for subcarrier m is `gains[m*devices..]`.
#[derive(Debug, Clone)]
pub struct SymbolGains {
    pub subcarriers: usize,
    pub devices: usize,
    gains: Vec<f64>,
}

impl SymbolGains {
    pub fn new(subcarriers: usize, devices: usize, gains: Vec<f64>) -> Result<Self> {
        if gains.len() != subcarriers * devices {
            return Err(Error::DimensionMismatch(format!(
                "symbol gains: expected {} values, got {}",
                subcarriers * devices,
                gains.len()
            )));
        }
        Ok(SymbolGains {
            subcarriers,
            devices,
            gains,
        })
    }

    /// Per-device gains on one subcarrier.
    #[inline]
    pub fn at(&self, subcarrier: usize) -> &[f64] {
        &self.gains[subcarrier * self.devices..(subcarrier + 1) * self.devices]
    }
}

/// Full gain tensor over (device, subcarrier, symbol), symbol-major so it can
/// be replayed as a per-symbol stream.
#[derive(Debug, Clone)]
pub struct GainTensor {
    pub devices: usize,
    pub subcarriers: usize,
    pub symbols: usize,
    /// Index layout: `(symbol * subcarriers + subcarrier) * devices + device`.
    gains: Vec<f64>,
}

impl GainTensor {
    /// Samples gains under block fading without materializing coefficients.
    pub fn sample(
        devices: usize,
        subcarriers: usize,
        symbols: usize,
        coherence_block_len: usize,
        seed: u64,
    ) -> Result<Self> {
        let config = ChannelConfig::new(devices, subcarriers, symbols, coherence_block_len);
        config.validate()?;
        let mut gains = vec![0.0; devices * subcarriers * symbols];
        for s in 0..symbols {
            let block = (s / coherence_block_len) as u64;
            for m in 0..subcarriers {
                for n in 0..devices {
                    // Exponential(1) gain keyed by (device, subcarrier, block);
                    // equals |CN(0,1)|^2 in distribution.
                    let key = derive_seed(seed, &[n as u64, m as u64, block]);
                    let u = ((mix64(key ^ 0xd1b5_4a32_d192_ed03) >> 11) + 1) as f64
                        * (1.0 / 9_007_199_254_740_992.0);
                    gains[(s * subcarriers + m) * devices + n] = -u.ln();
                }
            }
        }
        Ok(GainTensor {
            devices,
            subcarriers,
            symbols,
            gains,
        })
    }

    #[inline]
    pub fn at(&self, device: usize, subcarrier: usize, symbol: usize) -> f64 {
        self.gains[(symbol * self.subcarriers + subcarrier) * self.devices + device]
    }

    /// Best gain and its device on one resource block.
    pub fn best(&self, subcarrier: usize, symbol: usize) -> (f64, usize) {
        let base = (symbol * self.subcarriers + subcarrier) * self.devices;
        max_gain(&self.gains[base..base + self.devices]).expect("tensor has at least one device")
    }

    /// Replays the tensor one OFDM symbol at a time.
    pub fn symbols_iter(&self) -> impl Iterator<Item = SymbolGains> + '_ {
        (0..self.symbols).map(move |s| {
            let base = s * self.subcarriers * self.devices;
            SymbolGains {
                subcarriers: self.subcarriers,
                devices: self.devices,
                gains: self.gains[base..base + self.subcarriers * self.devices].to_vec(),
            }
        })
    }
}
