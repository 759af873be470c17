//! Experiment configuration: a flat key = value file with one section per
//! subsystem, serialized as TOML. Defaults reproduce the reference operating
//! point (20 learning devices, 5 transfer devices, 512 subcarriers, 2000
//! symbols, unit powers, 0.1 noise, 6 dB rate gap, 16 us symbols).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::{LrSchedule, MODEL_DIM};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Learning devices K.
    pub fl_devices: usize,
    /// Transfer devices N.
    pub it_devices: usize,
    /// OFDM subcarriers M.
    pub subcarriers: usize,
    /// Horizon length S in OFDM symbols.
    pub symbols: usize,
    /// Per-subcarrier power cap of learning devices, P1.
    pub fl_power: f64,
    /// Transmit power of transfer devices, P2.
    pub it_power: f64,
    /// Receiver noise variance sigma^2.
    pub noise_var: f64,
    /// Rate gap phi in dB.
    pub rate_gap_db: f64,
    /// OFDM symbol duration in microseconds.
    pub symbol_duration_us: f64,
    /// Symbols per fading block.
    pub coherence_block_len: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            fl_devices: 20,
            it_devices: 5,
            subcarriers: 512,
            symbols: 2000,
            fl_power: 1.0,
            it_power: 1.0,
            noise_var: 0.1,
            rate_gap_db: 6.0,
            symbol_duration_us: 16.0,
            coherence_block_len: 1,
        }
    }
}

impl SystemConfig {
    /// Linear rate gap phi.
    pub fn phi(&self) -> f64 {
        10f64.powf(self.rate_gap_db / 10.0)
    }

    /// Effective SNR scale theta = P2 / (phi sigma^2).
    pub fn theta(&self) -> f64 {
        self.it_power / (self.phi() * self.noise_var)
    }

    /// Converts bits per resource block into Kbps per subcarrier given the
    /// symbol duration.
    pub fn kbps(&self, bits_per_rb: f64) -> f64 {
        bits_per_rb * 1000.0 / self.symbol_duration_us
    }
}

/// Which learning-rate schedule the simulator runs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// `base_lr * gamma / (gamma + t)`.
    BaseDecay,
    /// `8 / (mu tau (gamma + t))`, the schedule the bound is proved for.
    BoundDriven,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    /// Model heterogeneity of the synthetic task.
    pub alpha: f64,
    /// Data heterogeneity of the synthetic task.
    pub beta: f64,
    /// Mini-batch size B.
    pub batch: usize,
    /// Gradient clipping threshold G.
    pub clip: f64,
    /// Learning-rate offset gamma.
    pub gamma: f64,
    pub schedule: ScheduleKind,
    /// Base rate of the decaying schedule.
    pub base_lr: f64,
    /// Regularization weight (also the strong-convexity constant).
    pub reg: f64,
    /// Target optimality gap epsilon.
    pub epsilon: f64,
    /// Total samples across all devices.
    pub total_samples: usize,
    /// Exponent of the device-size power law.
    pub power_law_exponent: f64,
    /// Resource blocks charged per aggregation round; 0 means the full model
    /// dimension. Smaller values emulate compressed uploads so desk-scale
    /// horizons stay feasible; the aggregation physics is unchanged.
    pub comm_dim: usize,
    /// Fixed value for E[max_k rho_k^2/|h_k|^2]; 0 means estimate it by
    /// Monte Carlo from the dataset weights.
    pub channel_term: f64,
    /// Samples for the channel-term estimator.
    pub term_samples: usize,
    /// Gain floor for the channel-term estimator.
    pub term_gain_floor: f64,
    /// Gradient-norm tolerance of the optimum solver.
    pub optimum_tol: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            alpha: 1.0,
            beta: 1.0,
            batch: 32,
            clip: 1.0,
            gamma: 1000.0,
            schedule: ScheduleKind::BaseDecay,
            base_lr: 0.05,
            reg: 0.5,
            epsilon: 0.34,
            total_samples: 4000,
            power_law_exponent: 1.5,
            comm_dim: 0,
            channel_term: 0.0,
            term_samples: 100_000,
            term_gain_floor: 1e-3,
            optimum_tol: 1e-8,
        }
    }
}

impl LearningConfig {
    /// Resource blocks consumed by one aggregation round.
    pub fn round_rb_cost(&self) -> usize {
        if self.comm_dim == 0 {
            MODEL_DIM
        } else {
            self.comm_dim
        }
    }

    /// Builds the schedule for a given local-step count.
    pub fn lr_schedule(&self, tau: u32) -> LrSchedule {
        match self.schedule {
            ScheduleKind::BaseDecay => LrSchedule::BaseDecay {
                base: self.base_lr,
                gamma: self.gamma,
            },
            ScheduleKind::BoundDriven => LrSchedule::BoundDriven {
                mu: self.reg,
                tau,
                gamma: self.gamma,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.comm_dim > MODEL_DIM {
            return Err(Error::InvalidConfig(format!(
                "comm_dim = {} exceeds the model dimension {MODEL_DIM}",
                self.comm_dim
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.batch == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Subcarrier allocation scheme under comparison.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Threshold-based online allocation with the optimized local-step count.
    Online,
    /// Non-causal offline optimum.
    Offline,
    /// Random allocation at the same transfer fraction.
    Rsca,
    /// Online allocation with a fixed local-step count from `fixed_tau`.
    FixedTau,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Scheme::Online => "online",
            Scheme::Offline => "offline",
            Scheme::Rsca => "rsca",
            Scheme::FixedTau => "fixed-tau",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct AllocationConfig {
    pub scheme: Scheme,
    /// Local-step count for the fixed-tau scheme.
    pub fixed_tau: Option<u32>,
}

impl Default for AllocationConfig {
    fn default() -> Self {
        AllocationConfig {
            scheme: Scheme::Online,
            fixed_tau: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Monte Carlo trials; each owns the stream derived from (seed, trial).
    pub trials: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { trials: 20, seed: 42 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub learning: LearningConfig,
    pub allocation: AllocationConfig,
    pub run: RunConfig,
}

impl ExperimentConfig {
    /// A configuration that exercises every mechanism in minutes on one core:
    /// 10 learning devices, a 64-subcarrier grid, and compressed 61-block
    /// rounds.
    pub fn desk_scale() -> Self {
        let mut cfg = ExperimentConfig::default();
        cfg.system.fl_devices = 10;
        cfg.system.subcarriers = 64;
        cfg.system.symbols = 900;
        cfg.learning.total_samples = 2000;
        cfg.learning.comm_dim = 61;
        cfg.learning.epsilon = 0.6;
        cfg
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.learning.validate()?;
        if self.system.fl_devices == 0 || self.system.it_devices == 0 {
            return Err(Error::InvalidConfig("device counts must be positive".into()));
        }
        if self.allocation.scheme == Scheme::FixedTau && self.allocation.fixed_tau.is_none() {
            return Err(Error::InvalidConfig("scheme = fixed-tau requires fixed_tau".into()));
        }
        if self.run.trials == 0 {
            return Err(Error::InvalidConfig("at least one trial required".into()));
        }
        Ok(())
    }
}
