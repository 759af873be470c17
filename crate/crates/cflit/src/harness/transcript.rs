//! Serialized run records: per-round gap and error series per trial, plus a
//! one-line summary per trial. CSV output carries a single header line; the
//! JSON form mirrors the same structs. Wall-clock timings stay out of these
//! records so reruns of the same seed are byte-identical; they live in the
//! experiment manifest instead.

use serde::Serialize;

use crate::error::{Error, Result};

/// State of the system at the start of round `round`.
#[derive(Debug, Clone, Serialize)]
pub struct RoundRecord {
    pub round: u64,
    /// Optimality gap of the current iterate.
    pub gap_current: f64,
    /// Optimality gap of the weighted-average iterate.
    pub gap_averaged: f64,
    /// Closed-form aggregation error of the round executed from this state.
    pub mse_closed_form: f64,
    /// Realized error energy of that round's noise draw.
    pub mse_realized: f64,
}

/// Complete record of one simulated trial.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationTranscript {
    pub seed: u64,
    pub scheme: String,
    pub tau: u32,
    pub rounds_planned: u64,
    pub epsilon: f64,
    pub p_it: f64,
    pub q: f64,
    pub channel_term: f64,
    pub lipschitz: f64,
    pub hetero: f64,
    pub f_star: f64,
    pub rate_bits_per_rb: f64,
    pub rate_kbps: f64,
    /// Smallest round budget T whose averaged iterate met the gap target,
    /// if any did within the planned budget.
    pub rounds_to_epsilon: Option<u64>,
    pub final_gap_current: f64,
    pub final_gap_averaged: f64,
    pub rounds: Vec<RoundRecord>,
}

impl SimulationTranscript {
    /// Every numeric field must be finite and the round series complete.
    pub fn validate(&self) -> Result<()> {
        if self.rounds.len() as u64 != self.rounds_planned {
            return Err(Error::Numeric(format!(
                "transcript has {} round records for {} planned rounds",
                self.rounds.len(),
                self.rounds_planned
            )));
        }
        let scalars = [
            self.p_it,
            self.q,
            self.channel_term,
            self.lipschitz,
            self.hetero,
            self.f_star,
            self.rate_bits_per_rb,
            self.rate_kbps,
            self.final_gap_current,
            self.final_gap_averaged,
        ];
        if scalars.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite scalar in transcript".into()));
        }
        for r in &self.rounds {
            let fields = [r.gap_current, r.gap_averaged, r.mse_closed_form, r.mse_realized];
            if fields.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("non-finite value in round {}", r.round)));
            }
        }
        Ok(())
    }
}

/// All trials of one simulation invocation.
#[derive(Debug, Clone, Serialize)]
pub struct TranscriptSet {
    pub trials: Vec<SimulationTranscript>,
}

impl TranscriptSet {
    /// Per-round CSV across all trials.
    pub fn write_rounds_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "trial,round,gap_current,gap_averaged,mse_closed_form,mse_realized")?;
        for (trial, t) in self.trials.iter().enumerate() {
            for r in &t.rounds {
                writeln!(
                    w,
                    "{trial},{},{},{},{},{}",
                    r.round, r.gap_current, r.gap_averaged, r.mse_closed_form, r.mse_realized
                )?;
            }
        }
        Ok(())
    }

    /// One summary line per trial.
    pub fn write_summary_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "trial,seed,scheme,tau,rounds_planned,p_it,q,rate_bits_per_rb,rate_kbps,rounds_to_epsilon,final_gap_current,final_gap_averaged"
        )?;
        for (trial, t) in self.trials.iter().enumerate() {
            let reached = t.rounds_to_epsilon.map(|r| r.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{trial},{},{},{},{},{},{},{},{},{reached},{},{}",
                t.seed,
                t.scheme,
                t.tau,
                t.rounds_planned,
                t.p_it,
                t.q,
                t.rate_bits_per_rb,
                t.rate_kbps,
                t.final_gap_current,
                t.final_gap_averaged
            )?;
        }
        Ok(())
    }

    pub fn write_json<W: std::io::Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self).map_err(|e| Error::Numeric(format!("transcript serialization: {e}")))
    }

    pub fn mean_rate_bits(&self) -> f64 {
        if self.trials.is_empty() {
            return 0.0;
        }
        self.trials.iter().map(|t| t.rate_bits_per_rb).sum::<f64>() / self.trials.len() as f64
    }

    pub fn mean_final_gap_averaged(&self) -> f64 {
        if self.trials.is_empty() {
            return f64::NAN;
        }
        self.trials.iter().map(|t| t.final_gap_averaged).sum::<f64>() / self.trials.len() as f64
    }
}
