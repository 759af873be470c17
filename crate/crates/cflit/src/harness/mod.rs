//! Experiment orchestration: configuration, the end-to-end pipeline, and the
//! experiment registry.

mod config;
mod experiments;
mod simulate;
mod transcript;

pub use config::{
    AllocationConfig, ExperimentConfig, LearningConfig, RunConfig, Scheme, SystemConfig,
};
pub use experiments::{reproduce_experiment, table1_summary, trial_seed, ExperimentName, Table1Summary, TABLE1_SCHEMES};
pub use simulate::{round_sgd_seed, run_cflit, run_cflit_planned, run_fl_rounds, run_fl_rounds_with_stop, FlRunOutcome, TrialPlan};
pub use transcript::{RoundRecord, SimulationTranscript, TranscriptSet};
