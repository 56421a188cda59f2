//! Files, configuration and commands behind the `frechet-spc` binary.

mod commands;
mod config;
mod ingest;
mod who;

pub use commands::{
    cmd_phase1, cmd_phase2, cmd_simulate, cmd_who_check, Databank, LimitsFile, Phase1Summary, Phase2Summary,
    SimulateSpec, StreamKind, Truth,
};
pub use config::{Overrides, RunConfig};
pub use ingest::{
    ingest_csv, parse_csv, profile_curve, write_csv, DailyProfileRecord, Ingested, Pollutant, HOURS, MAX_MISSING,
};
pub use who::{rule_for, who_flag, Statistic, ThresholdRule, WhoVerdict};
