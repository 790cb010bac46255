//! Amplifying projections of sampled state-vector trajectories onto
//! quasi-states, with Born-rule statistics, a measurement-as-communication
//! channel and commuting-diagram consistency checks built on top.

pub mod born;
pub mod channel;
pub mod config;
pub mod consistency;
pub mod projection;
pub mod trajectory;

pub use config::Thresholds;
