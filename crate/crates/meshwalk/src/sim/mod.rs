//! Discrete-event simulation of clients walking a world and streaming
//! progressive meshes over a shared wireless medium.

pub mod config;
pub mod engine;
pub mod experiment;
pub mod metrics;
pub mod seeds;

pub use config::{ConfigError, DeviceMix, DownlinkMode, ServeMode, SimConfig};
pub use engine::{run_sim, run_sim_traced, SimOutput};
pub use experiment::{preset, run_cells, write_experiment, ExpCell};
pub use metrics::{Metric, MetricsCollector, MetricsReport};
