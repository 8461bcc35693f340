//! Configuration, snapshots, plot data and run manifests.

pub mod config;
pub mod manifest;
pub mod plot;
pub mod snapshot;

pub use config::{load_config, parse_config, RunConfig};
pub use manifest::{OutputDir, RunManifest};
