//! Configuration, initial conditions and file formats.

pub mod config;
pub mod initial;
pub mod snapshot;
pub mod timeseries;

pub use config::{load_config, parse_config, InitialSpec, Preset, RunConfig};
pub use initial::build_initial;
pub use snapshot::{read_snapshot, write_snapshot};
pub use timeseries::{append_timeseries, read_timeseries, write_timeseries, HEADER};
