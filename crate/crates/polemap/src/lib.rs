//! File formats, configuration and the `polemap` command-line tool on top
//! of [`polemap_core`].

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod mapfile;
pub mod report;

pub use config::Config;
pub use dataset::Dataset;
pub use error::{ConfigError, Error, FormatError};
