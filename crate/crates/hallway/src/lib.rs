//! File formats, plots, the telemetry server and the command line for the
//! hallway workbench. The numerical work lives in `hallway_core`.

pub mod checkpoint;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod plot;
pub mod pnm;
pub mod server;

pub use error::{Error, Result};
