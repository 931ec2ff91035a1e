//! Operational layer of the `nestag` nested entity tagger: corpus file
//! formats, checkpoints, run configuration, report writers and the
//! command-line interface. All modeling and training logic lives in
//! `nestag-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod io;
pub mod reports;

pub use error::AppError;
