//! File formats, synthetic instances, report-log ingestion and the
//! `lcpfilter` command line, on top of `lcpfilter-core`.

pub mod cli;
pub mod dshield;
pub mod formats;
pub mod generator;

pub use cli::run;
