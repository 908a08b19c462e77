//! Library surface of the fleetmatch command-line runner: configuration,
//! request ingestion, synthetic demand generation, and artifact output.

pub mod config;
pub mod demand;
pub mod ingest;
pub mod output;
pub mod runner;
