//! Data ingestion, synthetic problems and experiment sweeps for `mngp`.

pub mod ingest;
pub mod preprocess;
pub mod synthetic;
pub mod experiment;
pub mod plot;
