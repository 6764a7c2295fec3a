pub mod boost;
pub mod cli;
pub mod combine;
pub mod fingerprint;
pub mod graph;
pub mod hypothesis;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod verify;
