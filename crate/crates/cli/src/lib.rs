//! Orchestration for the `featint` command: configuration, the extraction
//! pipeline, the generated benchmark product lines and report assembly.

pub mod bench;
pub mod commands;
pub mod config;
pub mod pipeline;
