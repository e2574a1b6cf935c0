//! Command-line front end for the medley experiment pipeline.
//!
//! The heavy lifting lives in `medley-core`; this crate resolves
//! configuration, sequences the pipeline stages, and renders the CSV, SVG,
//! and MANIFEST artifacts. It is a library so integration tests can drive
//! the exact code paths the `medley` binary runs.

pub mod config;
pub mod pipeline;
pub mod plot;
pub mod report;
