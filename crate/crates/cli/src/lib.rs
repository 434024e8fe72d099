//! Command-line front end for the spectral rare-event toolkit: JSON-described
//! experiments, built-in presets, and per-run artifact directories with
//! replayable manifests.

pub mod config;
pub mod presets;
pub mod runner;
