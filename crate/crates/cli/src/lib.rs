//! Experiment pipeline behind the `delaycast` binary: declarative configs,
//! checksummed run manifests, and the simulate / embed / train / rollout /
//! evaluate / reproduce stages.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod manifest;
