//! Experiment harness for online label-shift adaptation: synthetic benchmark
//! setup, seeded runs of every method, trace and summary files.

pub mod config;
pub mod experiment;
pub mod regress;
pub mod summary;
pub mod synthetic;
pub mod trace;
