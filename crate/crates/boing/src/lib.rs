//! Benchmark objectives, experiment runner and reference oracles for `boing-core`.

pub mod objectives;
pub mod oracle;
pub mod runner;
pub mod toy;
