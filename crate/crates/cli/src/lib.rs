//! Command-line front end for `cbpois`: config-driven simulations, tuning
//! sweeps, image denoising, density estimation and self-check suites.
//!
//! Every artifact is a deterministic function of the inputs and seeds.
//! Error values in CSV output are per observation (divided by `n`).

pub mod commands;
pub mod config;
pub mod design;
pub mod io;
pub mod simulate;
pub mod sweep;
pub mod verify;

pub use commands::{run, Cli};
