//! Secrecy outage capacity and power control for block-fading wiretap channels,
//! with a key-buffer simulator and buffer sizing.

pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod full_csi;
pub mod main_csi;
pub mod numerics;
pub mod policy;
pub mod queue;
pub mod rate;
pub mod sizing;
pub mod solution;
