//! Behavioral-cloning workbench core: a deterministic corridor simulator,
//! a PID wall-following expert, dataset synchronization, the image
//! augmentation pipeline, a small from-scratch network library with the
//! architectures built on it, and closed-loop evaluation.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, the CLI and
//! the telemetry server live in the `hallway` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod evalloop;
pub mod expert;
pub mod image;
pub mod math;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod recorder;
pub mod simworld;
