//! Photon-pair source simulator and time-tag analysis for microring
//! resonator sources.
//!
//! The crate is organised in layers: [`device`] describes the ring and the
//! DWDM grid, [`emitter`] turns a configuration into detector time tags,
//! [`engine`] correlates tags into histograms, and [`fit`] / [`estimators`]
//! turn histograms and sweeps into source figures. [`io`] handles configs
//! and tag files, [`experiments`] strings the pieces into full runs.

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod device;
pub mod emitter;
pub mod engine;
pub mod error;
pub mod estimators;
mod exec;
pub mod experiments;
pub mod fit;
pub mod io;
pub mod stream;

pub use error::{Error, Result};
pub use exec::Execution;
pub use stream::{Tag, TagStream};
