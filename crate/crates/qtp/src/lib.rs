//! Desk-scale simulation of language-model-assisted text transmission
//! over noisy superdense coding.
//!
//! The pipeline runs five stages end to end: ASCII pre-encoding, qubit or
//! qudit superdense coding through a Kraus noise channel (or a classical
//! bit-flip baseline), decoding, dictionary word repair, and a jointly
//! trained transformer that corrects sentences and scores its own
//! corrections. Error rates are reported before and after repair.
//!
//! Most capabilities have a runnable example under `examples/`; the
//! `qtp` binary drives the same pipeline from run manifests.

pub mod bits;
pub mod checkpoint;
pub mod codec;
pub mod error;
pub mod manifest;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod quantum;
pub mod report;
pub mod rng;
pub mod text;
pub mod trainer;
pub mod transmit;
pub mod word_repair;

pub use bits::BitString;
pub use error::QtpError;
