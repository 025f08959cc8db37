//! Exact simulation of superdense coding over Kraus-operator noise
//! channels, plus the classical bit-flip baseline.

pub mod channel;
pub mod linalg;
pub mod sdc;

pub use channel::{Channel, ChannelConfig, ChannelKind};
pub use linalg::{CMatrix, StateVector};
pub use sdc::{
    bell_state, classical_transmit, heisenberg_weyl, sample_outcome, sdc_outcome_distribution,
    OutcomeDistribution, OutcomeTable, SymbolPair,
};
